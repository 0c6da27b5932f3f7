"""Inference-only building blocks for the lightweight encoder-decoder net.

Tensors are float32 numpy arrays in (n, c, h, w) order. All convolutions are
bias-free with symmetric zero padding of kernel//2; normalization is assumed
folded into the weights. The net spec is a flat layer list: inverted
bottlenecks (pointwise expand -> optional channel shuffle -> depthwise ->
pointwise project, with a residual add at stride 1 when channels match),
depthwise-separable convs, plain convs, bilinear x2 upsampling, and
skip-merge layers that concatenate an earlier layer's output channelwise.

This module verifies shapes and parameter budgets and runs forward passes
on small random-weight instances; there is no training loop here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ShapeError",
    "ConvSpec",
    "DepthwiseSeparableSpec",
    "BottleneckSpec",
    "ShuffleSpec",
    "UpsampleSpec",
    "SkipMergeSpec",
    "NetSpec",
    "check_tensor4",
    "relu",
    "conv2d",
    "depthwise_conv2d",
    "pointwise_conv2d",
    "channel_shuffle",
    "depthwise_separable_conv",
    "inverted_bottleneck",
    "bilinear_upsample",
    "propagate_shapes",
    "count_params",
    "init_weights",
    "save_weights",
    "load_weights",
    "connectnet_forward",
    "default_connectnet",
    "softmax_channel",
]


class ShapeError(ValueError):
    """Raised when tensor shapes do not fit a layer or net spec."""


def check_tensor4(x: np.ndarray, name: str = "tensor") -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 4 or min(x.shape) < 1:
        raise ShapeError(f"{name} must be 4D (n, c, h, w) with positive dims, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ShapeError(f"{name} contains non-finite values")
    return x.astype(np.float32, copy=False)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _conv_out_hw(h: int, w: int, kernel: int, stride: int) -> tuple[int, int]:
    pad = kernel // 2
    return (h + 2 * pad - kernel) // stride + 1, (w + 2 * pad - kernel) // stride + 1


def conv2d(x: np.ndarray, weight: np.ndarray, stride: int = 1) -> np.ndarray:
    """Standard 2D convolution; weight is (c_out, c_in, k, k), no bias."""
    x = check_tensor4(x, "input")
    cout, cin, kh, kw = weight.shape
    n, c, h, w = x.shape
    if c != cin:
        raise ShapeError(f"conv expects {cin} input channels, got {c}")
    ph, pw = kh // 2, kw // 2
    oh, ow = _conv_out_hw(h, w, kh, stride)
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    out = np.zeros((n, cout, oh, ow), dtype=np.float32)
    for i in range(kh):
        for j in range(kw):
            tap = xp[:, :, i : i + (oh - 1) * stride + 1 : stride,
                     j : j + (ow - 1) * stride + 1 : stride]
            out += np.einsum("oc,nchw->nohw", weight[:, :, i, j], tap, optimize=True)
    return out


def depthwise_conv2d(x: np.ndarray, weight: np.ndarray, stride: int = 1) -> np.ndarray:
    """Per-channel spatial convolution; weight is (c, k, k), no bias."""
    x = check_tensor4(x, "input")
    c_w, kh, kw = weight.shape
    n, c, h, w = x.shape
    if c != c_w:
        raise ShapeError(f"depthwise conv expects {c_w} channels, got {c}")
    ph, pw = kh // 2, kw // 2
    oh, ow = _conv_out_hw(h, w, kh, stride)
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    out = np.zeros((n, c, oh, ow), dtype=np.float32)
    for i in range(kh):
        for j in range(kw):
            tap = xp[:, :, i : i + (oh - 1) * stride + 1 : stride,
                     j : j + (ow - 1) * stride + 1 : stride]
            out += tap * weight[None, :, i, j, None, None]
    return out


def pointwise_conv2d(x: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """1x1 channel-mixing convolution; weight is (c_out, c_in)."""
    x = check_tensor4(x, "input")
    cout, cin = weight.shape
    if x.shape[1] != cin:
        raise ShapeError(f"pointwise conv expects {cin} input channels, got {x.shape[1]}")
    return np.einsum("oc,nchw->nohw", weight, x, optimize=True).astype(np.float32)


def channel_shuffle(x: np.ndarray, groups: int) -> np.ndarray:
    """Group-transpose channel permutation; spatial data untouched."""
    x = check_tensor4(x, "input")
    n, c, h, w = x.shape
    if groups < 1 or c % groups != 0:
        raise ShapeError(f"groups {groups} must divide channel count {c}")
    return (
        x.reshape(n, groups, c // groups, h, w)
        .transpose(0, 2, 1, 3, 4)
        .reshape(n, c, h, w)
    )


def depthwise_separable_conv(
    x: np.ndarray, dw_weight: np.ndarray, pw_weight: np.ndarray, stride: int = 1
) -> np.ndarray:
    """Depthwise k x k convolution followed by a 1x1 pointwise convolution."""
    if dw_weight.shape[0] != pw_weight.shape[1]:
        raise ShapeError(
            f"depthwise channels {dw_weight.shape[0]} do not feed pointwise input "
            f"channels {pw_weight.shape[1]}"
        )
    return pointwise_conv2d(depthwise_conv2d(x, dw_weight, stride), pw_weight)


def bilinear_upsample(x: np.ndarray, factor: int = 2) -> np.ndarray:
    """Bilinear interpolation to (h * factor, w * factor), half-pixel centers."""
    x = check_tensor4(x, "input")
    if factor < 1:
        raise ShapeError(f"upsample factor must be >= 1, got {factor}")
    if factor == 1:
        return x
    n, c, h, w = x.shape
    oh, ow = h * factor, w * factor

    def axis_coords(size_out, size_in):
        src = (np.arange(size_out, dtype=np.float64) + 0.5) / factor - 0.5
        src = np.clip(src, 0.0, size_in - 1.0)
        lo = np.floor(src).astype(np.int64)
        hi = np.minimum(lo + 1, size_in - 1)
        frac = (src - lo).astype(np.float32)
        return lo, hi, frac

    y0, y1, fy = axis_coords(oh, h)
    x0, x1, fx = axis_coords(ow, w)
    top = x[:, :, y0][:, :, :, x0] * (1 - fx) + x[:, :, y0][:, :, :, x1] * fx
    bot = x[:, :, y1][:, :, :, x0] * (1 - fx) + x[:, :, y1][:, :, :, x1] * fx
    return (top * (1 - fy[None, None, :, None]) + bot * fy[None, None, :, None]).astype(
        np.float32
    )


# ---------------------------------------------------------------------------
# Layer and net specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvSpec:
    in_ch: int
    out_ch: int
    kernel: int = 3
    stride: int = 1
    activation: str = "relu"
    kind: str = "conv"


@dataclass(frozen=True)
class DepthwiseSeparableSpec:
    in_ch: int
    out_ch: int
    kernel: int = 3
    stride: int = 1
    activation: str = "relu"
    kind: str = "ds_conv"


@dataclass(frozen=True)
class BottleneckSpec:
    in_ch: int
    out_ch: int
    expansion: int = 2
    stride: int = 1
    shuffle_groups: int = 1
    kernel: int = 3
    kind: str = "bottleneck"

    @property
    def hidden_ch(self) -> int:
        return self.in_ch * self.expansion

    @property
    def has_residual(self) -> bool:
        return self.stride == 1 and self.in_ch == self.out_ch


@dataclass(frozen=True)
class ShuffleSpec:
    groups: int
    kind: str = "shuffle"


@dataclass(frozen=True)
class UpsampleSpec:
    factor: int = 2
    kind: str = "upsample"


@dataclass(frozen=True)
class SkipMergeSpec:
    source: int  # index of the earlier layer whose output is concatenated
    kind: str = "skip_merge"


_LAYER_KINDS = {
    "conv": ConvSpec,
    "ds_conv": DepthwiseSeparableSpec,
    "bottleneck": BottleneckSpec,
    "shuffle": ShuffleSpec,
    "upsample": UpsampleSpec,
    "skip_merge": SkipMergeSpec,
}


@dataclass
class NetSpec:
    in_channels: int
    layers: list = field(default_factory=list)

    def to_json(self) -> dict:
        out = []
        for layer in self.layers:
            d = {k: v for k, v in layer.__dict__.items() if k != "kind"}
            d["kind"] = layer.kind
            out.append(d)
        return {"in_channels": self.in_channels, "layers": out}

    @classmethod
    def from_json(cls, doc: dict) -> "NetSpec":
        try:
            layers = []
            for i, entry in enumerate(doc["layers"]):
                entry = dict(entry)
                kind = entry.pop("kind")
                if kind not in _LAYER_KINDS:
                    raise ValueError(f"layer {i}: unknown kind {kind!r}")
                layers.append(_LAYER_KINDS[kind](**entry))
            return cls(in_channels=int(doc["in_channels"]), layers=layers)
        except (KeyError, TypeError) as e:
            raise ValueError(f"malformed net spec: {e}") from e

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "NetSpec":
        return cls.from_json(json.loads(Path(path).read_text()))


def propagate_shapes(
    net: NetSpec, input_shape: tuple[int, int, int]
) -> list[tuple[int, int, int]]:
    """Statically derive every layer's output (c, h, w); raises ShapeError naming
    the first offending layer."""
    c, h, w = input_shape
    if c != net.in_channels:
        raise ShapeError(f"input has {c} channels, net expects {net.in_channels}")
    shapes = []
    for i, layer in enumerate(net.layers):
        kind = layer.kind
        if kind in ("conv", "ds_conv"):
            if c != layer.in_ch:
                raise ShapeError(f"layer {i} ({kind}): expects {layer.in_ch} channels, got {c}")
            h, w = _conv_out_hw(h, w, layer.kernel, layer.stride)
            c = layer.out_ch
        elif kind == "bottleneck":
            if c != layer.in_ch:
                raise ShapeError(f"layer {i} (bottleneck): expects {layer.in_ch} channels, got {c}")
            if layer.stride not in (1, 2):
                raise ShapeError(f"layer {i} (bottleneck): stride must be 1 or 2")
            if layer.shuffle_groups < 1 or layer.hidden_ch % layer.shuffle_groups != 0:
                raise ShapeError(
                    f"layer {i} (bottleneck): shuffle groups {layer.shuffle_groups} "
                    f"must divide hidden channels {layer.hidden_ch}"
                )
            h, w = _conv_out_hw(h, w, layer.kernel, layer.stride)
            c = layer.out_ch
        elif kind == "shuffle":
            if layer.groups < 1 or c % layer.groups != 0:
                raise ShapeError(f"layer {i} (shuffle): groups {layer.groups} must divide {c}")
        elif kind == "upsample":
            h, w = h * layer.factor, w * layer.factor
        elif kind == "skip_merge":
            if not 0 <= layer.source < i:
                raise ShapeError(f"layer {i} (skip_merge): source {layer.source} out of range")
            sc, sh, sw = shapes[layer.source]
            if (sh, sw) != (h, w):
                raise ShapeError(
                    f"layer {i} (skip_merge): source resolution {sh}x{sw} "
                    f"does not match {h}x{w}"
                )
            c = c + sc
        else:
            raise ShapeError(f"layer {i}: unknown kind {kind!r}")
        if h < 1 or w < 1:
            raise ShapeError(f"layer {i} ({kind}): spatial size collapsed to {h}x{w}")
        shapes.append((c, h, w))
    return shapes


def _layer_param_shapes(layer) -> dict[str, tuple[int, ...]]:
    kind = layer.kind
    if kind == "conv":
        return {"weight": (layer.out_ch, layer.in_ch, layer.kernel, layer.kernel)}
    if kind == "ds_conv":
        return {
            "dw": (layer.in_ch, layer.kernel, layer.kernel),
            "pw": (layer.out_ch, layer.in_ch),
        }
    if kind == "bottleneck":
        hid = layer.hidden_ch
        return {
            "expand": (hid, layer.in_ch),
            "dw": (hid, layer.kernel, layer.kernel),
            "project": (layer.out_ch, hid),
        }
    return {}


def count_params(net: NetSpec) -> int:
    """Closed-form parameter count; equals the flattened size of init_weights."""
    total = 0
    for layer in net.layers:
        for shape in _layer_param_shapes(layer).values():
            total += int(np.prod(shape))
    return total


def init_weights(net: NetSpec, seed: int = 0) -> dict[str, np.ndarray]:
    """Seeded random weights, keyed "layer<i>.<name>", fan-in scaled."""
    rng = np.random.default_rng(seed)
    weights = {}
    for i, layer in enumerate(net.layers):
        for name, shape in _layer_param_shapes(layer).items():
            fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else int(shape[-1])
            std = 1.0 / np.sqrt(max(fan_in, 1))
            weights[f"layer{i}.{name}"] = rng.normal(0.0, std, size=shape).astype(np.float32)
    return weights


def save_weights(weights: dict[str, np.ndarray], path: str | Path) -> None:
    """Write weights as one flat little-endian float32 blob plus a JSON sidecar
    mapping each entry to its offset/length/shape."""
    path = Path(path)
    index = []
    offset = 0
    with open(path, "wb") as f:
        for name in sorted(weights):
            arr = np.ascontiguousarray(weights[name], dtype="<f4")
            f.write(arr.tobytes())
            index.append(
                {"name": name, "offset": offset, "length": arr.size, "shape": list(arr.shape)}
            )
            offset += arr.size
    Path(str(path) + ".json").write_text(json.dumps({"entries": index}, indent=2) + "\n")


def load_weights(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    sidecar = json.loads(Path(str(path) + ".json").read_text())
    blob = np.fromfile(path, dtype="<f4")
    weights = {}
    for entry in sidecar["entries"]:
        lo = entry["offset"]
        hi = lo + entry["length"]
        if hi > blob.size:
            raise ValueError(f"weight file truncated at entry {entry['name']!r}")
        weights[entry["name"]] = blob[lo:hi].reshape(entry["shape"]).astype(np.float32)
    return weights


def _apply_activation(x: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return relu(x)
    if activation == "none":
        return x
    raise ShapeError(f"unknown activation {activation!r}")


def inverted_bottleneck(
    x: np.ndarray, spec: BottleneckSpec, weights: dict[str, np.ndarray]
) -> np.ndarray:
    """Pointwise expand (ReLU) -> channel shuffle -> depthwise (ReLU) ->
    pointwise project, with a residual add at stride 1 when channels match."""
    out = relu(pointwise_conv2d(x, weights["expand"]))
    if spec.shuffle_groups > 1:
        out = channel_shuffle(out, spec.shuffle_groups)
    out = relu(depthwise_conv2d(out, weights["dw"], spec.stride))
    out = pointwise_conv2d(out, weights["project"])
    if spec.has_residual:
        out = out + x
    return out


def connectnet_forward(
    x: np.ndarray, net: NetSpec, weights: dict[str, np.ndarray]
) -> np.ndarray:
    """Run the network; every intermediate shape is checked against the static
    propagation and mismatches name the offending layer."""
    x = check_tensor4(x, "input")
    expected = propagate_shapes(net, x.shape[1:])
    skip_sources = {l.source for l in net.layers if l.kind == "skip_merge"}
    saved: dict[int, np.ndarray] = {}
    out = x
    for i, layer in enumerate(net.layers):
        kind = layer.kind
        lw = {
            name.split(".", 1)[1]: arr
            for name, arr in weights.items()
            if name.startswith(f"layer{i}.")
        }
        if kind == "conv":
            out = _apply_activation(conv2d(out, lw["weight"], layer.stride), layer.activation)
        elif kind == "ds_conv":
            out = _apply_activation(
                depthwise_separable_conv(out, lw["dw"], lw["pw"], layer.stride),
                layer.activation,
            )
        elif kind == "bottleneck":
            out = inverted_bottleneck(out, layer, lw)
        elif kind == "shuffle":
            out = channel_shuffle(out, layer.groups)
        elif kind == "upsample":
            out = bilinear_upsample(out, layer.factor)
        elif kind == "skip_merge":
            out = np.concatenate([out, saved[layer.source]], axis=1)
        if out.shape[1:] != expected[i]:
            raise ShapeError(
                f"layer {i} ({kind}): produced {out.shape[1:]}, expected {expected[i]}"
            )
        if i in skip_sources:
            saved[i] = out
    return out


def softmax_channel(x: np.ndarray) -> np.ndarray:
    """Softmax over the channel axis of an (n, c, h, w) tensor."""
    x = check_tensor4(x, "input")
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return (e / e.sum(axis=1, keepdims=True)).astype(np.float32)


def default_connectnet(num_classes: int = 2) -> NetSpec:
    """Reference configuration: a four-stage inverted-bottleneck encoder
    (total stride 16), a depthwise-separable decoder with bilinear x2
    upsampling, and one skip connection from the stride-4 stage.

    Channel widths are calibrated so the parameter count lands near 0.13M.
    Input spatial dims must be divisible by 16.
    """
    bn = BottleneckSpec
    ds = DepthwiseSeparableSpec
    return NetSpec(
        in_channels=3,
        layers=[
            bn(3, 16, expansion=2, stride=2, shuffle_groups=2),      # 0: stride 2
            bn(16, 16, expansion=2, stride=1, shuffle_groups=2),     # 1
            bn(16, 32, expansion=2, stride=2, shuffle_groups=2),     # 2: stride 4
            bn(32, 32, expansion=2, stride=1, shuffle_groups=2),     # 3: skip source
            bn(32, 64, expansion=2, stride=2, shuffle_groups=2),     # 4: stride 8
            bn(64, 64, expansion=2, stride=1, shuffle_groups=2),     # 5
            bn(64, 112, expansion=2, stride=2, shuffle_groups=2),    # 6: stride 16
            bn(112, 112, expansion=2, stride=1, shuffle_groups=2),   # 7
            UpsampleSpec(2),                                         # 8: stride 8
            ds(112, 64),                                             # 9
            UpsampleSpec(2),                                         # 10: stride 4
            ds(64, 48),                                              # 11
            SkipMergeSpec(source=3),                                 # 12: 48 + 32 ch
            ds(80, 32),                                              # 13
            UpsampleSpec(2),                                         # 14: stride 2
            ds(32, 16),                                              # 15
            UpsampleSpec(2),                                         # 16: stride 1
            ds(16, 16),                                              # 17
            ConvSpec(16, num_classes, kernel=1, activation="none"),  # 18: class scores
        ],
    )

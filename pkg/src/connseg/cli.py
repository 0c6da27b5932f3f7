"""Command-line interface: one binary, subcommands for every pipeline stage.

Exit codes: 0 success, 1 validation error, 2 I/O error. Failures emit a
machine-readable JSON object on stderr. Reports carry no timestamps, so a
fixed config and seed always reproduce them byte-for-byte.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import dataset, imgio, metrics, nnblocks
from .ccl import component_stats, label_components_bbdt
from .connectivity import combined_loss, sc_loss_hard, sc_loss_soft
from .raster import binarize

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2

LAMBDA_SWEEP = (0.01, 0.05, 0.1, 0.5, 1.0)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the CLI contract reserves 2 for I/O
    def error(self, message):
        print(json.dumps({"error": message, "kind": "usage"}), file=sys.stderr)
        raise SystemExit(EXIT_VALIDATION)


def _emit(doc: dict, path: str | None) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _read_pred_mask(path: str, threshold: float):
    if path.lower().endswith(".pfm"):
        return binarize(imgio.read_probability_pfm(path), threshold)
    return imgio.read_mask_png(path)


def _cmd_ccl(args) -> int:
    mask = imgio.read_mask_png(args.mask)
    lm = label_components_bbdt(mask)
    if args.out:
        imgio.write_label_png(lm, args.out)
    if args.stats:
        doc = {
            "num_components": lm.num_components,
            "components": [
                {"id": s.id, "area": s.area, "bbox": list(s.bbox)}
                for s in component_stats(lm)
            ],
        }
        _emit(doc, None)
    return EXIT_OK


def _cross_entropy(probs: np.ndarray, gt: np.ndarray) -> float:
    q = np.clip(probs.astype(np.float64), 1e-7, 1.0 - 1e-7)
    g = gt.astype(np.float64)
    return float(-(g * np.log(q) + (1.0 - g) * np.log(1.0 - q)).mean())


def _cmd_loss(args) -> int:
    gt = imgio.read_mask_png(args.gt)
    probs = None
    if args.pred.lower().endswith(".pfm"):
        pm = imgio.read_probability_pfm(args.pred)
        probs = pm.probs
    else:
        pm = None

    if args.soft:
        if pm is None:
            hard = imgio.read_mask_png(args.pred)
            from .raster import ProbabilityMap

            pm = ProbabilityMap(hard.pixels.astype(np.float32))
            probs = pm.probs
        result = sc_loss_soft(pm, gt, threshold=args.threshold)
        loss, report = result.loss, result.report
    else:
        pred = _read_pred_mask(args.pred, args.threshold)
        loss, report = sc_loss_hard(gt, pred)

    seg_loss = None
    combined = None
    if args.seg_loss == "ce":
        if probs is None:
            probs = _read_pred_mask(args.pred, args.threshold).pixels.astype(np.float32)
        seg_loss = _cross_entropy(probs, gt.pixels)
        combined = combined_loss(seg_loss, loss, args.lam)

    doc = {
        "sc": report.sc,
        "loss": loss,
        "n_terms": report.n_terms,
        "cold_start": report.cold_start,
        "per_component": [
            {
                "gt_id": g,
                "connectivity": c,
                "matched_pred_ids": list(report.gt_matches.get(g, ())),
            }
            for g, c in report.per_gt_connectivity
        ],
        "isolated_pred_ids": list(report.isolated_preds),
        "lambda": args.lam,
        "seg_loss": seg_loss,
        "combined_loss": combined,
    }
    _emit(doc, args.report)
    return EXIT_OK


def _cmd_eval(args) -> int:
    manifest = dataset.load_manifest(args.manifest)
    report = metrics.evaluate_manifest(
        manifest, args.pred_dir, threshold=args.threshold, threads=args.threads
    )
    _emit(report, args.report)
    return EXIT_OK


def _cmd_split(args) -> int:
    manifest = dataset.load_manifest(args.manifest)
    try:
        counts = tuple(int(x) for x in args.scenes.split(","))
    except ValueError as e:
        raise ValueError(f"--scenes must be three comma-separated integers: {e}") from e
    if len(counts) != 3:
        raise ValueError("--scenes must list exactly three counts, e.g. 11,6,6")
    parts = dataset.scene_split(manifest, counts, seed=args.seed)
    prefix = args.out_prefix or str(Path(args.manifest).with_suffix(""))
    names = ("train", "val", "test")
    written = {}
    for name, part in zip(names, parts):
        out = f"{prefix}_{name}.json"
        dataset.save_manifest(part, out)
        written[name] = {
            "path": out,
            "scenes": part.scene_ids(),
            "n_frames": len(part.frames),
        }
    _emit({"seed": args.seed, "splits": written}, None)
    return EXIT_OK


def _cmd_composite(args) -> int:
    manifest = dataset.load_manifest(args.manifest)
    result = dataset.composite_batch(
        manifest,
        args.backgrounds,
        args.out,
        per_frame_backgrounds=args.per_frame,
        seed=args.seed,
        feather=args.feather,
    )
    out_manifest_path = Path(args.out) / "manifest.json"
    dataset.save_manifest(result.manifest, out_manifest_path)
    for frame, message in result.errors:
        print(
            json.dumps({"skipped": asdict(frame), "reason": message}),
            file=sys.stderr,
        )
    _emit(
        {
            "manifest": str(out_manifest_path),
            "n_output_frames": len(result.manifest.frames),
            "n_skipped": len(result.errors),
        },
        None,
    )
    return EXIT_OK


def _load_net_input(path: str, in_channels: int) -> np.ndarray:
    if path.lower().endswith(".pfm"):
        data = imgio.read_pfm(path)
        if data.ndim == 2:
            data = np.repeat(data[:, :, None], in_channels, axis=2)
    else:
        data = imgio.read_image(path).astype(np.float32) / 255.0
    if data.shape[2] != in_channels:
        raise ValueError(f"net expects {in_channels} input channels, got {data.shape[2]}")
    return data.transpose(2, 0, 1)[None]


def _cmd_net(args) -> int:
    if args.spec:
        net = nnblocks.NetSpec.load(args.spec)
    else:
        net = nnblocks.default_connectnet()
    did_something = False
    if args.params:
        _emit({"params": nnblocks.count_params(net), "n_layers": len(net.layers)}, None)
        did_something = True
    if args.forward:
        if not args.out:
            raise ValueError("--forward requires --out for the probability map")
        if args.weights:
            weights = nnblocks.load_weights(args.weights)
        else:
            weights = nnblocks.init_weights(net, seed=args.seed)
        x = _load_net_input(args.forward, net.in_channels)
        scores = nnblocks.connectnet_forward(x, net, weights)
        probs = nnblocks.softmax_channel(scores)[0, 1]
        imgio.write_pfm(probs.astype(np.float32), args.out)
        did_something = True
    if args.save_spec:
        net.save(args.save_spec)
        did_something = True
    if not did_something:
        raise ValueError("net: nothing to do (pass --params, --forward or --save-spec)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="connseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ccl", help="label connected components of a mask PNG")
    p.add_argument("mask")
    p.add_argument("--out", help="write a gray-level component visualization PNG")
    p.add_argument("--stats", action="store_true", help="print component stats as JSON")
    p.set_defaults(func=_cmd_ccl)

    p = sub.add_parser("loss", help="semantic-connectivity loss for one prediction")
    p.add_argument("--pred", required=True, help="prediction (PNG mask or PFM probabilities)")
    p.add_argument("--gt", required=True, help="ground-truth mask PNG")
    p.add_argument("--soft", action="store_true", help="use the differentiable soft loss")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="weight of the connectivity loss in the combined loss")
    p.add_argument("--seg-loss", choices=["ce"], default=None,
                   help="also report this segmentation loss and the combined total")
    p.add_argument("--report", help="write the JSON report here instead of stdout")
    p.set_defaults(func=_cmd_loss)

    p = sub.add_parser("eval", help="evaluate predictions against a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: available parallelism)")
    p.add_argument("--report", help="write the JSON report here instead of stdout")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("split", help="scene-level train/val/test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--scenes", required=True, help="scene counts, e.g. 11,6,6")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-prefix", help="output prefix (default: manifest path sans suffix)")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("composite", help="paste manifest portraits onto backgrounds")
    p.add_argument("--manifest", required=True)
    p.add_argument("--backgrounds", required=True, help="directory of background PNGs")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--per-frame", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--feather", action="store_true", help="blend the 1-pixel mask edge")
    p.set_defaults(func=_cmd_composite)

    p = sub.add_parser("net", help="inspect or run the lightweight network")
    p.add_argument("--spec", help="net spec JSON (default: built-in reference config)")
    p.add_argument("--params", action="store_true", help="print the parameter count")
    p.add_argument("--forward", help="input image (PNG or PFM) to run through the net")
    p.add_argument("--out", help="output PFM for the person-class probability")
    p.add_argument("--weights", help="weight blob (with .json sidecar); default random")
    p.add_argument("--seed", type=int, default=0, help="seed for random weights")
    p.add_argument("--save-spec", help="write the effective net spec JSON here")
    p.set_defaults(func=_cmd_net)

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse --help exits 0; our usage errors exit 1
        return int(e.code or 0)
    try:
        return args.func(args)
    except OSError as e:
        print(json.dumps({"error": str(e), "kind": "io"}), file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as e:
        print(json.dumps({"error": str(e), "kind": "validation"}), file=sys.stderr)
        return EXIT_VALIDATION


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

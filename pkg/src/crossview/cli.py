"""Command line entry points.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .baselines import NOISE_PRESETS, WarpConfig, depth_warp, interpolation_baseline, preset_config
from .datapipe import (
    generate,
    load_manifest,
    load_records,
    record_camera_path,
    record_inputs,
    record_target,
)
from .errors import CrossviewError, EmptyDataset
from .flowmatch import SampleConfig, TrainConfig, TrainSample, export_curve_csv, sample_batch, train
from .metrics import EvalReport, summarize
from .model import DIRECTIONS, DitConfig, VelocityDit
from .service import SERVICE_METHODS, ServiceState, TransformError, build_server, run_transform

EVAL_METHODS = ("model", "interpolation", "warp_corners", "warp_center", "noisy-high", "noisy-low")
WARP_LIKE = ("warp_corners", "warp_center", "noisy-high", "noisy-low")


class UsageError(Exception):
    """Bad flag combination or flag value; exits 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the CLI contract is 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="crossview", description=__doc__)
    parser.add_argument("--version", action="version", version=f"crossview {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", help="render, filter, and write a synthetic dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenes", type=int, default=500)
    p.add_argument("--paths-per-scene", type=int, default=10)
    p.add_argument("--frames", type=int, default=24)
    p.add_argument("--grid", type=int, default=12)
    p.add_argument("--dct-order", type=int, default=20)
    p.add_argument("--context-res", type=int, default=16)
    p.add_argument("--eval-fraction", type=float, default=0.03)
    p.add_argument("--val-fraction", type=float, default=0.05)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a velocity model on a dataset")
    p.add_argument("--data", required=True, help="dataset directory from gen-data")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--direction", choices=DIRECTIONS, default="f2v")
    p.add_argument("--steps", type=int, default=4000)
    p.add_argument("--lr", type=float, default=1.2e-4)
    p.add_argument("--weight-decay", type=float, default=0.01)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eval-every", type=int, default=500)
    p.add_argument("--eval-samples", type=int, default=16)
    p.add_argument("--layers", type=int, default=4)
    p.add_argument("--model-dim", type=int, default=64)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--mlp-ratio", type=int, default=2)
    p.add_argument("--curve", default=None, help="loss curve CSV path (default: <out>.curve.csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score methods on the eval split")
    p.add_argument("--data", required=True)
    p.add_argument("--methods", default="interpolation,warp_corners,warp_center")
    p.add_argument("--direction", choices=DIRECTIONS, default="f2v")
    p.add_argument("--checkpoint", default=None, help="required when methods include model")
    p.add_argument("--sample-steps", type=int, default=28)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--limit", type=int, default=0, help="cap evaluated records; 0 = all")
    p.add_argument("--out", default=None, help="write the report as JSON")
    p.add_argument("--csv", default=None, help="write the report as CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("transform", help="transform one record's designed path")
    p.add_argument("--data", required=True)
    p.add_argument("--record", required=True, help="record id, e.g. s00012p03")
    p.add_argument("--method", choices=SERVICE_METHODS, default="interpolation")
    p.add_argument("--direction", choices=DIRECTIONS, default="f2v")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--keyframes", default=None,
                   help='JSON list of {"frame", "box"} entries, or @file.json')
    p.add_argument("--sample-steps", type=int, default=28)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", choices=("eval", "val", "train", "all"), default="eval",
                   help="which split(s) to look the record up in")
    p.add_argument("--out", default=None, help="write the response JSON here instead of stdout")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("serve", help="serve scenes and transforms over HTTP")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--ui-dir", default=None, help="also serve static files from this directory")
    p.set_defaults(func=cmd_serve)

    return parser


def cmd_gen_data(args) -> int:
    manifest = generate(
        args.out,
        seed=args.seed,
        n_scenes=args.scenes,
        paths_per_scene=args.paths_per_scene,
        frames=args.frames,
        grid=args.grid,
        dct_order=args.dct_order,
        context_res=args.context_res,
        eval_fraction=args.eval_fraction,
        val_fraction=args.val_fraction,
    )
    summary = {
        "out": args.out,
        "candidates": manifest.candidates,
        "accepted": manifest.accepted,
        "rejected": manifest.rejected,
        "split_counts": manifest.split_counts,
    }
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0


def _build_train_set(records, direction):
    return [
        TrainSample(x1=record_target(r, direction), inputs=record_inputs(r, direction))
        for r in records
    ]


def cmd_train(args) -> int:
    manifest = load_manifest(args.data)
    train_records = load_records(args.data, "train")
    val_records = load_records(args.data, "val")
    if not train_records:
        raise EmptyDataset("train split is empty")
    config = DitConfig(
        layers=args.layers,
        model_dim=args.model_dim,
        heads=args.heads,
        mlp_ratio=args.mlp_ratio,
        frames=manifest.frames,
        grid=manifest.grid,
        dct_order=manifest.dct_order,
        context_res=manifest.context_res,
        direction=args.direction,
    )
    model = VelocityDit(config, seed=args.seed)
    cfg = TrainConfig(
        steps=args.steps,
        lr=args.lr,
        weight_decay=args.weight_decay,
        batch_size=args.batch_size,
        seed=args.seed,
        eval_every=args.eval_every,
        eval_samples=args.eval_samples,
    )
    result = train(
        model,
        _build_train_set(train_records, args.direction),
        cfg,
        val_set=_build_train_set(val_records, args.direction),
    )
    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    model.save(args.out, step=cfg.steps)
    curve_path = args.curve or f"{args.out}.curve.csv"
    export_curve_csv(result.curve, curve_path)
    final_loss = result.curve[-1][1] if result.curve else float("nan")
    print(json.dumps({
        "checkpoint": args.out,
        "curve": curve_path,
        "direction": args.direction,
        "steps": cfg.steps,
        "train_sequences": len(train_records),
        "final_loss": final_loss,
        "final_eval_iou": result.final_eval_iou,
    }, sort_keys=True, indent=2))
    return 0


def _model_predictions(args, records, direction):
    if args.checkpoint is None:
        raise UsageError("--checkpoint is required when methods include model")
    model, _ = VelocityDit.load(args.checkpoint)
    if model.config.direction != direction:
        raise UsageError(
            f"checkpoint was trained for {model.config.direction}, not {direction}"
        )
    inputs = [record_inputs(r, direction) for r in records]
    cfg = SampleConfig(num_steps=args.sample_steps, seed=args.seed)
    batch = sample_batch(model, inputs, cfg)
    return [batch[i] for i in range(len(records))]


def _warp_predictions(args, records, method):
    preds = []
    for i, rec in enumerate(records):
        if rec.depth0 is None:
            raise CrossviewError(f"record {rec.id} stores no depth grid; use the eval split")
        if method == "warp_corners":
            cfg = WarpConfig(mode="corners")
        elif method == "warp_center":
            cfg = WarpConfig(mode="center")
        else:
            # one independent noise stream per record, reproducible per --seed
            cfg = preset_config(method, seed=args.seed * 100003 + i)
        preds.append(depth_warp(rec.b_ref, record_camera_path(rec), rec.depth0, cfg))
    return preds


def _format_table(results) -> str:
    header = f"{'method':<16}{'mean_iou':>10}{'map@0.5':>10}{'tube_iou':>10}{'n':>6}"
    lines = [header, "-" * len(header)]
    for r in results:
        lines.append(
            f"{r.method:<16}{r.mean_iou:>10.4f}{r.map50:>10.4f}{r.tube_iou:>10.4f}{r.sequences:>6d}"
        )
    return "\n".join(lines)


def cmd_eval(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise UsageError("--methods is empty")
    for m in methods:
        if m not in EVAL_METHODS:
            raise UsageError(f"unknown method {m!r}; choose from {', '.join(EVAL_METHODS)}")
    if args.direction != "f2v" and any(m in WARP_LIKE for m in methods):
        raise UsageError("depth-warp methods only support --direction f2v")
    records = load_records(args.data, "eval")
    if args.limit > 0:
        records = records[: args.limit]
    if not records:
        raise EmptyDataset("eval split is empty")
    gts = [record_target(r, args.direction) for r in records]
    results = []
    for method in methods:
        if method == "model":
            preds = _model_predictions(args, records, args.direction)
        elif method == "interpolation":
            preds = [interpolation_baseline(record_inputs(r, args.direction).b_ref) for r in records]
        else:
            preds = _warp_predictions(args, records, method)
        results.append(summarize(method, args.direction, preds, gts))
    report = EvalReport(results=results)
    print(f"direction {args.direction}, {len(records)} sequences")
    print(_format_table(results))
    if args.out:
        with open(args.out, "w") as f:
            f.write(report.to_json())
        print(f"report written to {args.out}")
    if args.csv:
        with open(args.csv, "w") as f:
            f.write(report.to_csv())
    return 0


def _load_keyframes_arg(raw):
    if raw is None:
        return None
    if raw.startswith("@"):
        with open(raw[1:]) as f:
            text = f.read()
    else:
        text = raw
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"--keyframes is not valid JSON: {exc}")


def cmd_transform(args) -> int:
    splits = ("eval", "val", "train") if args.split == "all" else (args.split,)
    state = ServiceState(args.data, checkpoint=args.checkpoint, splits=splits)
    payload = {
        "record_id": args.record,
        "method": args.method,
        "direction": args.direction,
        "sampler": {"num_steps": args.sample_steps, "seed": args.seed},
    }
    keyframes = _load_keyframes_arg(args.keyframes)
    if keyframes is not None:
        payload["keyframes"] = keyframes
    try:
        response = run_transform(state, payload)
    except TransformError as exc:
        if exc.status == 400:
            raise UsageError(str(exc))
        raise CrossviewError(str(exc))
    text = json.dumps(response, sort_keys=True, indent=2)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text + "\n")
    else:
        print(text)
    return 0


def cmd_serve(args) -> int:
    state = ServiceState(
        args.data, checkpoint=args.checkpoint, ui_dir=args.ui_dir, verbose=True
    )
    server = build_server(state, host=args.host, port=args.port)
    host, port = server.server_address[:2]
    print(f"serving {len(state.order)} records on http://{host}:{port}", flush=True)
    if state.checkpoint_name:
        print(f"model checkpoint: {state.checkpoint_name}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"crossview: error: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        return 2
    except KeyboardInterrupt:
        raise
    except Exception as exc:  # runtime failures exit 2 per the CLI contract
        print(f"crossview: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

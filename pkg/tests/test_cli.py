"""Command-line interface: exit codes, artifacts, determinism."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from crossview.datapipe import load_records


def run_cli(*args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "crossview.cli", *map(str, args)],
        capture_output=True,
        text=True,
        cwd=cwd,
    )


def test_no_arguments_is_a_usage_error():
    proc = run_cli()
    assert proc.returncode == 1


def test_version_flag():
    proc = run_cli("--version")
    assert proc.returncode == 0
    assert proc.stdout.strip()


def test_unknown_subcommand_is_a_usage_error():
    proc = run_cli("frobnicate")
    assert proc.returncode == 1


def test_gen_data_writes_dataset_and_summary(tmp_path):
    out = tmp_path / "ds"
    proc = run_cli(
        "gen-data", "--out", out, "--seed", 4, "--scenes", 6,
        "--paths-per-scene", 4, "--frames", 8, "--grid", 4, "--dct-order", 4,
        "--context-res", 8, "--eval-fraction", 0.2, "--val-fraction", 0.2,
    )
    assert proc.returncode == 0, proc.stderr
    summary = json.loads(proc.stdout)
    assert summary["candidates"] == 24
    assert set(summary["split_counts"]) == {"train", "val", "eval"}
    assert sorted(os.listdir(out)) == [
        "eval.jsonl", "manifest.json", "train.jsonl", "val.jsonl",
    ]


def test_eval_interpolation_and_warps(small_dataset, tmp_path):
    report_path = tmp_path / "report.json"
    csv_path = tmp_path / "report.csv"
    proc = run_cli(
        "eval", "--data", small_dataset,
        "--methods", "interpolation,warp_corners,warp_center",
        "--out", report_path, "--csv", csv_path,
    )
    assert proc.returncode == 0, proc.stderr
    assert "interpolation" in proc.stdout and "warp_corners" in proc.stdout
    report = json.loads(report_path.read_text())
    rows = {r["method"]: r for r in report["results"]}
    assert set(rows) == {"interpolation", "warp_corners", "warp_center"}
    for row in rows.values():
        assert 0.0 <= row["mean_iou"] <= 1.0
    assert rows["warp_corners"]["mean_iou"] > rows["interpolation"]["mean_iou"]
    header = csv_path.read_text().splitlines()[0]
    assert header == "method,direction,mean_iou,map50,tube_iou,sequences"


def test_eval_unknown_method_is_a_usage_error(small_dataset):
    proc = run_cli("eval", "--data", small_dataset, "--methods", "telepathy")
    assert proc.returncode == 1
    assert "telepathy" in proc.stderr


def test_eval_warp_cannot_run_video_to_first(small_dataset):
    proc = run_cli(
        "eval", "--data", small_dataset, "--methods", "warp_corners",
        "--direction", "v2f",
    )
    assert proc.returncode == 1


def test_eval_model_requires_a_checkpoint(small_dataset):
    proc = run_cli("eval", "--data", small_dataset, "--methods", "model")
    assert proc.returncode == 1


def test_eval_missing_dataset_is_a_runtime_error(tmp_path):
    proc = run_cli("eval", "--data", tmp_path / "nope", "--methods", "interpolation")
    assert proc.returncode == 2


def test_train_writes_checkpoint_and_curve(small_dataset, tmp_path):
    ckpt = tmp_path / "m.ckpt"
    proc = run_cli(
        "train", "--data", small_dataset, "--out", ckpt, "--steps", 3,
        "--batch-size", 4, "--layers", 1, "--model-dim", 32, "--heads", 2,
        "--mlp-ratio", 2, "--eval-every", 2, "--eval-samples", 2,
    )
    assert proc.returncode == 0, proc.stderr
    summary = json.loads(proc.stdout)
    assert summary["steps"] == 3
    assert os.path.exists(ckpt)
    curve = (tmp_path / "m.ckpt.curve.csv").read_text().splitlines()
    assert curve[0] == "step,loss,eval_iou"
    assert len(curve) == 4


def test_transform_identity_on_static_record(small_dataset):
    records = load_records(small_dataset, "eval")
    rec = records[0]
    proc = run_cli(
        "transform", "--data", small_dataset, "--record", rec.id,
        "--method", "interpolation",
    )
    assert proc.returncode == 0, proc.stderr
    payload = json.loads(proc.stdout)
    assert payload["record_id"] == rec.id
    assert payload["method"] == "interpolation"
    assert np.asarray(payload["b_tgt"]).shape == (rec.frames, 4)
    assert np.allclose(payload["b_tgt"], rec.b_ref, atol=1e-9)
    assert 0.0 <= payload["mean_iou"] <= 1.0


def test_transform_accepts_keyframes_inline_and_from_file(small_dataset, tmp_path):
    rec = load_records(small_dataset, "eval")[0]
    keys = [
        {"frame": 0, "box": [0.4, 0.5, 0.2, 0.2]},
        {"frame": rec.frames - 1, "box": [0.6, 0.5, 0.2, 0.2]},
    ]
    inline = run_cli(
        "transform", "--data", small_dataset, "--record", rec.id,
        "--method", "warp_corners", "--keyframes", json.dumps(keys),
    )
    assert inline.returncode == 0, inline.stderr
    kf_path = tmp_path / "keys.json"
    kf_path.write_text(json.dumps(keys))
    from_file = run_cli(
        "transform", "--data", small_dataset, "--record", rec.id,
        "--method", "warp_corners", "--keyframes", f"@{kf_path}",
    )
    assert from_file.returncode == 0
    assert inline.stdout == from_file.stdout


def test_transform_malformed_keyframes_is_a_usage_error(small_dataset):
    rec = load_records(small_dataset, "eval")[0]
    proc = run_cli(
        "transform", "--data", small_dataset, "--record", rec.id,
        "--method", "interpolation", "--keyframes", "{not json",
    )
    assert proc.returncode == 1
    late = [{"frame": 3, "box": [0.5, 0.5, 0.2, 0.2]}]
    proc = run_cli(
        "transform", "--data", small_dataset, "--record", rec.id,
        "--method", "interpolation", "--keyframes", json.dumps(late),
    )
    assert proc.returncode == 1


def test_transform_unknown_record_is_a_runtime_error(small_dataset):
    proc = run_cli(
        "transform", "--data", small_dataset, "--record", "s99999p99",
        "--method", "interpolation",
    )
    assert proc.returncode == 2


def test_transform_model_without_checkpoint_is_a_runtime_error(small_dataset):
    rec = load_records(small_dataset, "eval")[0]
    proc = run_cli(
        "transform", "--data", small_dataset, "--record", rec.id,
        "--method", "model",
    )
    assert proc.returncode == 2


def test_transform_model_runs_with_checkpoint(small_dataset, tiny_checkpoint):
    rec = load_records(small_dataset, "eval")[0]
    proc = run_cli(
        "transform", "--data", small_dataset, "--record", rec.id,
        "--method", "model", "--checkpoint", tiny_checkpoint,
        "--sample-steps", 4,
    )
    assert proc.returncode == 0, proc.stderr
    payload = json.loads(proc.stdout)
    assert payload["method"] == "model"
    assert payload["sampler"]["num_steps"] == 4
    assert np.asarray(payload["b_tgt"]).shape == (rec.frames, 4)


def test_transform_reruns_are_byte_identical(small_dataset):
    rec = load_records(small_dataset, "eval")[0]
    args = (
        "transform", "--data", small_dataset, "--record", rec.id,
        "--method", "warp_corners",
    )
    assert run_cli(*args).stdout == run_cli(*args).stdout


def test_eval_reruns_are_byte_identical(small_dataset, tmp_path):
    out_a = tmp_path / "a.json"
    out_b = tmp_path / "b.json"
    for out in (out_a, out_b):
        proc = run_cli(
            "eval", "--data", small_dataset,
            "--methods", "interpolation,noisy-low", "--out", out,
        )
        assert proc.returncode == 0, proc.stderr
    assert out_a.read_bytes() == out_b.read_bytes()

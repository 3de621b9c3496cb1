"""HTTP service for scene browsing and box-path transformation.

Stateless JSON API over stdlib http.server: loaded dataset and checkpoint
are immutable after startup, so identical requests (same sampler seed)
always produce identical response bodies.
"""

from __future__ import annotations

import json
import mimetypes
import os
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import numpy as np

from .baselines import WarpConfig, depth_warp, interpolation_baseline
from .datapipe import load_manifest, load_records, record_camera_path
from .errors import ConfigMismatch, CrossviewError
from .flowmatch import SampleConfig, sample
from .geometry import Box2D
from .metrics import iou_frames
from .model import DIRECTIONS, ModelInputs, VelocityDit
from .signal import Keyframe, interpolate_keyframes

SERVICE_METHODS = ("model", "interpolation", "warp_corners", "warp_center")
MAX_BODY_BYTES = 8 * 1024 * 1024
MAX_SAMPLER_STEPS = 1000


class TransformError(Exception):
    """Request rejection carrying an HTTP status and machine-readable reason."""

    def __init__(self, status: int, reason: str, detail: str = ""):
        super().__init__(detail or reason)
        self.status = status
        self.reason = reason
        self.detail = detail

    def body(self) -> dict:
        out = {"reason": self.reason}
        if self.detail:
            out["detail"] = self.detail
        return out


class ServiceState:
    """Artifacts a server (or the transform CLI) answers from."""

    def __init__(self, dataset_dir, checkpoint=None, ui_dir=None, splits=("eval",), verbose=False):
        self.manifest = load_manifest(dataset_dir)
        self.records = {}
        self.order = []
        for split in splits:
            for rec in load_records(dataset_dir, split):
                self.records[rec.id] = rec
                self.order.append(rec.id)
        self.model = None
        self.checkpoint_name = None
        if checkpoint is not None:
            model, _ = VelocityDit.load(checkpoint)
            self._check_model(model)
            self.model = model
            self.checkpoint_name = os.path.basename(checkpoint)
        self.ui_dir = os.path.abspath(ui_dir) if ui_dir else None
        self.verbose = verbose

    def _check_model(self, model):
        cfg, m = model.config, self.manifest
        pairs = (
            ("frames", cfg.frames, m.frames),
            ("grid", cfg.grid, m.grid),
            ("dct_order", cfg.dct_order, m.dct_order),
            ("context_res", cfg.context_res, m.context_res),
        )
        for name, have, want in pairs:
            if have != want:
                raise ConfigMismatch(
                    f"checkpoint {name}={have} does not match dataset {name}={want}"
                )


def _require_number(value, reason):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TransformError(400, reason, f"expected a number, got {value!r}")
    if not np.isfinite(value):
        raise TransformError(400, reason, "non-finite value")
    return float(value)


def parse_keyframes(raw, frames: int):
    """Validate a keyframe payload list into signal Keyframes.

    Explicit checks so every failure maps to a stable machine-readable
    reason; interpolate_keyframes re-checks the same contract downstream.
    """
    if not isinstance(raw, list) or not raw:
        raise TransformError(400, "keyframes_empty")
    keys = []
    for entry in raw:
        if not isinstance(entry, dict) or "frame" not in entry or "box" not in entry:
            raise TransformError(400, "invalid_keyframe", "need {frame, box} objects")
        frame = entry["frame"]
        if isinstance(frame, bool) or not isinstance(frame, int):
            raise TransformError(400, "invalid_keyframe", f"frame index {frame!r} not an integer")
        box = entry["box"]
        if not isinstance(box, (list, tuple)) or len(box) != 4:
            raise TransformError(400, "invalid_box", "box must be [cx, cy, w, h]")
        cx, cy, w, h = (_require_number(v, "invalid_box") for v in box)
        if w < 0 or h < 0:
            raise TransformError(400, "invalid_box", "negative box extent")
        keys.append(Keyframe(frame, Box2D(cx, cy, w, h)))
    idx = [k.frame_index for k in keys]
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise TransformError(400, "keyframes_unsorted", f"indices {idx}")
    if idx[0] != 0:
        raise TransformError(400, "keyframes_must_start_at_zero", f"first index {idx[0]}")
    if idx[-1] > frames - 1:
        raise TransformError(400, "keyframe_out_of_range", f"index {idx[-1]} > {frames - 1}")
    return keys


def _parse_sampler(payload) -> SampleConfig:
    raw = payload.get("sampler", {})
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise TransformError(400, "invalid_sampler", "sampler must be an object")
    num_steps = raw.get("num_steps", 28)
    seed = raw.get("seed", 0)
    for v in (num_steps, seed):
        if isinstance(v, bool) or not isinstance(v, int):
            raise TransformError(400, "invalid_sampler", f"{v!r} not an integer")
    if not 1 <= num_steps <= MAX_SAMPLER_STEPS:
        raise TransformError(400, "invalid_sampler", f"num_steps {num_steps} out of range")
    if seed < 0:
        raise TransformError(400, "invalid_sampler", "seed must be non-negative")
    return SampleConfig(num_steps=num_steps, seed=seed)


def run_transform(state: ServiceState, payload: dict) -> dict:
    """Pure transform dispatch shared by POST /transform and the CLI."""
    if not isinstance(payload, dict):
        raise TransformError(400, "invalid_json", "request body must be an object")
    method = payload.get("method", "model")
    if method not in SERVICE_METHODS:
        raise TransformError(400, "unknown_method", f"method {method!r}")
    direction = payload.get("direction", "f2v")
    if direction not in DIRECTIONS:
        raise TransformError(400, "unknown_direction", f"direction {direction!r}")

    record = None
    inline = payload.get("inline")
    if "record_id" in payload and payload["record_id"] is not None:
        record_id = payload["record_id"]
        if record_id not in state.records:
            raise TransformError(404, "unknown_record", f"record {record_id!r}")
        record = state.records[record_id]
        frames = record.frames
    elif isinstance(inline, dict):
        frames = inline.get("frames")
        if isinstance(frames, bool) or not isinstance(frames, int) or frames < 1:
            raise TransformError(400, "invalid_json", "inline.frames must be a positive integer")
    else:
        raise TransformError(400, "missing_record", "need record_id or inline")

    keyframes = None
    if payload.get("keyframes") is not None:
        keyframes = parse_keyframes(payload["keyframes"], frames)
    if record is None and keyframes is None:
        raise TransformError(400, "missing_keyframes", "inline requests must carry keyframes")

    if keyframes is not None:
        dense = interpolate_keyframes(keyframes, frames).as_array()
    else:
        dense = record.b_ref if direction == "f2v" else record.b_tgt
        dense = dense.copy()

    sampler = _parse_sampler(payload) if method == "model" else None
    prediction = _dispatch(state, method, direction, record, inline, dense, frames, sampler)

    ground_truth = None
    if record is not None:
        ground_truth = record.b_tgt if direction == "f2v" else record.b_ref
    per_frame = None
    mean = None
    if ground_truth is not None:
        per_frame = [float(v) for v in iou_frames(prediction, ground_truth)]
        mean = float(np.mean(per_frame))

    return {
        "record_id": record.id if record is not None else None,
        "method": method,
        "direction": direction,
        "checkpoint": state.checkpoint_name if method == "model" else None,
        "frames": frames,
        "b_ref": np.asarray(dense, dtype=np.float64).tolist(),
        "b_tgt": np.asarray(prediction, dtype=np.float64).tolist(),
        "per_frame_iou": per_frame,
        "mean_iou": mean,
        "sampler": {"num_steps": sampler.num_steps, "seed": sampler.seed} if sampler else None,
    }


def _dispatch(state, method, direction, record, inline, dense, frames, sampler):
    if method == "interpolation":
        return interpolation_baseline(dense)

    if method in ("warp_corners", "warp_center"):
        if record is None:
            raise TransformError(400, "warp_requires_record")
        if direction != "f2v":
            raise TransformError(400, "warp_direction_unsupported", "depth warping only maps the first-frame view forward")
        if record.depth0 is None:
            raise TransformError(400, "warp_requires_depth", f"record {record.id} stores no depth grid")
        mode = "corners" if method == "warp_corners" else "center"
        path = record_camera_path(record)
        try:
            return depth_warp(dense, path, record.depth0, WarpConfig(mode=mode))
        except CrossviewError as exc:
            raise TransformError(400, "warp_failed", str(exc))

    if state.model is None:
        raise TransformError(409, "model_not_loaded", "serve with --checkpoint to enable method=model")
    if state.model.config.direction != direction:
        raise TransformError(
            400, "direction_mismatch",
            f"checkpoint was trained for {state.model.config.direction}",
        )
    cfg = state.model.config
    if frames != cfg.frames:
        raise TransformError(400, "invalid_json", f"model expects {cfg.frames} frames")
    if record is not None:
        inputs = ModelInputs(
            b_ref=dense.copy(),
            dct_tokens=record.dct_tracks.copy(),
            context0=record.context0.copy(),
        )
    else:
        # Inline requests may omit conditioning streams; absent ones fall
        # back to the model's learned null tokens.
        dropped = set()
        tracks = inline.get("tracks_dct")
        if tracks is None:
            tracks = np.zeros((cfg.track_tokens, 2 * cfg.dct_order))
            dropped.add("trajectories")
        else:
            tracks = np.asarray(tracks, dtype=np.float64)
            if tracks.shape != (cfg.track_tokens, 2 * cfg.dct_order):
                raise TransformError(400, "invalid_json", "inline.tracks_dct has the wrong shape")
        context0 = inline.get("context0")
        if context0 is None:
            context0 = np.zeros((cfg.context_res, cfg.context_res))
            dropped.add("context")
        else:
            context0 = np.asarray(context0, dtype=np.float64)
            if context0.shape != (cfg.context_res, cfg.context_res):
                raise TransformError(400, "invalid_json", "inline.context0 has the wrong shape")
        inputs = ModelInputs(
            b_ref=dense.copy(), dct_tokens=tracks, context0=context0,
            dropped=frozenset(dropped),
        )
    return sample(state.model, inputs, sampler)


def scene_summary(record) -> dict:
    return {
        "id": record.id,
        "frames": record.frames,
        "path_kind": record.path_kind,
        "context0": record.context0.tolist(),
    }


def scene_detail(record, include_tracks: bool) -> dict:
    out = {
        "id": record.id,
        "scene_id": record.scene_id,
        "frames": record.frames,
        "grid": record.grid,
        "dct_order": record.dct_order,
        "path_kind": record.path_kind,
        "magnitude": record.magnitude,
        "split": record.split,
        "b_ref": record.b_ref.tolist(),
        "b_tgt": record.b_tgt.tolist(),
        "context0": record.context0.tolist(),
    }
    if record.depth0 is not None:
        out["depth0"] = record.depth0.tolist()
    if include_tracks:
        out["tracks_dct"] = record.dct_tracks.tolist()
    return out


_STATIC_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".svg": "image/svg+xml",
    ".map": "application/json",
}


def _make_handler(state: ServiceState):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            if state.verbose:
                BaseHTTPRequestHandler.log_message(self, fmt, *args)

        def _cors(self):
            self.send_header("Access-Control-Allow-Origin", "*")

        def _send_json(self, status: int, body: dict):
            data = json.dumps(body, sort_keys=True).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self._cors()
            self.end_headers()
            self.wfile.write(data)

        def do_OPTIONS(self):
            self.send_response(204)
            self._cors()
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_GET(self):
            url = urlparse(self.path)
            parts = [p for p in url.path.split("/") if p]
            if url.path == "/health":
                self._send_json(200, {"status": "ok"})
            elif url.path == "/scenes":
                scenes = [scene_summary(state.records[i]) for i in state.order]
                self._send_json(200, {"count": len(scenes), "scenes": scenes})
            elif len(parts) == 2 and parts[0] == "scenes":
                rec = state.records.get(parts[1])
                if rec is None:
                    self._send_json(404, {"reason": "unknown_record"})
                    return
                query = parse_qs(url.query)
                include = query.get("tracks", ["0"])[0] in ("1", "true")
                self._send_json(200, scene_detail(rec, include))
            elif state.ui_dir is not None:
                self._serve_static(url.path)
            else:
                self._send_json(404, {"reason": "unknown_path"})

        def do_POST(self):
            if urlparse(self.path).path != "/transform":
                self._send_json(404, {"reason": "unknown_path"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
            except ValueError:
                length = 0
            if length <= 0 or length > MAX_BODY_BYTES:
                self._send_json(400, {"reason": "invalid_json", "detail": "bad content length"})
                return
            raw = self.rfile.read(length)
            try:
                payload = json.loads(raw.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                self._send_json(400, {"reason": "invalid_json"})
                return
            try:
                self._send_json(200, run_transform(state, payload))
            except TransformError as exc:
                self._send_json(exc.status, exc.body())
            except CrossviewError as exc:
                self._send_json(400, {"reason": "invalid_request", "detail": str(exc)})

        def _serve_static(self, path: str):
            rel = path.lstrip("/") or "index.html"
            full = os.path.normpath(os.path.join(state.ui_dir, rel))
            inside = full == state.ui_dir or full.startswith(state.ui_dir + os.sep)
            if inside and os.path.isdir(full):
                full = os.path.join(full, "index.html")
            if not inside or not os.path.isfile(full):
                self._send_json(404, {"reason": "unknown_path"})
                return
            ext = os.path.splitext(full)[1].lower()
            ctype = _STATIC_TYPES.get(ext) or mimetypes.guess_type(full)[0] or "application/octet-stream"
            with open(full, "rb") as f:
                data = f.read()
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(data)))
            self._cors()
            self.end_headers()
            self.wfile.write(data)

    return Handler


def build_server(state: ServiceState, host: str = "127.0.0.1", port: int = 8008) -> ThreadingHTTPServer:
    """Bind a threading HTTP server; port 0 picks a free port."""
    server = ThreadingHTTPServer((host, port), _make_handler(state))
    server.daemon_threads = True
    return server

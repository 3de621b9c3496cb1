"""Dataset generation, filtering, splits, and JSONL persistence.

A dataset is a directory:

    train.jsonl   one SampleRecord per line
    val.jsonl
    eval.jsonl    records additionally carry the frame-0 depth grid
    manifest.json generation parameters and bookkeeping

Generation walks scene seeds times a fixed list of ten camera-path
presets, renders each pair, filters out degenerate ones, and assigns
splits at scene granularity so no scene leaks across splits. Everything
derives from the top-level seed; two runs with the same arguments write
byte-identical files.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import TooFewScenes
from .geometry import (
    DEPTH_GRID_RES,
    DEPTH_WINDOW,
    ObjectNotVisible,
    default_intrinsics,
    make_camera_path,
    make_scene,
    render_pair,
)
from .model import ModelInputs
from .signal import trackgrid_features

# The ten dynamic-path presets: (kind, sign). Magnitudes jitter per pair.
PATH_PRESETS = (
    ("pan", 1.0),
    ("pan", -1.0),
    ("truck", 1.0),
    ("truck", -1.0),
    ("dolly", 1.0),
    ("dolly", -1.0),
    ("orbit", 1.0),
    ("orbit", -1.0),
    ("arc", 1.0),
    ("composite", 1.0),
)

FILTER_STATIC_MIN_TRAVEL = 0.05  # of the frame diagonal, conditioning view
FILTER_AREA_RANGE = (0.002, 0.6)
FILTER_CENTER_RANGE = (-0.2, 1.2)

SPLITS = ("train", "val", "eval")


@dataclass
class SampleRecord:
    id: str
    scene_id: int
    scene_seed: int
    path_seed: int
    path_kind: str
    magnitude: float
    frames: int
    grid: int
    dct_order: int
    split: str
    b_ref: np.ndarray  # (T, 4)
    b_tgt: np.ndarray  # (T, 4)
    dct_tracks: np.ndarray  # (G*G, 2K)
    context0: np.ndarray  # (R, R)
    depth0: np.ndarray = None  # (res, res), eval records only

    def to_json_line(self) -> str:
        payload = {
            "id": self.id,
            "scene_id": self.scene_id,
            "scene_seed": self.scene_seed,
            "path_seed": self.path_seed,
            "path_kind": self.path_kind,
            "magnitude": self.magnitude,
            "frames": self.frames,
            "grid": self.grid,
            "dct_order": self.dct_order,
            "split": self.split,
            "b_ref": self.b_ref.tolist(),
            "b_tgt": self.b_tgt.tolist(),
            "dct_tracks": self.dct_tracks.tolist(),
            "context0": self.context0.tolist(),
        }
        if self.depth0 is not None:
            payload["depth0"] = self.depth0.tolist()
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json_line(cls, line: str) -> "SampleRecord":
        d = json.loads(line)
        depth0 = np.asarray(d["depth0"], dtype=np.float64) if "depth0" in d else None
        return cls(
            id=d["id"],
            scene_id=d["scene_id"],
            scene_seed=d["scene_seed"],
            path_seed=d["path_seed"],
            path_kind=d["path_kind"],
            magnitude=d["magnitude"],
            frames=d["frames"],
            grid=d["grid"],
            dct_order=d["dct_order"],
            split=d["split"],
            b_ref=np.asarray(d["b_ref"], dtype=np.float64),
            b_tgt=np.asarray(d["b_tgt"], dtype=np.float64),
            dct_tracks=np.asarray(d["dct_tracks"], dtype=np.float64),
            context0=np.asarray(d["context0"], dtype=np.float64),
            depth0=depth0,
        )


@dataclass
class DatasetManifest:
    format_version: int = 1
    seed: int = 0
    n_scenes: int = 500
    paths_per_scene: int = 10
    frames: int = 24
    grid: int = 12
    dct_order: int = 20
    context_res: int = 16
    eval_fraction: float = 0.03
    val_fraction: float = 0.05
    depth_window: tuple = DEPTH_WINDOW
    depth_res: int = DEPTH_GRID_RES
    intrinsics: dict = field(default_factory=lambda: default_intrinsics().to_dict())
    candidates: int = 0
    accepted: int = 0
    rejected: dict = field(default_factory=dict)
    split_counts: dict = field(default_factory=dict)

    def to_json(self) -> str:
        d = dict(self.__dict__)
        d["depth_window"] = list(self.depth_window)
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        d = json.loads(text)
        d["depth_window"] = tuple(d["depth_window"])
        return cls(**d)


def filter_record(b_ref: np.ndarray, b_tgt: np.ndarray):
    """Degeneracy check for one rendered pair; returns None or a reason.

    static_object: the conditioning-view center barely travels.
    size: some frame's box area is implausibly small or large, either view.
    offscreen: some frame's center leaves the padded frame, either view.
    """
    diag = float(np.sqrt(2.0))
    travel = np.abs(np.diff(b_ref[:, :2], axis=0)).sum()
    if travel < FILTER_STATIC_MIN_TRAVEL * diag:
        return "static_object"
    lo_a, hi_a = FILTER_AREA_RANGE
    for boxes in (b_ref, b_tgt):
        area = boxes[:, 2] * boxes[:, 3]
        if np.any(area < lo_a) or np.any(area > hi_a):
            return "size"
    lo_c, hi_c = FILTER_CENTER_RANGE
    for boxes in (b_ref, b_tgt):
        centers = boxes[:, :2]
        if np.any(centers < lo_c) or np.any(centers > hi_c):
            return "offscreen"
    return None


def assign_splits(n_scenes: int, eval_fraction: float, val_fraction: float, seed: int) -> dict:
    """Scene id -> split name, seeded, eval and val rounded up to >= 1 scene."""
    n_eval = max(1, round(n_scenes * eval_fraction)) if eval_fraction > 0 else 0
    n_val = max(1, round(n_scenes * val_fraction)) if val_fraction > 0 else 0
    if n_eval + n_val >= n_scenes:
        raise TooFewScenes(
            f"{n_scenes} scenes cannot honor eval={eval_fraction}, val={val_fraction}"
        )
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC0FFEE)))
    order = rng.permutation(n_scenes)
    mapping = {}
    for i, sid in enumerate(order):
        if i < n_eval:
            mapping[int(sid)] = "eval"
        elif i < n_eval + n_val:
            mapping[int(sid)] = "val"
        else:
            mapping[int(sid)] = "train"
    return mapping


def _derived_seed(*parts) -> int:
    return int(np.random.SeedSequence(parts).generate_state(1)[0])


def generate(
    out_dir: str,
    seed: int = 0,
    n_scenes: int = 500,
    paths_per_scene: int = 10,
    frames: int = 24,
    grid: int = 12,
    dct_order: int = 20,
    context_res: int = 16,
    eval_fraction: float = 0.03,
    val_fraction: float = 0.05,
) -> DatasetManifest:
    """Render, filter, split, and write a dataset; returns its manifest."""
    if paths_per_scene > len(PATH_PRESETS):
        raise ValueError(f"at most {len(PATH_PRESETS)} paths per scene")
    os.makedirs(out_dir, exist_ok=True)
    splits = assign_splits(n_scenes, eval_fraction, val_fraction, seed)
    manifest = DatasetManifest(
        seed=seed,
        n_scenes=n_scenes,
        paths_per_scene=paths_per_scene,
        frames=frames,
        grid=grid,
        dct_order=dct_order,
        context_res=context_res,
        eval_fraction=eval_fraction,
        val_fraction=val_fraction,
    )
    rejected = {}
    files = {
        name: open(os.path.join(out_dir, f"{name}.jsonl"), "w") for name in SPLITS
    }
    counts = {name: 0 for name in SPLITS}
    try:
        for scene_id in range(n_scenes):
            scene_seed = _derived_seed(seed, scene_id)
            scene = make_scene(scene_seed, frames=frames)
            split = splits[scene_id]
            for p_idx in range(paths_per_scene):
                kind, sign = PATH_PRESETS[p_idx]
                path_seed = _derived_seed(seed, scene_id, p_idx)
                jitter = np.random.default_rng(path_seed).uniform(0.7, 1.3)
                magnitude = float(sign * jitter)
                manifest.candidates += 1
                path = make_camera_path(kind, frames, magnitude, path_seed)
                try:
                    res = render_pair(scene, path, grid_size=grid, context_res=context_res)
                except ObjectNotVisible:
                    rejected["render"] = rejected.get("render", 0) + 1
                    continue
                b_ref = res.b_ref.as_array()
                b_tgt = res.b_tgt.as_array()
                reason = filter_record(b_ref, b_tgt)
                if reason is not None:
                    rejected[reason] = rejected.get(reason, 0) + 1
                    continue
                record = SampleRecord(
                    id=f"s{scene_id:05d}p{p_idx:02d}",
                    scene_id=scene_id,
                    scene_seed=scene_seed,
                    path_seed=path_seed,
                    path_kind=kind,
                    magnitude=magnitude,
                    frames=frames,
                    grid=grid,
                    dct_order=dct_order,
                    split=split,
                    b_ref=b_ref,
                    b_tgt=b_tgt,
                    dct_tracks=trackgrid_features(res.tracks, dct_order),
                    context0=res.context0,
                    depth0=res.depth0 if split == "eval" else None,
                )
                files[split].write(record.to_json_line() + "\n")
                counts[split] += 1
                manifest.accepted += 1
    finally:
        for f in files.values():
            f.close()
    manifest.rejected = rejected
    manifest.split_counts = counts
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        f.write(manifest.to_json() + "\n")
    return manifest


def load_manifest(dataset_dir: str) -> DatasetManifest:
    with open(os.path.join(dataset_dir, "manifest.json")) as f:
        return DatasetManifest.from_json(f.read())


def load_records(dataset_dir: str, split: str) -> list:
    path = os.path.join(dataset_dir, f"{split}.jsonl")
    records = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(SampleRecord.from_json_line(line))
    return records


def record_inputs(record: SampleRecord, direction: str = "f2v") -> ModelInputs:
    """Conditioning bundle for one record in the given transfer direction."""
    ref = record.b_ref if direction == "f2v" else record.b_tgt
    return ModelInputs(
        b_ref=ref.copy(),
        dct_tokens=record.dct_tracks.copy(),
        context0=record.context0.copy(),
    )


def record_target(record: SampleRecord, direction: str = "f2v") -> np.ndarray:
    return (record.b_tgt if direction == "f2v" else record.b_ref).copy()


def record_camera_path(record: SampleRecord):
    """Rebuild the exact camera path a record was rendered with."""
    return make_camera_path(
        record.path_kind, record.frames, record.magnitude, record.path_seed
    )

"""Box-overlap metrics and evaluation reports.

IoU is computed on raw boxes: nothing is clipped to the frame, so boxes
partially or fully outside [0,1]^2 still score by their true overlap.
Degenerate boxes (non-positive extent) have zero area.
"""

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch


def _as_box_array(box) -> np.ndarray:
    if hasattr(box, "as_array"):
        return box.as_array()
    return np.asarray(box, dtype=np.float64)


def iou(box_a, box_b) -> float:
    a = _as_box_array(box_a)
    b = _as_box_array(box_b)
    return float(iou_frames(a[None], b[None])[0])


def iou_frames(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Per-frame IoU for (T, 4) box arrays in (cx, cy, w, h) form."""
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape or p.ndim != 2 or p.shape[1] != 4:
        raise LengthMismatch(f"box arrays disagree: {p.shape} vs {g.shape}")
    ax0, ax1 = p[:, 0] - p[:, 2] / 2, p[:, 0] + p[:, 2] / 2
    ay0, ay1 = p[:, 1] - p[:, 3] / 2, p[:, 1] + p[:, 3] / 2
    bx0, bx1 = g[:, 0] - g[:, 2] / 2, g[:, 0] + g[:, 2] / 2
    by0, by1 = g[:, 1] - g[:, 3] / 2, g[:, 1] + g[:, 3] / 2
    iw = np.minimum(ax1, bx1) - np.maximum(ax0, bx0)
    ih = np.minimum(ay1, by1) - np.maximum(ay0, by0)
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = np.clip(p[:, 2], 0.0, None) * np.clip(p[:, 3], 0.0, None)
    area_b = np.clip(g[:, 2], 0.0, None) * np.clip(g[:, 3], 0.0, None)
    union = area_a + area_b - inter
    out = np.zeros(len(p))
    ok = union > 0
    out[ok] = inter[ok] / union[ok]
    return out


def _check_paired(preds, gts):
    if len(preds) != len(gts):
        raise LengthMismatch(f"{len(preds)} predictions for {len(gts)} targets")
    if len(preds) == 0:
        raise LengthMismatch("empty sequence lists")


def mean_iou(preds, gts) -> float:
    """Mean per-frame IoU over a list of (T, 4) sequences."""
    _check_paired(preds, gts)
    vals = [iou_frames(p, g).mean() for p, g in zip(preds, gts)]
    return float(np.mean(vals))


def map50(preds, gts, threshold: float = 0.5) -> float:
    """Mean over sequences of the fraction of frames with IoU >= threshold."""
    _check_paired(preds, gts)
    vals = [(iou_frames(p, g) >= threshold).mean() for p, g in zip(preds, gts)]
    return float(np.mean(vals))


def tube_iou(pred, gt) -> float:
    """Spatio-temporal IoU of one sequence: summed intersection over summed union."""
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape or p.ndim != 2 or p.shape[1] != 4:
        raise LengthMismatch(f"box arrays disagree: {p.shape} vs {g.shape}")
    ax0, ax1 = p[:, 0] - p[:, 2] / 2, p[:, 0] + p[:, 2] / 2
    ay0, ay1 = p[:, 1] - p[:, 3] / 2, p[:, 1] + p[:, 3] / 2
    bx0, bx1 = g[:, 0] - g[:, 2] / 2, g[:, 0] + g[:, 2] / 2
    by0, by1 = g[:, 1] - g[:, 3] / 2, g[:, 1] + g[:, 3] / 2
    iw = np.clip(np.minimum(ax1, bx1) - np.maximum(ax0, bx0), 0.0, None)
    ih = np.clip(np.minimum(ay1, by1) - np.maximum(ay0, by0), 0.0, None)
    inter = (iw * ih).sum()
    union = (
        np.clip(p[:, 2], 0.0, None) * np.clip(p[:, 3], 0.0, None)
        + np.clip(g[:, 2], 0.0, None) * np.clip(g[:, 3], 0.0, None)
    ).sum() - inter
    if union <= 0:
        return 0.0
    return float(inter / union)


def mean_tube_iou(preds, gts) -> float:
    _check_paired(preds, gts)
    return float(np.mean([tube_iou(p, g) for p, g in zip(preds, gts)]))


@dataclass(frozen=True)
class MethodResult:
    method: str
    direction: str
    mean_iou: float
    map50: float
    tube_iou: float
    sequences: int

    def to_dict(self):
        return {
            "method": self.method,
            "direction": self.direction,
            "mean_iou": self.mean_iou,
            "map50": self.map50,
            "tube_iou": self.tube_iou,
            "sequences": self.sequences,
        }


def summarize(method: str, direction: str, preds, gts) -> MethodResult:
    return MethodResult(
        method=method,
        direction=direction,
        mean_iou=mean_iou(preds, gts),
        map50=map50(preds, gts),
        tube_iou=mean_tube_iou(preds, gts),
        sequences=len(preds),
    )


@dataclass
class EvalReport:
    results: list

    def to_json(self) -> str:
        return json.dumps(
            {"format_version": 1, "results": [r.to_dict() for r in self.results]},
            indent=2,
            sort_keys=True,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["method", "direction", "mean_iou", "map50", "tube_iou", "sequences"])
        for r in self.results:
            writer.writerow(
                [r.method, r.direction, f"{r.mean_iou:.6f}", f"{r.map50:.6f}", f"{r.tube_iou:.6f}", r.sequences]
            )
        return buf.getvalue()

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        raw = json.loads(text)
        return cls(results=[MethodResult(**r) for r in raw["results"]])

"""Trajectory signal tools: orthonormal DCT, keyframes, perturbations.

The DCT here is the orthonormal type-II transform,

    X_k = beta_k * sqrt(2/T) * sum_n x_n * cos(pi * (2n + 1) * k / (2T))

with beta_0 = 1/sqrt(2) and beta_k = 1 otherwise. Orthonormality makes
truncation behave: dropping coefficients k >= K loses exactly the energy of
the dropped coefficients (Parseval), and K = T reconstructs the signal.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import EmptyKeys, InvalidOrder, KeyOutOfRange, UnsortedKeys
from .geometry import Box2D, BoxSequence, TrackGrid


@lru_cache(maxsize=64)
def _basis(frames: int) -> np.ndarray:
    """Rows are the T orthonormal DCT-II basis vectors of length T."""
    n = np.arange(frames)
    k = np.arange(frames)[:, None]
    mat = np.cos(np.pi * (2 * n + 1) * k / (2 * frames)) * np.sqrt(2.0 / frames)
    mat[0] /= np.sqrt(2.0)
    return mat


def dct_basis(frames: int) -> np.ndarray:
    return _basis(frames).copy()


def _check_order(order: int, frames: int):
    if not 1 <= order <= frames:
        raise InvalidOrder(f"order {order} outside [1, {frames}]")


def dct_encode(signal, order: int) -> np.ndarray:
    """First `order` DCT coefficients of a length-T signal (last axis)."""
    x = np.asarray(signal, dtype=np.float64)
    frames = x.shape[-1]
    _check_order(order, frames)
    return x @ _basis(frames)[:order].T


def dct_decode(coeffs, frames: int) -> np.ndarray:
    """Reconstruct a length-T signal from its leading DCT coefficients."""
    c = np.asarray(coeffs, dtype=np.float64)
    order = c.shape[-1]
    _check_order(order, frames)
    return c @ _basis(frames)[:order]


def forward_fill_tracks(grid: TrackGrid) -> np.ndarray:
    """Tracks with invisible frames replaced by the last visible position.

    Leading invisible frames take the first visible position; tracks that
    are never visible pass through unchanged.
    """
    g = grid.grid_size
    frames = grid.frames
    pts = grid.tracks.reshape(g * g, frames, 2).copy()
    vis = grid.visibility.reshape(g * g, frames)
    for i in range(g * g):
        v = vis[i]
        if v.all() or not v.any():
            continue
        idx = np.where(v, np.arange(frames), -1)
        np.maximum.accumulate(idx, out=idx)
        first = int(np.argmax(v))
        idx[idx < 0] = first
        pts[i] = pts[i][idx]
    return pts.reshape(g, g, frames, 2)


@dataclass(frozen=True)
class DctTrack:
    """DCT encoding of one 2D track: K coefficients per axis."""

    coeffs_x: np.ndarray
    coeffs_y: np.ndarray
    order: int
    source_len: int

    def features(self) -> np.ndarray:
        """The 2K-vector fed to the model: x coefficients then y."""
        return np.concatenate([self.coeffs_x, self.coeffs_y])


def encode_trackgrid(grid: TrackGrid, order: int) -> list:
    """Encode every grid track; returns G rows of G DctTrack, row-major."""
    filled = forward_fill_tracks(grid)
    g = grid.grid_size
    frames = grid.frames
    _check_order(order, frames)
    cx = dct_encode(filled[..., 0], order)
    cy = dct_encode(filled[..., 1], order)
    return [
        [
            DctTrack(cx[r, c], cy[r, c], order, frames)
            for c in range(g)
        ]
        for r in range(g)
    ]


def trackgrid_features(grid: TrackGrid, order: int) -> np.ndarray:
    """(G*G, 2K) float matrix of track tokens, row-major over the grid."""
    filled = forward_fill_tracks(grid)
    g = grid.grid_size
    _check_order(order, grid.frames)
    cx = dct_encode(filled[..., 0], order).reshape(g * g, order)
    cy = dct_encode(filled[..., 1], order).reshape(g * g, order)
    return np.concatenate([cx, cy], axis=1)


@dataclass(frozen=True)
class Keyframe:
    frame_index: int
    box: Box2D


def interpolate_keyframes(keys, frames: int) -> BoxSequence:
    """Piecewise-linear box interpolation over T frames.

    Keys must be sorted, start at frame 0, and stay inside [0, T-1]. All
    four box parameters interpolate independently; after the last key the
    sequence holds constant.
    """
    keys = list(keys)
    if not keys:
        raise EmptyKeys("no keyframes given")
    idx = [k.frame_index for k in keys]
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise UnsortedKeys(f"keyframe indices not strictly increasing: {idx}")
    if idx[0] != 0:
        raise KeyOutOfRange("first keyframe must sit at frame 0")
    if idx[-1] > frames - 1 or idx[0] < 0:
        raise KeyOutOfRange(f"keyframe index outside [0, {frames - 1}]")

    vals = np.stack([k.box.as_array() for k in keys])
    out = np.empty((frames, 4), dtype=np.float64)
    t = np.arange(frames)
    for col in range(4):
        out[:, col] = np.interp(t, idx, vals[:, col])
    # np.interp already clamps right of the last key to its value.
    return BoxSequence.from_array(out)


def perturb_sequence(
    seq: BoxSequence, jitter_sigma: float, drift_sigma: float, seed: int
) -> BoxSequence:
    """Noisy copy of a box sequence: iid jitter plus a random-walk drift.

    Drift starts at zero on frame 0 and accumulates per frame, modeling a
    slowly wandering error; jitter is independent per frame and channel.
    """
    arr = seq.as_array()
    frames = arr.shape[0]
    rng = np.random.default_rng(seed)
    jitter = rng.normal(0.0, jitter_sigma, size=(frames, 4))
    steps = rng.normal(0.0, drift_sigma, size=(frames, 4))
    steps[0] = 0.0
    drift = np.cumsum(steps, axis=0)
    return BoxSequence.from_array(arr + jitter + drift)

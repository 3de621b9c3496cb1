"""Velocity-field transformer conditioned on first-frame view data.

The model takes noised target boxes for T frames plus three conditioning
streams (the dense first-frame-view box trajectory, DCT-encoded point
tracks, a coarse inverse-depth context image) and predicts per-frame box
velocities. Conditioning on the diffusion time uses adaLN-Zero: each block
derives shift/scale/gate triples for attention and MLP branches from the
timestep embedding through a zero-initialized linear layer, so a fresh
model is the identity over tokens and outputs exactly zero velocity through
the zero-initialized head.

Token layout (one sequence, learned positional embeddings):

    [ T frame tokens | G*G track tokens | context patch tokens ]

Frame tokens embed the noised box and add the embedded first-frame-view box
of the same frame index. Each conditioning stream owns a learned null token
that replaces its content when the stream is dropped, which is used both
for classifier-free-style dropout during training and for ablations.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from . import checkpoint as ckpt
from .errors import ConfigMismatch, ShapeMismatch, UnknownStream

STREAMS = ("trajectories", "context", "b_ref")

DIRECTIONS = ("f2v", "v2f")


@dataclass(frozen=True)
class DitConfig:
    layers: int = 8
    model_dim: int = 128
    heads: int = 4
    frames: int = 24
    grid: int = 12
    dct_order: int = 20
    context_res: int = 16
    context_patch: int = 4
    mlp_ratio: int = 4
    direction: str = "f2v"
    drop_trajectories: float = 0.1
    drop_context: float = 0.1
    drop_b_ref: float = 0.05

    def __post_init__(self):
        if self.model_dim % self.heads:
            raise ValueError("model_dim must divide evenly into heads")
        if self.context_res % self.context_patch:
            raise ValueError("context_res must be a multiple of context_patch")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        if self.layers < 1 or self.frames < 1 or self.grid < 1:
            raise ValueError("layers, frames and grid must be positive")

    @property
    def context_tokens(self) -> int:
        return (self.context_res // self.context_patch) ** 2

    @property
    def patch_features(self) -> int:
        return self.context_patch**2

    @property
    def track_tokens(self) -> int:
        return self.grid * self.grid

    @property
    def token_count(self) -> int:
        return self.frames + self.track_tokens + self.context_tokens

    def to_dict(self) -> dict:
        return {
            "layers": self.layers,
            "model_dim": self.model_dim,
            "heads": self.heads,
            "frames": self.frames,
            "grid": self.grid,
            "dct_order": self.dct_order,
            "context_res": self.context_res,
            "context_patch": self.context_patch,
            "mlp_ratio": self.mlp_ratio,
            "direction": self.direction,
            "drop_trajectories": self.drop_trajectories,
            "drop_context": self.drop_context,
            "drop_b_ref": self.drop_b_ref,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DitConfig":
        return cls(**d)


@dataclass(frozen=True)
class ModelInputs:
    """Conditioning bundle for one sample.

    b_ref: (T, 4) boxes of the conditioning view, frame-aligned.
    dct_tokens: (G*G, 2K) track coefficients, row-major over the grid.
    context0: (context_res, context_res) inverse depths.
    dropped: conditioning streams to replace with their null token.
    """

    b_ref: np.ndarray
    dct_tokens: np.ndarray
    context0: np.ndarray
    dropped: frozenset = field(default_factory=frozenset)


def drop_condition(stream: str, inputs: ModelInputs) -> ModelInputs:
    """Mark one conditioning stream as dropped (replaced by its null token)."""
    if stream not in STREAMS:
        raise UnknownStream(f"unknown conditioning stream {stream!r}")
    return replace(inputs, dropped=inputs.dropped | {stream})


def sinusoidal_embedding(t: np.ndarray, dim: int, scale: float = 1000.0) -> np.ndarray:
    """Classic sin/cos features of scaled diffusion time, shape (B, dim)."""
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    ang = np.asarray(t, dtype=np.float64)[:, None] * scale * freqs[None, :]
    out = np.concatenate([np.sin(ang), np.cos(ang)], axis=1)
    if dim % 2:
        out = np.concatenate([out, np.zeros((out.shape[0], 1))], axis=1)
    return out


def patchify(context: np.ndarray, patch: int) -> np.ndarray:
    """(B, R, R) -> (B, (R/patch)^2, patch^2), row-major over patches."""
    b, r, _ = context.shape
    g = r // patch
    x = context.reshape(b, g, patch, g, patch)
    x = x.transpose(0, 1, 3, 2, 4)
    return x.reshape(b, g * g, patch * patch)


class VelocityDit:
    """adaLN-Zero transformer predicting per-frame box velocities."""

    def __init__(self, config: DitConfig, seed: int = 0, dtype=np.float32):
        self.config = config
        self.dtype = dtype
        rng = np.random.default_rng(seed)
        d = config.model_dim
        k2 = 2 * config.dct_order
        pf = config.patch_features
        n = config.token_count

        def init(*shape, std=0.02):
            return ad.parameter(rng.normal(0.0, std, size=shape), dtype=dtype)

        def zeros(*shape):
            return ad.parameter(np.zeros(shape), dtype=dtype)

        p = {}
        p["embed_box.w"] = init(4, d)
        p["embed_box.b"] = zeros(d)
        p["embed_ref.w"] = init(4, d)
        p["embed_ref.b"] = zeros(d)
        p["embed_traj.w"] = init(k2, d)
        p["embed_traj.b"] = zeros(d)
        p["embed_ctx.w"] = init(pf, d)
        p["embed_ctx.b"] = zeros(d)
        p["null_traj"] = init(d)
        p["null_ctx"] = init(d)
        p["null_ref"] = init(d)
        p["pos"] = init(n, d)
        p["time.w1"] = init(d, d)
        p["time.b1"] = zeros(d)
        p["time.w2"] = init(d, d)
        p["time.b2"] = zeros(d)
        for i in range(config.layers):
            pre = f"blocks.{i}."
            p[pre + "attn.wq"] = init(d, d)
            p[pre + "attn.bq"] = zeros(d)
            p[pre + "attn.wk"] = init(d, d)
            p[pre + "attn.bk"] = zeros(d)
            p[pre + "attn.wv"] = init(d, d)
            p[pre + "attn.bv"] = zeros(d)
            p[pre + "attn.wo"] = init(d, d)
            p[pre + "attn.bo"] = zeros(d)
            p[pre + "mlp.w1"] = init(d, config.mlp_ratio * d)
            p[pre + "mlp.b1"] = zeros(config.mlp_ratio * d)
            p[pre + "mlp.w2"] = init(config.mlp_ratio * d, d)
            p[pre + "mlp.b2"] = zeros(d)
            # adaLN-Zero: modulation starts at zero so the block is identity.
            p[pre + "ada.w"] = zeros(d, 6 * d)
            p[pre + "ada.b"] = zeros(6 * d)
        p["final.ada.w"] = zeros(d, 2 * d)
        p["final.ada.b"] = zeros(2 * d)
        p["head.w"] = zeros(d, 4)
        p["head.b"] = zeros(4)
        self.params = p

        one = np.ones(d, dtype=dtype)
        self._unit_gain = ad.Tensor(one)
        self._zero_bias = ad.Tensor(np.zeros(d, dtype=dtype))

    # ------------------------------------------------------------ plumbing

    def parameters(self):
        return list(self.params.values())

    def named_parameters(self):
        return dict(self.params)

    def _const(self, arr) -> ad.Tensor:
        return ad.Tensor(np.asarray(arr, dtype=self.dtype))

    def _expand(self, t2: ad.Tensor, b: int, n: int) -> ad.Tensor:
        """(B, D) -> (B, N, D) for modulation broadcast."""
        d = self.config.model_dim
        return ad.broadcast_to(ad.reshape(t2, (b, 1, d)), (b, n, d))

    def _modulate(self, h: ad.Tensor, shift: ad.Tensor, scl: ad.Tensor, b, n) -> ad.Tensor:
        scl1 = ad.add(self._expand(scl, b, n), 1.0)
        return ad.add(ad.mul(h, scl1), self._expand(shift, b, n))

    def _blend_null(self, tok: ad.Tensor, null_name: str, mask: np.ndarray) -> ad.Tensor:
        """Per-sample replacement of token content by the stream's null token."""
        if not mask.any():
            return tok
        b, n, d = tok.shape
        keep = self._const((1.0 - mask).reshape(b, 1, 1))
        drop = self._const(mask.reshape(b, 1, 1))
        null = ad.reshape(self.params[null_name], (1, 1, d))
        kept = ad.mul(tok, ad.broadcast_to(keep, (b, n, d)))
        filled = ad.mul(
            ad.broadcast_to(null, (b, n, d)), ad.broadcast_to(drop, (b, n, d))
        )
        return ad.add(kept, filled)

    # ------------------------------------------------------------ forward

    def _time_embedding(self, t: np.ndarray) -> ad.Tensor:
        p = self.params
        feats = self._const(sinusoidal_embedding(t, self.config.model_dim))
        h = ad.add(ad.matmul(feats, p["time.w1"]), p["time.b1"])
        h = ad.gelu(h)
        return ad.add(ad.matmul(h, p["time.w2"]), p["time.b2"])

    def _attention(self, h: ad.Tensor, i: int) -> ad.Tensor:
        cfg = self.config
        p = self.params
        b, n, d = h.shape
        nh = cfg.heads
        dh = d // nh
        pre = f"blocks.{i}.attn."

        def split_heads(x):
            x = ad.reshape(x, (b, n, nh, dh))
            x = ad.transpose(x, (0, 2, 1, 3))
            return ad.reshape(x, (b * nh, n, dh))

        q = split_heads(ad.add(ad.matmul(h, p[pre + "wq"]), p[pre + "bq"]))
        k = split_heads(ad.add(ad.matmul(h, p[pre + "wk"]), p[pre + "bk"]))
        v = split_heads(ad.add(ad.matmul(h, p[pre + "wv"]), p[pre + "bv"]))
        scores = ad.scale(ad.matmul(q, ad.transpose(k, (0, 2, 1))), 1.0 / math.sqrt(dh))
        mix = ad.matmul(ad.softmax(scores), v)
        mix = ad.reshape(mix, (b, nh, n, dh))
        mix = ad.transpose(mix, (0, 2, 1, 3))
        mix = ad.reshape(mix, (b, n, d))
        return ad.add(ad.matmul(mix, p[pre + "wo"]), p[pre + "bo"])

    def _block(self, h: ad.Tensor, mods: list, i: int) -> ad.Tensor:
        cfg = self.config
        p = self.params
        b, n, d = h.shape
        sh1, sc1, g1, sh2, sc2, g2 = mods
        hn = ad.layer_norm(h, self._unit_gain, self._zero_bias)
        attn = self._attention(self._modulate(hn, sh1, sc1, b, n), i)
        h = ad.add(h, ad.mul(attn, self._expand(g1, b, n)))
        hn = ad.layer_norm(h, self._unit_gain, self._zero_bias)
        hm = self._modulate(hn, sh2, sc2, b, n)
        pre = f"blocks.{i}.mlp."
        m = ad.gelu(ad.add(ad.matmul(hm, p[pre + "w1"]), p[pre + "b1"]))
        m = ad.add(ad.matmul(m, p[pre + "w2"]), p[pre + "b2"])
        return ad.add(h, ad.mul(m, self._expand(g2, b, n)))

    def forward_batch(
        self,
        x_t: np.ndarray,
        t: np.ndarray,
        inputs: list,
        drop_masks: dict = None,
    ) -> ad.Tensor:
        """Batched velocity prediction; returns a (B, T, 4) graph tensor.

        drop_masks maps stream name to a (B,) 0/1 float array and overrides
        the per-sample `dropped` sets when given (training-time dropout).
        """
        cfg = self.config
        p = self.params
        x_t = np.asarray(x_t, dtype=self.dtype)
        if x_t.ndim != 3 or x_t.shape[1] != cfg.frames or x_t.shape[2] != 4:
            raise ShapeMismatch(f"x_t must be (B, {cfg.frames}, 4), got {x_t.shape}")
        b = x_t.shape[0]
        if len(inputs) != b:
            raise ShapeMismatch("inputs list must match the batch size")

        b_ref = np.stack([inp.b_ref for inp in inputs]).astype(self.dtype)
        dct = np.stack([inp.dct_tokens for inp in inputs]).astype(self.dtype)
        context = np.stack([inp.context0 for inp in inputs]).astype(self.dtype)
        if b_ref.shape != (b, cfg.frames, 4):
            raise ShapeMismatch(f"b_ref batch shape {b_ref.shape}")
        if dct.shape != (b, cfg.track_tokens, 2 * cfg.dct_order):
            raise ShapeMismatch(f"dct batch shape {dct.shape}")
        if context.shape != (b, cfg.context_res, cfg.context_res):
            raise ShapeMismatch(f"context batch shape {context.shape}")

        if drop_masks is None:
            drop_masks = {
                s: np.array([1.0 if s in inp.dropped else 0.0 for inp in inputs])
                for s in STREAMS
            }

        xt_tok = ad.add(ad.matmul(self._const(x_t), p["embed_box.w"]), p["embed_box.b"])
        ref_tok = ad.add(ad.matmul(self._const(b_ref), p["embed_ref.w"]), p["embed_ref.b"])
        ref_tok = self._blend_null(ref_tok, "null_ref", drop_masks["b_ref"])
        frame_tok = ad.add(xt_tok, ref_tok)

        traj_tok = ad.add(ad.matmul(self._const(dct), p["embed_traj.w"]), p["embed_traj.b"])
        traj_tok = self._blend_null(traj_tok, "null_traj", drop_masks["trajectories"])

        patches = patchify(context, cfg.context_patch)
        ctx_tok = ad.add(ad.matmul(self._const(patches), p["embed_ctx.w"]), p["embed_ctx.b"])
        ctx_tok = self._blend_null(ctx_tok, "null_ctx", drop_masks["context"])

        tokens = ad.concat([frame_tok, traj_tok, ctx_tok], axis=1)
        n = cfg.token_count
        pos = ad.broadcast_to(ad.reshape(p["pos"], (1, n, cfg.model_dim)), (b, n, cfg.model_dim))
        h = ad.add(tokens, pos)

        temb = self._time_embedding(np.asarray(t, dtype=np.float64))
        tact = ad.gelu(temb)
        for i in range(cfg.layers):
            mod = ad.add(
                ad.matmul(tact, p[f"blocks.{i}.ada.w"]), p[f"blocks.{i}.ada.b"]
            )
            mods = [
                ad.slice_along(mod, 1, j * cfg.model_dim, (j + 1) * cfg.model_dim)
                for j in range(6)
            ]
            h = self._block(h, mods, i)

        fmod = ad.add(ad.matmul(tact, p["final.ada.w"]), p["final.ada.b"])
        fsh = ad.slice_along(fmod, 1, 0, cfg.model_dim)
        fsc = ad.slice_along(fmod, 1, cfg.model_dim, 2 * cfg.model_dim)
        hn = ad.layer_norm(h, self._unit_gain, self._zero_bias)
        hf = self._modulate(hn, fsh, fsc, b, n)
        out = ad.add(ad.matmul(hf, p["head.w"]), p["head.b"])
        return ad.slice_along(out, 1, 0, cfg.frames)

    def forward(self, x_t: np.ndarray, t: float, inputs: ModelInputs) -> np.ndarray:
        """Single-sample velocity prediction, returns (T, 4) numpy."""
        with ad.no_grad():
            out = self.forward_batch(
                np.asarray(x_t)[None], np.array([t]), [inputs]
            )
        return out.data[0].copy()

    # ------------------------------------------------------------ persistence

    def save(self, path, step: int = 0):
        arrays = {name: t.data for name, t in self.params.items()}
        ckpt.save_checkpoint(path, {"model": self.config.to_dict()}, arrays, step=step)

    @classmethod
    def load(cls, path) -> tuple:
        """Returns (model, step)."""
        config, arrays = ckpt.load_checkpoint(path)
        if "model" not in config:
            raise ConfigMismatch("checkpoint lacks a model config")
        cfg = DitConfig.from_dict(config["model"])
        model = cls(cfg, seed=0)
        if set(arrays) != set(model.params):
            missing = set(model.params) ^ set(arrays)
            raise ConfigMismatch(f"checkpoint parameter names mismatch: {sorted(missing)[:4]}")
        for name, arr in arrays.items():
            if model.params[name].data.shape != arr.shape:
                raise ConfigMismatch(
                    f"parameter {name} has shape {arr.shape}, expected {model.params[name].data.shape}"
                )
            model.params[name].data = arr.astype(model.dtype)
        return model, int(config.get("step", 0))

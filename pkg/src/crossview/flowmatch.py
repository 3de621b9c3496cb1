"""Flow matching over box trajectories.

Training regresses the velocity of the straight-line interpolant

    x_t = (1 - t) * x0 + t * x1,     x0 ~ N(0, I),  t ~ U[0, 1]

whose target velocity x1 - x0 does not depend on t. Sampling integrates
the learned field with fixed-step Euler from pure noise at t = 0 to a box
sequence at t = 1. Box features stay in raw normalized units throughout;
there is no whitening stage.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import metrics
from .errors import EmptyDataset, ShapeMismatch
from .model import STREAMS, ModelInputs, VelocityDit


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 4000
    lr: float = 1.2e-4
    weight_decay: float = 0.01
    batch_size: int = 16
    seed: int = 0
    eval_every: int = 500
    eval_samples: int = 16
    condition_dropout: tuple = None  # (trajectories, context, b_ref); None = model config


@dataclass(frozen=True)
class SampleConfig:
    num_steps: int = 28
    seed: int = 0
    clamp_output: bool = False


@dataclass(frozen=True)
class TrainSample:
    """One supervised pair: conditioning plus the target box sequence."""

    x1: np.ndarray  # (T, 4)
    inputs: ModelInputs


@dataclass
class TrainResult:
    model: VelocityDit
    curve: list  # (step, loss, eval_iou-or-nan) tuples
    final_eval_iou: float


def interpolant(x0: np.ndarray, x1: np.ndarray, t) -> np.ndarray:
    """Linear path between noise and data; t scalar or per-batch (B,)."""
    x0 = np.asarray(x0)
    x1 = np.asarray(x1)
    if x0.shape != x1.shape:
        raise ShapeMismatch(f"interpolant endpoints {x0.shape} vs {x1.shape}")
    t_arr = np.asarray(t, dtype=x0.dtype)
    if t_arr.ndim == 0:
        pass
    elif t_arr.shape == (x0.shape[0],):
        t_arr = t_arr.reshape((-1,) + (1,) * (x0.ndim - 1))
    else:
        raise ShapeMismatch(f"t of shape {t_arr.shape} for batch {x0.shape}")
    return (1.0 - t_arr) * x0 + t_arr * x1


def velocity_target(x0: np.ndarray, x1: np.ndarray) -> np.ndarray:
    """The regression target of the straight interpolant (t-independent)."""
    if np.asarray(x0).shape != np.asarray(x1).shape:
        raise ShapeMismatch("velocity endpoints disagree in shape")
    return np.asarray(x1) - np.asarray(x0)


def loss(model, batch, rng=None, draws=None, drop_masks=None) -> ad.Tensor:
    """Flow-matching loss for one batch; returns a scalar graph tensor.

    Noise x0 and times t come from `draws=(x0, t)` when given (tests pin
    them), otherwise from `rng`. Mean is over every tensor component, so a
    model predicting zero on unit-variance targets scores about 1.0 per
    component.
    """
    batch = list(batch)
    if not batch:
        raise EmptyDataset("loss needs at least one sample")
    x1 = np.stack([s.x1 for s in batch]).astype(np.float32)
    if draws is not None:
        x0, t = draws
        x0 = np.asarray(x0, dtype=np.float32)
        t = np.asarray(t, dtype=np.float64)
    else:
        if rng is None:
            raise ValueError("loss needs rng or draws")
        x0 = rng.standard_normal(x1.shape).astype(np.float32)
        t = rng.uniform(0.0, 1.0, size=len(batch))
    if x0.shape != x1.shape or t.shape != (len(batch),):
        raise ShapeMismatch("draws do not match the batch")

    x_t = interpolant(x0, x1, t)
    v = model.forward_batch(x_t, t, [s.inputs for s in batch], drop_masks=drop_masks)
    target = velocity_target(x0, x1)
    diff = ad.add(v, ad.Tensor(-target))
    return ad.scale(ad.sum_of_squares(diff), 1.0 / target.size)


def _dropout_masks(probs, batch_size, rng) -> dict:
    return {
        s: (rng.uniform(size=batch_size) < p).astype(np.float64)
        for s, p in zip(STREAMS, probs)
    }


def _batches(n, batch_size, steps, rng):
    """Seeded epoch shuffling, full batches only."""
    while True:
        perm = rng.permutation(n)
        for lo in range(0, n - batch_size + 1, batch_size):
            yield perm[lo : lo + batch_size]


def train(model: VelocityDit, train_set, cfg: TrainConfig, val_set=None) -> TrainResult:
    """Optimize the velocity field; returns the model and the loss curve.

    Fully deterministic for a fixed config, dataset order, and backend:
    one seeded generator drives shuffling, noise, times, and conditioning
    dropout in a fixed order; evaluation uses its own derived seed so it
    cannot perturb the training stream.

    When a validation set is given, the model is left at the weights of
    the best periodic validation score rather than the last step; the
    mini-batch loss late in training is noisy enough that the final step
    is a poor snapshot choice.
    """
    train_set = list(train_set)
    if not train_set:
        raise EmptyDataset("empty training set")
    if cfg.batch_size > len(train_set):
        raise EmptyDataset(
            f"batch size {cfg.batch_size} exceeds dataset size {len(train_set)}"
        )
    probs = cfg.condition_dropout or (
        model.config.drop_trajectories,
        model.config.drop_context,
        model.config.drop_b_ref,
    )
    params = model.parameters()
    opt = ad.AdamW(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    rng = np.random.default_rng(cfg.seed)
    batches = _batches(len(train_set), cfg.batch_size, cfg.steps, rng)

    curve = []
    eval_iou = float("nan")
    best_iou = -np.inf
    best_state = None
    for step in range(1, cfg.steps + 1):
        idx = next(batches)
        batch = [train_set[i] for i in idx]
        x0 = rng.standard_normal((len(batch),) + batch[0].x1.shape).astype(np.float32)
        t = rng.uniform(0.0, 1.0, size=len(batch))
        masks = _dropout_masks(probs, len(batch), rng)
        step_loss = loss(model, batch, draws=(x0, t), drop_masks=masks)
        ad.backward(step_loss, params=params)
        opt.step()
        opt.zero_grad()

        row_eval = float("nan")
        if val_set and (step % cfg.eval_every == 0 or step == cfg.steps):
            eval_iou = _eval_iou(model, val_set, cfg)
            row_eval = eval_iou
            if eval_iou > best_iou:
                best_iou = eval_iou
                best_state = {n: t.data.copy() for n, t in model.params.items()}
        curve.append((step, float(step_loss.data), row_eval))
    if best_state is not None:
        for name, tensor in model.params.items():
            tensor.data[...] = best_state[name]
        eval_iou = best_iou
    return TrainResult(model=model, curve=curve, final_eval_iou=eval_iou)


def _eval_iou(model, val_set, cfg: TrainConfig) -> float:
    subset = list(val_set)[: cfg.eval_samples]
    preds = sample_batch(
        model,
        [s.inputs for s in subset],
        SampleConfig(seed=cfg.seed + 1),
    )
    vals = [
        metrics.iou_frames(pred, s.x1).mean() for pred, s in zip(preds, subset)
    ]
    return float(np.mean(vals))


def sample(model, inputs: ModelInputs, cfg: SampleConfig) -> np.ndarray:
    """Draw one box trajectory, shape (T, 4)."""
    return sample_batch(model, [inputs], cfg)[0]


def sample_batch(model, inputs_list, cfg: SampleConfig) -> np.ndarray:
    """Euler integration of the velocity field from seeded noise, (B, T, 4)."""
    inputs_list = list(inputs_list)
    if not inputs_list:
        raise EmptyDataset("nothing to sample")
    mcfg = model.config
    rng = np.random.default_rng(cfg.seed)
    x = rng.standard_normal((len(inputs_list), mcfg.frames, 4)).astype(np.float32)
    dt = 1.0 / cfg.num_steps
    with ad.no_grad():
        for k in range(cfg.num_steps):
            t = np.full(len(inputs_list), k * dt)
            v = model.forward_batch(x, t, inputs_list)
            x = x + dt * v.data
    out = x.astype(np.float64)
    if cfg.clamp_output:
        out = np.clip(out, 0.0, 1.0)
    return out


def export_curve_csv(curve, path):
    """Write the training curve as step,loss,eval_iou rows."""
    with open(path, "w") as f:
        f.write("step,loss,eval_iou\n")
        for step, value, eval_iou in curve:
            tail = "" if np.isnan(eval_iou) else f"{eval_iou:.6f}"
            f.write(f"{step},{value:.6f},{tail}\n")

"""Hot elementwise kernels with two interchangeable backends.

The compiled backend uses numba's @njit; the reference backend is pure
numpy. Selection happens once at import time:

* env var ``CROSSVIEW_NUMBA=0`` (or "false"/"no") forces the numpy path,
* otherwise numba is used when importable, numpy when not.

Matrix multiplies are deliberately not here: numpy already dispatches
them to BLAS, which is the fastest option on this hardware. The kernels
below are the elementwise/reduction-heavy pieces that sit between the
matmuls (layer norm, softmax, gelu, AdamW updates).

Each backend is deterministic with respect to itself: reductions run in
a fixed order, fastmath stays off. Outputs of the two backends agree to
float rounding, not bitwise.
"""

import os

import numpy as np

_C0 = 0.7978845608028654  # sqrt(2/pi)
_C1 = 0.044715

_env = os.environ.get("CROSSVIEW_NUMBA", "1").strip().lower()
_WANT_NUMBA = _env not in ("0", "false", "no")

try:
    if _WANT_NUMBA:
        from numba import njit

        HAS_NUMBA = True
    else:
        HAS_NUMBA = False
except ImportError:
    HAS_NUMBA = False

USE_NUMBA = _WANT_NUMBA and HAS_NUMBA


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------- numpy path


def _np_layernorm_fwd(x, gain, bias, eps):
    mean = x.mean(axis=-1, keepdims=True)
    var = np.square(x - mean).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv_std
    return xhat * gain + bias, xhat, inv_std[..., 0]


def _np_layernorm_bwd(xhat, inv_std, gain, gy):
    d = xhat.shape[-1]
    dxhat = gy * gain
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = (dxhat - m1 - xhat * m2) * inv_std[..., None]
    dgain = (gy * xhat).reshape(-1, d).sum(axis=0)
    dbias = gy.reshape(-1, d).sum(axis=0)
    return dx, dgain, dbias


def _np_softmax_fwd(x):
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _np_softmax_bwd(y, gy):
    inner = (y * gy).sum(axis=-1, keepdims=True)
    return y * (gy - inner)


def _np_gelu_fwd(x):
    t = np.tanh(_C0 * (x + _C1 * x * x * x))
    return 0.5 * x * (1.0 + t)


def _np_gelu_bwd(x, gy):
    u = _C0 * (x + _C1 * x * x * x)
    t = np.tanh(u)
    du = _C0 * (1.0 + 3.0 * _C1 * x * x)
    return gy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)


def _np_adamw(p, g, m, v, step, lr, beta1, beta2, eps, wd):
    # Decoupled decay first, then the bias-corrected Adam step.
    p *= 1.0 - lr * wd
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    c1 = 1.0 - beta1**step
    c2 = 1.0 - beta2**step
    p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


# ---------------------------------------------------------------- numba path

if USE_NUMBA:

    @njit(cache=True)
    def _nb_layernorm_fwd(x, gain, bias, eps):
        rows, d = x.shape
        y = np.empty_like(x)
        xhat = np.empty_like(x)
        inv_std = np.empty(rows, dtype=x.dtype)
        for r in range(rows):
            s = 0.0
            for c in range(d):
                s += x[r, c]
            mean = s / d
            q = 0.0
            for c in range(d):
                dv = x[r, c] - mean
                q += dv * dv
            istd = 1.0 / np.sqrt(q / d + eps)
            inv_std[r] = istd
            for c in range(d):
                h = (x[r, c] - mean) * istd
                xhat[r, c] = h
                y[r, c] = h * gain[c] + bias[c]
        return y, xhat, inv_std

    @njit(cache=True)
    def _nb_layernorm_bwd(xhat, inv_std, gain, gy):
        rows, d = xhat.shape
        dx = np.empty_like(xhat)
        dgain = np.zeros(d, dtype=xhat.dtype)
        dbias = np.zeros(d, dtype=xhat.dtype)
        for r in range(rows):
            m1 = 0.0
            m2 = 0.0
            for c in range(d):
                dh = gy[r, c] * gain[c]
                m1 += dh
                m2 += dh * xhat[r, c]
            m1 /= d
            m2 /= d
            for c in range(d):
                dh = gy[r, c] * gain[c]
                dx[r, c] = (dh - m1 - xhat[r, c] * m2) * inv_std[r]
                dgain[c] += gy[r, c] * xhat[r, c]
                dbias[c] += gy[r, c]
        return dx, dgain, dbias

    @njit(cache=True)
    def _nb_softmax_fwd(x):
        rows, d = x.shape
        y = np.empty_like(x)
        for r in range(rows):
            hi = x[r, 0]
            for c in range(1, d):
                if x[r, c] > hi:
                    hi = x[r, c]
            s = 0.0
            for c in range(d):
                e = np.exp(x[r, c] - hi)
                y[r, c] = e
                s += e
            for c in range(d):
                y[r, c] /= s
        return y

    @njit(cache=True)
    def _nb_softmax_bwd(y, gy):
        rows, d = y.shape
        dx = np.empty_like(y)
        for r in range(rows):
            inner = 0.0
            for c in range(d):
                inner += y[r, c] * gy[r, c]
            for c in range(d):
                dx[r, c] = y[r, c] * (gy[r, c] - inner)
        return dx

    @njit(cache=True)
    def _nb_gelu_fwd(x):
        n = x.shape[0]
        y = np.empty_like(x)
        for i in range(n):
            v = x[i]
            t = np.tanh(_C0 * (v + _C1 * v * v * v))
            y[i] = 0.5 * v * (1.0 + t)
        return y

    @njit(cache=True)
    def _nb_gelu_bwd(x, gy):
        n = x.shape[0]
        dx = np.empty_like(x)
        for i in range(n):
            v = x[i]
            u = _C0 * (v + _C1 * v * v * v)
            t = np.tanh(u)
            du = _C0 * (1.0 + 3.0 * _C1 * v * v)
            dx[i] = gy[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du)
        return dx

    @njit(cache=True)
    def _nb_adamw(p, g, m, v, step, lr, beta1, beta2, eps, wd):
        n = p.shape[0]
        c1 = 1.0 - beta1**step
        c2 = 1.0 - beta2**step
        decay = 1.0 - lr * wd
        for i in range(n):
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
            p[i] = decay * p[i] - lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + eps)


# ------------------------------------------------------------- public facade
# Rank-polymorphic wrappers: kernels see 2D (rows, features) or flat 1D.


def _rows(x):
    return x.reshape(-1, x.shape[-1])


def layernorm_fwd(x, gain, bias, eps=1e-5):
    x2 = _rows(x)
    if USE_NUMBA:
        y, xhat, inv_std = _nb_layernorm_fwd(x2, gain, bias, eps)
    else:
        y, xhat, inv_std = _np_layernorm_fwd(x2, gain, bias, eps)
    return y.reshape(x.shape), xhat, inv_std


def layernorm_bwd(xhat, inv_std, gain, gy):
    gy2 = _rows(gy)
    if USE_NUMBA:
        dx, dg, db = _nb_layernorm_bwd(xhat, inv_std, gain, gy2)
    else:
        dx, dg, db = _np_layernorm_bwd(xhat, inv_std, gain, gy2)
    return dx.reshape(gy.shape), dg, db


def softmax_fwd(x):
    if USE_NUMBA:
        return _nb_softmax_fwd(_rows(x)).reshape(x.shape)
    return _np_softmax_fwd(x)


def softmax_bwd(y, gy):
    if USE_NUMBA:
        return _nb_softmax_bwd(_rows(y), _rows(gy)).reshape(y.shape)
    return _np_softmax_bwd(y, gy)


def gelu_fwd(x):
    if USE_NUMBA:
        return _nb_gelu_fwd(x.ravel()).reshape(x.shape)
    return _np_gelu_fwd(x)


def gelu_bwd(x, gy):
    if USE_NUMBA:
        return _nb_gelu_bwd(x.ravel(), gy.ravel()).reshape(x.shape)
    return _np_gelu_bwd(x, gy)


def adamw_update(param, grad, m, v, step, lr, beta1, beta2, eps, wd):
    """In-place AdamW on flat float arrays. `step` counts from 1."""
    if USE_NUMBA:
        _nb_adamw(param, grad, m, v, step, lr, beta1, beta2, eps, wd)
    else:
        _np_adamw(param, grad, m, v, step, lr, beta1, beta2, eps, wd)


# numpy reference implementations, importable regardless of the active
# backend (the benchmark and the cross-backend tests want both).
numpy_impls = {
    "layernorm_fwd": _np_layernorm_fwd,
    "layernorm_bwd": _np_layernorm_bwd,
    "softmax_fwd": _np_softmax_fwd,
    "softmax_bwd": _np_softmax_bwd,
    "gelu_fwd": _np_gelu_fwd,
    "gelu_bwd": _np_gelu_bwd,
    "adamw": _np_adamw,
}

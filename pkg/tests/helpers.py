"""Shared test utilities: finite-difference gradient checking."""

import numpy as np

from crossview import autodiff as ad


def fd_gradient(build, values, index, h):
    """Central finite differences of a scalar graph w.r.t. values[index].

    build(list_of_arrays) must construct a fresh graph and return the
    scalar loss tensor. Arrays are perturbed one coordinate at a time.
    """
    base = [np.array(v, dtype=np.float64) for v in values]
    grad = np.zeros_like(base[index])
    flat = grad.reshape(-1)
    src = base[index].reshape(-1)
    for i in range(flat.size):
        keep = src[i]
        src[i] = keep + h
        hi = float(build([b.copy() for b in base]).data)
        src[i] = keep - h
        lo = float(build([b.copy() for b in base]).data)
        src[i] = keep
        flat[i] = (hi - lo) / (2.0 * h)
    return grad


def analytic_gradients(build, values, dtype):
    """Backward-pass gradients of the same scalar graph at a given dtype."""
    params = [ad.parameter(np.array(v, dtype=dtype), dtype=dtype) for v in values]
    loss = build(params)
    ad.backward(loss, params=params)
    return [p.grad.astype(np.float64) for p in params]


def relative_error(analytic, reference):
    scale = np.max(np.abs(reference)) + 1e-12
    return float(np.max(np.abs(analytic - reference)) / scale)


def check_gradients(build, values, f64_tol=1e-6, f32_tol=1e-4, h=1e-6):
    """Assert analytic gradients match finite differences at both dtypes.

    build receives either plain float64 arrays (finite differencing) or
    autodiff parameters and must treat them uniformly.
    """
    def fd_build(arrays):
        params = [ad.parameter(a, dtype=np.float64) for a in arrays]
        return build(params)

    worst64 = 0.0
    worst32 = 0.0
    grads64 = analytic_gradients(build, values, np.float64)
    grads32 = analytic_gradients(build, values, np.float32)
    for idx in range(len(values)):
        ref = fd_gradient(fd_build, values, idx, h)
        e64 = relative_error(grads64[idx], ref)
        e32 = relative_error(grads32[idx], ref)
        worst64 = max(worst64, e64)
        worst32 = max(worst32, e32)
        assert e64 < f64_tol, f"float64 gradient {idx}: rel err {e64:.3g} >= {f64_tol}"
        assert e32 < f32_tol, f"float32 gradient {idx}: rel err {e32:.3g} >= {f32_tol}"
    return worst64, worst32

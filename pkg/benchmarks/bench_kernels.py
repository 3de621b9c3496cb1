"""Compare the compiled and pure-numpy kernel backends on training shapes.

Each backend runs in a subprocess so the import-time backend choice is
honored:

    python3 benchmarks/bench_kernels.py

Shapes mirror one desk-scale training step: batch 16, 208 tokens, width
64. Matrix multiplies stay on BLAS in both backends, so the rows here are
the elementwise and reduction kernels the backend flag actually switches.
"""

import json
import os
import subprocess
import sys
import time


def _bench_one_backend():
    import numpy as np

    from crossview import kernels

    rng = np.random.default_rng(0)
    b, tokens, dim = 16, 208, 64
    x = rng.standard_normal((b, tokens, dim)).astype(np.float32)
    gy = rng.standard_normal(x.shape).astype(np.float32)
    gain = rng.standard_normal(dim).astype(np.float32)
    bias = rng.standard_normal(dim).astype(np.float32)
    scores = rng.standard_normal((b, 4, tokens, tokens)).astype(np.float32)
    gs = rng.standard_normal(scores.shape).astype(np.float32)
    p1 = rng.standard_normal(dim * dim).astype(np.float32)
    g1 = rng.standard_normal(dim * dim).astype(np.float32)
    m1 = np.zeros_like(p1)
    v1 = np.zeros_like(p1)

    _, xhat, inv_std = kernels.layernorm_fwd(x, gain, bias)
    probs = kernels.softmax_fwd(scores)

    cases = {
        "layernorm_fwd": lambda: kernels.layernorm_fwd(x, gain, bias),
        "layernorm_bwd": lambda: kernels.layernorm_bwd(xhat, inv_std, gain, gy),
        "softmax_fwd": lambda: kernels.softmax_fwd(scores),
        "softmax_bwd": lambda: kernels.softmax_bwd(probs, gs),
        "gelu_fwd": lambda: kernels.gelu_fwd(x),
        "gelu_bwd": lambda: kernels.gelu_bwd(x, gy),
        "adamw_update": lambda: kernels.adamw_update(
            p1, g1, m1, v1, 3, 1e-3, 0.9, 0.999, 1e-8, 0.01
        ),
    }

    results = {}
    for name, fn in cases.items():
        fn()  # warm up (and compile, on the accelerated backend)
        reps = 30
        t0 = time.perf_counter()
        for _ in range(reps):
            fn()
        results[name] = (time.perf_counter() - t0) / reps * 1e3
    return kernels.backend_name(), results


def main():
    if os.environ.get("_BENCH_CHILD"):
        backend, results = _bench_one_backend()
        print(json.dumps({"backend": backend, "results": results}))
        return

    rows = {}
    order = []
    for flag in ("1", "0"):
        env = dict(os.environ, _BENCH_CHILD="1", CROSSVIEW_NUMBA=flag)
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__)],
            capture_output=True,
            text=True,
            env=env,
        )
        if proc.returncode != 0:
            sys.stderr.write(proc.stderr)
            raise SystemExit(2)
        payload = json.loads(proc.stdout.splitlines()[-1])
        rows[payload["backend"]] = payload["results"]
        order.append(payload["backend"])

    names = list(rows[order[0]])
    width = max(len(n) for n in names)
    header = f"{'kernel':<{width}}  " + "  ".join(f"{b + ' (ms)':>12}" for b in order)
    print(header)
    print("-" * (len(header) + 8))
    for name in names:
        cells = "  ".join(f"{rows[b][name]:>12.3f}" for b in order)
        speedup = rows[order[-1]][name] / max(rows[order[0]][name], 1e-9)
        print(f"{name:<{width}}  {cells}  x{speedup:.1f}")


if __name__ == "__main__":
    main()

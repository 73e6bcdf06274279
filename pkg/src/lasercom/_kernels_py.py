"""Pure-Python versions of the compiled kernels (same operation order, same results)."""

from __future__ import annotations

import numpy as np


def ar1_filter(z, a: float, c: float, x_prev: float, stationary_start: bool, sigma: float) -> np.ndarray:
    zs = np.asarray(z, dtype=np.float64).tolist()
    out = [0.0] * len(zs)
    if not zs:
        return np.empty(0)
    x = sigma * zs[0] if stationary_start else a * x_prev + c * zs[0]
    out[0] = x
    for i in range(1, len(zs)):
        x = a * x + c * zs[i]
        out[i] = x
    return np.array(out, dtype=np.float64)


def span_linear_means(margin_db, span_len: int) -> np.ndarray:
    ms = np.asarray(margin_db, dtype=np.float64).tolist()
    n = len(ms)
    n_spans = (n + span_len - 1) // span_len
    out = [0.0] * n_spans
    for s in range(n_spans):
        start = s * span_len
        stop = min(start + span_len, n)
        acc = 0.0
        for i in range(start, stop):
            acc = acc + 10.0 ** (ms[i] / 10.0)
        out[s] = acc / (stop - start)
    return np.array(out, dtype=np.float64)

"""Pure-Python pool-adjacent-violators, used when the extension is absent."""

from __future__ import annotations

import numpy as np


def _pava_row(row: list[float]) -> list[float]:
    sums: list[float] = []
    counts: list[int] = []
    for v in row:
        sums.append(v)
        counts.append(1)
        while len(sums) > 1 and sums[-2] * counts[-1] > sums[-1] * counts[-2]:
            s, c = sums.pop(), counts.pop()
            sums[-1] += s
            counts[-1] += c
    out: list[float] = []
    for s, c in zip(sums, counts):
        out.extend([s / c] * c)
    return out


def pava_rows(y) -> np.ndarray:
    """Project every row of a 2-d float array onto the nondecreasing cone."""
    y = np.ascontiguousarray(y, dtype=np.float64)
    out = np.empty_like(y)
    for r in range(y.shape[0]):
        out[r] = _pava_row(y[r].tolist())
    return out

"""Shared oracles for the test suite: slow, obviously-correct reference paths."""

import math

import numpy as np


def direct_sigma(u: np.ndarray, pw: np.ndarray, qw: np.ndarray, m: int, n: int) -> float:
    """Weighted mean of u over [0..m] x [0..n] by exact summation."""
    total = math.fsum(
        pw[i] * qw[j] * u[i, j] for i in range(m + 1) for j in range(n + 1)
    )
    return total / (math.fsum(pw[: m + 1]) * math.fsum(qw[: n + 1]))


def direct_sigma_grid(u: np.ndarray, pw: np.ndarray, qw: np.ndarray) -> np.ndarray:
    rows, cols = u.shape
    out = np.empty((rows, cols))
    for m in range(rows):
        for n in range(cols):
            out[m, n] = direct_sigma(u, pw, qw, m, n)
    return out

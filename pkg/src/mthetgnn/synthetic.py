"""Seeded synthetic series for tests and demos."""

from __future__ import annotations

import numpy as np


def linear_var(coef: np.ndarray, length: int, seed: int = 0, noise: float = 1.0, burn_in: int = 100) -> np.ndarray:
    """Simulate x_t = coef @ x_{t-1} + noise; returns an (n, length) array."""
    coef = np.asarray(coef, dtype=np.float64)
    n = coef.shape[0]
    rng = np.random.default_rng(seed)
    x = np.zeros(n)
    out = np.empty((n, length))
    for t in range(length + burn_in):
        x = coef @ x + noise * rng.standard_normal(n)
        if t >= burn_in:
            out[:, t - burn_in] = x
    return out


def planted_var(n: int = 6, edges=((0, 1), (1, 2), (3, 4), (4, 5)), self_coef: float = 0.3,
                edge_coef: float = 0.8) -> np.ndarray:
    """VAR(1) matrix with autoregression on the diagonal and ``source -> target`` edges."""
    coef = np.eye(n) * self_coef
    for src, dst in edges:
        coef[dst, src] = edge_coef
    return coef


def random_walks(n: int, length: int, seed: int = 0, step: float = 0.01, level: float = 1.0,
                 common: float = 0.5) -> np.ndarray:
    """Positive, cross-correlated random walks resembling exchange-rate series."""
    rng = np.random.default_rng(seed)
    shocks = (1 - common) * rng.standard_normal((n, length)) + common * rng.standard_normal((1, length))
    return level + np.cumsum(step * shocks, axis=1) + rng.uniform(0, 1, size=(n, 1))

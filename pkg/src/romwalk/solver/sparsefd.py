"""Finite-difference Jacobians that exploit a known sparsity pattern.

Columns whose nonzero rows do not overlap are perturbed together
(greedy column coloring), so a banded collocation Jacobian costs a few
dozen evaluations instead of 2n.
"""
from __future__ import annotations

import numpy as np


def detect_pattern(fun, z, h=1e-6, probes=2, seed=0):
    """Structural nonzeros of the Jacobian of ``fun`` near ``z``.

    Columns are probed one at a time at ``z`` and at ``probes - 1``
    randomly jittered copies; the union guards against accidental zeros.
    """
    z = np.asarray(z, float)
    rng = np.random.default_rng(seed)
    pattern = None
    for p in range(probes):
        zp = z if p == 0 else z + 1e-3 * rng.standard_normal(z.size) * np.maximum(1.0, np.abs(z))
        f0 = np.asarray(fun(zp), float)
        cols = np.zeros((f0.size, z.size), dtype=bool)
        for i in range(z.size):
            e = np.zeros_like(zp)
            e[i] = h * max(1.0, abs(zp[i]))
            cols[:, i] = np.asarray(fun(zp + e), float) != f0
        pattern = cols if pattern is None else pattern | cols
    return pattern


def color_columns(pattern):
    """Greedy coloring: columns sharing a color never share a nonzero row."""
    m, n = pattern.shape
    colors = -np.ones(n, dtype=int)
    used_rows = []
    for j in range(n):
        rows = pattern[:, j]
        for c, taken in enumerate(used_rows):
            if not np.any(taken & rows):
                colors[j] = c
                taken |= rows
                break
        else:
            colors[j] = len(used_rows)
            used_rows.append(rows.copy())
    return colors


class ColoredJacobian:
    """Central-difference Jacobian evaluated one color group at a time."""

    def __init__(self, fun, pattern, h=1e-6):
        self.fun = fun
        self.pattern = np.asarray(pattern, dtype=bool)
        self.h = h
        self.colors = color_columns(self.pattern)
        self.n_colors = int(self.colors.max(initial=-1)) + 1

    def __call__(self, z):
        z = np.asarray(z, float)
        m, n = self.pattern.shape
        J = np.zeros((m, n))
        for c in range(self.n_colors):
            cols = np.flatnonzero(self.colors == c)
            e = np.zeros(n)
            e[cols] = self.h
            d = (np.asarray(self.fun(z + e), float) - np.asarray(self.fun(z - e), float)) / (2 * self.h)
            for j in cols:
                rows = self.pattern[:, j]
                J[rows, j] = d[rows]
        return J

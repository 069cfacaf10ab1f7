"""Shared numerical helpers: stacked spline evaluation, quadrature, norms."""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import roots_legendre

__all__ = [
    "SplineStack", "gauss_legendre", "segment_gauss", "trapezoid_l2",
    "trapezoid_inner", "relative_l2_distance",
]


class SplineStack:
    """Many cubic splines on one shared breakpoint grid.

    Evaluating the whole stack at a scalar point costs one interval lookup
    plus a vectorized Horner pass; this is what makes oscillatory coefficient
    ODE right-hand sides affordable.
    """

    def __init__(self, x: np.ndarray, ys: Sequence[np.ndarray]):
        self.x = np.asarray(x, dtype=float)
        data = [np.asarray(y) for y in ys]
        splines = [CubicSpline(self.x, y) for y in data]
        # CubicSpline coefficient layout: (4, n_intervals); stack to
        # (n_funcs, 4, n_intervals)
        self.coeffs = np.stack([s.c for s in splines], axis=0)
        self.n_funcs = len(data)

    def __call__(self, x: float) -> np.ndarray:
        idx = np.searchsorted(self.x, x, side="right") - 1
        idx = min(max(idx, 0), len(self.x) - 2)
        dx = x - self.x[idx]
        c = self.coeffs[:, :, idx]
        return ((c[:, 0] * dx + c[:, 1]) * dx + c[:, 2]) * dx + c[:, 3]

    def eval_many(self, xs: np.ndarray) -> np.ndarray:
        """Evaluate the stack at many points; returns (n_funcs, len(xs))."""
        xs = np.asarray(xs, dtype=float)
        idx = np.clip(np.searchsorted(self.x, xs, side="right") - 1, 0, len(self.x) - 2)
        dx = xs - self.x[idx]
        c = self.coeffs[:, :, idx]
        return ((c[:, 0] * dx + c[:, 1]) * dx + c[:, 2]) * dx + c[:, 3]


@lru_cache(maxsize=64)
def gauss_legendre(n: int):
    nodes, weights = roots_legendre(n)
    return nodes, weights


def segment_gauss(a: float, b: float, n: int):
    """Gauss-Legendre nodes and weights mapped to [a, b]."""
    t, w = gauss_legendre(n)
    half = 0.5 * (b - a)
    return a + half * (t + 1.0), np.abs(half) * w


def trapezoid_l2(values: np.ndarray, grid: np.ndarray) -> float:
    """L2 norm over the grid; extra component axes are summed."""
    v = np.asarray(values)
    dens = np.abs(v) ** 2
    while dens.ndim > 1:
        dens = dens.sum(axis=-1)
    return float(np.sqrt(np.trapezoid(dens, grid)))


def trapezoid_inner(f: np.ndarray, g: np.ndarray, grid: np.ndarray) -> complex:
    prod = np.conj(f) * g
    while prod.ndim > 1:
        prod = prod.sum(axis=-1)
    return complex(np.trapezoid(prod, grid))


def relative_l2_distance(f: np.ndarray, g: np.ndarray, grid: np.ndarray) -> float:
    num = trapezoid_l2(np.asarray(f) - np.asarray(g), grid)
    den = max(trapezoid_l2(f, grid), trapezoid_l2(g, grid), 1e-300)
    return num / den

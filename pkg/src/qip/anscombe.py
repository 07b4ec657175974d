"""Quadric inclusion fits of Anscombe's quartet.

The four classic 11-point data sets are shifted down by 3 in ``y`` so the
ordinary least squares line passes (nearly) through the origin, and each is
fit by a scalar cone ``y = (a + b Delta c) x`` with a fixed threshold offset
``alpha Sigma = 2`` on the ``X_B`` term.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from .inclusion import DataPoint, Inclusion, inclusion_from_ssdd
from .solver import SolverConfig, SolverResult, Status, assemble, solve

_X123 = [10, 8, 13, 9, 11, 14, 6, 4, 12, 7, 5]

QUARTET: Dict[str, tuple] = {
    "a": (_X123, [8.04, 6.95, 7.58, 8.81, 8.33, 9.96, 7.24, 4.26, 10.84, 4.82, 5.68]),
    "b": (_X123, [9.14, 8.14, 8.74, 8.77, 9.26, 8.10, 6.13, 3.10, 9.13, 7.26, 4.74]),
    "c": (_X123, [7.46, 6.77, 12.74, 7.11, 7.81, 8.84, 6.08, 5.39, 8.15, 6.42, 5.73]),
    "d": ([8, 8, 8, 8, 8, 8, 8, 19, 8, 8, 8],
          [6.58, 5.76, 7.71, 8.84, 8.47, 7.04, 5.25, 12.50, 5.56, 7.91, 6.89]),
}

Y_SHIFT = -3.0


def dataset(name: str):
    x, y = QUARTET[name]
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float) + Y_SHIFT


def ols_line(x, y):
    """Slope and intercept of the ordinary least squares line."""
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


@dataclass(eq=False)
class QuartetFit:
    name: str
    x: np.ndarray
    y: np.ndarray
    result: SolverResult
    model: Inclusion
    alpha_sigma: float

    @property
    def slope(self) -> float:
        return float(self.model.A[0, 0])

    @property
    def asymptote(self) -> float:
        """Half-opening ``sqrt(X_C / X_B)`` of the degenerate cone."""
        s = self.result.ssdd
        return float(np.sqrt(s.X_C[0, 0] / s.X_B[0, 0]))

    def bounds(self, xs):
        """Hyperbolic bounds ``a x -+ sqrt((X_C/X_B) x^2 + alpha Sigma)``."""
        xs = np.asarray(xs, dtype=float)
        r = np.sqrt(self.asymptote**2 * xs**2 + self.alpha_sigma)
        return self.slope * xs - r, self.slope * xs + r

    @property
    def active(self) -> List[int]:
        return list(self.result.active_set)


def fit_dataset(name: str, alpha_sigma: float = 2.0,
                cfg: SolverConfig = None) -> QuartetFit:
    x, y = dataset(name)
    pts = [DataPoint(yi, xi) for xi, yi in zip(x, y)]
    # with Sigma = I_2 the offset matrix is 2 I, so alpha = alpha_sigma / 2
    prob = assemble(pts, np.eye(2), alpha_sigma / 2.0)
    res = solve(prob, cfg)
    if res.status is not Status.OPTIMAL:
        raise RuntimeError(f"dataset {name}: solver returned {res.status.value}")
    return QuartetFit(name, x, y, res, inclusion_from_ssdd(res.ssdd), alpha_sigma)


def fit_quartet(alpha_sigma: float = 2.0) -> List[QuartetFit]:
    return [fit_dataset(n, alpha_sigma) for n in QUARTET]

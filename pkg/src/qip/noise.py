"""Averaging of repeated complex measurements and the chi-square noise offset."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


def phi(y) -> np.ndarray:
    """Stack real parts above imaginary parts."""
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    return np.concatenate([y.real, y.imag])


def phi_inv(v) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.ndim != 1 or v.size % 2:
        raise ValueError("phi_inv needs a vector of even length")
    n = v.size // 2
    return v[:n] + 1j * v[n:]


@dataclass(frozen=True, eq=False)
class NoiseSummary:
    """Sample mean of ``phi(y)`` and the covariance of that mean."""

    mean: np.ndarray
    sigma_eta: np.ndarray
    n_samples: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).ravel()
        sig = np.asarray(self.sigma_eta, dtype=float)
        if mean.size % 2 or sig.shape != (mean.size, mean.size):
            raise ValueError("sigma_eta must be 2n_y x 2n_y for a 2n_y mean")
        sig = 0.5 * (sig + sig.T)
        if sig.size and np.linalg.eigvalsh(sig)[0] < -1e-12 * max(1.0, np.abs(sig).max()):
            raise ValueError("sigma_eta is not positive semi-definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "sigma_eta", sig)

    @property
    def n_y(self) -> int:
        return self.mean.size // 2

    @property
    def y(self) -> np.ndarray:
        """The averaged output as a complex vector."""
        return phi_inv(self.mean)

    @classmethod
    def exact(cls, y) -> "NoiseSummary":
        """A noiseless measurement."""
        m = phi(y)
        return cls(m, np.zeros((m.size, m.size)), 1)


def summarize(samples: Sequence) -> NoiseSummary:
    N = len(samples)
    if N < 2:
        raise ValueError("need at least two samples to estimate noise")
    V = np.stack([phi(s) for s in samples])
    mean = V.mean(axis=0)
    D = V - mean
    return NoiseSummary(mean, D.T @ D / (N * N - N), N)


def offset_value(sigma_eta, X_B) -> float:
    """``tr[Sigma_eta (I_2 kron X_B)]``."""
    return float(np.sum(offset_matrix(sigma_eta) * np.asarray(X_B, dtype=float)))


def offset_matrix(sigma_eta) -> np.ndarray:
    """Coefficient matrix ``S`` with ``tr[Sigma (I_2 kron X)] = <S, X>``."""
    sig = np.asarray(sigma_eta, dtype=float)
    n = sig.shape[0] // 2
    if sig.shape != (2 * n, 2 * n):
        raise ValueError("sigma_eta must be square with even size")
    return sig[:n, :n] + sig[n:, n:]


# -- regularized incomplete gamma ---------------------------------------------

_EPS = 1e-16
_TINY = 1e-300


def _gamma_p_series(a: float, x: float) -> float:
    term = total = 1.0 / a
    ap = a
    for _ in range(10_000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_cf(a: float, x: float) -> float:
    # modified Lentz evaluation of the continued fraction
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gamma_q(a: float, x: float) -> float:
    """Regularized upper incomplete gamma function ``Q(a, x)``."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x <= 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_p_series(a, x)
    return _gamma_q_cf(a, x)


def chi2_sf(value: float, dof: int) -> float:
    return gamma_q(0.5 * dof, 0.5 * value)


def chi2_threshold(n_y: int, delta: float = 0.01, tol: float = 1e-9) -> float:
    """Level ``alpha`` with ``P(chi2_{2 n_y} > alpha) = delta``."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    dof = 2 * n_y
    lo, hi = 0.0, max(1.0, float(dof))
    while chi2_sf(hi, dof) > delta:
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol * 0.25:
        mid = 0.5 * (lo + hi)
        if chi2_sf(mid, dof) > delta:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)

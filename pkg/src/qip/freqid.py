"""Frequency-domain identification with an orthonormal basis.

A simulated two-mode plant with a transport delay is measured at a grid of
frequencies under three friction conditions.  The averaged measurements are
fit by the non-degenerate quadric inclusion program and, for comparison, by
weighted least squares whose parameter covariance is inflated until it
includes the same data.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidModel, Unscalable
from .inclusion import DataPoint, Inclusion, cone_width_inclusion, inclusion_from_ssdd
from .io import FitReport
from .noise import NoiseSummary, chi2_threshold, summarize
from .solver import SolverConfig, Status, assemble, solve


# -- basis functions ------------------------------------------------------------

def lyapunov_solve(A, M) -> np.ndarray:
    """Solve ``W A + A^T W + M = 0`` through its Kronecker-vectorized form."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n = A.shape[0]
    if np.max(np.linalg.eigvals(A).real) >= 0:
        raise ValueError("A must be Hurwitz")
    I = np.eye(n)
    K = np.kron(I, A.T) + np.kron(A.T, I)
    W = np.linalg.solve(K, -M.ravel()).reshape(n, n)
    return 0.5 * (W + W.T)


@dataclass(frozen=True, eq=False)
class BasisGenerator:
    """State-space generator ``C_g (sI - A_g)^{-1} B_g`` of orthonormal outputs."""

    A_g: np.ndarray
    B_g: np.ndarray
    C_g: np.ndarray
    W_c: np.ndarray

    @property
    def order(self) -> int:
        return self.A_g.shape[0]


def _check_conjugate_closed(poles: np.ndarray) -> None:
    remaining = list(poles)
    while remaining:
        p = remaining.pop()
        if abs(p.imag) <= 1e-12 * max(1.0, abs(p)):
            continue
        dists = [abs(q - p.conjugate()) for q in remaining]
        if not dists or min(dists) > 1e-9 * max(1.0, abs(p)):
            raise ValueError(f"pole {p} has no conjugate partner")
        remaining.pop(int(np.argmin(dists)))


def make_basis(poles: Sequence[complex]) -> BasisGenerator:
    """Controllable-canonical realization with H2-orthonormalizing output map."""
    poles = np.asarray(poles, dtype=complex)
    if poles.size == 0 or np.any(poles.real >= 0):
        raise ValueError("poles must be non-empty with negative real parts")
    _check_conjugate_closed(poles)
    coeffs = np.real_if_close(np.poly(poles), tol=1e6).real
    n = poles.size
    A = np.zeros((n, n))
    A[:-1, 1:] = np.eye(n - 1)
    A[-1, :] = -coeffs[1:][::-1]
    B = np.zeros((n, 1))
    B[-1, 0] = 1.0
    # controllability Gramian: A W + W A^T + B B^T = 0
    W = lyapunov_solve(A.T, B @ B.T)
    L = np.linalg.cholesky(W)
    C = np.linalg.inv(L)
    return BasisGenerator(A, B, C, W)


def eval_basis(g: BasisGenerator, omega: float, F: complex = 1.0) -> np.ndarray:
    n = g.order
    s = 1j * omega
    return (g.C_g @ np.linalg.solve(s * np.eye(n) - g.A_g, g.B_g[:, 0])) * F


# -- plant simulation -----------------------------------------------------------

DEFAULT_POLES = [
    complex(-0.15, 0.48), complex(-0.15, -0.48),
    complex(-1.5, 4.8), complex(-1.5, -4.8),
    complex(-10.0, 0.0), complex(-50.0, 0.0),
]


@dataclass(frozen=True)
class PlantConfig:
    modes: Tuple[float, ...] = (0.5, 5.0)
    dampings: Tuple[Tuple[float, ...], ...] = ((0.1, 0.1), (0.3, 0.2), (0.05, 0.4))
    delay: float = 0.1
    gain: float = 1.0
    noise_in: float = 0.02
    noise_out: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.delay < 0:
            raise ValueError("delay must be non-negative")
        for pair in self.dampings:
            if len(pair) != len(self.modes):
                raise ValueError("one damping ratio per mode is required")
            if any(not 0.0 < z < 1.0 for z in pair):
                raise ValueError("damping ratios must lie in (0, 1)")

    @property
    def n_conditions(self) -> int:
        return len(self.dampings)


@dataclass(frozen=True, eq=False)
class FrequencySample:
    omega: float
    x: np.ndarray
    y_summary: NoiseSummary
    input_amp: float = 1.0
    condition: int = 0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")

    @property
    def y(self) -> complex:
        return complex(self.y_summary.y[0])


def true_response(cfg: PlantConfig, condition: int, omega) -> np.ndarray:
    s = 1j * np.asarray(omega, dtype=float)
    G = cfg.gain * np.exp(-s * cfg.delay)
    for wk, zk in zip(cfg.modes, cfg.dampings[condition]):
        G = G * wk**2 / (s**2 + 2 * zk * wk * s + wk**2)
    return G


def simulate_plant(
    cfg: PlantConfig,
    condition: int,
    omega: float,
    n_repeats: int,
    basis: BasisGenerator,
    index: int = 0,
    F: float = 1.0,
) -> FrequencySample:
    """Repeated single-period phasor measurements at one frequency.

    Each repeat sees white input and output noise averaged over one
    excitation period ``T = 2 pi / omega``, i.e. complex noise with per-part
    variance ``sigma^2 / T``.
    """
    if not 0 <= condition < cfg.n_conditions:
        raise ValueError("condition index out of range")
    rng = np.random.default_rng([cfg.seed, condition, index])
    G = complex(true_response(cfg, condition, omega))
    T = 2 * math.pi / omega
    sd_in = cfg.noise_in / math.sqrt(T)
    sd_out = cfg.noise_out / math.sqrt(T)
    e_in = sd_in * (rng.standard_normal(n_repeats) + 1j * rng.standard_normal(n_repeats))
    e_out = sd_out * (rng.standard_normal(n_repeats) + 1j * rng.standard_normal(n_repeats))
    y_hat = G * (F + e_in) + e_out
    if n_repeats >= 2:
        summ = summarize([np.array([v]) for v in y_hat])
    else:
        summ = NoiseSummary.exact([y_hat[0]])
    return FrequencySample(omega, eval_basis(basis, omega, F), summ, abs(F), condition)


# -- fitting --------------------------------------------------------------------

def _points(samples: Sequence[FrequencySample]):
    return [DataPoint([s.y], s.x) for s in samples]


def fit_qip(
    samples: Sequence[FrequencySample],
    delta: float = 0.01,
    cfg: Optional[SolverConfig] = None,
) -> Tuple[Optional[Inclusion], FitReport]:
    if len(samples) < 2:
        raise InvalidModel("need at least two samples")
    alpha = chi2_threshold(1, delta)
    prob = assemble(_points(samples), [s.y_summary for s in samples], alpha)
    res = solve(prob, cfg)
    model = None
    if res.status is Status.OPTIMAL:
        model = inclusion_from_ssdd(res.ssdd, strict=False)
    report = FitReport.from_result(res, point_ids=list(range(len(samples))), alpha=alpha)
    return model, report


def _phi_rows(x: np.ndarray) -> np.ndarray:
    return np.vstack([x.real, x.imag])


def fit_wls(samples: Sequence[FrequencySample]) -> Tuple[np.ndarray, np.ndarray]:
    """Real-parameter weighted least squares ``y ~ A x`` and its covariance."""
    n = samples[0].x.size
    if len(samples) < n:
        raise InvalidModel(f"need at least {n} samples")
    traces = [float(np.trace(s.y_summary.sigma_eta)) for s in samples]
    mean_tr = float(np.mean(traces))
    Nmat = np.zeros((n, n))
    rhs = np.zeros(n)
    for s, tr in zip(samples, traces):
        floor = 1e-15 * max(tr, mean_tr)
        if floor == 0.0:
            floor = 1e-30
        Sig = s.y_summary.sigma_eta + floor * np.eye(2)
        P = _phi_rows(s.x)
        Wt = np.linalg.inv(Sig)
        Nmat += P.T @ Wt @ P
        rhs += P.T @ Wt @ s.y_summary.mean
    try:
        Sigma_A = np.linalg.inv(Nmat)
    except np.linalg.LinAlgError:
        raise InvalidModel("weighted least squares normal equations are singular") from None
    Sigma_A = 0.5 * (Sigma_A + Sigma_A.T)
    return Sigma_A @ rhs, Sigma_A


def ls_min_scaling(samples, A_LS, Sigma_A, alpha: float) -> float:
    """Smallest ``gamma`` with ``C^T C = gamma Sigma_A`` (``B = 1``) including all samples."""
    A_LS = np.asarray(A_LS, dtype=float).ravel()
    gamma = 0.0
    for i, s in enumerate(samples):
        r = s.y - complex(A_LS @ s.x)
        num = abs(r) ** 2 - alpha * float(np.trace(s.y_summary.sigma_eta))
        den = float(s.x.real @ Sigma_A @ s.x.real + s.x.imag @ Sigma_A @ s.x.imag)
        if den <= 0.0:
            if num > 0.0:
                raise Unscalable(f"sample {i} lies outside any scaling")
            continue
        gamma = max(gamma, num / den)
    return gamma


def psd_sqrt(M) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (M + np.transpose(M)))
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def ls_model(A_LS, Sigma_A, gamma: float) -> Inclusion:
    return Inclusion(np.atleast_2d(A_LS), [[1.0]], psd_sqrt(gamma * Sigma_A), strict=False)


@dataclass(frozen=True, eq=False)
class Envelope:
    omega: np.ndarray
    nominal: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    phase: np.ndarray
    radius: np.ndarray


def bode_envelope(model: Inclusion, basis: BasisGenerator, grid) -> Envelope:
    """Magnitude band ``|A x| -+ |B| sqrt(x^* C^T C x)`` on a frequency grid."""
    if model.n_y != 1:
        raise InvalidModel("envelopes are defined for scalar outputs")
    grid = np.asarray(grid, dtype=float)
    CtC = model.C.T @ model.C
    b = abs(float(model.B[0, 0]))
    nom = np.empty(grid.size, dtype=complex)
    rad = np.empty(grid.size)
    for k, w in enumerate(grid):
        x = eval_basis(basis, w)
        nom[k] = complex(model.A[0] @ x)
        rad[k] = b * math.sqrt(max(float(np.vdot(x, CtC @ x).real), 0.0))
    mag = np.abs(nom)
    return Envelope(grid, mag, np.maximum(0.0, mag - rad), mag + rad, np.angle(nom), rad)


# -- scenario -----------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    plant: PlantConfig = field(default_factory=PlantConfig)
    repeats: int = 16
    grid: Tuple[float, float, int] = (0.01, 100.0, 100)
    basis_poles: Tuple[complex, ...] = tuple(DEFAULT_POLES)
    delta: float = 0.01

    @property
    def omegas(self) -> np.ndarray:
        lo, hi, n = self.grid
        return np.logspace(math.log10(lo), math.log10(hi), int(n))

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        base = cls()
        p = base.plant
        noise = d.get("noise", {})
        plant = PlantConfig(
            modes=tuple(d.get("modes", p.modes)),
            dampings=tuple(tuple(x) for x in d.get("dampings", p.dampings)),
            delay=float(d.get("delay", p.delay)),
            gain=float(d.get("gain", p.gain)),
            noise_in=float(noise.get("input", p.noise_in)),
            noise_out=float(noise.get("output", p.noise_out)),
            seed=int(d.get("seed", p.seed)),
        )
        grid = d.get("grid", {})
        if isinstance(grid, dict):
            grid = (grid.get("lo", base.grid[0]), grid.get("hi", base.grid[1]),
                    grid.get("n", base.grid[2]))
        poles = d.get("basis_poles")
        poles = base.basis_poles if poles is None else tuple(complex(*p) for p in poles)
        return cls(plant, int(d.get("repeats", base.repeats)), tuple(grid), poles,
                   float(d.get("delta", base.delta)))

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        p = self.plant
        return {
            "format_version": 1,
            "modes": list(p.modes),
            "dampings": [list(x) for x in p.dampings],
            "delay": p.delay,
            "gain": p.gain,
            "noise": {"input": p.noise_in, "output": p.noise_out},
            "repeats": self.repeats,
            "grid": {"lo": self.grid[0], "hi": self.grid[1], "n": int(self.grid[2])},
            "basis_poles": [[z.real, z.imag] for z in self.basis_poles],
            "delta": self.delta,
            "seed": p.seed,
        }


def simulate(sc: Scenario, basis: Optional[BasisGenerator] = None) -> List[FrequencySample]:
    basis = basis or make_basis(sc.basis_poles)
    return [
        simulate_plant(sc.plant, c, w, sc.repeats, basis, index=k)
        for c in range(sc.plant.n_conditions)
        for k, w in enumerate(sc.omegas)
    ]


@dataclass(eq=False)
class FreqResult:
    scenario: Scenario
    basis: BasisGenerator
    samples: List[FrequencySample]
    qip_model: Optional[Inclusion]
    qip_report: FitReport
    A_LS: Optional[np.ndarray] = None
    Sigma_A: Optional[np.ndarray] = None
    gamma_min: float = math.nan
    ls_width: float = math.nan
    qip_envelope: Optional[Envelope] = None
    ls_envelope: Optional[Envelope] = None
    containment: List[float] = field(default_factory=list)

    @property
    def qip_width(self) -> float:
        return self.qip_report.width


def envelope_containment(env: Envelope, sc: Scenario, rtol: float = 1e-9) -> List[float]:
    """Fraction of grid frequencies where each true plant magnitude is inside the band."""
    out = []
    for c in range(sc.plant.n_conditions):
        mag = np.abs(true_response(sc.plant, c, env.omega))
        inside = (mag >= env.lower * (1 - rtol)) & (mag <= env.upper * (1 + rtol))
        out.append(float(np.mean(inside)))
    return out


def run_scenario(sc: Scenario, cfg: Optional[SolverConfig] = None) -> FreqResult:
    basis = make_basis(sc.basis_poles)
    samples = simulate(sc, basis)
    model, report = fit_qip(samples, sc.delta, cfg)
    out = FreqResult(sc, basis, samples, model, report)
    if model is not None:
        out.qip_envelope = bode_envelope(model, basis, sc.omegas)
        out.containment = envelope_containment(out.qip_envelope, sc)
    try:
        A_LS, Sigma_A = fit_wls(samples)
        alpha = chi2_threshold(1, sc.delta)
        gamma = ls_min_scaling(samples, A_LS, Sigma_A, alpha)
    except (InvalidModel, Unscalable):
        return out
    out.A_LS, out.Sigma_A, out.gamma_min = A_LS, Sigma_A, gamma
    lsm = ls_model(A_LS, Sigma_A, gamma)
    out.ls_width = cone_width_inclusion(lsm) if gamma > 0 else 0.0
    out.ls_envelope = bode_envelope(lsm, basis, sc.omegas)
    return out

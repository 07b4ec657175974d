"""Barrier interior-point solver for the quadric inclusion program.

The decision variables are the SS-DD blocks.  Internally they are packed as
the lower triangle of ``Q' = [[X_B, -X_A], [-X_A^T, X_AA]]`` followed by the
lower triangle of ``X_C``, so the LMI ``Q' >= 0`` is a plain log-det barrier
on the first block.  Every data point contributes one linear inequality

    alpha tr[Sigma (I_2 kron X_B)] + xi^* Q xi >= 0,

with ``Q = [[-X_B, X_A], [X_A^T, X_C - X_AA]]``.  For a real symmetric ``Q``
the Hermitian form splits as ``Re(xi)^T Q Re(xi) + Im(xi)^T Q Im(xi)`` so
each row is linear in the packed variables with real coefficients.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InfeasiblePoint, InfeasibleStart, InvalidModel
from .inclusion import SSDD, DataPoint, min_eig, specialness_defect
from .noise import NoiseSummary, offset_matrix

log = logging.getLogger(__name__)

ACTIVE_RTOL = 1e-6
LINEAR_RTOL = 1e-13


class Mode(str, enum.Enum):
    DEGENERATE = "degenerate"
    NON_DEGENERATE = "non-degenerate"


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    UNBOUNDED = "Unbounded"
    INFEASIBLE = "Infeasible"
    ITERATION_LIMIT = "IterationLimit"


@dataclass(frozen=True, eq=False)
class QipProblem:
    """Real-embedded inequality rows of a quadric inclusion program.

    Row ``i`` evaluates to
    ``-<gyy_i - offset_i, X_B> + 2 <gyx_i, X_A> + <gxx_i, X_C - X_AA>``.
    """

    n_y: int
    n_x: int
    gyy: np.ndarray
    gyx: np.ndarray
    gxx: np.ndarray
    offset: np.ndarray
    mode: Mode = Mode.DEGENERATE

    def __post_init__(self):
        if self.gyy.shape[0] == 0:
            raise InvalidModel("a quadric inclusion program needs data")
        for a in (self.gyy, self.gyx, self.gxx, self.offset):
            if not np.all(np.isfinite(a)):
                raise InvalidModel("non-finite row coefficients")

    @property
    def n_rows(self) -> int:
        return self.gyy.shape[0]

    @property
    def nu(self) -> int:
        """Total barrier parameter."""
        return (self.n_y + self.n_x) + self.n_x + self.n_rows

    def row_values(self, s: SSDD) -> np.ndarray:
        return (
            -np.einsum("kij,ij->k", self.gyy - self.offset, s.X_B)
            + 2.0 * np.einsum("kij,ij->k", self.gyx, s.X_A)
            + np.einsum("kij,ij->k", self.gxx, s.X_C - s.X_AA)
        )

    def row_scales(self, s: SSDD) -> np.ndarray:
        """Magnitude of the terms entering each row, for relative slacks."""
        return (
            np.abs(np.einsum("kij,ij->k", self.gyy, s.X_B))
            + np.abs(np.einsum("kij,ij->k", self.offset, s.X_B))
            + 2.0 * np.abs(np.einsum("kij,ij->k", self.gyx, s.X_A))
            + np.abs(np.einsum("kij,ij->k", self.gxx, s.X_C))
            + np.abs(np.einsum("kij,ij->k", self.gxx, s.X_AA))
        )


@dataclass(frozen=True)
class SolverConfig:
    gap_tol: float = 1e-8
    barrier_mu: float = 10.0
    newton_tol: float = 1e-10
    max_newton: int = 500
    objective_cap: Optional[float] = None  # defaults to 200 n_y
    t0: float = 1.0

    def __post_init__(self):
        if min(self.gap_tol, self.newton_tol, self.max_newton, self.t0) <= 0:
            raise ValueError("solver tolerances must be positive")
        if self.barrier_mu <= 1:
            raise ValueError("barrier_mu must exceed 1")

    def cap(self, n_y: int) -> float:
        return 200.0 * n_y if self.objective_cap is None else self.objective_cap


@dataclass(frozen=True)
class KktSummary:
    min_eig_qprime: float
    min_eig_xc: float
    min_slack: float
    trace_residual: float
    gap_bound: float


@dataclass(frozen=True, eq=False)
class SolverResult:
    ssdd: SSDD
    status: Status
    objective: float
    active_set: tuple
    kkt: KktSummary
    slacks: np.ndarray
    iterations: int
    t: float

    @property
    def width(self) -> float:
        if self.status is not Status.OPTIMAL:
            return math.inf
        return math.exp(-self.objective / (2 * self.ssdd.n_y)) * math.sqrt(
            float(np.trace(self.ssdd.X_C))
        )


# -- assembly -----------------------------------------------------------------

def _sigma_of(item, n_y: int) -> np.ndarray:
    if item is None:
        return np.zeros((2 * n_y, 2 * n_y))
    if isinstance(item, NoiseSummary):
        return item.sigma_eta
    sig = np.asarray(item, dtype=float)
    if sig.shape != (2 * n_y, 2 * n_y):
        raise InvalidModel(f"noise covariance must be {2 * n_y}x{2 * n_y}")
    if np.linalg.eigvalsh(0.5 * (sig + sig.T))[0] < -1e-12 * max(1.0, np.abs(sig).max()):
        raise InvalidModel("noise covariance is not positive semi-definite")
    return sig


def assemble(data: Sequence[DataPoint], noise=None, alpha: float = 0.0) -> QipProblem:
    """Turn data points (and optional per-point noise) into inequality rows.

    ``noise`` is ``None``, one covariance/``NoiseSummary`` shared by every
    point, or a sequence with one entry per point.
    """
    if len(data) == 0:
        raise InvalidModel("no data points")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    n_y, n_x = data[0].y.size, data[0].x.size
    if any(p.y.size != n_y or p.x.size != n_x for p in data):
        raise InvalidModel("data points have inconsistent dimensions")

    if noise is None or isinstance(noise, NoiseSummary) or np.ndim(noise) == 2:
        sigmas = [_sigma_of(noise, n_y)] * len(data)
    else:
        if len(noise) != len(data):
            raise InvalidModel("need one noise entry per data point")
        sigmas = [_sigma_of(s, n_y) for s in noise]

    Y = np.stack([p.y for p in data])
    X = np.stack([p.x for p in data])
    gyy = np.einsum("ki,kj->kij", Y.real, Y.real) + np.einsum("ki,kj->kij", Y.imag, Y.imag)
    gyx = np.einsum("ki,kj->kij", Y.real, X.real) + np.einsum("ki,kj->kij", Y.imag, X.imag)
    gxx = np.einsum("ki,kj->kij", X.real, X.real) + np.einsum("ki,kj->kij", X.imag, X.imag)
    offset = alpha * np.stack([offset_matrix(s) for s in sigmas])

    degenerate = alpha == 0 or not np.any(offset)
    if degenerate:
        for i, p in enumerate(data):
            if not np.any(p.x) and np.any(p.y):
                raise InfeasiblePoint(f"point {i} has x = 0 and y != 0")
    mode = Mode.DEGENERATE if degenerate else Mode.NON_DEGENERATE
    return QipProblem(n_y, n_x, gyy, gyx, gxx, offset, mode)


def initialize(p: QipProblem) -> SSDD:
    """Strictly feasible start ``X_C = I/n_x, X_A = 0, X_B = X_AA = eps I``."""
    xx = np.einsum("kii->k", p.gxx)
    yy = np.einsum("kii->k", p.gyy)
    off = np.einsum("kii->k", p.offset)
    num = xx / p.n_x
    den = yy + xx - off
    binding = den > 0
    if np.any(binding & (num <= 0)) or np.any((den == 0) & (num <= 0)):
        raise InfeasibleStart("a point with x = 0 cannot be strictly included")
    if np.any(binding):
        eps = 0.5 * float(np.min(num[binding] / np.maximum(den[binding], 1e-300)))
    else:
        eps = 1.0
    I_y, I_x = np.eye(p.n_y), np.eye(p.n_x)
    return SSDD(eps * I_y, np.zeros((p.n_y, p.n_x)), eps * I_x, I_x / p.n_x)


# -- packed variables ---------------------------------------------------------

def _svec_map(d: int):
    rows, cols = np.tril_indices(d)
    T = np.zeros((d * d, rows.size))
    k = np.arange(rows.size)
    T[rows * d + cols, k] = 1.0
    T[cols * d + rows, k] = 1.0
    return rows, cols, T


class _Layout:
    """Index bookkeeping between SS-DD blocks and the packed vector."""

    def __init__(self, n_y: int, n_x: int):
        self.n_y, self.n_x = n_y, n_x
        d = n_y + n_x
        self.d = d
        self.qr, self.qc, self.TQ = _svec_map(d)
        self.cr, self.cc, self.TC = _svec_map(n_x)
        self.pq = self.qr.size
        self.pc = self.cr.size
        self.size = self.pq + self.pc
        in_b = (self.qr < n_y) & (self.qc < n_y)
        self.b_idx = np.flatnonzero(in_b)
        _, _, TB = _svec_map(n_y)
        self.TB = TB  # svec of X_B is the in_b slice of svec(Q') in the same order
        self.trace = np.zeros(self.size)
        self.trace[self.pq + np.flatnonzero(self.cr == self.cc)] = 1.0
        self.w_q = np.where(self.qr == self.qc, 1.0, 2.0)
        self.w_c = np.where(self.cr == self.cc, 1.0, 2.0)

    def pack(self, s: SSDD) -> np.ndarray:
        Qp = s.q_prime
        return np.concatenate([Qp[self.qr, self.qc], s.X_C[self.cr, self.cc]])

    def qprime(self, z: np.ndarray) -> np.ndarray:
        return (self.TQ @ z[: self.pq]).reshape(self.d, self.d)

    def xc(self, z: np.ndarray) -> np.ndarray:
        return (self.TC @ z[self.pq:]).reshape(self.n_x, self.n_x)

    def xb(self, z: np.ndarray) -> np.ndarray:
        return self.qprime(z)[: self.n_y, : self.n_y]

    def unpack(self, z: np.ndarray) -> SSDD:
        Qp = self.qprime(z)
        ny = self.n_y
        return SSDD(Qp[:ny, :ny], -Qp[:ny, ny:], Qp[ny:, ny:], self.xc(z))

    def rows(self, p: QipProblem) -> np.ndarray:
        """Row matrix ``R`` with slacks ``R @ z``."""
        ny = self.n_y
        G = np.zeros((p.n_rows, self.d, self.d))
        G[:, :ny, :ny] = p.gyy - p.offset
        G[:, :ny, ny:] = p.gyx
        G[:, ny:, :ny] = np.transpose(p.gyx, (0, 2, 1))
        G[:, ny:, ny:] = p.gxx
        Rq = -G[:, self.qr, self.qc] * self.w_q
        Rc = p.gxx[:, self.cr, self.cc] * self.w_c
        return np.hstack([Rq, Rc])


def pack(s: SSDD) -> np.ndarray:
    return _Layout(s.n_y, s.n_x).pack(s)


def unpack(z: np.ndarray, n_y: int, n_x: int) -> SSDD:
    return _Layout(n_y, n_x).unpack(np.asarray(z, dtype=float))


def _chol_logdet(M: np.ndarray):
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return None
    return 2.0 * float(np.sum(np.log(np.diag(L))))


class _Barrier:
    """Composite objective ``-t log det X_B - log det Q' - log det X_C - sum log s``."""

    def __init__(self, p: QipProblem):
        self.p = p
        self.lay = _Layout(p.n_y, p.n_x)
        self.R = self.lay.rows(p)

    def value(self, z: np.ndarray, t: float) -> float:
        lay = self.lay
        Qp = lay.qprime(z)
        ld_q = _chol_logdet(Qp)
        ld_c = _chol_logdet(lay.xc(z))
        s = self.R @ z
        if ld_q is None or ld_c is None or np.any(s <= 0):
            return math.inf
        ld_b = _chol_logdet(Qp[: lay.n_y, : lay.n_y])
        return -t * ld_b - ld_q - ld_c - float(np.sum(np.log(s)))

    def gradient(self, z: np.ndarray, t: float) -> np.ndarray:
        lay = self.lay
        Qp = lay.qprime(z)
        g = np.zeros(lay.size)
        g[: lay.pq] -= lay.TQ.T @ np.linalg.inv(Qp).ravel()
        g[lay.pq:] -= lay.TC.T @ np.linalg.inv(lay.xc(z)).ravel()
        g[lay.b_idx] -= t * (lay.TB.T @ np.linalg.inv(Qp[: lay.n_y, : lay.n_y]).ravel())
        g -= self.R.T @ (1.0 / (self.R @ z))
        return g

    def scaled_derivatives(self, z: np.ndarray, t: float):
        """Gradient and Hessian in congruence-scaled coordinates ``dz = P dv``.

        With ``Q' = L L^T`` the direction ``dv`` stands for ``dQ' = L dV L^T``
        (likewise for ``X_C``), so each log-det term has the Hessian it has
        at the identity and no inverse of a nearly singular block is formed.
        ``L`` is lower triangular, hence the ``X_B`` corner transforms by its
        own Cholesky factor and its term is also identity-like.
        """
        lay = self.lay
        Lq = np.linalg.cholesky(lay.qprime(z))
        Lc = np.linalg.cholesky(lay.xc(z))
        P = np.zeros((lay.size, lay.size))
        P[: lay.pq, : lay.pq] = _congruence(Lq, lay.qr, lay.qc, lay.TQ)
        P[lay.pq:, lay.pq:] = _congruence(Lc, lay.cr, lay.cc, lay.TC)
        RP = self.R @ P
        s = self.R @ z

        eq = np.eye(lay.d).ravel()
        ec = np.eye(lay.n_x).ravel()
        eb = np.eye(lay.n_y).ravel()
        g = np.zeros(lay.size)
        g[: lay.pq] -= lay.TQ.T @ eq
        g[lay.pq:] -= lay.TC.T @ ec
        g[lay.b_idx] -= t * (lay.TB.T @ eb)
        g -= RP.T @ (1.0 / s)

        H = np.zeros((lay.size, lay.size))
        H[: lay.pq, : lay.pq] = lay.TQ.T @ lay.TQ
        H[lay.pq:, lay.pq:] = lay.TC.T @ lay.TC
        H[np.ix_(lay.b_idx, lay.b_idx)] += t * (lay.TB.T @ lay.TB)
        RPs = RP / s[:, None]
        H += RPs.T @ RPs
        return g, H, P


def composite_objective(p: QipProblem, z: np.ndarray, t: float):
    """Value and gradient of the barrier objective at packed point ``z``."""
    b = _Barrier(p)
    z = np.asarray(z, dtype=float)
    return b.value(z, t), b.gradient(z, t)


def _congruence(L: np.ndarray, rows, cols, T) -> np.ndarray:
    """Matrix of ``D -> L D L^T`` acting on lower-triangle coordinates."""
    d = L.shape[0]
    return np.kron(L, L)[rows * d + cols, :] @ T


def _newton_step(H: np.ndarray, g: np.ndarray, a: np.ndarray):
    """Solve ``[[H, a], [a^T, 0]] [dv; w] = [-g; 0]`` by block elimination.

    Returns the step and the squared Newton decrement ``-g . dv``.
    """
    dscale = 1.0 / np.sqrt(np.maximum(np.diag(H), 1e-300))
    Hs = H * dscale[:, None] * dscale[None, :]
    gs, as_ = g * dscale, a * dscale
    reg = 0.0
    while True:
        try:
            L = np.linalg.cholesky(Hs + reg * np.eye(Hs.shape[0]))
            break
        except np.linalg.LinAlgError:
            reg = 1e-14 if reg == 0.0 else reg * 100.0
            if reg > 1e-2:
                raise
    sol = np.linalg.solve(L.T, np.linalg.solve(L, np.column_stack([gs, as_])))
    Hg, Ha = sol[:, 0], sol[:, 1]
    w = -(as_ @ Hg) / (as_ @ Ha)
    dv = -(Hg + w * Ha) * dscale
    return dv, max(float(-g @ dv), 0.0)


def _fix_trace(z: np.ndarray, lay: _Layout) -> np.ndarray:
    diag = lay.pq + np.flatnonzero(lay.cr == lay.cc)
    z = z.copy()
    z[diag] += (1.0 - z[diag].sum()) / lay.n_x
    return z


def linear_relation(p: QipProblem, rtol: float = LINEAR_RTOL) -> Optional[np.ndarray]:
    """Return ``(u, theta)`` with ``u^T y_i = theta^T x_i`` for every point, or None.

    Such a pair is a recession direction of the feasible set along which
    ``log det X_B`` grows without bound (every row value is unchanged or
    larger).  The test is an eigen-decomposition of the equilibrated Gram
    matrix of the stacked real/imaginary data, so relationships that hold
    only up to floating point round-off are still found.
    """
    G = np.zeros((p.n_y + p.n_x,) * 2)
    G[: p.n_y, : p.n_y] = p.gyy.sum(axis=0)
    G[: p.n_y, p.n_y:] = -p.gyx.sum(axis=0)
    G[p.n_y:, : p.n_y] = G[: p.n_y, p.n_y:].T
    G[p.n_y:, p.n_y:] = p.gxx.sum(axis=0)
    d = np.sqrt(np.diag(G))
    d = np.where(d > 0, d, 1.0)
    w, V = np.linalg.eigh(G / np.outer(d, d))
    null = V[:, w <= rtol * max(w[-1], 1.0)] / d[:, None]
    if null.shape[1] == 0:
        return None
    U, sv, Wt = np.linalg.svd(null[: p.n_y], full_matrices=False)
    if sv[0] < 1e-6 * np.linalg.norm(null, 2):
        return None
    v = null @ Wt[0]
    return v / np.linalg.norm(v[: p.n_y])


def solve(p: QipProblem, cfg: Optional[SolverConfig] = None) -> SolverResult:
    """Maximize ``log det X_B`` over the SS-DD with ``tr X_C = 1``.

    Path-following barrier method: each centering is a damped Newton
    iteration with the trace equality in the KKT system; ``t`` grows by
    ``barrier_mu`` between centerings until ``nu / t`` is below the relative
    gap target.
    """
    cfg = cfg or SolverConfig()
    if linear_relation(p) is not None:
        log.info("data share an exact linear relationship; X_B is unbounded")
        s0 = initialize(p)
        slacks = p.row_values(s0)
        return SolverResult(s0, Status.UNBOUNDED, math.inf, (), check_kkt(p, s0),
                            slacks, 0, 0.0)
    bar = _Barrier(p)
    lay = bar.lay
    z = lay.pack(initialize(p))
    cap = cfg.cap(p.n_y)
    t = cfg.t0
    iters = 0
    status = None
    f = bar.value(z, t)

    while status is None:
        while True:
            gv, Hv, P = bar.scaled_derivatives(z, t)
            dv, lam2 = _newton_step(Hv, gv, P.T @ lay.trace)
            dz = P @ dv
            if lam2 / 2.0 <= cfg.newton_tol:
                break
            step, slope = 1.0, float(gv @ dv)
            while True:
                z_new = z + step * dz
                f_new = bar.value(z_new, t)
                if f_new <= f + 0.01 * step * slope:
                    break
                step *= 0.5
                if step < 1e-14:
                    break
            if step < 1e-14 or f_new >= f:
                # no further progress possible at working precision
                break
            if step == 1.0 and lam2 > 1.0:
                # far from the center: keep extending along a descent ray
                # (this is what exposes unbounded problems quickly)
                while step < 2.0**40:
                    z_try = z + 2.0 * step * dz
                    f_try = bar.value(z_try, t)
                    if not f_try < f_new:
                        break
                    step, z_new, f_new = 2.0 * step, z_try, f_try
            z, f = _fix_trace(z_new, lay), None
            f = bar.value(z, t)
            iters += 1
            obj = _chol_logdet(lay.xb(z))
            log.debug("newton t=%.3e obj=%.10g dec=%.3e step=%.3g min_slack=%.3e",
                      t, obj, lam2, step, float(np.min(bar.R @ z)))
            if obj > cap:
                status = Status.UNBOUNDED
                break
            if iters >= cfg.max_newton:
                status = Status.ITERATION_LIMIT
                break
        if status is not None:
            break
        obj = _chol_logdet(lay.xb(z))
        gap = p.nu / t
        log.info("center t=%.3e obj=%.12g gap=%.3e newton=%d", t, obj, gap, iters)
        if gap <= cfg.gap_tol * max(1.0, abs(obj)):
            status = Status.OPTIMAL
            break
        t *= cfg.barrier_mu
        f = bar.value(z, t)

    s = lay.unpack(z)
    slacks = bar.R @ z
    rel = slacks / np.maximum(p.row_scales(s), 1e-300)
    active = tuple(int(i) for i in np.flatnonzero(rel <= ACTIVE_RTOL))
    return SolverResult(
        ssdd=s,
        status=status,
        objective=float(_chol_logdet(lay.xb(z))),
        active_set=active,
        kkt=check_kkt(p, s, gap_bound=p.nu / t),
        slacks=slacks,
        iterations=iters,
        t=t,
    )


def certify_specialness(s: SSDD, tol: float = 1e-6) -> bool:
    return specialness_defect(s) <= tol


def check_kkt(p: QipProblem, s: SSDD, gap_bound: float = math.nan) -> KktSummary:
    return KktSummary(
        min_eig_qprime=min_eig(s.q_prime),
        min_eig_xc=min_eig(s.X_C),
        min_slack=float(np.min(p.row_values(s))),
        trace_residual=abs(float(np.trace(s.X_C)) - 1.0),
        gap_bound=float(gap_bound),
    )

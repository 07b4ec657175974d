"""Norm-bounded linear inclusions and their quadratic-form geometry.

An inclusion is the model-set ``y in {(A + B Delta C) x : ||Delta|| <= 1}``
with real ``A``, invertible real ``B``, ``C`` and a complex contraction
``Delta``.  The same set is described by the quadratic form
``xi^* Q xi >= 0`` on ``xi = (y, x)`` and by the convex split
``(X_B, X_A, X_AA, X_C)`` used by the solver.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DegenerateModel,
    InfiniteWidth,
    InvalidModel,
    NotAnInclusion,
    NoWitness,
)

SINGULAR_RTOL = 1e-12
PSD_FLOOR = -1e-9
SPECIAL_RTOL = 1e-10


def _mat(a, name) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise InvalidModel(f"{name} must be a matrix, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise InvalidModel(f"{name} has non-finite entries")
    return a


def _vec(v) -> np.ndarray:
    return np.atleast_1d(np.asarray(v, dtype=complex)).ravel()


def _is_invertible(m: np.ndarray, rtol: float = SINGULAR_RTOL) -> bool:
    s = np.linalg.svd(m, compute_uv=False)
    return s.size > 0 and s[-1] > rtol * s[0]


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def min_eig(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(_sym(m))[0])


@dataclass(frozen=True, eq=False)
class Inclusion:
    """Real matrices ``(A, B, C)`` of an inclusion.

    ``strict=False`` skips the invertibility checks on ``B`` and ``C``; fitted
    models with a rank-deficient ``X_C`` are carried this way.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    strict: bool = field(default=True, repr=False)

    def __post_init__(self):
        A, B, C = _mat(self.A, "A"), _mat(self.B, "B"), _mat(self.C, "C")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        if B.shape[0] != B.shape[1] or C.shape[0] != C.shape[1]:
            raise InvalidModel("B and C must be square")
        if A.shape != (B.shape[0], C.shape[0]):
            raise InvalidModel(
                f"A is {A.shape}, expected ({B.shape[0]}, {C.shape[0]})"
            )
        if self.strict:
            if not _is_invertible(B):
                raise InvalidModel("B is singular")
            if not _is_invertible(C):
                raise InvalidModel("C is singular")

    @property
    def n_y(self) -> int:
        return self.B.shape[0]

    @property
    def n_x(self) -> int:
        return self.C.shape[0]

    @property
    def c_invertible(self) -> bool:
        return _is_invertible(self.C)


@dataclass(frozen=True, eq=False)
class QuadricForm:
    Q: np.ndarray
    n_y: int
    n_x: int

    def __post_init__(self):
        Q = _mat(self.Q, "Q")
        n = self.n_y + self.n_x
        if Q.shape != (n, n):
            raise InvalidModel(f"Q must be {n}x{n}")
        if np.abs(Q - Q.T).max() > 1e-12 * max(1.0, np.abs(Q).max()):
            raise InvalidModel("Q is not symmetric")
        object.__setattr__(self, "Q", _sym(Q))


@dataclass(frozen=True, eq=False)
class SSDD:
    """Split semi-definite decomposition of a quadratic form."""

    X_B: np.ndarray
    X_A: np.ndarray
    X_AA: np.ndarray
    X_C: np.ndarray

    def __post_init__(self):
        X_B, X_A = _mat(self.X_B, "X_B"), _mat(self.X_A, "X_A")
        X_AA, X_C = _mat(self.X_AA, "X_AA"), _mat(self.X_C, "X_C")
        n_y, n_x = X_A.shape
        if X_B.shape != (n_y, n_y) or X_AA.shape != (n_x, n_x) or X_C.shape != (n_x, n_x):
            raise InvalidModel("inconsistent SS-DD block shapes")
        object.__setattr__(self, "X_B", _sym(X_B))
        object.__setattr__(self, "X_A", X_A)
        object.__setattr__(self, "X_AA", _sym(X_AA))
        object.__setattr__(self, "X_C", _sym(X_C))

    @property
    def n_y(self) -> int:
        return self.X_A.shape[0]

    @property
    def n_x(self) -> int:
        return self.X_A.shape[1]

    @property
    def q_prime(self) -> np.ndarray:
        return np.block([[self.X_B, -self.X_A], [-self.X_A.T, self.X_AA]])

    @property
    def Q(self) -> np.ndarray:
        return np.block([[-self.X_B, self.X_A], [self.X_A.T, self.X_C - self.X_AA]])

    def quadric(self) -> QuadricForm:
        return QuadricForm(self.Q, self.n_y, self.n_x)

    def is_valid(self, floor: float = PSD_FLOOR) -> bool:
        return min_eig(self.q_prime) >= floor and min_eig(self.X_C) >= floor


@dataclass(frozen=True, eq=False)
class DataPoint:
    y: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "y", _vec(self.y))
        object.__setattr__(self, "x", _vec(self.x))

    @property
    def xi(self) -> np.ndarray:
        return np.concatenate([self.y, self.x])


def quadric_from_inclusion(m: Inclusion) -> QuadricForm:
    if not (_is_invertible(m.B) and _is_invertible(m.C)):
        raise InvalidModel("B and C must be invertible")
    Binv = np.linalg.inv(m.B)
    XB = Binv.T @ Binv
    Q = np.block([
        [-XB, XB @ m.A],
        [m.A.T @ XB, m.C.T @ m.C - m.A.T @ XB @ m.A],
    ])
    return QuadricForm(_sym(Q), m.n_y, m.n_x)


def ssdd_from_inclusion(m: Inclusion) -> SSDD:
    if not (_is_invertible(m.B) and _is_invertible(m.C)):
        raise InvalidModel("B and C must be invertible")
    Binv = np.linalg.inv(m.B)
    XB = Binv.T @ Binv
    XA = XB @ m.A
    return SSDD(XB, XA, m.A.T @ XA, m.C.T @ m.C)


def ssdd_residual(s: SSDD) -> np.ndarray:
    """Schur-complement defect ``X_AA - X_A^T X_B^{-1} X_A``."""
    try:
        L = np.linalg.cholesky(s.X_B)
    except np.linalg.LinAlgError:
        raise DegenerateModel("X_B is not positive definite") from None
    W = np.linalg.solve(L, s.X_A)
    return _sym(s.X_AA - W.T @ W)


def specialness_defect(s: SSDD) -> float:
    """Relative spectral-norm size of :func:`ssdd_residual`."""
    r = np.linalg.norm(ssdd_residual(s), 2)
    return float(r / max(1.0, np.linalg.norm(s.X_AA, 2)))


def inclusion_from_ssdd(s: SSDD, tol: float = 1e-6, strict: bool = True) -> Inclusion:
    """Recover ``(A, B, C)`` with ``B = L^{-T}`` and ``C`` the upper Cholesky factor.

    With ``strict=False`` a PSD but singular ``X_C`` is accepted and ``C`` is
    taken as its symmetric square root.
    """
    try:
        L = np.linalg.cholesky(s.X_B)
    except np.linalg.LinAlgError:
        raise DegenerateModel("X_B is not positive definite") from None
    if specialness_defect(s) > tol:
        raise NotAnInclusion("X_AA != X_A^T X_B^-1 X_A")
    A = np.linalg.solve(s.X_B, s.X_A)
    B = np.linalg.inv(L).T
    try:
        C = np.linalg.cholesky(s.X_C).T
    except np.linalg.LinAlgError:
        if strict:
            raise DegenerateModel("X_C is not positive definite") from None
        w, V = np.linalg.eigh(s.X_C)
        if w[0] < PSD_FLOOR * max(1.0, w[-1]):
            raise DegenerateModel("X_C is not positive semi-definite") from None
        C = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    return Inclusion(A, B, C, strict=strict)


def quadratic_value(Q: np.ndarray, xi: np.ndarray) -> float:
    """``xi^* Q xi`` for real symmetric ``Q``, evaluated as Re/Im real forms."""
    xr, xq = xi.real, xi.imag
    return float(xr @ Q @ xr + xq @ Q @ xq)


def membership(q: QuadricForm, p: DataPoint, offset: float = 0.0, tol: float = 1e-12) -> bool:
    if p.y.size != q.n_y or p.x.size != q.n_x:
        raise InvalidModel("data point does not match quadric dimensions")
    xi = p.xi
    scale = float(np.abs(q.Q).max() * np.vdot(xi, xi).real) + abs(offset)
    return quadratic_value(q.Q, xi) + offset >= -tol * max(scale, 1e-300)


def witness_delta(m: Inclusion, p: DataPoint, tol: float = 1e-12) -> np.ndarray:
    """Rank-one contraction ``Delta`` with ``y = A x + B Delta C x``."""
    Cx = m.C @ p.x
    r = np.linalg.solve(m.B, p.y - m.A @ p.x)
    den = np.vdot(Cx, Cx).real
    if den <= (tol * np.linalg.norm(m.C, 2) * np.linalg.norm(p.x)) ** 2:
        if np.linalg.norm(r) <= tol * max(1.0, np.linalg.norm(p.y)):
            return np.zeros((m.n_y, m.n_x), dtype=complex)
        raise NoWitness("Cx = 0 but y != Ax")
    return np.outer(r, Cx.conj()) / den


def cone_width(s: SSDD) -> float:
    """Generalized cone width ``det(X_B^{-1})^{1/(2 n_y)} sqrt(tr X_C)``."""
    sign, logdet = np.linalg.slogdet(s.X_B)
    if sign <= 0 or not np.isfinite(logdet):
        raise InfiniteWidth("X_B is singular")
    tr = float(np.trace(s.X_C))
    return float(np.exp(-logdet / (2 * s.n_y)) * np.sqrt(max(tr, 0.0)))


def cone_width_inclusion(m: Inclusion) -> float:
    sb = np.linalg.svd(m.B, compute_uv=False)
    gm = float(np.exp(np.mean(np.log(sb))))
    return gm * float(np.linalg.norm(m.C, "fro"))


def _tilde(inner: Inclusion, outer: Inclusion):
    if not (_is_invertible(outer.B) and _is_invertible(outer.C)):
        raise InvalidModel("outer B and C must be invertible")
    if inner.A.shape != outer.A.shape:
        raise InvalidModel("inclusions have different dimensions")
    Bo_inv = np.linalg.inv(outer.B)
    Co_inv = np.linalg.inv(outer.C)
    At = Bo_inv @ (inner.A - outer.A) @ Co_inv
    return At, Bo_inv @ inner.B, inner.C @ Co_inv


def containment_necessary(inner: Inclusion, outer: Inclusion, tol: float = 1e-9) -> bool:
    """``sigma_max(B~) sigma_max(C~) <= 1``; ``False`` certifies non-containment."""
    _, Bt, Ct = _tilde(inner, outer)
    return bool(np.linalg.norm(Bt, 2) * np.linalg.norm(Ct, 2) <= 1.0 + tol)


def extremal_delta(inner: Inclusion, outer: Inclusion) -> np.ndarray:
    """Unit-norm contraction aligning the top singular directions of B~ and C~."""
    At, Bt, Ct = _tilde(inner, outer)
    wb, Vb = np.linalg.eigh(Bt @ Bt.T)
    wc, Vc = np.linalg.eigh(Ct.T @ Ct)
    zb, zc = Vb[:, -1], Vc[:, -1]
    sgn = 1.0 if zb @ At @ zc >= 0 else -1.0
    u = Bt.T @ zb
    v = Ct @ zc
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return np.zeros(At.shape, dtype=complex)
    return (sgn * np.outer(u / nu, v / nv)).astype(complex)


def _random_contraction(rng: np.random.Generator, n_y: int, n_x: int) -> np.ndarray:
    G = rng.standard_normal((n_y, n_x)) + 1j * rng.standard_normal((n_y, n_x))
    U, s, Vh = np.linalg.svd(G, full_matrices=False)
    # alternate between all-unit singular values and a random spectrum
    if rng.random() < 0.5:
        s = np.ones_like(s)
    else:
        s = rng.random(s.size)
        s /= s.max()
    return (U * s) @ Vh


def containment_falsify(
    inner: Inclusion,
    outer: Inclusion,
    n_samples: int = 10_000,
    seed: Optional[int] = None,
    tol: float = 1e-9,
) -> Optional[np.ndarray]:
    """Search for a contraction that the inner model admits but the outer rejects.

    Candidates are ``Delta = 0``, the extremal construction and ``n_samples``
    random contractions.  Returns the first ``Delta`` with
    ``||A~ + B~ Delta C~|| > 1 + tol`` or ``None``.
    """
    At, Bt, Ct = _tilde(inner, outer)
    candidates = [np.zeros(At.shape, dtype=complex), extremal_delta(inner, outer)]
    for D in candidates:
        if np.linalg.norm(At + Bt @ D @ Ct, 2) > 1.0 + tol:
            return D
    rng = np.random.default_rng(seed)
    for _ in range(n_samples):
        D = _random_contraction(rng, *At.shape)
        if np.linalg.norm(At + Bt @ D @ Ct, 2) > 1.0 + tol:
            return D
    return None

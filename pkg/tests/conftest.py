import math

import numpy as np
import pytest


def crandn(rng, *shape):
    """Complex normal with E|z|^2 = 1."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


def random_invertible(rng, n, shift=2.0):
    return rng.standard_normal((n, n)) + shift * np.eye(n)


def random_unitary(rng, n_y, n_x):
    """Complex matrix with all singular values equal to one."""
    U, _, Vh = np.linalg.svd(crandn(rng, n_y, n_x), full_matrices=False)
    return U @ Vh


def golden_max(f, lo, hi, tol=1e-12, maxit=200):
    """Maximizer of a unimodal ``f`` on ``[lo, hi]`` by golden-section search."""
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(maxit):
        if abs(b - a) <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def scalar_logdet_oracle(ys, xs, offsets, span=None, n_grid=4001):
    """Brute-force optimum of the scalar program.

    With ``n_y = n_x = 1`` and ``tr X_C = 1`` an optimal solution is special,
    so ``X_A = b a`` and ``X_AA = b a^2`` and every row reads
    ``|x|^2 - b (|y - a x|^2 - off) >= 0``.  For fixed ``a`` the largest
    feasible ``b`` is a minimum over rows; the outer maximization over ``a``
    is a dense grid followed by golden-section refinement around the best
    grid cells.  Returns ``log b*``.
    """
    ys = np.asarray(ys, dtype=complex)
    xs = np.asarray(xs, dtype=complex)
    offsets = np.asarray(offsets, dtype=float)

    def logb(a):
        r = np.abs(ys - a * xs) ** 2 - offsets
        pos = r > 0
        if not np.any(pos):
            return math.inf
        return float(np.min(np.log(np.abs(xs[pos]) ** 2) - np.log(r[pos])))

    if span is None:
        ratio = np.abs(ys) / np.maximum(np.abs(xs), 1e-12)
        span = 2.0 * float(ratio.max()) + 1.0
    grid = np.linspace(-span, span, n_grid)
    vals = np.array([logb(a) for a in grid])
    best = -math.inf
    h = grid[1] - grid[0]
    for k in np.argsort(vals)[-5:]:
        _, v = golden_max(logb, grid[k] - h, grid[k] + h)
        best = max(best, v, vals[k])
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

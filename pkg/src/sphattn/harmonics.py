"""Spherical-harmonic dimension counts and Gegenbauer polynomial evaluation.

The degree-k Gegenbauer polynomial in ambient dimension d, written P_k here,
is normalized so that P_0 = 1 and P_k(1) = 1 for every k; with that
normalization |P_k(t)| <= 1 on [-1, 1], which makes the forward three-term
recurrence

    P_{k+1}(t) = ((2k + d - 2) * t * P_k(t) - k * P_{k-1}(t)) / (k + d - 2)

numerically stable without renormalization.  For d = 3 these are the classical
Legendre polynomials, for d = 2 the Chebyshev polynomials cos(k * arccos t).
"""

from __future__ import annotations

import math

import numpy as np

# Dot products of normalized vectors may exceed 1 by a few ulp; values within
# this band are clamped to [-1, 1], values outside it are rejected.
DOT_TOL = 1e-12

__all__ = [
    "DOT_TOL",
    "harmonic_dim",
    "cumulative_dim",
    "gegenbauer_all",
    "gegenbauer_matrix",
    "gegenbauer_weighted_sum",
    "sample_sphere",
    "as_seed_sequence",
]


def as_seed_sequence(seed) -> np.random.SeedSequence:
    """Wrap ints (or anything default_rng accepts) as a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _check_dim(d: int) -> None:
    if d != int(d) or d < 2:
        raise ValueError(f"ambient dimension must be an integer >= 2, got {d}")


def harmonic_dim(d: int, ell: int) -> int:
    """Dimension of the space of degree-ell spherical harmonics in R^d.

    Computed exactly in integer arithmetic as
    ((2*ell + d - 2) / ell) * C(ell + d - 3, d - 2) for ell >= 1, and 1 for
    ell = 0.  The division is exact; Python integers cannot overflow.
    """
    _check_dim(d)
    if ell != int(ell) or ell < 0:
        raise ValueError(f"degree must be a non-negative integer, got {ell}")
    if ell == 0:
        return 1
    num = (2 * ell + d - 2) * math.comb(ell + d - 3, d - 2)
    q, r = divmod(num, ell)
    if r != 0:  # cannot happen: the quotient is a dimension count
        raise ArithmeticError(f"non-integral harmonic dimension for d={d}, ell={ell}")
    return q


def cumulative_dim(d: int, ell: int) -> int:
    """Total dimension of all harmonic spaces of degree 0..ell inclusive.

    This is the rank of the degree-truncated kernel built from channels
    0..ell, so cumulative_dim(d, ell0) is the rank of the kernel matched to
    a degree-ell0 target.
    """
    return sum(harmonic_dim(d, k) for k in range(int(ell) + 1))


def _clamp_domain(t: np.ndarray, what: str = "argument") -> np.ndarray:
    """Clamp values within DOT_TOL of [-1, 1] into the interval; reject others."""
    # NaN compares false, so non-finite entries are caught here as well
    ok = np.abs(t) <= 1.0 + DOT_TOL
    if not ok.all():
        idx = np.argwhere(~ok)[0]
        val = t[tuple(idx)]
        where = f" at index {tuple(int(i) for i in idx)}" if t.ndim else ""
        raise ValueError(f"{what} outside [-1, 1] tolerance band{where}: {val!r}")
    return np.clip(t, -1.0, 1.0)


def gegenbauer_all(t, d: int, L: int) -> np.ndarray:
    """Evaluate P_0(t), ..., P_L(t) by the forward recurrence.

    Parameters
    ----------
    t : scalar or ndarray with values in [-1, 1] (up to a 1e-12 tolerance)
    d : ambient dimension, >= 2
    L : maximum degree, >= 0

    Returns
    -------
    ndarray of shape (L + 1,) + shape(t); entry [k] is P_k evaluated at t.
    Work and memory are linear in L.
    """
    _check_dim(d)
    if L != int(L) or L < 0:
        raise ValueError(f"maximum degree must be a non-negative integer, got {L}")
    t = _clamp_domain(np.asarray(t, dtype=float))
    out = np.empty((L + 1,) + t.shape, dtype=float)
    out[0] = 1.0
    if L >= 1:
        out[1] = t
    for k in range(1, L):
        # (k + d - 2) * P_{k+1} = (2k + d - 2) * t * P_k - k * P_{k-1}
        out[k + 1] = ((2 * k + d - 2) * t * out[k] - k * out[k - 1]) / (k + d - 2)
    return out


def gegenbauer_matrix(G: np.ndarray, d: int, L: int) -> np.ndarray:
    """Entrywise Gegenbauer evaluation of a matrix of pairwise dot products.

    Returns a stack of shape (L + 1, *G.shape) with slice [k] equal to P_k
    applied entrywise to G.  Symmetry of G is preserved in every slice.
    """
    G = np.asarray(G, dtype=float)
    return gegenbauer_all(G, d, L)


def gegenbauer_weighted_sum(G, d: int, weights) -> np.ndarray:
    """Evaluate sum_k weights[k] * P_k(G) entrywise without storing the stack.

    Runs the same forward recurrence as :func:`gegenbauer_all` but keeps only
    two working slices, so memory is O(size(G)) for any number of degrees.
    This is the workhorse behind activation values, kernel assembly and the
    one-step updates.
    """
    _check_dim(d)
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty 1-d sequence")
    G = _clamp_domain(np.asarray(G, dtype=float), what="dot product")
    L = w.size - 1
    if L == 0:
        return np.full_like(G, w[0])
    acc = w[0] + w[1] * G
    prev, cur = None, G  # degree k-1 and k values; degree-0 slice handled as 1
    for k in range(1, L):
        nxt = (2 * k + d - 2) * G * cur
        nxt -= k * prev if prev is not None else float(k)
        nxt /= k + d - 2
        prev, cur = cur, nxt
        if w[k + 1] != 0.0:
            acc += w[k + 1] * cur
    return acc


def sample_sphere(n: int, d: int, seed) -> np.ndarray:
    """Draw n points uniformly on the unit sphere in R^d.

    Standard-normal rows are normalized to unit length.  A zero-norm draw
    (probability zero, but possible with a pathological generator state) is
    redrawn.  Identical (seed, n, d) reproduce the matrix bit for bit; `seed`
    may be anything accepted by numpy's default_rng.
    """
    _check_dim(d)
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    norms = np.linalg.norm(X, axis=1)
    while np.any(norms == 0.0):
        zero = norms == 0.0
        X[zero] = rng.standard_normal((int(np.sum(zero)), d))
        norms = np.linalg.norm(X, axis=1)
    return X / norms[:, None]

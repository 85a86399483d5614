"""
Pointwise algebra of principal curvatures.

Elementary symmetric functions, r-th mean curvatures, Newton
transformations and the algebraic identities that tie them together.
Every function accepts a single curvature vector; most also accept a
stack of them (leading axes), which is how the leaf modules call them.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import NamedTuple

import numpy as np

from rstab.errors import NonSymmetricInput

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CurvatureVector:
    """Principal curvatures kappa_1..kappa_n at one point."""

    kappa: np.ndarray

    def __post_init__(self):
        kappa = np.atleast_1d(np.asarray(self.kappa, dtype=float))
        if kappa.ndim != 1 or kappa.size < 1:
            raise ValueError("kappa must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(kappa)):
            raise ValueError("kappa must be finite")
        object.__setattr__(self, "kappa", kappa)

    @property
    def n(self) -> int:
        return self.kappa.size


@dataclass(frozen=True, eq=False)
class NewtonSpectrum:
    """Eigenvalues ``mu`` of T_r and the full list S_0..S_n."""

    r: int
    mu: np.ndarray
    s: np.ndarray


class TraceTriple(NamedTuple):
    tr_t: float
    tr_at: float
    tr_a2t: float


def _kappa(kv) -> np.ndarray:
    if isinstance(kv, CurvatureVector):
        return kv.kappa
    return np.asarray(kv, dtype=float)


def elementary_symmetric(x) -> np.ndarray:
    """All sigma_0..sigma_n of the last axis of ``x``.

    Uses the coefficient recurrence of prod(t + x_i), which is O(n^2)
    and avoids the cancellation of power-sum (Newton identity) routes.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    e = np.zeros(x.shape[:-1] + (n + 1,))
    e[..., 0] = 1.0
    for i in range(n):
        xi = x[..., i : i + 1]
        e[..., 1:] = e[..., 1:] + xi * e[..., :-1]
    return e


def sigma(r: int, x) -> float | np.ndarray:
    """sigma_r(x); zero outside 0 <= r <= len(x)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if r < 0 or r > n:
        return np.zeros(x.shape[:-1]) if x.ndim > 1 else 0.0
    return elementary_symmetric(x)[..., r]


def mean_curvatures(kv) -> tuple[np.ndarray, np.ndarray]:
    """Return (S, H): S_0..S_n and the normalized H_r = S_r / C(n, r)."""
    kappa = _kappa(kv)
    n = kappa.shape[-1]
    s = elementary_symmetric(kappa)
    binoms = np.array([comb(n, r) for r in range(n + 1)], dtype=float)
    return s, s / binoms


def as_shape_matrix(a, tol: float = SYMMETRY_TOL) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    asym = float(np.max(np.abs(a - np.swapaxes(a, -1, -2)))) if a.size else 0.0
    if asym > tol * scale:
        raise NonSymmetricInput(f"shape matrix asymmetry {asym:.3e} exceeds {tol:g}")
    return a


def newton_from_shape(a: np.ndarray, s: np.ndarray) -> list[np.ndarray]:
    """T_0..T_n by T_r = S_r I - A T_{r-1} for a (possibly non-symmetric) matrix.

    ``a`` may be the mixed (1,1) shape operator in any frame, and carry
    leading batch axes; ``s`` holds S_0..S_n with matching batch axes.
    """
    n = a.shape[-1]
    eye = np.broadcast_to(np.eye(n), a.shape)
    ts = [np.array(eye)]
    for r in range(1, n + 1):
        ts.append(s[..., r, None, None] * eye - a @ ts[-1])
    return ts


def newton_by_recursion(a) -> list[np.ndarray]:
    """Newton transformations T_0..T_n of a symmetric shape matrix."""
    a = as_shape_matrix(a)
    s = elementary_symmetric(np.linalg.eigvalsh(a))
    return newton_from_shape(a, s)


def cayley_hamilton_residual(a) -> float:
    """max |T_n| entry; zero in exact arithmetic."""
    return float(np.max(np.abs(newton_by_recursion(a)[-1])))


def complementary_sigma(kappa: np.ndarray, r: int) -> np.ndarray:
    """mu_i = sigma_r(kappa with entry i removed) = d sigma_{r+1} / d x_i."""
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.shape[-1]
    if r < 0 or r > n - 1:
        return np.zeros_like(kappa)
    # row i of ``others`` lists the indices j != i
    others = np.array([[j for j in range(n) if j != i] for i in range(n)], dtype=int).reshape(n, n - 1)
    return elementary_symmetric(kappa[..., others])[..., r]


def newton_by_spectrum(kv, r: int) -> NewtonSpectrum:
    kappa = _kappa(kv)
    n = kappa.shape[-1]
    if not 0 <= r <= n:
        raise ValueError(f"r must lie in 0..{n}")
    return NewtonSpectrum(r=r, mu=complementary_sigma(kappa, r), s=elementary_symmetric(kappa))


def normalizer(n: int, r: int) -> int:
    """c_r = (n - r) C(n, r), which also equals (r + 1) C(n, r + 1)."""
    left = (n - r) * comb(n, r)
    right = (r + 1) * comb(n, r + 1)
    assert left == right, (n, r)
    return left


def trace_identities(kv, r: int) -> TraceTriple:
    """Traces of T_r, A T_r and A^2 T_r from the spectrum."""
    kappa = _kappa(kv)
    return _traces(kappa, complementary_sigma(kappa, r))


def _traces(kappa: np.ndarray, mu: np.ndarray) -> TraceTriple:
    return TraceTriple(
        np.sum(mu, axis=-1),
        np.sum(kappa * mu, axis=-1),
        np.sum(kappa**2 * mu, axis=-1),
    )


def trace_closed_forms(kv, r: int) -> TraceTriple:
    """(n-r) S_r, (r+1) S_{r+1}, S_1 S_{r+1} - (r+2) S_{r+2}."""
    kappa = _kappa(kv)
    n = kappa.shape[-1]
    s = elementary_symmetric(kappa)

    def S(k):
        return s[..., k] if 0 <= k <= n else np.zeros(s.shape[:-1])

    return TraceTriple(
        (n - r) * S(r),
        (r + 1) * S(r + 1),
        S(1) * S(r + 1) - (r + 2) * S(r + 2),
    )


def trace_residuals(kv, r: int) -> np.ndarray:
    """Relative residuals of the three trace identities.

    Each difference is divided by the sum of magnitudes of the spectral
    terms, which is the natural conditioning of the sum.
    """
    kappa = _kappa(kv)
    mu = complementary_sigma(kappa, r)
    spec = np.stack(_traces(kappa, mu))
    closed = np.stack(trace_closed_forms(kappa, r))
    mags = np.stack([np.sum(np.abs(kappa**p * mu), axis=-1) for p in range(3)])
    return np.abs(spec - closed) / np.maximum(mags + np.abs(closed), np.finfo(float).tiny)


def char_poly_check(a) -> float:
    """Max |det(tI - A) - sum_r (-1)^r S_r t^(n-r)| over t = 0, +-1, +-2, ..."""
    a = as_shape_matrix(a)
    n = a.shape[-1]
    s = elementary_symmetric(np.linalg.eigvalsh(a))
    ts = [0.0]
    k = 1
    while len(ts) < n + 1:
        ts.extend([float(k), float(-k)])
        k += 1
    worst = 0.0
    for t in ts[: n + 1]:
        lhs = np.linalg.det(t * np.eye(n) - a)
        rhs = sum((-1) ** r * s[r] * t ** (n - r) for r in range(n + 1))
        worst = max(worst, abs(lhs - rhs))
    return worst


def f_r_sequence(s, c: float, n: int, rmax: int | None = None) -> np.ndarray:
    """F_0..F_rmax of the area-type functional integrand.

    F_0 = 1, F_1 = S_1, F_r = S_r + c (n - r + 1) / (r - 1) F_{r-2}.
    ``rmax`` defaults to n - 1; passing n extends the recursion one step.
    """
    s = np.asarray(s, dtype=float)
    if rmax is None:
        rmax = n - 1
    if s.shape[-1] <= rmax:
        raise ValueError("need S_0..S_rmax")
    f = np.zeros(s.shape[:-1] + (rmax + 1,))
    f[..., 0] = 1.0
    if rmax >= 1:
        f[..., 1] = s[..., 1]
    for r in range(2, rmax + 1):
        f[..., r] = s[..., r] + c * (n - r + 1) / (r - 1) * f[..., r - 2]
    return f

"""
Leaves: parametrized hypersurface patches and the foliations they sit in.

:func:`build_leaf` samples an immersion on a :class:`~rstab.grids.Grid`,
differentiates it along the grid, and assembles the unit normal, the
induced metric and its Christoffel symbols, the shape operator
A = -(nabla_X N)^T, principal curvatures and quadrature weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from rstab import symcurv
from rstab.ambient import AmbientChart, _gamma_from_metric, christoffels, riemann
from rstab.errors import DegenerateImmersion
from rstab.grids import Grid

TENSE_TOL = 1e-8
SIGN_TOL = 1e-10


@dataclass(eq=False)
class LeafPatch:
    """A sampled hypersurface. Array fields carry ``grid.shape`` leading axes.

    tangents[..., i, a] = d_i X^a; shape[..., i, j] = A^i_j (mixed);
    frame[..., :, k] is the k-th orthonormal principal direction in leaf
    coordinates, with principal curvature kappa[..., k].
    """

    chart: AmbientChart
    grid: Grid
    params: np.ndarray
    points: np.ndarray
    tangents: np.ndarray
    normal: np.ndarray
    ambient_metric: np.ndarray
    induced_metric: np.ndarray
    inverse_metric: np.ndarray
    sqrt_det: np.ndarray
    second_form: np.ndarray
    shape: np.ndarray
    kappa: np.ndarray
    frame: np.ndarray
    christoffels_leaf: np.ndarray
    volume_weights: np.ndarray
    orientation: str = "custom"
    label: str = "leaf"
    diagnostics: dict = field(default_factory=dict)
    drift_axes: tuple = ()
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.induced_metric.shape[-1]

    @property
    def compact(self) -> bool:
        return self.grid.compact

    @property
    def volume(self) -> float:
        return float(np.sum(self.volume_weights))

    def integrate(self, values) -> float:
        return float(np.sum(self.volume_weights * values))

    def diff(self, f: np.ndarray, i: int) -> np.ndarray:
        return self.grid.diff(f, i)

    def partials(self, f: np.ndarray) -> np.ndarray:
        return self.grid.gradient(f)

    def to_ambient(self, v: np.ndarray) -> np.ndarray:
        """Push leaf-coordinate vectors v^i to ambient components v^i d_i X^a."""
        return np.einsum("...i,...ia->...a", v, self.tangents)

    def inner(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Ambient inner product of ambient vectors at the nodes."""
        return np.einsum("...a,...ab,...b->...", u, self.ambient_metric, v)

    @cached_property
    def mean_curvatures(self) -> np.ndarray:
        """S_0..S_n per node."""
        return symcurv.elementary_symmetric(self.kappa)

    def newton(self, r: int) -> np.ndarray:
        """Mixed T_r in leaf coordinates, built by the recursion."""
        key = ("newton", r)
        if key not in self._cache:
            ts = symcurv.newton_from_shape(self.shape, self.mean_curvatures)
            for k, t in enumerate(ts):
                self._cache[("newton", k)] = t
            if r > self.n:
                self._cache[key] = np.zeros_like(ts[0])
        return self._cache[key]

    def S(self, k: int) -> np.ndarray:
        if 0 <= k <= self.n:
            return self.mean_curvatures[..., k]
        return np.zeros(self.grid.shape)

    @cached_property
    def ambient_curvature(self) -> np.ndarray:
        """Lowered R_abcd of the ambient metric at the nodes."""
        return riemann(self.chart, self.points).lowered

    @cached_property
    def normal_curvature_operator(self) -> np.ndarray:
        """Mixed matrix of X -> (R(X, N) N)^T in leaf coordinates."""
        low = np.einsum("...abcd,...ka,...b,...jc,...d->...kj", self.ambient_curvature,
                        self.tangents, self.normal, self.tangents, self.normal)
        return np.einsum("...ik,...kj->...ij", self.inverse_metric, low)

    @property
    def max_abs_kappa(self) -> float:
        return float(np.max(np.abs(self.kappa)))


def _periodic_drift(immersion, params, grid, x):
    """Per-axis drift X(u + P e_i) - X(u), checked to be constant."""
    drifts = []
    for i, ax in enumerate(grid.axes):
        if ax.period is None:
            drifts.append(None)
            continue
        shifted = params.copy()
        shifted[..., i] += ax.period
        d = np.asarray(immersion(shifted), dtype=float) - x
        mean = d.reshape(-1, d.shape[-1]).mean(axis=0)
        if np.max(np.abs(d - mean)) > 1e-9 * (1 + np.max(np.abs(x))):
            raise DegenerateImmersion(f"immersion drift along axis {i} is not a constant translation")
        # roundoff drift on a genuinely closed axis counts as none
        drifts.append(None if np.max(np.abs(mean)) <= 1e-12 * (1 + np.max(np.abs(x))) else mean)
    return drifts


def _cofactor_normal(tangents: np.ndarray) -> np.ndarray:
    """Covector annihilating the n tangent rows: signed n x n minors (generalized cross product).

    Unlike an SVD null vector it keeps exact zeros, e.g. N = d/dt on slices.
    """
    dim = tangents.shape[-1]
    cols = [(-1) ** a * np.linalg.det(np.delete(tangents, a, axis=-1)) for a in range(dim)]
    nu = np.stack(cols, axis=-1)
    return nu / np.max(np.abs(nu), axis=-1, keepdims=True)


def build_leaf(chart: AmbientChart, immersion: Callable, grid: Grid,
               orientation: Callable | None = None, orientation_name: str = "custom",
               label: str = "leaf") -> LeafPatch:
    """Sample and differentiate ``immersion`` (params (..., n) -> chart points (..., D)).

    ``orientation`` maps chart points to reference vectors; N is the unit
    normal with positive inner product against it.
    """
    params = grid.mesh()
    x = np.asarray(immersion(params), dtype=float)
    chart.check(x)
    n = grid.ndim
    if x.shape[-1] != n + 1 or chart.dim != n + 1:
        raise DegenerateImmersion("immersion must land in a chart of dimension n + 1")
    drifts = _periodic_drift(immersion, params, grid, x)
    rest = x.copy()
    for i, (ax, d) in enumerate(zip(grid.axes, drifts)):
        if d is not None:
            rest = rest - np.multiply.outer(params[..., i] / ax.period, d)
    tangents = np.stack([grid.diff(rest, i) + (0 if d is None else d / ax.period)
                         for i, (ax, d) in enumerate(zip(grid.axes, drifts))], axis=-2)
    flat = x.reshape(-1, x.shape[-1])
    tangents[..., np.all(flat == flat[0], axis=0)] = 0.0  # exactly constant coordinates

    gamb = chart.metric(x)
    g = np.einsum("...ia,...ab,...jb->...ij", tangents, gamb, tangents)
    eig = np.linalg.eigvalsh(g)
    if np.any(eig <= 1e-14 * np.max(eig)):
        raise DegenerateImmersion("induced metric is not positive definite")
    ginv = np.linalg.inv(g)

    nu = _cofactor_normal(tangents)
    gamb_inv = np.linalg.inv(gamb)
    normal = np.einsum("...ab,...b->...a", gamb_inv, nu)
    normal = normal / np.sqrt(np.einsum("...a,...a->...", normal, nu))[..., None]
    if orientation is not None:
        ref = np.asarray(orientation(x), dtype=float)
        align = np.einsum("...a,...ab,...b->...", normal, gamb, ref)
        if np.any(np.abs(align) < 1e-8 * np.linalg.norm(ref, axis=-1)):
            raise DegenerateImmersion("orientation field is tangent to the leaf somewhere")
        normal = normal * np.sign(align)[..., None]

    gam = christoffels(chart, x)
    dn = np.stack([grid.diff(normal, i) for i in range(n)], axis=-2)
    nabla_n = dn + np.einsum("...abc,...ib,...c->...ia", gam, tangents, normal)
    b = -np.einsum("...ia,...ab,...jb->...ij", nabla_n, gamb, tangents)
    bscale = max(1.0, float(np.max(np.abs(b))))
    selfadj = float(np.max(np.abs(b - np.swapaxes(b, -1, -2)))) / bscale
    b = 0.5 * (b + np.swapaxes(b, -1, -2))
    shape = ginv @ b

    chol = np.linalg.cholesky(g)
    linv = np.linalg.inv(chol)
    ahat = linv @ b @ np.swapaxes(linv, -1, -2)
    ahat = 0.5 * (ahat + np.swapaxes(ahat, -1, -2))
    kappa, q = np.linalg.eigh(ahat)
    frame = np.swapaxes(linv, -1, -2) @ q

    dg = np.stack([grid.diff(g, k) for k in range(n)], axis=-1)
    gam_leaf = _gamma_from_metric(g, dg)
    sqrt_det = np.sqrt(np.linalg.det(g))

    nn = np.einsum("...a,...ab,...b->...", normal, gamb, normal)
    tn = np.einsum("...ia,...ab,...b->...i", tangents, gamb, normal)
    tlen = np.sqrt(np.einsum("...ii->...i", g))
    diagnostics = {
        "normal_norm_residual": float(np.max(np.abs(nn - 1))),
        "normal_orthogonality_residual": float(np.max(np.abs(tn) / tlen)),
        "selfadjoint_residual": selfadj,
    }
    return LeafPatch(chart, grid, params, x, tangents, normal, gamb, g, ginv, sqrt_det, b, shape,
                     kappa, frame, gam_leaf, grid.weights() * sqrt_det, orientation_name, label,
                     diagnostics, tuple(i for i, d in enumerate(drifts) if d is not None))


@dataclass(frozen=True, eq=False)
class CurvatureFields:
    r: int
    s: np.ndarray
    s_r: np.ndarray
    s_r1: np.ndarray
    h_r: np.ndarray
    newton: np.ndarray
    mu: np.ndarray
    r_tense: bool
    deviation: float


def curvature_fields(leaf: LeafPatch, r: int) -> CurvatureFields:
    s, h = symcurv.mean_curvatures(leaf.kappa)
    n = leaf.n
    s_r1 = s[..., r + 1] if r + 1 <= n else np.zeros(leaf.grid.shape)
    s_r = s[..., r] if r <= n else np.zeros(leaf.grid.shape)
    h_r = h[..., r] if r <= n else np.zeros(leaf.grid.shape)
    centre = float(np.mean(s_r1))
    deviation = float(np.max(np.abs(s_r1 - centre)))
    return CurvatureFields(
        r=r, s=s, s_r=s_r, s_r1=s_r1, h_r=h_r,
        newton=leaf.newton(r),
        mu=symcurv.complementary_sigma(leaf.kappa, r),
        r_tense=deviation < TENSE_TOL * (1 + abs(centre)),
        deviation=deviation,
    )


def definiteness(mu, tol: float = SIGN_TOL) -> str:
    """Classify a spectrum: zero, pos-def, pos-semidef, neg-def, neg-semidef, indefinite."""
    mu = np.asarray(mu, dtype=float)
    scale = max(1.0, float(np.max(np.abs(mu)))) if mu.size else 1.0
    lo, hi = float(np.min(mu)), float(np.max(mu))
    eps = tol * scale
    if lo >= -eps and hi <= eps:
        return "zero"
    if lo > eps:
        return "pos-def"
    if lo >= -eps:
        return "pos-semidef"
    if hi < -eps:
        return "neg-def"
    if hi <= eps:
        return "neg-semidef"
    return "indefinite"


def is_psd(label: str) -> bool:
    return label in ("zero", "pos-def", "pos-semidef")


def is_nsd(label: str) -> bool:
    return label in ("zero", "neg-def", "neg-semidef")


def richardson_derivative(fun: Callable[[float], float], x: float, h: float = 1e-5) -> float:
    def central(step):
        return (fun(x + step) - fun(x - step)) / (2 * step)

    return (4 * central(h / 2) - central(h)) / 3


@dataclass(frozen=True)
class FoliationNormalData:
    dS_dN: float
    newton_sign: str
    nabla_N_N: np.ndarray


def foliation_normal_data(spec, r: int, t: float, sign: float = 1.0) -> FoliationNormalData:
    """N(S_{r+1}), sign of T_r and nabla_N N for the warped slice {t} x L, N = sign d/dt."""

    def s_r1(tt):
        return float(symcurv.sigma(r + 1, spec.leaf_kappa(tt, sign)))

    mu = symcurv.complementary_sigma(spec.leaf_kappa(t, sign), r)
    return FoliationNormalData(
        dS_dN=sign * richardson_derivative(s_r1, t),
        newton_sign=definiteness(mu),
        nabla_N_N=np.zeros(spec.dim),
    )


def covariant_derivative(chart: AmbientChart, field_fn: Callable, direction: np.ndarray,
                         points: np.ndarray) -> np.ndarray:
    """nabla_W V at ``points`` for an ambient field V (callable) and vectors W."""
    h = chart.fd_step * float(np.min(chart.upper - chart.lower))
    w = np.asarray(direction, dtype=float)

    def v(s):
        return field_fn(points + s * w)

    dv = (-v(2 * h) + 8 * v(h) - 8 * v(-h) + v(-2 * h)) / (12 * h)
    gam = christoffels(chart, points)
    return dv + np.einsum("...abc,...b,...c->...a", gam, w, field_fn(points))


@dataclass(eq=False)
class FoliationSlice:
    """One leaf of a codimension-one foliation plus the family data around it.

    ``kappa_of(param)`` gives the closed-form principal curvatures of the
    leaf with family parameter ``param`` (in the orientation of N);
    ``dparam_ds`` is the rate of change of the parameter along N;
    ``normal_field`` is the foliation's unit normal as an ambient field.
    """

    leaf: LeafPatch
    param: float
    kappa_of: Callable[[float], np.ndarray]
    dparam_ds: float
    normal_field: Callable[[np.ndarray], np.ndarray]
    label: str = "slice"
    family: str = "custom"
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def chart(self) -> AmbientChart:
        return self.leaf.chart

    def s_of(self, k: int, param: float) -> float:
        return float(symcurv.sigma(k, self.kappa_of(param)))

    def dS_dN(self, r: int) -> np.ndarray:
        """N(S_{r+1}) per node, Richardson-extrapolated in the family parameter."""
        val = self.dparam_ds * richardson_derivative(lambda p: self.s_of(r + 1, p), self.param)
        return np.full(self.leaf.grid.shape, val)

    def newton_sign(self, r: int) -> str:
        return definiteness(symcurv.complementary_sigma(self.kappa_of(self.param), r))

    @property
    def nabla_N_N(self) -> np.ndarray:
        """Ambient components of nabla_N N at the leaf nodes."""
        if "nnn" not in self._cache:
            leaf = self.leaf
            self._cache["nnn"] = covariant_derivative(leaf.chart, self.normal_field,
                                                      leaf.normal, leaf.points)
        return self._cache["nnn"]

    @property
    def nabla_N_N_leaf(self) -> np.ndarray:
        """nabla_N N in leaf coordinates (it is tangent since |N| = 1)."""
        leaf = self.leaf
        low = np.einsum("...a,...ab,...ib->...i", self.nabla_N_N, leaf.ambient_metric, leaf.tangents)
        return np.einsum("...ij,...j->...i", leaf.inverse_metric, low)

    def equicurved(self, r: int, spread: float = 0.25, tol: float = 1e-9) -> bool:
        """True if neighbouring leaves share this leaf's S_{r+1}."""
        ref = self.s_of(r + 1, self.param)
        others = [self.s_of(r + 1, self.param + d) for d in (-spread, -spread / 2, spread / 2, spread)]
        return all(abs(o - ref) <= tol * (1 + abs(ref)) for o in others)

"""
Ambient Riemannian charts.

An :class:`AmbientChart` is a coordinate metric on a box. Christoffel
symbols and the curvature tensor come either from 4th-order central
differences of the metric (always available) or from closed forms for
diagonal metrics g_aa = exp(2 lambda_a), which covers Euclidean space
and every warped product shipped here. The two routes are independent
and the test-suite cross-checks them.

Index conventions: ``gamma[..., a, b, c]`` is Gamma^a_{bc};
``riemann[..., a, b, c, d]`` is R^a_{bcd} with
R(d_c, d_d) d_b = R^a_{bcd} d_a and R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y],
so the sectional curvature is R_{abcd} X^a Y^b X^c Y^d for orthonormal X, Y.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from rstab.errors import InvalidSpec, OutsideDomain
from rstab.expr import Expr, as_expr

SPACE_FORM_TOL = 1e-6
EINSTEIN_TOL = 1e-6
MIN_EIGENVALUE = 1e-10


@dataclass(frozen=True, eq=False)
class AmbientChart:
    """Coordinate metric on a box ``lower <= x <= upper``.

    ``metric_fn`` maps points of shape (..., dim) to matrices (..., dim, dim).
    ``log_diag``, when given, returns (lam, dlam, ddlam) for a diagonal
    metric exp(2 lam_a): lam (..., D), dlam[..., a, c] = d_c lam_a and
    ddlam[..., a, c, d] = d_c d_d lam_a. Periodic axes are not bounds-checked.
    """

    dim: int
    lower: np.ndarray
    upper: np.ndarray
    metric_fn: Callable[[np.ndarray], np.ndarray]
    periodic: tuple = ()
    log_diag: Callable | None = None
    mode: str = "closed-form"
    fd_step: float = 1e-3
    name: str = "chart"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        if not self.periodic:
            object.__setattr__(self, "periodic", (False,) * self.dim)
        if self.mode not in ("closed-form", "finite-difference"):
            raise InvalidSpec(f"unknown derivative mode {self.mode!r}")

    @property
    def has_closed_form(self) -> bool:
        return self.log_diag is not None

    @property
    def steps(self) -> np.ndarray:
        return (self.upper - self.lower) * self.fd_step

    def with_mode(self, mode: str) -> "AmbientChart":
        return AmbientChart(self.dim, self.lower, self.upper, self.metric_fn, self.periodic,
                            self.log_diag, mode, self.fd_step, self.name, self.info)

    def with_step(self, fd_step: float) -> "AmbientChart":
        return AmbientChart(self.dim, self.lower, self.upper, self.metric_fn, self.periodic,
                            self.log_diag, self.mode, fd_step, self.name, self.info)

    def check(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.dim:
            raise OutsideDomain(f"point dimension {p.shape[-1]} != chart dimension {self.dim}")
        bounded = ~np.asarray(self.periodic)
        slack = 1e-9 * (self.upper - self.lower)
        lo = p[..., bounded] < (self.lower - slack)[bounded]
        hi = p[..., bounded] > (self.upper + slack)[bounded]
        if np.any(lo) or np.any(hi):
            raise OutsideDomain(f"point outside {self.name} domain")
        return p

    def metric(self, p) -> np.ndarray:
        return self.metric_fn(np.asarray(p, dtype=float))

    def sample_points(self, count: int = 16, seed: int = 0, shrink: float = 0.1) -> np.ndarray:
        rng = np.random.default_rng(seed)
        span = self.upper - self.lower
        lo = self.lower + shrink * span
        return lo + rng.random((count, self.dim)) * (1 - 2 * shrink) * span

    @cached_property
    def classification(self) -> "Classification":
        return classify(self, self.sample_points(16))


@dataclass(frozen=True, eq=False)
class CurvatureTensorSample:
    point: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    lowered: np.ndarray

    def antisymmetry_residual(self) -> float:
        return float(np.max(np.abs(self.riemann + np.swapaxes(self.riemann, -1, -2))))

    def bianchi_residual(self) -> float:
        r = self.riemann
        cyc = r + np.einsum("...abcd->...acdb", r) + np.einsum("...abcd->...adbc", r)
        return float(np.max(np.abs(cyc)))


@dataclass(frozen=True)
class Classification:
    kind: str  # "space-form", "einstein" or "generic"
    value: float | None
    space_form_residual: float
    einstein_residual: float

    def __str__(self):
        if self.kind == "generic":
            return "generic"
        return f"{self.kind}({self.value:.10g})"


# ---------------------------------------------------------------- derivatives


def _fd4(fun, p: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Stack of d/dx_c fun(p) on a new trailing axis (4th-order central)."""
    out = []
    for c in range(p.shape[-1]):
        e = np.zeros(p.shape[-1])
        e[c] = h[c]
        val = (-fun(p + 2 * e) + 8 * fun(p + e) - 8 * fun(p - e) + fun(p - 2 * e)) / (12 * h[c])
        out.append(val)
    return np.stack(out, axis=-1)


def _gamma_from_metric(g: np.ndarray, dg: np.ndarray) -> np.ndarray:
    ginv = np.linalg.inv(g)
    lower = (np.einsum("...dcb->...dbc", dg) + dg - np.einsum("...bcd->...dbc", dg))
    return 0.5 * np.einsum("...ad,...dbc->...abc", ginv, lower)


def _diag_gamma(lam, dlam, ddlam=None):
    d = lam.shape[-1]
    eye = np.eye(d)
    e = np.exp(2 * (lam[..., :, None] - lam[..., None, :]))  # [b, a]
    eg = e * dlam  # E[b, a] d_a lam_b
    gam = (np.einsum("ab,...ac->...abc", eye, dlam)
           + np.einsum("ac,...ab->...abc", eye, dlam)
           - np.einsum("bc,...ba->...abc", eye, eg))
    if ddlam is None:
        return gam, None
    diff = dlam[..., :, None, :] - dlam[..., None, :, :]  # [b, a, d]
    k = e[..., None] * (2 * diff * dlam[..., :, :, None] + ddlam)
    dgam = (np.einsum("ab,...acd->...abcd", eye, ddlam)
            + np.einsum("ac,...abd->...abcd", eye, ddlam)
            - np.einsum("bc,...bad->...abcd", eye, k))
    return gam, dgam


def _riemann_from(gam: np.ndarray, dgam: np.ndarray) -> np.ndarray:
    """R^a_{bcd} = d_c G^a_db - d_d G^a_cb + G^a_ce G^e_db - G^a_de G^e_cb."""
    return (np.einsum("...adbc->...abcd", dgam)
            - np.einsum("...acbd->...abcd", dgam)
            + np.einsum("...ace,...edb->...abcd", gam, gam)
            - np.einsum("...ade,...ecb->...abcd", gam, gam))


def _use_closed(chart: AmbientChart, mode: str | None) -> bool:
    mode = mode or chart.mode
    return mode == "closed-form" and chart.has_closed_form


def christoffels(chart: AmbientChart, p, mode: str | None = None) -> np.ndarray:
    """Gamma^a_{bc} at p (batched over leading axes)."""
    p = chart.check(p)
    if _use_closed(chart, mode):
        lam, dlam, _ = chart.log_diag(p)
        return _diag_gamma(lam, dlam)[0]
    g = chart.metric(p)
    dg = _fd4(chart.metric_fn, p, chart.steps)
    return _gamma_from_metric(g, dg)


def christoffel_derivatives(chart: AmbientChart, p, mode: str | None = None) -> np.ndarray:
    """dgam[..., a, b, c, d] = d_d Gamma^a_{bc}."""
    p = chart.check(p)
    if _use_closed(chart, mode):
        return _diag_gamma(*chart.log_diag(p))[1]
    h = chart.steps

    def gam(q):
        return _gamma_from_metric(chart.metric_fn(q), _fd4(chart.metric_fn, q, h))

    return _fd4(gam, p, h)


def riemann(chart: AmbientChart, p, mode: str | None = None) -> CurvatureTensorSample:
    p = chart.check(p)
    gam = christoffels(chart, p, mode)
    dgam = christoffel_derivatives(chart, p, mode)
    rie = _riemann_from(gam, dgam)
    g = chart.metric(p)
    lowered = np.einsum("...ae,...ebcd->...abcd", g, rie)
    ricci = np.einsum("...abad->...bd", rie)
    return CurvatureTensorSample(p, rie, ricci, lowered)


def space_form_tensor(g: np.ndarray) -> np.ndarray:
    """g_ac g_bd - g_ad g_bc, the curvature of unit sectional curvature."""
    return np.einsum("...ac,...bd->...abcd", g, g) - np.einsum("...ad,...bc->...abcd", g, g)


def classify(chart: AmbientChart, samples, mode: str | None = None) -> Classification:
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] < 10:
        raise ValueError("classify needs at least 10 sample points")
    cur = riemann(chart, samples, mode)
    g = chart.metric(samples)
    model = space_form_tensor(g)
    c = float(np.sum(cur.lowered * model) / np.sum(model * model))
    sf_res = float(np.max(np.abs(cur.lowered - c * model)))
    lam = float(np.sum(cur.ricci * g) / np.sum(g * g))
    ein_res = float(np.max(np.abs(cur.ricci - lam * g)))
    if sf_res < SPACE_FORM_TOL:
        return Classification("space-form", c, sf_res, ein_res)
    if ein_res < EINSTEIN_TOL:
        return Classification("einstein", lam, sf_res, ein_res)
    return Classification("generic", None, sf_res, ein_res)


def check_positive_definite(chart: AmbientChart, samples) -> float:
    g = chart.metric(np.asarray(samples, dtype=float))
    smallest = float(np.min(np.linalg.eigvalsh(g)))
    if smallest <= MIN_EIGENVALUE:
        raise InvalidSpec(f"metric of {chart.name} not positive definite (min eig {smallest:.2e})")
    return smallest


# ---------------------------------------------------------------- constructors


def _diag_metric(log_diag):
    def metric(p):
        lam = log_diag(p)[0]
        d = lam.shape[-1]
        return np.exp(2 * lam)[..., :, None] * np.eye(d)

    return metric


def make_euclidean(dim: int, lower=None, upper=None, periodic=None, name="euclidean") -> AmbientChart:
    lower = -np.ones(dim) * 4 if lower is None else np.asarray(lower, dtype=float)
    upper = np.ones(dim) * 4 if upper is None else np.asarray(upper, dtype=float)

    def log_diag(p):
        z = np.zeros(p.shape)
        return z, np.zeros(p.shape + (dim,)), np.zeros(p.shape + (dim, dim))

    periodic = tuple(periodic) if periodic is not None else (False,) * dim
    return AmbientChart(dim, lower, upper, _diag_metric(log_diag), periodic, log_diag,
                        name=name, info={"kind": "euclidean"})


@dataclass(frozen=True, eq=False)
class WarpedSpec:
    """Warped metric on an interval times a leaf.

    kind="diagonal": dt^2 + sum_i exp(-2 int phi_i dt) (dx^i)^2 over a flat torus.
    kind="isotropic": dt^2 + W(t) g_L with W = w^2 (reading="squared") or
    W = w (reading="literal"); g_L is the flat torus metric or, for
    leaf_model="hyperbolic", the horospherical metric
    dy^2 + exp(2 b y) sum (dx^k)^2 of curvature leaf_curvature = -b^2.
    Coordinates: t first, then (y,) x^1, ...
    """

    n: int
    kind: str = "diagonal"
    phis: tuple = ()
    warp: object = None
    leaf_model: str = "flat"
    leaf_curvature: float = 0.0
    reading: str = "squared"
    t_interval: tuple = (-2.0, 2.0)
    period: float = 2 * np.pi
    y_interval: tuple = (-2.5, 2.5)
    t_ref: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise InvalidSpec("leaf dimension must be >= 1")
        if self.kind == "diagonal":
            phis = tuple(as_expr(p) for p in self.phis)
            if len(phis) != self.n:
                raise InvalidSpec(f"need {self.n} functions phi_i, got {len(phis)}")
            object.__setattr__(self, "phis", phis)
        elif self.kind == "isotropic":
            if self.warp is None:
                raise InvalidSpec("isotropic warped spec needs a warping function")
            object.__setattr__(self, "warp", as_expr(self.warp))
            if self.reading not in ("squared", "literal"):
                raise InvalidSpec(f"unknown reading {self.reading!r}")
            ts = np.linspace(*self.t_interval, 401)
            if np.any(self.warp(ts) <= 0):
                raise InvalidSpec("warping function must be positive on the t-interval")
            if self.leaf_model == "hyperbolic":
                if self.leaf_curvature >= 0 or self.n < 2:
                    raise InvalidSpec("hyperbolic leaf needs curvature < 0 and n >= 2")
            elif self.leaf_model == "flat":
                if self.leaf_curvature != 0:
                    raise InvalidSpec("flat leaf model has curvature 0")
            else:
                raise InvalidSpec(f"unknown leaf model {self.leaf_model!r}")
        else:
            raise InvalidSpec(f"unknown warped kind {self.kind!r}")
        if not self.t_interval[0] < self.t_interval[1]:
            raise InvalidSpec("empty t-interval")

    @property
    def dim(self) -> int:
        return self.n + 1

    @property
    def interval_axes(self) -> tuple[int, ...]:
        """Leaf axes (0-based, leaf coordinates) that are not periodic."""
        return (0,) if self.kind == "isotropic" and self.leaf_model == "hyperbolic" else ()

    def _log_warp(self, t):
        w = self.warp
        w0, w1, w2 = w(t), w.diff()(t), w.diff(2)(t)
        k = 2.0 if self.reading == "squared" else 1.0
        ell = k * np.log(w0)
        d1 = k * w1 / w0
        d2 = k * (w2 / w0 - (w1 / w0) ** 2)
        return ell, d1, d2

    def leaf_kappa(self, t, sign: float = 1.0) -> np.ndarray:
        """Principal curvatures of the slice {t} x L for N = sign * d/dt."""
        t = np.asarray(t, dtype=float)
        if self.kind == "diagonal":
            return sign * np.stack([phi(t) for phi in self.phis], axis=-1)
        d1 = self._log_warp(t)[1]
        return np.repeat((-0.5 * sign * d1)[..., None], self.n, axis=-1)

    def log_diag(self, p):
        p = np.asarray(p, dtype=float)
        t = p[..., 0]
        d = self.dim
        lam = np.zeros(p.shape)
        dlam = np.zeros(p.shape + (d,))
        ddlam = np.zeros(p.shape + (d, d))
        if self.kind == "diagonal":
            xg, wg = np.polynomial.legendre.leggauss(48)
            half = 0.5 * (t - self.t_ref)
            mid = 0.5 * (t + self.t_ref)
            nodes = mid[..., None] + half[..., None] * xg
            for i, phi in enumerate(self.phis, start=1):
                lam[..., i] = -half * (phi(nodes) @ wg)
                dlam[..., i, 0] = -phi(t)
                ddlam[..., i, 0, 0] = -phi.diff()(t)
            return lam, dlam, ddlam
        ell, d1, d2 = self._log_warp(t)
        lam[..., 1:] = 0.5 * ell[..., None]
        dlam[..., 1:, 0] = 0.5 * d1[..., None]
        ddlam[..., 1:, 0, 0] = 0.5 * d2[..., None]
        if self.leaf_model == "hyperbolic":
            b = np.sqrt(-self.leaf_curvature)
            y = p[..., 1]
            lam[..., 2:] += b * y[..., None]
            dlam[..., 2:, 1] = b
        return lam, dlam, ddlam


def make_warped(spec: WarpedSpec, mode: str = "closed-form") -> AmbientChart:
    d = spec.dim
    lower = np.zeros(d)
    upper = np.full(d, spec.period)
    lower[0], upper[0] = spec.t_interval
    periodic = [False] + [True] * spec.n
    for ax in spec.interval_axes:
        lower[ax + 1], upper[ax + 1] = spec.y_interval
        periodic[ax + 1] = False
    if spec.kind == "isotropic":
        name = f"warped-isotropic[{spec.leaf_model},{spec.reading}]"
    else:
        name = "warped-diagonal"
    chart = AmbientChart(d, lower, upper, _diag_metric(spec.log_diag), tuple(periodic),
                         spec.log_diag, mode=mode, name=name, info={"kind": name, "spec": spec})
    check_positive_definite(chart, chart.sample_points(32, shrink=0.0))
    return chart


def exp_warped_spec(n: int, a: float, **kw) -> WarpedSpec:
    """dt^2 + exp(-2 a t) |dx|^2: hyperbolic space of curvature -a^2."""
    return WarpedSpec(n=n, kind="diagonal", phis=tuple(Expr(a) for _ in range(n)), **kw)


def cosh_warped_spec(n: int, c: float, reading: str = "squared", **kw) -> WarpedSpec:
    """dt^2 + cosh(sqrt(-c) t)^(2 or 1) g_L over a curvature-c horospherical leaf."""
    from rstab.expr import parse

    b = float(np.sqrt(-c))
    return WarpedSpec(n=n, kind="isotropic", warp=parse("cosh(b*t)", {"b": b}),
                      leaf_model="hyperbolic", leaf_curvature=c, reading=reading, **kw)

"""
Ambient vector fields on leaves: Killing/conformal classification,
normal components f = <U, N>, the conformal-field formula for J_r f,
Jacobi-field checks and the foliation-preserving condition.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from rstab.ambient import AmbientChart, christoffels
from rstab.errors import LeavesNotEquicurved, NotConformal, PreconditionFailed
from rstab.hypersurface import FoliationSlice, LeafPatch, curvature_fields
from rstab.leafcalc import ScalarField, gradient, stability_operator

KILLING_K_TOL = 1e-8
CONFORMAL_TOL = 1e-7
OPERATOR_TOL = 5e-5
NORMAL_STEP = 1e-4


@dataclass(frozen=True, eq=False)
class AmbientVectorField:
    value: Callable[[np.ndarray], np.ndarray]
    declared_kind: str = "unknown"  # unknown | killing | conformal
    name: str = "U"

    def __call__(self, p):
        return np.asarray(self.value(np.asarray(p, dtype=float)), dtype=float)


@dataclass(frozen=True, eq=False)
class ConformalReport:
    k: np.ndarray
    max_deviation: float
    verdict: str  # killing | conformal | none

    @property
    def is_conformal(self) -> bool:
        return self.verdict in ("killing", "conformal")


def _fd_jacobian(chart: AmbientChart, u: AmbientVectorField, p: np.ndarray) -> np.ndarray:
    """d_b U^a at p, jac[..., a, b], by 4th-order central differences."""
    h = chart.steps
    cols = []
    for b in range(chart.dim):
        e = np.zeros(chart.dim)
        e[b] = h[b]
        cols.append((-u(p + 2 * e) + 8 * u(p + e) - 8 * u(p - e) + u(p - 2 * e)) / (12 * h[b]))
    return np.stack(cols, axis=-1)


def covariant_jacobian(chart: AmbientChart, u: AmbientVectorField, p) -> np.ndarray:
    """nabla_b U^a as jac[..., a, b]."""
    p = np.asarray(p, dtype=float)
    gam = christoffels(chart, p)
    return _fd_jacobian(chart, u, p) + np.einsum("...abc,...c->...ab", gam, u(p))


def _lie_derivative_metric(chart, u, p):
    nab = covariant_jacobian(chart, u, p)
    g = chart.metric(p)
    low = np.einsum("...ac,...cb->...ab", g, nab)  # nabla_b U_a
    return low + np.swapaxes(low, -1, -2), g


def conformal_k(chart: AmbientChart, u: AmbientVectorField, p) -> np.ndarray:
    """Half the conformal factor: k = tr(g^-1 L_U g) / (2 dim)."""
    lug, g = _lie_derivative_metric(chart, u, p)
    return np.einsum("...ab,...ab->...", np.linalg.inv(g), lug) / (2 * chart.dim)


def conformal_factor(chart: AmbientChart, u: AmbientVectorField, samples) -> ConformalReport:
    samples = np.asarray(samples, dtype=float)
    if samples.reshape(-1, chart.dim).shape[0] < 10:
        raise ValueError("conformal_factor needs at least 10 sample points")
    lug, g = _lie_derivative_metric(chart, u, samples)
    k = np.einsum("...ab,...ab->...", np.linalg.inv(g), lug) / (2 * chart.dim)
    dev = float(np.max(np.abs(lug - 2 * k[..., None, None] * g)))
    if dev < CONFORMAL_TOL and float(np.max(np.abs(k))) < KILLING_K_TOL:
        verdict = "killing"
    elif dev < CONFORMAL_TOL:
        verdict = "conformal"
    else:
        verdict = "none"
    return ConformalReport(k, dev, verdict)


def leaf_conformal_report(leaf: LeafPatch, u: AmbientVectorField) -> ConformalReport:
    pts = leaf.points.reshape(-1, leaf.chart.dim)
    return conformal_factor(leaf.chart, u, pts)


def normal_component(leaf: LeafPatch, u: AmbientVectorField) -> ScalarField:
    return ScalarField(leaf.inner(u(leaf.points), leaf.normal), leaf)


def tangential_part(leaf: LeafPatch, v: np.ndarray) -> np.ndarray:
    """Leaf-coordinate components of the tangential projection of ambient vectors v."""
    low = np.einsum("...a,...ab,...ib->...i", v, leaf.ambient_metric, leaf.tangents)
    return np.einsum("...ij,...j->...i", leaf.inverse_metric, low)


def field_scale(leaf: LeafPatch, u: AmbientVectorField, r: int) -> float:
    """max(1, |A|_inf^(r+2) |U|_inf), the unit for operator residual contracts."""
    uval = u(leaf.points)
    unorm = float(np.sqrt(np.max(leaf.inner(uval, uval))))
    return max(1.0, leaf.max_abs_kappa ** (r + 2) * unorm)


def gradient_formula_residual(leaf: LeafPatch, u: AmbientVectorField) -> float:
    """max | grad f + (nabla_N U)^T + A U^T | over nodes, f = <U, N>."""
    f = normal_component(leaf, u)
    _, grad = gradient(f)
    nab = covariant_jacobian(leaf.chart, u, leaf.points)
    nab_n = np.einsum("...ab,...b->...a", nab, leaf.normal)
    ut = tangential_part(leaf, u(leaf.points))
    au = np.einsum("...ij,...j->...i", leaf.shape, ut)
    res = leaf.to_ambient(grad + tangential_part(leaf, nab_n) + au)
    return float(np.sqrt(np.max(leaf.inner(res, res))))


def normal_derivative_k(leaf: LeafPatch, u: AmbientVectorField, step: float = NORMAL_STEP) -> np.ndarray:
    """N(k) by central differencing k along the normal line."""
    p, nv = leaf.points, leaf.normal
    return (conformal_k(leaf.chart, u, p + step * nv)
            - conformal_k(leaf.chart, u, p - step * nv)) / (2 * step)


@dataclass(frozen=True, eq=False)
class ConformalFormula:
    """Both sides of  J_r f = -U^T(S_{r+1}) - (r+1) k S_{r+1} - N(k) (n-r) S_r."""

    lhs: np.ndarray
    rhs: np.ndarray
    k: np.ndarray
    scale: float

    @property
    def residual(self) -> float:
        return float(np.max(np.abs(self.lhs - self.rhs)))


def conformal_formula(leaf: LeafPatch, u: AmbientVectorField, r: int,
                      report: ConformalReport | None = None) -> ConformalFormula:
    report = report or leaf_conformal_report(leaf, u)
    if not report.is_conformal:
        raise NotConformal(f"{u.name}: |L_U g - 2k g| = {report.max_deviation:.2e}")
    n = leaf.n
    f = normal_component(leaf, u)
    lhs = stability_operator(f, r).values
    s_r1, s_r = leaf.S(r + 1), leaf.S(r)
    ut = tangential_part(leaf, u(leaf.points))
    u_ds = np.einsum("...i,...i->...", ut, leaf.partials(s_r1))
    k = report.k.reshape(leaf.grid.shape)
    nk = normal_derivative_k(leaf, u)
    rhs = -u_ds - (r + 1) * k * s_r1 - nk * (n - r) * s_r
    return ConformalFormula(lhs, rhs, k, field_scale(leaf, u, r))


def theorem2_residual(leaf: LeafPatch, u: AmbientVectorField, r: int) -> float:
    """max node |J_r f - RHS| of the conformal-field formula."""
    return conformal_formula(leaf, u, r).residual


def killing_formula_residual(leaf: LeafPatch, u: AmbientVectorField, r: int) -> float:
    """max |J_r f + U^T(S_{r+1})| for a Killing field (no constancy of S_{r+1} needed)."""
    report = leaf_conformal_report(leaf, u)
    if report.verdict != "killing":
        raise NotConformal(f"{u.name} is not Killing (verdict {report.verdict})")
    f = normal_component(leaf, u)
    ut = tangential_part(leaf, u(leaf.points))
    u_ds = np.einsum("...i,...i->...", ut, leaf.partials(leaf.S(r + 1)))
    return float(np.max(np.abs(stability_operator(f, r).values + u_ds)))


@dataclass(frozen=True)
class JacobiCheck:
    is_jacobi: bool
    residual: float
    scale: float


def jacobi_check(leaf: LeafPatch, u: AmbientVectorField, r: int) -> JacobiCheck:
    """Normal part of a Killing field on a leaf with constant S_{r+1} must satisfy J_r f = 0."""
    if not curvature_fields(leaf, r).r_tense:
        raise PreconditionFailed(f"S_{r + 1} is not constant on {leaf.label}")
    report = leaf_conformal_report(leaf, u)
    if report.verdict != "killing":
        raise PreconditionFailed(f"{u.name} is not a Killing field here ({report.verdict})")
    f = normal_component(leaf, u)
    res = float(np.max(np.abs(stability_operator(f, r).values)))
    scale = field_scale(leaf, u, r)
    return JacobiCheck(res < OPERATOR_TOL * scale, res, scale)


def preserving_condition(slice_: FoliationSlice, f: ScalarField) -> float:
    """max | grad f + f nabla_N N | (ambient norm) over the leaf."""
    leaf = slice_.leaf
    _, grad = gradient(f)
    v = leaf.to_ambient(grad) + f.values[..., None] * slice_.nabla_N_N
    return float(np.sqrt(np.max(leaf.inner(v, v))))


def foliation_preserving_residual(slice_: FoliationSlice, v: AmbientVectorField,
                                  r: int) -> tuple[float, float]:
    """(cond_residual, jacobi_residual) for V^perp = f N on the slice."""
    if not slice_.equicurved(r):
        raise LeavesNotEquicurved(f"leaves near {slice_.label} have different S_{r + 1}")
    leaf = slice_.leaf
    f = normal_component(leaf, v)
    return preserving_condition(slice_, f), float(np.max(np.abs(stability_operator(f, r).values)))


@dataclass(frozen=True, eq=False)
class KernelCheck:
    eigenvalues: np.ndarray
    kernel_dim: int
    cond_residuals: list
    jacobi_residuals: list


def jacobi_kernel_check(slice_: FoliationSlice, fields: list[ScalarField], r: int,
                        rel_tol: float = 1e-8) -> KernelCheck:
    """Discrete Jacobi fields from a finite basis satisfy the preserving condition?

    Assembles Q_ij = I_r(f_i, f_j) in a mass-orthonormalized basis; every
    eigenvector with |eigenvalue| <= rel_tol * |Q| is a discrete Jacobi
    field, and its preserving-condition residual is measured.
    """
    from rstab.stability import gram_matrices

    q, mass = gram_matrices(fields, r)
    w, v = np.linalg.eigh(mass)
    basis = v / np.sqrt(w)
    qn = basis.T @ q @ basis
    lam, vec = np.linalg.eigh(0.5 * (qn + qn.T))
    tol = rel_tol * max(float(np.max(np.abs(lam))), 1e-300)
    conds, jacs = [], []
    values = np.stack([f.values for f in fields], axis=-1)
    for k in np.flatnonzero(np.abs(lam) <= tol):
        coeff = basis @ vec[:, k]
        f = ScalarField(values @ coeff, slice_.leaf)
        conds.append(preserving_condition(slice_, f))
        jacs.append(float(np.max(np.abs(stability_operator(f, r).values))))
    return KernelCheck(lam, len(conds), conds, jacs)


# ---------------------------------------------------------------- catalog


def translation(axis: int, dim: int) -> AmbientVectorField:
    def value(p):
        out = np.zeros(p.shape)
        out[..., axis] = 1.0
        return out

    return AmbientVectorField(value, "killing", f"translation({axis})")


def rotation(i: int, j: int) -> AmbientVectorField:
    def value(p):
        out = np.zeros(p.shape)
        out[..., i] = -p[..., j]
        out[..., j] = p[..., i]
        return out

    return AmbientVectorField(value, "killing", f"rotation({i},{j})")


def position(centre=None) -> AmbientVectorField:
    def value(p):
        return p - (0 if centre is None else np.asarray(centre))

    return AmbientVectorField(value, "conformal", "position")


def warped_normal(fn, name: str | None = None) -> AmbientVectorField:
    """V = fn(t) d/dt on a chart whose first coordinate is t."""

    def value(p):
        out = np.zeros(p.shape)
        out[..., 0] = fn(p[..., 0])
        return out

    return AmbientVectorField(value, "unknown", name or "warped-normal")


def warped_dilation(a: float) -> AmbientVectorField:
    """d/dt + a x^i d/dx^i, locally Killing for dt^2 + exp(-2 a t)|dx|^2."""

    def value(p):
        out = a * p.copy()
        out[..., 0] = 1.0
        return out

    return AmbientVectorField(value, "killing", f"warped-dilation({a:g})")

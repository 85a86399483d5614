"""
Discrete calculus on a leaf.

The Newton-weighted Laplacian  L_r f = Tr(T_r Hess f), the stability
operator  J_r f = L_r f + (Tr(A^2 T_r) + Tr(R(N) T_r)) f,  the index form
I_r(f, g) = -int f J_r g, and the integral identities of L_r on closed
leaves. Partial derivatives come from the leaf grid (spectral on periodic
axes by default), integrals from the leaf quadrature weights.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from rstab.errors import CaseNotApplicable, MismatchedLeaf
from rstab.hypersurface import LeafPatch


@dataclass(frozen=True, eq=False)
class ScalarField:
    values: np.ndarray
    leaf: LeafPatch

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.leaf.grid.shape:
            values = np.broadcast_to(values, self.leaf.grid.shape).copy()
        if not np.all(np.isfinite(values)):
            raise ValueError("scalar field has non-finite values")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_params(cls, leaf: LeafPatch, fn) -> "ScalarField":
        """Sample ``fn(params)`` where params has shape grid.shape + (n,)."""
        return cls(fn(leaf.params), leaf)

    @classmethod
    def from_points(cls, leaf: LeafPatch, fn) -> "ScalarField":
        """Sample ``fn(points)`` on the ambient chart coordinates of the nodes."""
        return cls(fn(leaf.points), leaf)

    def __add__(self, other):
        return ScalarField(self.values + _values(other), self.leaf)

    def __sub__(self, other):
        return ScalarField(self.values - _values(other), self.leaf)

    def __mul__(self, other):
        return ScalarField(self.values * _values(other), self.leaf)

    __rmul__ = __mul__

    def integral(self) -> float:
        return self.leaf.integrate(self.values)

    def norm(self) -> float:
        return float(np.sqrt(self.leaf.integrate(self.values**2)))


def _values(x):
    return x.values if isinstance(x, ScalarField) else x


@dataclass(frozen=True, eq=False)
class OperatorSample:
    r: int
    lr_trace: ScalarField
    lr_divergence: ScalarField
    jr: ScalarField
    form_used: str = "trace"
    scale: float = 0.0

    def form_gap(self) -> float:
        """Max node difference of the two L_r forms, relative to max(|L_r f|, |T_r| |Hess f|)."""
        a, b = self.lr_trace.values, self.lr_divergence.values
        return float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), self.scale, 1e-300))


def gradient(f: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """(df_i, grad f^i): partial derivatives and the raised gradient."""
    df = f.leaf.partials(f.values)
    return df, np.einsum("...ij,...j->...i", f.leaf.inverse_metric, df)


def covariant_hessian(f: ScalarField) -> np.ndarray:
    """Hess f as a mixed (1,1) tensor H^i_j = g^ik (d_k d_j f - Gamma^l_kj d_l f)."""
    leaf = f.leaf
    n = leaf.n
    df = leaf.partials(f.values)
    second = np.empty(leaf.grid.shape + (n, n))
    for i in range(n):
        second[..., i, i] = leaf.grid.diff(f.values, i, order=2)
        for j in range(i + 1, n):
            second[..., i, j] = second[..., j, i] = leaf.diff(df[..., i], j)
    low = second - np.einsum("...lkj,...l->...kj", leaf.christoffels_leaf, df)
    return np.einsum("...ik,...kj->...ij", leaf.inverse_metric, low)


def newton_laplacian(f: ScalarField, r: int) -> ScalarField:
    """L_r f = Tr(T_r o Hess f)."""
    t = f.leaf.newton(r)
    return ScalarField(np.einsum("...ij,...ji->...", t, covariant_hessian(f)), f.leaf)


def raised_newton(leaf: LeafPatch, r: int) -> np.ndarray:
    """T^{ij} = T^i_k g^{kj}."""
    return leaf.newton(r) @ leaf.inverse_metric


def vector_divergence(leaf: LeafPatch, v: np.ndarray) -> np.ndarray:
    """div V = d_i V^i + Gamma^i_ij V^j (each component differentiated along its own axis)."""
    out = np.einsum("...iij,...j->...", leaf.christoffels_leaf, v)
    for i in range(leaf.n):
        out = out + leaf.diff(v[..., i], i)
    return out


def newton_divergence(leaf: LeafPatch, r: int) -> np.ndarray:
    """div T_r = (nabla_{e_i} T_r) e_i in leaf coordinates.

    The lowered tensor T_jk is differentiated, not T^ik: on charts with
    coordinate singularities (sphere poles) g^-1 is not smooth in the
    parameters while lowered tensors are, so this keeps spectral accuracy.
    """
    key = ("div_newton", r)
    if key not in leaf._cache:
        low = leaf.induced_metric @ leaf.newton(r)
        low = 0.5 * (low + np.swapaxes(low, -1, -2))
        gam = leaf.christoffels_leaf
        nabla = np.stack([leaf.diff(low, i) for i in range(leaf.n)], axis=-3)
        nabla = (nabla - np.einsum("...lij,...lk->...ijk", gam, low)
                 - np.einsum("...lik,...jl->...ijk", gam, low))
        div_low = np.einsum("...ij,...ijk->...k", leaf.inverse_metric, nabla)
        leaf._cache[key] = np.einsum("...mk,...k->...m", leaf.inverse_metric, div_low)
    return leaf._cache[key]


def newton_laplacian_divergence_form(f: ScalarField, r: int) -> ScalarField:
    """L_r f = div(T_r grad f) - <div T_r, grad f>."""
    leaf = f.leaf
    df, grad = gradient(f)
    v = np.einsum("...ij,...j->...i", leaf.newton(r), grad)
    dt = newton_divergence(leaf, r)
    return ScalarField(vector_divergence(leaf, v) - np.einsum("...k,...k->...", dt, df), leaf)


def shape_term(leaf: LeafPatch, r: int) -> np.ndarray:
    """Tr(A^2 T_r) per node."""
    a = leaf.shape
    return np.einsum("...ij,...jk,...ki->...", a, a, leaf.newton(r))


def ambient_curvature_term(leaf: LeafPatch, r: int) -> np.ndarray:
    """Tr(R(N) T_r) = sum_i <R(T_r e_i, N) N, e_i> per node."""
    return np.einsum("...ij,...ji->...", leaf.normal_curvature_operator, leaf.newton(r))


def potential(leaf: LeafPatch, r: int) -> np.ndarray:
    key = ("potential", r)
    if key not in leaf._cache:
        leaf._cache[key] = shape_term(leaf, r) + ambient_curvature_term(leaf, r)
    return leaf._cache[key]


def stability_operator(f: ScalarField, r: int) -> ScalarField:
    """J_r f = L_r f + (Tr(A^2 T_r) + Tr(R(N) T_r)) f."""
    return ScalarField(newton_laplacian(f, r).values + potential(f.leaf, r) * f.values, f.leaf)


def operator_sample(f: ScalarField, r: int) -> OperatorSample:
    hess = covariant_hessian(f)
    t = f.leaf.newton(r)
    lt = ScalarField(np.einsum("...ij,...ji->...", t, hess), f.leaf)
    scale = float(np.max(np.abs(t))) * float(np.max(np.abs(hess)))
    return OperatorSample(r, lt, newton_laplacian_divergence_form(f, r),
                          ScalarField(lt.values + potential(f.leaf, r) * f.values, f.leaf),
                          scale=scale)


def index_form(f: ScalarField, g: ScalarField, r: int) -> float:
    """I_r(f, g) = -int_L f J_r g."""
    if f.leaf is not g.leaf:
        raise MismatchedLeaf("index form needs two fields on the same leaf")
    return -f.leaf.integrate(f.values * stability_operator(g, r).values)


def newton_energy(f: ScalarField, r: int, extra: np.ndarray | None = None) -> np.ndarray:
    """<T_r v, v> per node for v = grad f (+ extra, in leaf coordinates)."""
    leaf = f.leaf
    _, grad = gradient(f)
    v = grad if extra is None else grad + extra
    low_t = leaf.induced_metric @ leaf.newton(r)
    return np.einsum("...i,...ij,...j->...", v, low_t, v)


def divergence_free_case(leaf: LeafPatch, r: int) -> bool:
    """Whether the ambient class guarantees div T_r = 0 for this r."""
    if r == 0:
        return True
    cls = leaf.chart.classification
    return cls.kind == "space-form" or (r == 1 and cls.kind == "einstein")


def prop0_residuals(f: ScalarField, r: int, require_case: bool = True) -> tuple[float, float]:
    """|int L_r f| and |int f L_r f + int <T_r grad f, grad f>|."""
    leaf = f.leaf
    if require_case and not divergence_free_case(leaf, r):
        raise CaseNotApplicable(
            f"ambient {leaf.chart.name} is {leaf.chart.classification}; identity needs div T_{r} = 0")
    lf = newton_laplacian(f, r).values
    res1 = abs(leaf.integrate(lf))
    res2 = abs(leaf.integrate(f.values * lf) + leaf.integrate(newton_energy(f, r)))
    return res1, res2


def dump_fields_csv(path, f: ScalarField, r: int) -> Path:
    """Write node index, coordinates, f, L_r f and J_r f to a CSV file."""
    path = Path(path)
    sample = operator_sample(f, r)
    pts = f.leaf.points.reshape(-1, f.leaf.points.shape[-1])
    cols = [f.values.ravel(), sample.lr_trace.values.ravel(), sample.jr.values.ravel()]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node"] + [f"x{a}" for a in range(pts.shape[1])] + ["f", "Lr_f", "Jr_f"])
        for k in range(pts.shape[0]):
            w.writerow([k] + [repr(float(v)) for v in pts[k]] + [repr(float(c[k])) for c in cols])
    return path

"""
r-stability of leaves.

Three independent views of the same question are provided:

* the sign criterion along a foliation (T_r semi-definite with N(S_{r+1})
  of the opposite sign), gated by the ambient curvature class;
* the spectrum of the index form I_r restricted to a finite zero-mean
  basis, which can certify instability but only "no unstable direction
  in the tested span" for stability;
* the integral identity behind the criterion,
  I_r(f, f) = int <T_r v, v> - f^2 N(S_{r+1}),  v = grad f + f nabla_N N.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from rstab import symcurv
from rstab.errors import CaseNotApplicable, HypothesisNotMet, MismatchedLeaf
from rstab.hypersurface import (FoliationSlice, LeafPatch, curvature_fields, definiteness,
                                is_nsd, is_psd)
from rstab.leafcalc import ScalarField, index_form, newton_energy, stability_operator

MEAN_TOL = 1e-10
COND_MAX = 1e8
SPECTRUM_TOL = 1e-8
IDENTITY_TOL = 1e-6


# ---------------------------------------------------------------- bases


@dataclass(frozen=True, eq=False)
class ZeroMeanBasis:
    """Zero-mean, linearly independent test functions on one leaf."""

    functions: tuple
    gram_mass: np.ndarray
    dropped: int = 0
    carrier: str = "constant"
    zero_mean: bool = True

    def __post_init__(self):
        if not self.functions:
            raise ValueError("empty basis")
        leaf = self.functions[0].leaf
        vol = leaf.volume
        for f in self.functions:
            if f.leaf is not leaf:
                raise MismatchedLeaf("basis functions live on different leaves")
            size = max(1.0, float(np.max(np.abs(f.values))))
            if self.zero_mean and abs(f.integral()) >= MEAN_TOL * vol * size:
                raise ValueError("basis function does not have zero mean")
        if np.linalg.cond(self.gram_mass) >= COND_MAX:
            raise ValueError("basis functions are numerically dependent")

    @property
    def leaf(self) -> LeafPatch:
        return self.functions[0].leaf

    @property
    def dim(self) -> int:
        return len(self.functions)

    @classmethod
    def build(cls, fields, carrier: ScalarField | None = None, project: bool = True) -> "ZeroMeanBasis":
        """Project each field to zero mean and drop near-dependent ones.

        Projection is f <- f - (int f / int c) c with carrier c = 1 on closed
        leaves. Noncompact patches need a compactly supported carrier so
        the projected functions keep their support. ``project=False`` keeps
        the raw span (used to show the constraint does not matter) and
        marks the basis as not zero-mean.
        """
        fields = list(fields)
        leaf = fields[0].leaf
        if carrier is None and not leaf.compact:
            raise ValueError("noncompact leaf: pass a compactly supported carrier")
        c = carrier if carrier is not None else ScalarField(np.ones(leaf.grid.shape), leaf)
        cint = c.integral()
        kept, dropped = [], 0
        for f in fields:
            if project:
                f = f - (f.integral() / cint) * c.values
            if f.norm() <= 1e-12 * max(1.0, float(np.max(np.abs(f.values)))):
                dropped += 1
                continue
            trial = kept + [f]
            if np.linalg.cond(mass_matrix(trial)) >= COND_MAX:
                dropped += 1
                continue
            kept = trial
        name = "constant" if carrier is None else "bump"
        return cls(tuple(kept), mass_matrix(kept), dropped, name, zero_mean=project)

    def transformed(self, matrix: np.ndarray) -> "ZeroMeanBasis":
        """The basis g_j = sum_i f_i M_ij of the same span."""
        values = np.stack([f.values for f in self.functions], axis=-1) @ matrix
        funcs = [ScalarField(values[..., j], self.leaf) for j in range(values.shape[-1])]
        return ZeroMeanBasis(tuple(funcs), mass_matrix(funcs), 0, self.carrier, self.zero_mean)


def mass_matrix(fields) -> np.ndarray:
    leaf = fields[0].leaf
    vals = np.stack([f.values.ravel() for f in fields], axis=-1)
    w = leaf.volume_weights.ravel()
    return vals.T @ (w[:, None] * vals)


def gram_matrices(fields, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Q_ij = I_r(f_i, f_j) (symmetrized) and the mass matrix."""
    leaf = fields[0].leaf
    vals = np.stack([f.values.ravel() for f in fields], axis=-1)
    jvals = np.stack([stability_operator(f, r).values.ravel() for f in fields], axis=-1)
    w = leaf.volume_weights.ravel()
    q = -vals.T @ (w[:, None] * jvals)
    return 0.5 * (q + q.T), mass_matrix(fields)


def fourier_fields(leaf: LeafPatch, kmax: int = 1, axes=None) -> list[ScalarField]:
    """cos/sin(k . u) for integer wave vectors 0 < |k|_inf <= kmax on periodic leaf axes."""
    axes = [i for i, ax in enumerate(leaf.grid.axes) if ax.kind == "periodic"] if axes is None else axes
    scale = np.array([2 * np.pi / leaf.grid.axes[i].period for i in axes])
    out = []
    seen = set()
    for k in itertools.product(range(-kmax, kmax + 1), repeat=len(axes)):
        if not any(k) or tuple(-x for x in k) in seen:
            continue
        seen.add(k)
        phase = np.einsum("...i,i->...", leaf.params[..., axes], np.asarray(k) * scale)
        out += [ScalarField(np.cos(phase), leaf), ScalarField(np.sin(phase), leaf)]
    return out


def harmonic_fields(leaf: LeafPatch, degree: int = 2, coords=None) -> list[ScalarField]:
    """Ambient coordinate monomials of degree 1..degree restricted to the leaf.

    Only non-periodic chart coordinates are used unless ``coords`` is given.
    """
    x = leaf.points
    if coords is None:
        coords = [a for a in range(x.shape[-1]) if not leaf.chart.periodic[a]]
    out = []
    for deg in range(1, degree + 1):
        for combo in itertools.combinations_with_replacement(coords, deg):
            out.append(ScalarField(np.prod([x[..., a] for a in combo], axis=0), leaf))
    return out


def bump(y, centre: float = 0.0, width: float = 0.4):
    return np.exp(-(((y - centre) / width) ** 2))


def localized_fields(leaf: LeafPatch, axis: int = 0, kmax: int = 1, degree: int = 2,
                     width: float = 0.4) -> tuple[list[ScalarField], ScalarField]:
    """bump(y) y^m x Fourier modes on the other axes, plus the bump carrier."""
    y = leaf.params[..., axis]
    b = bump(y, width=width)
    others = [i for i in range(leaf.n) if i != axis]
    modes = [np.ones(leaf.grid.shape)] + [f.values for f in fourier_fields(leaf, kmax, others)]
    out = [ScalarField(b * y**m * mode, leaf) for m in range(degree + 1) for mode in modes]
    return out, ScalarField(b, leaf)


def default_basis(leaf: LeafPatch, size: int = 1, project: bool = True) -> ZeroMeanBasis:
    """A basis suited to the leaf's parametrization.

    Noncompact patches get localized modes. Otherwise: Fourier modes along
    axes that translate in the chart, ambient monomials for round factors,
    and products of linear monomials with the Fourier modes.
    """
    if not leaf.compact:
        axis = next(i for i, ax in enumerate(leaf.grid.axes) if ax.kind == "interval")
        fields, carrier = localized_fields(leaf, axis, kmax=size)
        return ZeroMeanBasis.build(fields, carrier, project)
    modes = fourier_fields(leaf, size, list(leaf.drift_axes)) if leaf.drift_axes else []
    monos = []
    if any(ax.kind == "polar" for ax in leaf.grid.axes):
        monos = harmonic_fields(leaf, degree=size + 1)
    linear = harmonic_fields(leaf, degree=1) if monos else []
    mixed = [a * b.values for a in linear for b in modes]
    return ZeroMeanBasis.build(monos + modes + mixed, project=project)


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class CriterionResult:
    r: int
    r_tense: bool
    newton_sign: str
    normal_derivative_sign: str  # "<=0", ">=0", "mixed"
    criterion_met: bool
    hypothesis_met: bool
    ambient_class: str


@dataclass(frozen=True, eq=False)
class StabilityReport:
    r: int
    leaf_id: str
    gram_spectrum: np.ndarray
    verdict: str
    subspace_dim: int
    criterion: CriterionResult | None = None
    extras: dict = field(default_factory=dict)

    @property
    def single_signed(self) -> bool:
        return self.verdict.startswith("r-stable")

    @property
    def summary(self) -> str:
        if self.single_signed:
            return f"{self.verdict} on tested subspace (dim {self.subspace_dim})"
        return self.verdict

    def as_dict(self) -> dict:
        out = {
            "r": self.r,
            "leaf": self.leaf_id,
            "verdict": self.verdict,
            "summary": self.summary,
            "subspace_dim": self.subspace_dim,
            "gram_spectrum": [float(v) for v in self.gram_spectrum],
        }
        if self.criterion is not None:
            c = self.criterion
            out.update(r_tense=c.r_tense, Tr_sign=c.newton_sign, NSr1_sign=c.normal_derivative_sign,
                       criterion_met=c.criterion_met, hypothesis_met=c.hypothesis_met,
                       ambient_class=c.ambient_class)
        out.update(self.extras)
        return out


def hypothesis_holds(kind: str, r: int) -> bool:
    """Ambient class needed for div T_r = 0: none for r=0, Einstein for r=1, space form beyond."""
    if r == 0:
        return True
    if r == 1:
        return kind in ("einstein", "space-form")
    return kind == "space-form"


def _sign_of(values: np.ndarray, tol: float) -> str:
    if np.all(values <= tol):
        return "<=0"
    if np.all(values >= -tol):
        return ">=0"
    return "mixed"


def theorem1_criterion(slice_: FoliationSlice, r: int, strict: bool = False) -> CriterionResult:
    """Evaluate the sign criterion per node on the slice's leaf.

    T_r is classified from the computed principal curvatures of the leaf
    and N(S_{r+1}) from the family's curvature data. With ``strict`` a
    wrong ambient class raises; otherwise it is reported next to the
    (informational) criterion.
    """
    leaf = slice_.leaf
    cls = leaf.chart.classification
    hyp = hypothesis_holds(cls.kind, r)
    if strict and not hyp:
        raise HypothesisNotMet(f"r={r} needs {'an Einstein' if r == 1 else 'a space-form'} ambient, "
                               f"got {cls}")
    tense = curvature_fields(leaf, r).r_tense
    mu = symcurv.complementary_sigma(leaf.kappa, r)
    tsign = definiteness(mu)
    ns = slice_.dS_dN(r)
    nsign = _sign_of(ns, 1e-9 * max(1.0, leaf.max_abs_kappa ** (r + 2)))
    met = tense and ((is_psd(tsign) and nsign == "<=0") or (is_nsd(tsign) and nsign == ">=0"))
    return CriterionResult(r, tense, tsign, nsign, bool(met), hyp, str(cls))


def classify_spectrum(eigs: np.ndarray, tol: float = SPECTRUM_TOL) -> str:
    eps = tol * max(float(np.max(np.abs(eigs))), 1e-300)
    pos, neg = bool(np.any(eigs > eps)), bool(np.any(eigs < -eps))
    if pos and neg:
        return "r-unstable"
    if pos:
        return "r-stable (>=0)"
    if neg:
        return "r-stable (<=0)"
    return "inconclusive"


def gram_spectrum(basis: ZeroMeanBasis, r: int) -> np.ndarray:
    """Eigenvalues of Q relative to the mass matrix (basis-independent)."""
    q, mass = gram_matrices(list(basis.functions), r)
    return scipy.linalg.eigh(q, mass, eigvals_only=True)


def gram_stability(leaf: LeafPatch, r: int, basis: ZeroMeanBasis,
                   slice_: FoliationSlice | None = None) -> StabilityReport:
    if basis.leaf is not leaf:
        raise MismatchedLeaf("basis was built on another leaf")
    eigs = gram_spectrum(basis, r)
    crit = theorem1_criterion(slice_, r) if slice_ is not None else None
    newton_size = float(np.max(np.abs(leaf.newton(r))))
    if newton_size <= 1e-12 * max(1.0, leaf.max_abs_kappa) ** r:
        # T_r vanishes identically (e.g. r = n), so Q is pure roundoff
        verdict = "inconclusive"
    else:
        verdict = classify_spectrum(eigs)
    return StabilityReport(r, leaf.label, eigs, verdict, basis.dim, crit)


# ---------------------------------------------------------------- identity


@dataclass(frozen=True)
class IdentityCheck:
    lhs: float
    index: float
    scale: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.index)

    @property
    def ok(self) -> bool:
        return self.residual < IDENTITY_TOL * self.scale


def theorem1_identity(slice_: FoliationSlice, r: int, f: ScalarField) -> IdentityCheck:
    """Both sides of  int <T_r v, v> - f^2 N(S_{r+1}) = I_r(f, f),  v = grad f + f nabla_N N.

    The scale is max(1, sum of the magnitudes of the two integrals on the left).
    """
    leaf = slice_.leaf
    if f.leaf is not leaf:
        raise MismatchedLeaf("field is not on the slice's leaf")
    energy = leaf.integrate(newton_energy(f, r, extra=f.values[..., None] * slice_.nabla_N_N_leaf))
    normal = leaf.integrate(f.values**2 * slice_.dS_dN(r))
    return IdentityCheck(energy - normal, index_form(f, f, r), max(1.0, abs(energy) + abs(normal)))


def theorem1_identity_residual(slice_: FoliationSlice, r: int, f: ScalarField) -> float:
    return theorem1_identity(slice_, r, f).residual


# ---------------------------------------------------------------- functional


def ar_functional(leaf: LeafPatch, r: int, c: float) -> float:
    """int_L F_r(S_1, ..., S_r) for an ambient of constant curvature c."""
    cls = leaf.chart.classification
    if cls.kind != "space-form" or abs(cls.value - c) > 1e-6 * max(1.0, abs(c)):
        raise CaseNotApplicable(f"functional needs a space form of curvature {c:g}, ambient is {cls}")
    if not 0 <= r <= leaf.n:
        raise ValueError(f"r must lie in 0..{leaf.n}")
    f = symcurv.f_r_sequence(leaf.mean_curvatures, c, leaf.n, rmax=max(r, 1))
    return leaf.integrate(f[..., r])


def second_variation_discrepancy(build, f_fn, r: int, c: float, h: float = 1e-3) -> dict:
    """Second difference of the functional along x + s f N against (r+1) I_r(f, f).

    ``build(s)`` returns the leaf displaced by s along the normal field
    ``f N``; no volume correction is applied, so no agreement is claimed.
    """
    vals = [ar_functional(build(s), r, c) for s in (-h, 0.0, h)]
    second = (vals[0] - 2 * vals[1] + vals[2]) / h**2
    leaf = build(0.0)
    f = ScalarField.from_points(leaf, f_fn) if callable(f_fn) else f_fn
    predicted = (r + 1) * index_form(f, f, r)
    return {"second_difference": second, "predicted": predicted, "discrepancy": second - predicted}

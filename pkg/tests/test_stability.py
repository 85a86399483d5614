import numpy as np
import pytest

from rstab.ambient import WarpedSpec, cosh_warped_spec, exp_warped_spec
from rstab.errors import CaseNotApplicable, HypothesisNotMet, MismatchedLeaf
from rstab.geometries import sphere_leaf, warped_slice
from rstab.leafcalc import ScalarField
from rstab.stability import (ZeroMeanBasis, ar_functional, classify_spectrum, default_basis,
                             fourier_fields, gram_matrices, gram_spectrum, gram_stability,
                             harmonic_fields, hypothesis_holds, localized_fields,
                             second_variation_discrepancy, theorem1_criterion, theorem1_identity)

CONTROL = WarpedSpec(n=2, kind="diagonal", phis=("0.5 + 0.75*t", "0.5 + 0.75*t"))


def test_sphere_gram_spectrum(unit_sphere):
    basis = default_basis(unit_sphere)
    eigs = np.sort(gram_spectrum(basis, 0))
    # zero-mean degree <= 2 harmonics: l = 1 gives 0, l = 2 gives 6 - 2 = 4
    np.testing.assert_allclose(eigs, [0, 0, 0, 4, 4, 4, 4, 4], atol=1e-9)
    assert classify_spectrum(eigs) == "r-stable (>=0)"


def test_gram_spectrum_is_basis_invariant(ellipsoid):
    basis = ZeroMeanBasis.build(harmonic_fields(ellipsoid, 2))
    mix = np.random.default_rng(1).normal(size=(basis.dim, basis.dim))
    a, b = gram_spectrum(basis, 1), gram_spectrum(basis.transformed(mix), 1)
    np.testing.assert_allclose(np.sort(a), np.sort(b), atol=1e-8 * np.max(np.abs(a)))


def test_gram_matrices_symmetric(ellipsoid):
    q, m = gram_matrices(list(ZeroMeanBasis.build(harmonic_fields(ellipsoid, 1)).functions), 0)
    assert np.all(q == q.T)
    assert np.all(np.linalg.eigvalsh(m) > 0)


def test_basis_validation(unit_sphere, ellipsoid):
    f = ScalarField.from_points(unit_sphere, lambda x: x[..., 0])
    basis = ZeroMeanBasis.build([f, 2 * f, ScalarField(1.0, unit_sphere)])
    assert basis.dim == 1 and basis.dropped == 2
    with pytest.raises(ValueError):
        ZeroMeanBasis((ScalarField(1.0, unit_sphere),), np.eye(1))
    with pytest.raises(MismatchedLeaf):
        gram_stability(ellipsoid, 0, basis)
    raw = ZeroMeanBasis.build([ScalarField(1.0, unit_sphere), f], project=False)
    assert raw.dim == 2 and not raw.zero_mean


def test_noncompact_basis_needs_carrier(cosh_slice):
    leaf = cosh_slice.leaf
    fields, carrier = localized_fields(leaf, axis=0)
    with pytest.raises(ValueError):
        ZeroMeanBasis.build(fields)
    basis = ZeroMeanBasis.build(fields, carrier)
    assert basis.carrier == "bump" and basis.dim >= 4


def test_classify_spectrum():
    assert classify_spectrum(np.array([0.0, 1.0])) == "r-stable (>=0)"
    assert classify_spectrum(np.array([-1.0, 1e-12])) == "r-stable (<=0)"
    assert classify_spectrum(np.array([-1.0, 1.0])) == "r-unstable"
    assert classify_spectrum(np.zeros(3)) == "inconclusive"


def test_hypothesis_table():
    assert hypothesis_holds("generic", 0)
    assert hypothesis_holds("einstein", 1) and not hypothesis_holds("einstein", 2)
    assert hypothesis_holds("space-form", 3)


@pytest.mark.parametrize("r", [0, 1])
def test_exp_criterion_and_gram(exp_slice, r):
    crit = theorem1_criterion(exp_slice, r, strict=True)
    assert crit.r_tense and crit.hypothesis_met
    # S_{r+1} is constant in t, so N(S_{r+1}) = 0 and the criterion holds
    assert crit.criterion_met
    rep = gram_stability(exp_slice.leaf, r, default_basis(exp_slice.leaf), exp_slice)
    assert rep.verdict == "r-stable (>=0)"
    assert rep.as_dict()["criterion_met"]


@pytest.mark.parametrize("r", [0, 1])
def test_cosh_criterion_and_gram(cosh_slice, r):
    crit = theorem1_criterion(cosh_slice, r, strict=True)
    assert crit.criterion_met
    rep = gram_stability(cosh_slice.leaf, r, default_basis(cosh_slice.leaf), cosh_slice)
    want = "r-stable (>=0)" if crit.newton_sign.startswith("pos") else "r-stable (<=0)"
    assert rep.verdict == want


def test_top_order_form_vanishes(exp_slice):
    # T_n = 0, so I_n is identically zero and no sign can be read off
    rep = gram_stability(exp_slice.leaf, 2, default_basis(exp_slice.leaf), exp_slice)
    assert rep.verdict == "inconclusive"
    assert theorem1_criterion(exp_slice, 2).criterion_met


def test_negative_control():
    for t in (-0.2, 0.3):
        sl = warped_slice(CONTROL, t)
        crit = theorem1_criterion(sl, 1)
        assert not crit.criterion_met
        assert gram_stability(sl.leaf, 1, default_basis(sl.leaf)).verdict == "r-unstable"


def test_strict_criterion_needs_space_form():
    sl = warped_slice(cosh_warped_spec(2, -1.0, "literal"), 0.5, interval_size=32)
    with pytest.raises(HypothesisNotMet):
        theorem1_criterion(sl, 1, strict=True)
    assert not theorem1_criterion(sl, 1).hypothesis_met


@pytest.mark.parametrize("r", [0, 1])
def test_criterion_identity(exp_slice, cosh_slice, r):
    for sl in (exp_slice, cosh_slice):
        for f in default_basis(sl.leaf).functions[:4]:
            chk = theorem1_identity(sl, r, f)
            assert chk.ok and chk.residual < 1e-8 * chk.scale


def test_identity_with_drift_on_control():
    sl = warped_slice(CONTROL, 0.3)
    f = fourier_fields(sl.leaf, 1)[0]
    chk = theorem1_identity(sl, 1, f)
    assert chk.ok and abs(chk.lhs) > 1e-3


def test_ar_functional_sphere(unit_sphere):
    for r, want in ((0, 4 * np.pi), (1, 8 * np.pi), (2, 4 * np.pi)):
        assert ar_functional(unit_sphere, r, 0.0) == pytest.approx(want, rel=1e-10)
    with pytest.raises(CaseNotApplicable):
        ar_functional(unit_sphere, 1, -1.0)
    with pytest.raises(ValueError):
        ar_functional(unit_sphere, 3, 0.0)


def test_second_variation_is_reported():
    def build(s):
        return sphere_leaf(2, 1.0 + s, 16)

    out = second_variation_discrepancy(build, lambda x: np.ones(x.shape[:-1]), 0, 0.0)
    assert set(out) == {"second_difference", "predicted", "discrepancy"}
    # area of a sphere of radius 1 + s has second derivative 8 pi
    assert out["second_difference"] == pytest.approx(8 * np.pi, rel=1e-5)


def test_exp_spec_sanity():
    assert exp_warped_spec(2, 0.5).n == 2


def test_identity_converges_under_refinement():
    spec = cosh_warped_spec(2, -1.0)
    errs = []
    for k in (32, 64, 128):
        sl = warped_slice(spec, 0.5, interval_size=k)
        f = default_basis(sl.leaf).functions[2]
        errs.append(theorem1_identity(sl, 1, f).residual)
    assert errs[0] / errs[1] > 4 and (errs[1] / errs[2] > 4 or errs[2] < 1e-11)

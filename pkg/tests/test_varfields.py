import numpy as np
import pytest

from rstab.ambient import WarpedSpec
from rstab.errors import LeavesNotEquicurved, NotConformal, PreconditionFailed
from rstab.leafcalc import ScalarField
from rstab.geometries import cylinder_leaf, sphere_leaf, warped_slice
from rstab.stability import fourier_fields
from rstab.varfields import (AmbientVectorField, conformal_factor, conformal_formula,
                             foliation_preserving_residual, gradient_formula_residual, jacobi_check,
                             jacobi_kernel_check, killing_formula_residual, leaf_conformal_report,
                             normal_component, position, rotation, theorem2_residual, translation,
                             warped_dilation, warped_normal)


def test_catalog_verdicts(unit_sphere):
    chart = unit_sphere.chart
    pts = chart.sample_points(12)
    assert conformal_factor(chart, rotation(0, 1), pts).verdict == "killing"
    assert conformal_factor(chart, translation(2, 3), pts).verdict == "killing"
    rep = conformal_factor(chart, position(), pts)
    assert rep.verdict == "conformal"
    np.testing.assert_allclose(rep.k, 1.0, rtol=1e-10)
    bent = AmbientVectorField(lambda p: p**2, name="squares")
    assert conformal_factor(chart, bent, pts).verdict == "none"
    with pytest.raises(ValueError):
        conformal_factor(chart, position(), pts[:5])


@pytest.mark.parametrize("r", [0, 1])
def test_position_field_on_sphere(unit_sphere, r):
    form = conformal_formula(unit_sphere, position(), r)
    np.testing.assert_allclose(form.rhs, -(r + 1) * unit_sphere.S(r + 1), rtol=1e-8)
    assert form.residual < 1e-8


@pytest.mark.parametrize("field", [rotation(0, 2), rotation(1, 2), translation(0, 3)])
def test_killing_fields_are_jacobi_on_sphere(unit_sphere, field):
    for r in (0, 1):
        chk = jacobi_check(unit_sphere, field, r)
        assert chk.is_jacobi and chk.residual < 1e-8


def test_killing_formula_without_constant_curvature(ellipsoid):
    for field in (translation(0, 3), rotation(0, 1)):
        for r in (0, 1):
            assert killing_formula_residual(ellipsoid, field, r) < 1e-6
    with pytest.raises(PreconditionFailed):
        jacobi_check(ellipsoid, translation(0, 3), 0)
    assert gradient_formula_residual(ellipsoid, rotation(0, 2)) < 1e-9


def test_non_killing_rejected(unit_sphere):
    with pytest.raises(PreconditionFailed):
        jacobi_check(unit_sphere, position(), 0)
    with pytest.raises(NotConformal):
        killing_formula_residual(unit_sphere, position(), 0)
    with pytest.raises(NotConformal):
        theorem2_residual(unit_sphere, AmbientVectorField(lambda p: p**2), 0)


def test_cylinder_translation_along_axis():
    leaf = cylinder_leaf(3, 2, 1.0, size=8)
    f = normal_component(leaf, translation(3, 4))
    assert np.max(np.abs(f.values)) < 1e-14
    chk = jacobi_check(leaf, translation(0, 4), 2)
    assert chk.is_jacobi and chk.residual < 1e-9


def test_exp_warped_fields(exp_slice):
    leaf = exp_slice.leaf
    dil = warped_dilation(0.5)
    assert leaf_conformal_report(leaf, dil).verdict == "killing"
    assert jacobi_check(leaf, dil, 1).residual < 1e-9
    dt = warped_normal(lambda t: np.exp(-0.5 * t), "exp(-t/2) d/dt")
    assert leaf_conformal_report(leaf, dt).verdict == "conformal"
    for r in (0, 1, 2):
        assert theorem2_residual(leaf, dt, r) < 1e-8


def test_foliation_preserving(exp_slice):
    cond, jac = foliation_preserving_residual(exp_slice, warped_normal(np.sin), 1)
    assert cond < 1e-12 and jac < 1e-12
    tangent = AmbientVectorField(lambda p: np.concatenate([0 * p[..., :1], np.ones(p.shape[:-1] + (2,))],
                                                          axis=-1))
    assert foliation_preserving_residual(exp_slice, tangent, 1) == (0.0, 0.0)


def test_preserving_needs_equicurved_leaves():
    spec = WarpedSpec(n=2, kind="diagonal", phis=("0.5 + 0.3*t", "tanh(t)"))
    with pytest.raises(LeavesNotEquicurved):
        foliation_preserving_residual(warped_slice(spec, 0.2, size=8), warped_normal(np.sin), 1)


def test_discrete_jacobi_kernel(exp_slice):
    # on this leaf J_1 = L_1, whose kernel is the constants
    fields = [ScalarField(1.0, exp_slice.leaf)] + fourier_fields(exp_slice.leaf, 1)
    chk = jacobi_kernel_check(exp_slice, fields, 1)
    assert chk.kernel_dim >= 1
    assert max(chk.cond_residuals) < 1e-9


def test_conformal_formula_converges_under_refinement():
    # position field about a point off the centre, so f = <x, N> is not constant
    errs = [theorem2_residual(sphere_leaf(2, 1.0, s, method="fd4", centre=[0.3, -0.2, 0.1]),
                              position(), 1) for s in (8, 16, 32)]
    assert errs[0] / errs[1] > 4 and errs[1] / errs[2] > 4
    spectral = sphere_leaf(2, 1.0, 16, centre=[0.3, -0.2, 0.1])
    assert theorem2_residual(spectral, position(), 1) < 1e-8

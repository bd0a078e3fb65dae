import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from penalty_topopt.errors import ConfigurationError, DomainError
from penalty_topopt.material import (ElasticMaterial, GmifParams, HeatMaterial, compliance_A,
                                     gmif_deriv, gmif_eval, heat_coefficients)

E_MAX = 5000.0 * 8.0 / 3.0
MAT = ElasticMaterial(E_MAX, 1e-5 * E_MAX)


def test_compliance_endpoints():
    assert compliance_A(MAT, 1.0) == pytest.approx(1 / E_MAX, rel=1e-15)
    assert compliance_A(MAT, 0.0) == pytest.approx(1 / (1e-5 * E_MAX), rel=1e-15)


def test_compliance_midpoint_value():
    assert MAT.e_max == pytest.approx(13333.333333333334)
    expected = 0.5 * (1 / MAT.e_max + 1 / MAT.e_min)
    assert compliance_A(MAT, 0.5) == pytest.approx(expected, rel=1e-14)


def test_stiffness_factor_matches_linear_stiffness_at_endpoints():
    for chi in (0.0, 1.0):
        e_lin = (MAT.e_max - MAT.e_min) * chi + MAT.e_min
        assert 1.0 / compliance_A(MAT, chi) == pytest.approx(e_lin, rel=1e-12)


@settings(max_examples=100)
@given(a=st.floats(0, 1), b=st.floats(0, 1))
def test_compliance_affine(a, b):
    mid = compliance_A(MAT, 0.5 * (a + b))
    assert mid == pytest.approx(0.5 * (compliance_A(MAT, a) + compliance_A(MAT, b)), rel=1e-12)


@pytest.mark.parametrize("chi", [-0.01, 1.01, np.nan])
def test_compliance_domain(chi):
    with pytest.raises(DomainError):
        compliance_A(MAT, chi)


def test_compliance_array_and_tolerance():
    out = compliance_A(MAT, np.array([0.0, 1.0 + 1e-13, -1e-13]))
    assert out.shape == (3,)


@pytest.mark.parametrize("kwargs", [
    dict(e_max=1.0, e_min=2.0), dict(e_max=1.0, e_min=0.0),
    dict(e_max=2.0, e_min=1.0, nu=0.5), dict(e_max=2.0, e_min=1.0, interp="cubic"),
    dict(e_max=2.0, e_min=1.0, interp="gmif"),
])
def test_elastic_material_validation(kwargs):
    with pytest.raises(ConfigurationError):
        ElasticMaterial(**kwargs)


@pytest.mark.parametrize("interp,p", [("linear-compliance", None), ("linear-stiffness", None),
                                      ("gmif", 0.5), ("gmif", -0.5), ("gmif", 0.0)])
def test_compliance_derivative_fd(interp, p):
    mat = ElasticMaterial(10.0, 1.0, 0.3, interp, p)
    chi = np.linspace(0.1, 0.9, 9)
    t = 1e-6
    fd = (mat.compliance(chi + t) - mat.compliance(chi - t)) / (2 * t)
    assert np.allclose(mat.compliance_deriv(chi), fd, rtol=1e-7)


def test_gmif_minus_one_equals_linear_compliance():
    mat = ElasticMaterial(10.0, 1.0, 0.3, "gmif", -1.0)
    chi = np.linspace(0, 1, 11)
    assert np.allclose(mat.compliance(chi), compliance_A(mat, chi), rtol=1e-13)


def test_gmif_examples():
    assert gmif_eval(GmifParams(10, 1, 1), 0.5) == pytest.approx(5.5)
    assert gmif_eval(GmifParams(10, 1, -1), 0.5) == pytest.approx(1 / 0.55, rel=1e-14)
    for p in (-1, -0.5, 0, 0.3, 1):
        assert gmif_eval(GmifParams(10, 1, p), 1.0) == pytest.approx(10.0, rel=1e-14)
        assert gmif_eval(GmifParams(10, 1, p), 0.0) == pytest.approx(1.0, rel=1e-14)


def test_gmif_invalid():
    with pytest.raises(DomainError):
        GmifParams(0.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        GmifParams(1.0, -1.0, 1.0)
    with pytest.raises(DomainError):
        GmifParams(1.0, 2.0, np.inf)


@pytest.mark.parametrize("p", [-1.0, -0.5, 0.0, 0.5, 1.0])
def test_gmif_derivative_matches_fd(p):
    g = GmifParams(10.0, 1.0, p)
    for chi in np.arange(0.1, 0.95, 0.1):
        t = 1e-6
        fd = (gmif_eval(g, chi + t) - gmif_eval(g, chi - t)) / (2 * t)
        assert gmif_deriv(g, chi) == pytest.approx(fd, rel=1e-8)


def test_gmif_derivative_formula():
    g = GmifParams(10.0, 1.0, 0.5)
    chi = 0.3
    a, b = 10 ** 0.5, 1.0
    expected = (1 / 0.5) * ((a - b) * chi + b) ** (1 / 0.5 - 1) * (a - b)
    assert gmif_deriv(g, chi) == pytest.approx(expected, rel=1e-14)


@settings(max_examples=60)
@given(p=st.floats(-1, 1), chi=st.floats(0.01, 0.99))
def test_gmif_increasing(p, chi):
    assert gmif_deriv(GmifParams(10.0, 1.0, p), chi) > 0


@settings(max_examples=60)
@given(chi=st.floats(0.01, 0.99))
def test_power_mean_ordering(chi):
    values = [gmif_eval(GmifParams(10.0, 1.0, p), chi) for p in (-1, -0.5, 0, 0.5, 1)]
    assert all(b >= a * (1 - 1e-12) for a, b in zip(values, values[1:]))


def test_gmif_continuous_at_zero():
    g0 = gmif_eval(GmifParams(10.0, 1.0, 0.0), 0.37)
    assert gmif_eval(GmifParams(10.0, 1.0, 1e-7), 0.37) == pytest.approx(g0, rel=1e-6)
    assert gmif_eval(GmifParams(10.0, 1.0, -1e-7), 0.37) == pytest.approx(g0, rel=1e-6)


def test_heat_coefficients_endpoints():
    mat = HeatMaterial(10.0, 1.0, 1.0, 100.0)
    k, q, dk, dq = heat_coefficients(mat, 1.0)
    assert (k, q) == (10.0, 1.0)
    k, q, dk, dq = heat_coefficients(mat, 0.0)
    assert (k, q) == (1.0, 100.0)
    assert dk == 9.0 and dq == -99.0


def test_heat_coefficients_interpolation():
    k, q, _, _ = heat_coefficients(HeatMaterial(10.0, 1.0, 1.0, 100.0), 0.5)
    assert k == pytest.approx(5.5) and q == pytest.approx(50.5)
    k, _, dk, _ = heat_coefficients(HeatMaterial(10.0, 1.0, 1.0, 100.0, "gmif", -1.0), 0.5)
    assert k == pytest.approx(1 / 0.55)
    assert dk == pytest.approx(gmif_deriv(GmifParams(10.0, 1.0, -1.0), 0.5))


def test_heat_equal_sources_have_zero_source_derivative():
    _, _, _, dq = heat_coefficients(HeatMaterial(10.0, 1.0, 5.0, 5.0), np.full(4, 0.5))
    assert np.all(dq == 0)


@pytest.mark.parametrize("args", [(1.0, 10.0, 1.0, 100.0), (10.0, 0.0, 1.0, 100.0),
                                  (10.0, 1.0, 100.0, 1.0), (10.0, 1.0, 0.0, 1.0)])
def test_heat_material_validation(args):
    with pytest.raises(ConfigurationError):
        HeatMaterial(*args)

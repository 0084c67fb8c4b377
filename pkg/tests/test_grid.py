import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chemoflow.grid import (
    DomainSpec,
    FieldError,
    ScalarField,
    VectorField,
    integrate,
    inner,
    lp_norm,
    scalar_from_csv,
    scalar_to_csv,
)


@pytest.fixture
def unit16():
    return DomainSpec(1.0, 1.0, 16, 16)


def test_domain_spacings(unit16):
    assert unit16.hx == pytest.approx(1.0 / 16)
    assert unit16.area() == 1.0
    with pytest.raises(FieldError):
        DomainSpec(-1.0, 1.0, 4, 4)
    with pytest.raises(FieldError):
        DomainSpec(1.0, 1.0, 0, 4)


def test_integrate_unit_square(unit16):
    assert integrate(ScalarField.constant(unit16, 1.0)) == pytest.approx(1.0)
    assert integrate(ScalarField.zeros(unit16)) == 0.0


def test_integrate_half_indicator(unit16):
    vals = np.zeros((16, 16))
    vals[:8, :] = 1.0
    assert integrate(ScalarField(unit16, vals)) == pytest.approx(0.5)


def test_integrate_linear():
    dom = DomainSpec(2.0, 1.5, 12, 10)
    rng = np.random.default_rng(0)
    f = ScalarField(dom, rng.normal(size=(12, 10)))
    g = ScalarField(dom, rng.normal(size=(12, 10)))
    a, b = 0.7, -2.3
    lhs = integrate(ScalarField(dom, a * f.values + b * g.values))
    rhs = a * integrate(f) + b * integrate(g)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_lp_norm_constant(unit16):
    assert lp_norm(ScalarField.constant(unit16, -3.0), 2.0) == pytest.approx(3.0)


def test_lp_norm_measure_scaling():
    dom = DomainSpec(2.0, 1.0, 8, 4)
    assert lp_norm(ScalarField.constant(dom, 1.0), 4.0) == pytest.approx(2.0 ** 0.25)


def test_lp_norm_matches_loop_oracle(unit16):
    rng = np.random.default_rng(3)
    f = ScalarField(unit16, rng.normal(size=(16, 16)))
    total = 0.0
    for i in range(16):
        for j in range(16):
            total += abs(f.values[i, j]) ** 2 * unit16.cell_area
    assert lp_norm(f, 2.0) == pytest.approx(total ** 0.5, rel=1e-12)


def test_lp_norm_rejects_small_p(unit16):
    with pytest.raises(ValueError):
        lp_norm(ScalarField.zeros(unit16), 0.5)


def test_lp_norm_inf(unit16):
    vals = np.zeros((16, 16))
    vals[3, 4] = -7.0
    assert lp_norm(ScalarField(unit16, vals), np.inf) == 7.0


@settings(deadline=None, max_examples=30)
@given(
    p=st.floats(min_value=1.2, max_value=3.0),
    gamma=st.floats(min_value=3.2, max_value=6.0),
    seed=st.integers(min_value=0, max_value=10_000),
)
def test_lp_interpolation_holder(p, gamma, seed):
    # ||f||_p <= ||f||_1^theta ||f||_gamma^(1-theta) with 1/p = theta + (1-theta)/gamma
    dom = DomainSpec(1.0, 1.0, 12, 12)
    rng = np.random.default_rng(seed)
    f = ScalarField(dom, rng.uniform(0.0, 5.0, size=(12, 12)))
    theta = (gamma - p) / (p * (gamma - 1.0))
    lhs = lp_norm(f, p)
    rhs = lp_norm(f, 1.0) ** theta * lp_norm(f, gamma) ** (1.0 - theta)
    assert lhs <= rhs * (1.0 + 1e-12)


def test_scalar_field_shape_and_finite(unit16):
    with pytest.raises(FieldError):
        ScalarField(unit16, np.zeros((4, 4)))
    bad = np.zeros((16, 16))
    bad[0, 0] = np.nan
    with pytest.raises(FieldError):
        ScalarField(unit16, bad)


def test_vector_field_noslip_enforced(unit16):
    u = np.zeros((17, 16))
    v = np.zeros((16, 17))
    u[0, 3] = 1e-30
    with pytest.raises(FieldError):
        VectorField(unit16, u, v)
    u[0, 3] = 0.0
    field = VectorField(unit16, u, v)
    field.u[-1, 2] = 0.5
    field.enforce_noslip()
    field.check()


def test_stream_function_divergence_free(unit16):
    rng = np.random.default_rng(1)
    psi = rng.normal(size=(17, 17))
    psi[0, :] = psi[-1, :] = psi[:, 0] = psi[:, -1] = 0.0
    from chemoflow.operators import max_divergence

    vel = VectorField.from_stream_function(unit16, psi)
    assert max_divergence(vel) < 1e-12


def test_scalar_csv_roundtrip():
    dom = DomainSpec(1.25, 0.75, 5, 3)
    rng = np.random.default_rng(9)
    f = ScalarField(dom, rng.normal(size=(5, 3)))
    g = scalar_from_csv(scalar_to_csv(f))
    assert g.domain == dom
    assert np.array_equal(g.values, f.values)


def test_inner_product_symmetry(unit16):
    rng = np.random.default_rng(4)
    f = ScalarField(unit16, rng.normal(size=(16, 16)))
    g = ScalarField(unit16, rng.normal(size=(16, 16)))
    assert inner(f, g) == pytest.approx(inner(g, f))

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from chemoflow.grid import DomainSpec, ScalarField, VectorField, inner, inner_vec
from chemoflow import operators as ops
from chemoflow import spectral as sp


@pytest.fixture
def dom():
    return DomainSpec(1.0, 1.0, 16, 16)


@pytest.fixture
def basis(dom):
    return sp.neumann_spectral_basis(dom)


def random_scalar(dom, seed=0):
    rng = np.random.default_rng(seed)
    return ScalarField(dom, rng.normal(size=(dom.cells_x, dom.cells_y)))


def test_smallest_eigenvalue_is_one(basis):
    assert basis.eigenvalues[0] == pytest.approx(1.0, abs=1e-14)


def test_eigenvalue_count(basis, dom):
    assert basis.eigenvalues.size == dom.cells_x * dom.cells_y


def test_two_cell_eigenvalues():
    # 1D with 2 cells of width 0.5: shifted-operator spectrum {1, 9}
    d = DomainSpec(1.0, 0.5, 2, 1)
    b = sp.neumann_spectral_basis(d)
    assert np.allclose(np.sort(b.eigenvalues), [1.0, 9.0])
    # dense oracle from the stencil
    e0 = ScalarField(d, np.array([[1.0], [0.0]]))
    e1 = ScalarField(d, np.array([[0.0], [1.0]]))
    M = np.zeros((2, 2))
    for k, e in enumerate((e0, e1)):
        M[:, k] = (-ops.laplacian_neumann(e).values + e.values).ravel()
    assert np.allclose(np.sort(scipy.linalg.eigvalsh(M)), [1.0, 9.0])


def test_fractional_identity_and_constant(basis, dom):
    f = random_scalar(dom, 1)
    out = sp.fractional_power_apply(basis, 0.0, f)
    assert np.abs(out.values - f.values).max() < 1e-12
    c = ScalarField.constant(dom, 5.5)
    out = sp.fractional_power_apply(basis, 0.73, c)
    assert np.abs(out.values - 5.5).max() < 1e-12


def dense_shifted_operator(dom):
    n = dom.cells_x * dom.cells_y
    M = np.zeros((n, n))
    for idx in range(n):
        e = np.zeros(n)
        e[idx] = 1.0
        fe = ScalarField(dom, e.reshape(dom.cells_x, dom.cells_y))
        M[:, idx] = (-ops.laplacian_neumann(fe).values + fe.values).ravel()
    return M


@pytest.mark.parametrize("alpha", [-0.5, 0.25, 0.37, 1.3])
def test_fractional_matches_dense_oracle(dom, basis, alpha):
    lam, V = scipy.linalg.eigh(dense_shifted_operator(dom))
    f = random_scalar(dom, 42)
    dense = (V @ (lam**alpha * (V.T @ f.values.ravel()))).reshape(dom.cells_x, dom.cells_y)
    out = sp.fractional_power_apply(basis, alpha, f)
    assert np.abs(out.values - dense).max() < 1e-10


def test_fractional_semigroup(basis, dom):
    f = random_scalar(dom, 2)
    a = sp.fractional_power_apply(basis, 0.3, sp.fractional_power_apply(basis, 0.45, f))
    b = sp.fractional_power_apply(basis, 0.75, f)
    assert np.abs(a.values - b.values).max() < 1e-10


def test_fractional_self_adjoint(basis, dom):
    f = random_scalar(dom, 3)
    g = random_scalar(dom, 4)
    a = inner(sp.fractional_power_apply(basis, 0.37, f), g)
    b = inner(f, sp.fractional_power_apply(basis, 0.37, g))
    assert a == pytest.approx(b, rel=1e-10, abs=1e-12)


@settings(deadline=None, max_examples=40)
@given(
    seed=st.integers(0, 9999),
    exps=st.tuples(
        st.floats(-0.8, 1.5), st.floats(-0.8, 1.5), st.floats(-0.8, 1.5)
    ).filter(lambda e: min(abs(e[0] - e[1]), abs(e[1] - e[2]), abs(e[0] - e[2])) > 0.05),
)
def test_moment_inequality_spectral(seed, exps):
    # ||L^a f|| <= ||L^d f||^((a-b)/(d-b)) ||L^b f||^((d-a)/(d-b)) for b < a < d
    dom = DomainSpec(1.0, 1.0, 12, 12)
    basis = sp.neumann_spectral_basis(dom)
    b, a, d = sorted(exps)
    f = random_scalar(dom, seed)
    na = np.sqrt(sp.fractional_norm_sq(basis, a, f))
    nb = np.sqrt(sp.fractional_norm_sq(basis, b, f))
    nd = np.sqrt(sp.fractional_norm_sq(basis, d, f))
    t = (a - b) / (d - b)
    assert na <= (nd**t) * (nb ** (1.0 - t)) * (1.0 + 1e-12)


def test_scalar_implicit_solver_residual(dom):
    rhs = random_scalar(dom, 5)
    x = sp.solve_scalar_implicit(rhs, 1.3, 2e-3)
    res = 1.3 * x.values - 2e-3 * ops.laplacian_neumann(x).values - rhs.values
    assert np.abs(res).max() < 1e-12 * max(1.0, np.abs(rhs.values).max())


def test_velocity_diffusion_solver_residual(dom):
    rng = np.random.default_rng(6)
    w = VectorField.zeros(dom)
    w.u[1:-1, :] = rng.normal(size=(dom.cells_x - 1, dom.cells_y))
    w.v[:, 1:-1] = rng.normal(size=(dom.cells_x, dom.cells_y - 1))
    dt = 4e-3
    sol = sp.solve_velocity_diffusion(w, dt)
    lap = ops.laplacian_vector(sol)
    assert np.abs(sol.u - dt * lap.u - w.u).max() < 1e-12
    assert np.abs(sol.v - dt * lap.v - w.v).max() < 1e-12


# ---------------------------------------------------------------------------
# Dense Stokes path


@pytest.fixture(scope="module")
def sdom():
    return DomainSpec(1.0, 0.8, 10, 8)


@pytest.fixture(scope="module")
def sbasis(sdom):
    return sp.stokes_basis(sdom)


def test_stokes_gate():
    with pytest.raises(ValueError, match="velocity unknowns"):
        sp.stokes_basis(DomainSpec(1.0, 1.0, 96, 96))


def test_stokes_spectrum_positive_orthonormal(sbasis, sdom):
    assert sbasis.lam[0] > 0
    assert sbasis.gram_error() < 1e-10
    assert sbasis.lam.size == (sdom.cells_x - 1) * (sdom.cells_y - 1)


def test_stokes_alpha_zero_is_projection(sbasis, sdom):
    rng = np.random.default_rng(7)
    vel = VectorField.zeros(sdom)
    vel.u[1:-1, :] = rng.normal(size=(sdom.cells_x - 1, sdom.cells_y))
    vel.v[:, 1:-1] = rng.normal(size=(sdom.cells_x, sdom.cells_y - 1))
    proj, _ = ops.helmholtz_project(vel)
    out = sp.stokes_fractional_apply(sbasis, 0.0, vel)
    assert np.abs(out.u - proj.u).max() < 1e-10
    assert np.abs(out.v - proj.v).max() < 1e-10


def test_stokes_eigenvector_apply(sbasis, sdom):
    k = 3
    ev = sp.unpack_velocity(sdom, sbasis.modes[:, k])
    out = sp.stokes_fractional_apply(sbasis, 1.0, ev)
    assert np.abs(out.u - sbasis.lam[k] * ev.u).max() < 1e-9 * sbasis.lam[k]


def test_stokes_half_power_identity(sbasis, sdom):
    rng = np.random.default_rng(8)
    vel = VectorField.zeros(sdom)
    vel.u[1:-1, :] = rng.normal(size=(sdom.cells_x - 1, sdom.cells_y))
    vel.v[:, 1:-1] = rng.normal(size=(sdom.cells_x, sdom.cells_y - 1))
    pvel, _ = ops.helmholtz_project(vel)
    lhs = sp.stokes_fractional_norm_sq(sbasis, 0.5, pvel)
    rhs = inner_vec(sp.stokes_fractional_apply(sbasis, 1.0, pvel), pvel)
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_stokes_matches_projected_laplacian(sbasis, sdom):
    rng = np.random.default_rng(9)
    vel = VectorField.zeros(sdom)
    vel.u[1:-1, :] = rng.normal(size=(sdom.cells_x - 1, sdom.cells_y))
    vel.v[:, 1:-1] = rng.normal(size=(sdom.cells_x, sdom.cells_y - 1))
    pvel, _ = ops.helmholtz_project(vel)
    Av = sp.stokes_fractional_apply(sbasis, 1.0, pvel)
    plap, _ = ops.helmholtz_project(ops.laplacian_vector(pvel))
    assert np.abs(Av.u + plap.u).max() < 1e-8
    assert np.abs(Av.v + plap.v).max() < 1e-8


def test_stokes_moment_inequality(sbasis, sdom):
    rng = np.random.default_rng(10)
    vel = VectorField.zeros(sdom)
    vel.u[1:-1, :] = rng.normal(size=(sdom.cells_x - 1, sdom.cells_y))
    vel.v[:, 1:-1] = rng.normal(size=(sdom.cells_x, sdom.cells_y - 1))
    for b, a, d in ((0.0, 0.3, 0.9), (-0.5, 0.1, 0.6), (0.2, 0.5, 1.1)):
        na = np.sqrt(sp.stokes_fractional_norm_sq(sbasis, a, vel))
        nb = np.sqrt(sp.stokes_fractional_norm_sq(sbasis, b, vel))
        nd = np.sqrt(sp.stokes_fractional_norm_sq(sbasis, d, vel))
        t = (a - b) / (d - b)
        assert na <= (nd**t) * (nb ** (1.0 - t)) * (1.0 + 1e-12)


def test_stokes_curl_columns_match_stream_construction(sdom):
    # the kernel construction must agree with the curl of nodal streams
    nx, ny = sdom.cells_x, sdom.cells_y
    i, j = 3, 2
    psi = np.zeros((nx + 1, ny + 1))
    psi[i, j] = 1.0
    vel = VectorField.from_stream_function(sdom, psi)
    assert ops.max_divergence(vel) < 1e-13

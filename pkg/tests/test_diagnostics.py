import math

import numpy as np
import pytest

from chemoflow.grid import DomainSpec, ScalarField, VectorField, integrate
from chemoflow import spectral
from chemoflow.initial import InitialSpec, make_initial_data
from chemoflow.stepper import Params, SimState, StepReport, default_potential, step
from chemoflow.diagnostics import (
    check_energy_dissipation,
    check_mass_inequality,
    compute_record,
    grad_sq_sqrt,
    interp_inequality_slack,
    load_records_csv,
    load_reports_csv,
    records_to_csv,
    reports_to_csv,
    spectral_cross_checks,
)


@pytest.fixture
def dom():
    return DomainSpec(1.0, 1.0, 24, 24)


@pytest.fixture
def params(dom):
    return Params(r=1.0, mu=2.0, gamma=1.8, kappa=1, epsilon=0.05, sigma=0.2,
                  potential=default_potential(dom, 0.5))


@pytest.fixture
def basis(dom):
    return spectral.neumann_spectral_basis(dom)


def zero_state(dom):
    return SimState(0.0, ScalarField.zeros(dom), ScalarField.zeros(dom),
                    VectorField.zeros(dom), ScalarField.zeros(dom))


def run_state(dom, params, steps=30, seed=3):
    n0, c0, u0 = make_initial_data(dom, InitialSpec("gaussian-bump", seed=seed, mass=1.0,
                                                    c_level=0.1, u_amplitude=0.2))
    st = SimState(0.0, n0, c0, u0, ScalarField.zeros(dom))
    for _ in range(steps):
        st, _ = step(st, params)
    return st


def test_zero_state_record(dom, params, basis):
    rec = compute_record(zero_state(dom), params, basis)
    assert rec.mass == 0.0
    assert rec.quasi_energy == 0.0
    assert rec.n_linf == 0.0
    assert rec.u_l2 == 0.0
    assert rec.frac_c == 0.0
    assert math.isnan(rec.frac_u)


def test_uniform_state_record(dom, params, basis):
    st = zero_state(dom)
    st.n.values[:] = 1.0
    rec = compute_record(st, params, basis)
    assert rec.mass == pytest.approx(1.0)
    assert rec.quasi_energy == pytest.approx(0.0, abs=1e-14)  # 1 ln 1 = 0
    assert rec.n_linf == 1.0
    assert rec.n_gamma_norm == pytest.approx(1.0)


def test_grad_log_matches_bruteforce(dom, params, basis):
    st = run_state(dom, params, steps=15)
    rec = compute_record(st, params, basis)
    logn = np.log1p(st.n.values)
    total = 0.0
    hx, hy = dom.hx, dom.hy
    for i in range(dom.cells_x - 1):
        for j in range(dom.cells_y):
            total += ((logn[i + 1, j] - logn[i, j]) / hx) ** 2
    for i in range(dom.cells_x):
        for j in range(dom.cells_y - 1):
            total += ((logn[i, j + 1] - logn[i, j]) / hy) ** 2
    assert rec.grad_log_n == pytest.approx(total * dom.cell_area, rel=1e-12)


def test_spectral_cross_checks_agree(dom, params, basis):
    st = run_state(dom, params, steps=10)
    for name, (direct, spec) in spectral_cross_checks(st, params, basis).items():
        assert direct == pytest.approx(spec, rel=1e-9), name


def test_quasi_energy_lower_bound(dom, params, basis):
    st = zero_state(dom)
    st.n.values[:] = 1.0 / math.e  # pointwise minimizer of s ln s
    rec = compute_record(st, params, basis)
    assert rec.quasi_energy >= -dom.area() / math.e - 1e-12
    assert rec.quasi_energy == pytest.approx(-dom.area() / math.e)


def test_grad_sq_sqrt_no_bias_at_zero(dom):
    vals = np.zeros((dom.cells_x, dom.cells_y))
    vals[:12, :] = 1.0  # sharp front touching n = 0
    out = grad_sq_sqrt(ScalarField(dom, vals))
    assert math.isfinite(out) and out > 0


def test_interp_inequality_nonnegative_slack(dom):
    rng = np.random.default_rng(0)
    for seed in range(5):
        f = ScalarField(dom, rng.uniform(0, 3, size=(dom.cells_x, dom.cells_y)))
        assert interp_inequality_slack(f, 1.8) >= -1e-12


def test_record_includes_configured_lp(dom, params, basis):
    st = run_state(dom, params, steps=5)
    rec = compute_record(st, params, basis, p_list=(2.0, 3.0, 5.0))
    assert set(rec.n_lp) == {2.0, 3.0, 5.0}
    assert rec.n_lp[2.0] == pytest.approx(rec.n_l2_sq, rel=1e-12)


def test_frac_u_with_dense_basis(params):
    sdom = DomainSpec(1.0, 1.0, 12, 12)
    sparams = Params(r=1.0, mu=2.0, gamma=1.8, kappa=1, epsilon=0.05, sigma=0.2,
                     potential=default_potential(sdom, 0.5))
    stokes = spectral.stokes_basis(sdom)
    basis = spectral.neumann_spectral_basis(sdom)
    st = run_state(sdom, sparams, steps=10)
    rec = compute_record(st, sparams, basis, stokes=stokes)
    assert math.isfinite(rec.frac_u) and rec.frac_u >= 0.0


# ----------------------------------------------------------------------------
# Mass-inequality checker


def make_reports(masses, dts, reactions, clips=None):
    clips = clips or [0.0] * len(dts)
    reps = []
    for k, (dt, re, cl) in enumerate(zip(dts, reactions, clips)):
        reps.append(StepReport(dt, masses[k], masses[k + 1], re, int(cl > 0), cl, 3))
    return reps


def test_mass_verdict_pass_on_run(dom, params):
    n0, c0, u0 = make_initial_data(dom, InitialSpec("gaussian-bump", seed=1, mass=2.0,
                                                    u_amplitude=0.2))
    st = SimState(0.0, n0, c0, u0, ScalarField.zeros(dom))
    reports = []
    for _ in range(200):
        st, rep = step(st, params)
        reports.append(rep)
    verdict = check_mass_inequality(reports)
    assert verdict.passed
    assert verdict.worst <= 1e-8 * reports[0].mass_before


def test_mass_verdict_detects_corruption(dom, params):
    n0, c0, u0 = make_initial_data(dom, InitialSpec("gaussian-bump", seed=1, mass=2.0,
                                                    u_amplitude=0.2))
    st = SimState(0.0, n0, c0, u0, ScalarField.zeros(dom))
    reports = []
    for _ in range(50):
        st, rep = step(st, params)
        reports.append(rep)
    reports[30].mass_after *= 1.01  # bump mass by 1%
    verdict = check_mass_inequality(reports)
    assert not verdict.passed
    assert verdict.worst_index == 30


def test_mass_verdict_decreasing_when_f_negligible(dom):
    # r = 0 and tiny n: only damping remains, mass cannot grow
    params = Params(r=0.0, mu=1.0, gamma=2.0, kappa=1, epsilon=0.05, sigma=0.2,
                    potential=default_potential(dom, 0.5))
    n0, c0, u0 = make_initial_data(dom, InitialSpec("gaussian-bump", seed=2, mass=1e-4,
                                                    u_amplitude=0.05))
    st = SimState(0.0, n0, c0, u0, ScalarField.zeros(dom))
    masses = [integrate(st.n)]
    reports = []
    for _ in range(100):
        st, rep = step(st, params)
        masses.append(rep.mass_after)
        reports.append(rep)
    assert all(b <= a + 1e-14 for a, b in zip(masses, masses[1:]))
    assert check_mass_inequality(reports).passed


def test_mass_verdict_empty_history():
    with pytest.raises(ValueError):
        check_mass_inequality([])


# ----------------------------------------------------------------------------
# Energy checker gating


def test_energy_checker_gates_on_mass(dom, params, basis):
    st = zero_state(dom)
    st.n.values[:] = 10.0  # mass far above the gate
    recs = []
    for k in range(10):
        rec = compute_record(st, params, basis)
        rec.time = 0.1 * k
        rec.frac_u = 0.0
        recs.append(rec)
    verdict = check_energy_dissipation(recs, params, 0.0, c_star=1.0)
    assert verdict.status == "gated"
    assert verdict.checked_steps == 0


def test_energy_checker_pass_on_rest_state(dom, params, basis):
    st = zero_state(dom)
    recs = []
    for k in range(20):
        rec = compute_record(st, params, basis)
        rec.time = 0.1 * k
        rec.frac_u = 0.0
        recs.append(rec)
    verdict = check_energy_dissipation(recs, params, 0.0, c_star=1.0)
    assert verdict.status == "pass"
    assert verdict.violation_fraction == 0.0
    assert verdict.c4 > 0.0


# ----------------------------------------------------------------------------
# CSV round trips


def test_records_csv_roundtrip(tmp_path, dom, params, basis):
    sts = [run_state(dom, params, steps=k, seed=4) for k in (0, 3)]
    recs = [compute_record(s, params, basis) for s in sts]
    path = tmp_path / "records.csv"
    records_to_csv(recs, path)
    back = load_records_csv(path)
    assert len(back) == 2
    assert back[0].mass == recs[0].mass
    assert back[1].grad_c_l2 == recs[1].grad_c_l2
    assert back[1].n_lp == recs[1].n_lp


def test_reports_csv_roundtrip(tmp_path):
    reps = make_reports([2.0, 2.1, 2.15], [0.1, 0.1], [0.5, 0.25])
    path = tmp_path / "steps.csv"
    reports_to_csv(reps, path)
    back = load_reports_csv(path)
    assert len(back) == 2
    assert back[0].mass_after == reps[0].mass_after
    assert back[1].reaction_integral == reps[1].reaction_integral

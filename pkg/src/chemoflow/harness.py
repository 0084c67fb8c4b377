"""Scenario orchestration: single runs, regularization refinement, degradation
sweeps, manufactured-solution convergence, and bundle persistence.

A run bundle directory contains ``records.csv`` (diagnostics stream),
``steps.csv`` (per-step mass budget), ``summary.json`` (schema-versioned
verdicts) and, unless disabled, SVG figures.  ``check`` re-derives the
verdicts from the stored CSVs.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .grid import DomainSpec, ScalarField, VectorField, integrate
from . import spectral
from .config import RunConfig
from .diagnostics import (
    check_energy_dissipation,
    check_mass_inequality,
    compute_record,
    grad_sq_scalar,
    load_records_csv,
    load_reports_csv,
    records_to_csv,
    reports_to_csv,
    write_summary,
)
from .initial import make_initial_data
from .oracles import gn_estimate_cached, logistic_limit
from .stepper import (
    NanError,
    SimState,
    StepReport,
    pow_gamma,
    stable_dt,
    step,
    step_c,
    step_n,
    write_checkpoint,
)
from .weakforms import (
    Trajectory,
    log_supersolution_residual,
    scalar_test_bank,
    vector_test_bank,
    weak_residual_c,
    weak_residual_u,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INVARIANT = 2
EXIT_NAN = 3


@dataclass
class RunResult:
    config: RunConfig
    records: list
    reports: list
    states: list  # trajectory samples (record cadence)
    final_state: SimState
    verdicts: dict
    exit_code: int
    out_dir: Path | None


def _initial_state(config: RunConfig) -> SimState:
    n0, c0, u0 = make_initial_data(config.domain, config.initial)
    return SimState(0.0, n0, c0, u0, ScalarField.zeros(config.domain))


def _snapshot(state: SimState) -> SimState:
    return SimState(state.time, state.n.copy(), state.c.copy(), state.u.copy(), state.pressure.copy())


def mass_settling_time(records, limit: float, rel: float = 0.10) -> float | None:
    """First record time with mass within rel of the logistic ceiling for 3 in a row."""
    run = 0
    for rec in records:
        if limit == 0.0:
            close = rec.mass <= rel
        else:
            close = abs(rec.mass - limit) <= rel * limit or rec.mass < limit
        run = run + 1 if close else 0
        if run >= 3:
            return rec.time
    return None


class SimulationAbort(RuntimeError):
    """Carries the partial history and last valid state of an aborted run."""

    def __init__(self, cause: NanError, records, reports, last_state: SimState):
        super().__init__(str(cause))
        self.cause = cause
        self.records = records
        self.reports = reports
        self.last_state = last_state


def simulate(config: RunConfig, keep_states: bool = False):
    """Core loop: returns (records, reports, states, final_state)."""
    basis = spectral.neumann_spectral_basis(config.domain)
    stokes = (
        spectral.stokes_basis(config.domain) if config.diagnostics.dense_stokes else None
    )
    state = _initial_state(config)
    p_list = config.diagnostics.n_lp_list
    records = [compute_record(state, config.params, basis, stokes, p_list)]
    states = [_snapshot(state)] if keep_states else []
    reports: list[StepReport] = []

    k = 0
    t_end = config.t_end
    while state.time < t_end * (1.0 - 1e-12):
        if config.fixed_dt:
            dt = min(config.dt_max, t_end - state.time)
        else:
            dt = min(stable_dt(state, config.params, config.dt_max), t_end - state.time)
        try:
            state, rep = step(state, config.params, dt=dt, dt_max=config.dt_max)
        except NanError as exc:
            raise SimulationAbort(exc, records, reports, state) from exc
        reports.append(rep)
        k += 1
        on_cadence = k % config.record_every == 0
        if on_cadence or state.time >= t_end * (1.0 - 1e-12):
            records.append(compute_record(state, config.params, basis, stokes, p_list))
            if keep_states and on_cadence:
                states.append(_snapshot(state))  # trajectory samples stay uniform
    return records, reports, states, state


def run_single(config: RunConfig, out_dir=None, render: bool = True) -> RunResult:
    """Run to t_end, evaluate all enabled checkers, persist the bundle."""
    out = Path(out_dir if out_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    verdicts: dict = {}
    try:
        keep = config.diagnostics.weak_residuals
        records, reports, states, final_state = simulate(config, keep_states=keep)
    except SimulationAbort as abort:
        exc = abort.cause
        write_checkpoint(out / "state_dump.json", abort.last_state, config.params)
        records_to_csv(abort.records, out / "records.csv", config.diagnostics.n_lp_list)
        reports_to_csv(abort.reports, out / "steps.csv")
        verdicts = {
            "nan_abort": {"field": exc.field_name, "time": exc.time, "message": str(exc)}
        }
        write_summary(out / "summary.json", verdicts, _summary_extra(config))
        return RunResult(config, abort.records, abort.reports, [], abort.last_state,
                         verdicts, EXIT_NAN, out)

    exit_code = EXIT_OK
    if config.diagnostics.mass_check and reports:
        mv = check_mass_inequality(reports)
        verdicts["mass_inequality"] = {
            "passed": mv.passed,
            "worst": mv.worst,
            "worst_index": mv.worst_index,
            "clip_mass_total": mv.clip_mass_total,
        }
        if not mv.passed:
            exit_code = EXIT_INVARIANT

    gn_est = None
    if config.diagnostics.energy_check:
        gn_est = gn_estimate_cached(
            out / "gn_cache.json",
            config.domain,
            probes=config.gn.probes,
            ascent_iters=config.gn.ascent_iters,
            seed=config.gn.seed,
            gamma=config.params.gamma,
        )
        limit = logistic_limit(
            config.params.r, config.params.mu, config.params.gamma, config.domain.area()
        )
        t1 = mass_settling_time(records, limit)
        ev = check_energy_dissipation(
            records, config.params, t1 if t1 is not None else math.inf, gn_est.c_star_lower
        )
        verdicts["energy_dissipation"] = {
            "status": ev.status,
            "violation_fraction": ev.violation_fraction,
            "checked_steps": ev.checked_steps,
            "c3": ev.c3,
            "c4": ev.c4,
            "mass_gate": ev.mass_gate,
            "t1_estimate": t1,
            "c_star_lower": gn_est.c_star_lower,
        }
        if ev.status == "fail":
            exit_code = EXIT_INVARIANT

    if config.diagnostics.weak_residuals and states:
        traj = Trajectory.from_states(states)
        bank = scalar_test_bank(config.domain, traj.t_start, traj.t_end)
        vbank = vector_test_bank(config.domain, traj.t_start, traj.t_end)
        res_c = [weak_residual_c(traj, config.params, phi) for phi in bank]
        res_u = [weak_residual_u(traj, config.params, phi) for phi in vbank]
        logs = [log_supersolution_residual(traj, config.params, phi) for phi in bank]
        verdicts["weak_residuals"] = {
            "c_max": max(res_c),
            "u_max": max(res_u),
            "log_identity_max": max(l.identity for l in logs),
            "log_slack_min": min(l.slack for l in logs),
        }

    records_to_csv(records, out / "records.csv", config.diagnostics.n_lp_list)
    reports_to_csv(reports, out / "steps.csv")
    write_checkpoint(out / "final_state.json", final_state, config.params)
    write_summary(out / "summary.json", verdicts, _summary_extra(config))
    if render:
        from . import plots

        plots.render_run_figure(records, out / "records.svg")
    return RunResult(config, records, reports, states, final_state, verdicts, exit_code, out)


def _summary_extra(config: RunConfig) -> dict:
    return {
        "config": {
            "domain": [
                config.domain.length_x,
                config.domain.length_y,
                config.domain.cells_x,
                config.domain.cells_y,
            ],
            "params": {
                "r": config.params.r,
                "mu": config.params.mu,
                "gamma": config.params.gamma,
                "kappa": config.params.kappa,
                "epsilon": config.params.epsilon,
                "sigma": config.params.sigma,
            },
            "initial": {
                "preset": config.initial.preset,
                "seed": config.initial.seed,
                "mass": config.initial.mass,
            },
            "t_end": config.t_end,
            "dt_max": config.dt_max,
            "record_every": config.record_every,
            "fixed_dt": config.fixed_dt,
        }
    }


# ----------------------------------------------------------------------------
# Regularization refinement

@dataclass
class SweepResult:
    axis: list
    summaries: list
    distances: dict
    verdicts: dict


def _trapezoid_weights(m: int, dt: float) -> np.ndarray:
    w = np.full(m, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def run_eps_refinement(config: RunConfig, eps_list, threads: int = 1) -> SweepResult:
    """Identical configs varying only the regularization strength.

    Distances between consecutive runs: density in L1(Omega x (0,T)), signal
    in the L2((0,T); W^{1,2}) surrogate (matched time samples; dt is fixed).
    """
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3:
        raise ValueError("need at least 3 regularization values")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps list must be strictly decreasing")
    if any(e < 0 for e in eps_list):
        raise ValueError("eps values must be nonnegative")

    def one(eps: float):
        cfg = replace(
            config,
            params=replace(config.params, epsilon=eps),
            fixed_dt=True,
            diagnostics=replace(config.diagnostics, weak_residuals=False),
        )
        records, reports, states, final = simulate(cfg, keep_states=True)
        return records, reports, states

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(one, eps_list))

    times = np.array([s.time for s in results[0][2]])
    for recs, reps, states in results[1:]:
        other = np.array([s.time for s in states])
        if len(other) != len(times) or np.abs(other - times).max() > 1e-10:
            raise RuntimeError("sample times failed to match across the sweep")

    dt_s = times[1] - times[0]
    w = _trapezoid_weights(len(times), dt_s)
    d_n, d_c = [], []
    for (ra, _, sa), (rb, _, sb) in zip(results, results[1:]):
        dn = sum(
            wi * integrate(ScalarField(config.domain, np.abs(x.n.values - y.n.values)))
            for wi, x, y in zip(w, sa, sb)
        )
        dc = math.sqrt(
            sum(
                wi
                * (
                    integrate(ScalarField(config.domain, (x.c.values - y.c.values) ** 2))
                    + grad_sq_scalar(ScalarField(config.domain, x.c.values - y.c.values))
                )
                for wi, x, y in zip(w, sa, sb)
            )
        )
        d_n.append(float(dn))
        d_c.append(float(dc))

    summaries = []
    for eps, (recs, reps, _) in zip(eps_list, results):
        mv = check_mass_inequality(reps)
        summaries.append(
            {
                "epsilon": eps,
                "final_mass": recs[-1].mass,
                "sup_n_linf": max(r.n_linf for r in recs),
                "n_l2_time_integral": float(
                    np.trapezoid([r.n_l2_sq for r in recs], [r.time for r in recs])
                ),
                "mass_inequality": mv.passed,
            }
        )
    cauchy = all(b < a for a, b in zip(d_n, d_n[1:]))
    return SweepResult(
        axis=eps_list,
        summaries=summaries,
        distances={"density_l1": d_n, "signal_h1": d_c},
        verdicts={"cauchy_decreasing": cauchy},
    )


# ----------------------------------------------------------------------------
# Degradation-strength sweep

def late_window_stats(records, frac: float = 0.25):
    """(sup n_linf over the last frac, slope of log n_linf over the last half)."""
    t = np.array([r.time for r in records])
    ninf = np.array([r.n_linf for r in records])
    t_end = t[-1]
    late = t >= t_end * (1.0 - frac)
    half = t >= t_end * 0.5
    sup_late = float(ninf[late].max())
    tt = t[half]
    yy = np.log(np.maximum(ninf[half], 1e-300))
    slope = float(np.polyfit(tt, yy, 1)[0]) if len(tt) > 2 else math.nan
    return sup_late, slope


def run_mu_sweep(config: RunConfig, mu_list, gn_est, threads: int = 1) -> SweepResult:
    """Long runs across degradation strengths; energy check where gated."""
    mu_list = [float(m) for m in mu_list]
    if any(m <= 0 for m in mu_list):
        raise ValueError("mu values must be positive")
    threshold = 2.0 * gn_est.mu0 * max(config.params.r, 0.0)

    def one(mu: float):
        cfg = replace(config, params=replace(config.params, mu=mu))
        records, reports, states, final = simulate(cfg)
        mv = check_mass_inequality(reports)
        limit = logistic_limit(cfg.params.r, mu, cfg.params.gamma, cfg.domain.area())
        t1 = mass_settling_time(records, limit)
        sup_late, slope = late_window_stats(records)
        entry = {
            "mu": mu,
            "above_threshold": mu > threshold,  # exactly at threshold: no claim
            "final_mass": records[-1].mass,
            "late_sup_n_linf": sup_late,
            "late_log_slope": slope,
            "n_l2_time_integral": float(
                np.trapezoid([r.n_l2_sq for r in records], [r.time for r in records])
            ),
            "mass_inequality": mv.passed,
            "mass_settling_time": t1,
        }
        if mu > threshold and config.diagnostics.dense_stokes:
            ev = check_energy_dissipation(
                records, cfg.params, t1 if t1 is not None else math.inf, gn_est.c_star_lower
            )
            entry["energy_dissipation"] = ev.status
        else:
            entry["energy_dissipation"] = "ungated"
        return entry

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        summaries = list(pool.map(one, mu_list))
    return SweepResult(
        axis=mu_list,
        summaries=summaries,
        distances={},
        verdicts={"threshold_2mu0r": threshold},
    )


# ----------------------------------------------------------------------------
# Manufactured-solution verification

def _mms_diffusion_reaction(config: RunConfig, cells: int, dt: float, t_final: float) -> float:
    """Forced density equation with an analytic cosine-decay solution; u = 0, c = 0."""
    dom = DomainSpec(config.domain.length_x, config.domain.length_y, cells, cells)
    params = replace(config.params, potential=ScalarField.zeros(dom))
    X, Y = dom.cell_centers()
    kx, ky = math.pi / dom.length_x, math.pi / dom.length_y
    C = np.cos(kx * X) * np.cos(ky * Y)
    base, amp = 1.0, 0.5

    def exact(t):
        return base + amp * math.exp(-t) * C

    def source(t):
        nstar = exact(t)
        dndt = -amp * math.exp(-t) * C
        lap = -amp * math.exp(-t) * (kx**2 + ky**2) * C
        f = params.r * nstar - params.mu * pow_gamma(nstar, params.gamma)
        return ScalarField(dom, dndt - lap - f + params.epsilon * nstar**2)

    state = SimState(
        0.0,
        ScalarField(dom, exact(0.0)),
        ScalarField.zeros(dom),
        VectorField.zeros(dom),
        ScalarField.zeros(dom),
    )
    nsteps = int(round(t_final / dt))
    for k in range(nsteps):
        t = k * dt
        n_new, _, _ = step_n(state, params, dt, source=source(t))
        state = SimState(t + dt, n_new, state.c, state.u, state.pressure)
    err = state.n.values - exact(nsteps * dt)
    return float(math.sqrt(dom.cell_area * (err**2).sum()))


def _mms_advection(config: RunConfig, cells: int, dt: float, t_final: float) -> float:
    """Forced signal equation with a prescribed swirl; upwind-limited order."""
    dom = DomainSpec(config.domain.length_x, config.domain.length_y, cells, cells)
    params = replace(config.params, potential=ScalarField.zeros(dom))
    lx, ly = dom.length_x, dom.length_y
    kx, ky = math.pi / lx, math.pi / ly
    X, Y = dom.cell_centers()
    C = np.cos(kx * X) * np.cos(ky * Y)

    # stream function psi = psi0 sin^2(pi x/lx) sin^2(pi y/ly): no-slip swirl
    psi0 = 0.4
    Xn, Yn = dom.node_coords()
    psi = psi0 * np.sin(kx * Xn) ** 2 * np.sin(ky * Yn) ** 2
    psi[0, :] = psi[-1, :] = 0.0
    psi[:, 0] = psi[:, -1] = 0.0
    u = VectorField.from_stream_function(dom, psi)

    # analytic velocity at cell centers for the source
    ux = psi0 * 2.0 * ky * np.sin(kx * X) ** 2 * np.sin(ky * Y) * np.cos(ky * Y)
    uy = -psi0 * 2.0 * kx * np.sin(kx * X) * np.cos(kx * X) * np.sin(ky * Y) ** 2
    base, amp = 1.0, 0.5

    def exact(t):
        return base + amp * math.exp(-t) * C

    def source(t):
        e = amp * math.exp(-t)
        cstar = base + e * C
        dcdt = -e * C
        lap = -e * (kx**2 + ky**2) * C
        gx = -e * kx * np.sin(kx * X) * np.cos(ky * Y)
        gy = -e * ky * np.cos(kx * X) * np.sin(ky * Y)
        return ScalarField(dom, dcdt + ux * gx + uy * gy - lap + cstar)

    state = SimState(
        0.0,
        ScalarField.zeros(dom),
        ScalarField(dom, exact(0.0)),
        u,
        ScalarField.zeros(dom),
    )
    nsteps = int(round(t_final / dt))
    for k in range(nsteps):
        t = k * dt
        c_new = step_c(state, params, dt, source=source(t))
        state = SimState(t + dt, state.n, c_new, state.u, state.pressure)
    err = state.c.values - exact(nsteps * dt)
    return float(math.sqrt(dom.cell_area * (err**2).sum()))


def fit_order(h_list, errors) -> float:
    """Least-squares slope of log(error) against log(h)."""
    return float(np.polyfit(np.log(h_list), np.log(errors), 1)[0])


def run_mms_convergence(config: RunConfig, levels: int = 3, base_cells: int = 16) -> SweepResult:
    """Grid refinement study for the forced density and signal equations."""
    if levels < 3:
        raise ValueError("need at least 3 refinement levels")
    cells = [base_cells * 2**k for k in range(levels)]
    h_list = [config.domain.length_x / n for n in cells]
    t_final = 0.25

    dr_errors = []
    adv_errors = []
    for n, h in zip(cells, h_list):
        dt_dr = 0.05 * (h / h_list[0]) ** 2
        dr_errors.append(_mms_diffusion_reaction(config, n, dt_dr, t_final))
        dt_adv = 0.02 * (h / h_list[0])
        adv_errors.append(_mms_advection(config, n, dt_adv, t_final))

    order_dr = fit_order(h_list, dr_errors)
    order_adv = fit_order(h_list, adv_errors)
    summaries = [
        {"cells": n, "h": h, "diffusion_reaction_error": e1, "advection_error": e2}
        for n, h, e1, e2 in zip(cells, h_list, dr_errors, adv_errors)
    ]
    return SweepResult(
        axis=h_list,
        summaries=summaries,
        distances={"diffusion_reaction": dr_errors, "advection": adv_errors},
        verdicts={"order_diffusion_reaction": order_dr, "order_advection": order_adv},
    )


# ----------------------------------------------------------------------------
# Bundle re-verification

def check_bundle(bundle_dir) -> tuple[dict, int]:
    """Re-run the verdicts that are derivable from a stored bundle."""
    bundle = Path(bundle_dir)
    records_path = bundle / "records.csv"
    steps_path = bundle / "steps.csv"
    summary_path = bundle / "summary.json"
    if not records_path.exists() or not steps_path.exists():
        raise FileNotFoundError(f"bundle {bundle} lacks records.csv/steps.csv")
    records = load_records_csv(records_path)
    reports = load_reports_csv(steps_path)
    verdicts: dict = {}
    exit_code = EXIT_OK
    if reports:
        mv = check_mass_inequality(reports)
        verdicts["mass_inequality"] = {
            "passed": mv.passed,
            "worst": mv.worst,
            "worst_index": mv.worst_index,
            "clip_mass_total": mv.clip_mass_total,
        }
        if not mv.passed:
            exit_code = EXIT_INVARIANT
    # record-level sanity: finite entries, nonnegative mass
    bad = [
        r.time
        for r in records
        if not (math.isfinite(r.mass) and r.mass >= 0 and math.isfinite(r.n_linf))
    ]
    verdicts["records_finite"] = {"passed": not bad, "bad_times": bad[:5]}
    if bad:
        exit_code = EXIT_INVARIANT
    if summary_path.exists():
        stored = json.loads(summary_path.read_text())
        verdicts["stored_summary_schema"] = stored.get("schema")
    return verdicts, exit_code

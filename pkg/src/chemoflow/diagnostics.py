"""Monitored functionals and inequality checkers.

Every quantity here is computed by independent quadrature over the state
fields; nothing is reused from the stepper's internals.  The record carries
every functional watched by the a-priori estimates, plus two auxiliary
columns (``grad_sqrt_n``, ``conv_c_sq``) that the eventual-energy checker
consumes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field as dfield
from pathlib import Path

import numpy as np

from .grid import (
    ScalarField,
    inner_vec,
    integrate,
    lp_norm,
    speed_interp_centers,
)
from . import operators as ops
from . import spectral
from .stepper import Params, SimState, StepReport, pow_gamma


def _face_sums(values: np.ndarray, hx: float, hy: float, fn) -> float:
    """Sum fn(left, right, h) over interior x- and y-faces."""
    total = fn(values[:-1, :], values[1:, :], hx).sum()
    total += fn(values[:, :-1], values[:, 1:], hy).sum()
    return float(total)


def grad_sq_scalar(f: ScalarField) -> float:
    """int |grad f|^2 by face differences (zero-flux boundary faces)."""
    dom = f.domain
    return dom.cell_area * _face_sums(
        f.values, dom.hx, dom.hy, lambda a, b, h: ((b - a) / h) ** 2
    )


def grad_sq_sqrt(n: ScalarField) -> float:
    """int |grad sqrt(n)|^2 with face value sqrt((n_i+n_j)/2): no bias at n=0."""
    dom = n.domain

    def term(a, b, h):
        d2 = ((b - a) / h) ** 2
        s = 2.0 * (a + b)
        return np.divide(d2, s, out=np.zeros_like(d2), where=s > 0)

    return dom.cell_area * _face_sums(n.values, dom.hx, dom.hy, term)


def entropy_integral(n: ScalarField) -> float:
    """int n ln n with 0 ln 0 = 0."""
    v = n.values
    pos = v > 0
    return float(n.domain.cell_area * (v[pos] * np.log(v[pos])).sum())


def convective_signal_sq(state: SimState) -> float:
    """int |u . grad c|^2 (cell-centered interpolation)."""
    gc = ops.gradient(state.c)
    uc, vc = speed_interp_centers(state.u)
    gx = 0.5 * (gc.u[:-1, :] + gc.u[1:, :])
    gy = 0.5 * (gc.v[:, :-1] + gc.v[:, 1:])
    dot = uc * gx + vc * gy
    return float(state.n.domain.cell_area * (dot * dot).sum())


def interp_inequality_slack(n: ScalarField, gamma: float) -> float:
    """Slack of ||n||_p <= ||n||_1^theta ||n||_gamma^(1-theta), p = 2/(3-gamma).

    Only meaningful for gamma in (1, 2); interpolation exponent theta solves
    1/p = theta + (1-theta)/gamma.
    """
    if not (1.0 < gamma < 2.0):
        raise ValueError("interpolation inequality needs gamma in (1,2)")
    p = 2.0 / (3.0 - gamma)
    theta = (gamma - p) / (p * (gamma - 1.0))
    lhs = lp_norm(n, p)
    rhs = lp_norm(n, 1.0) ** theta * lp_norm(n, gamma) ** (1.0 - theta)
    return rhs - lhs


RECORD_COLUMNS = [
    ("time", "t"),
    ("mass", "-"),
    ("f_abs_integral", "-"),
    ("n_gamma_norm", "-"),
    ("n_interp_norm", "-"),
    ("c_l2", "-"),
    ("grad_c_l2", "-"),
    ("u_l2", "-"),
    ("grad_u_l2", "-"),
    ("u_l4", "-"),
    ("frac_c", "-"),
    ("frac_u", "-"),
    ("grad_log_n", "-"),
    ("grad_inv_n", "-"),
    ("quasi_energy", "-"),
    ("n_l2_sq", "-"),
    ("lap_c_l2", "-"),
    ("n_linf", "-"),
    ("grad_sqrt_n", "-"),
    ("conv_c_sq", "-"),
]


@dataclass
class DiagnosticsRecord:
    time: float
    mass: float
    f_abs_integral: float
    n_gamma_norm: float
    n_interp_norm: float  # NaN when gamma >= 2
    c_l2: float
    grad_c_l2: float
    u_l2: float
    grad_u_l2: float
    u_l4: float
    frac_c: float
    frac_u: float  # NaN without the dense Stokes basis
    grad_log_n: float
    grad_inv_n: float
    quasi_energy: float
    n_l2_sq: float
    lap_c_l2: float
    n_linf: float
    grad_sqrt_n: float
    conv_c_sq: float
    n_lp: dict = dfield(default_factory=dict)  # p -> int n^p

    def row(self, p_list) -> list:
        vals = [getattr(self, name) for name, _ in RECORD_COLUMNS]
        vals += [self.n_lp[p] for p in p_list]
        return vals


def compute_record(
    state: SimState,
    params: Params,
    basis: spectral.SpectralBasis,
    stokes: spectral.SpectralBasis | None = None,
    p_list=(2.0, 4.0),
) -> DiagnosticsRecord:
    if basis.domain != state.n.domain:
        raise ValueError("Neumann basis domain differs from the state's")
    if stokes is not None and stokes.domain != state.n.domain:
        raise ValueError("Stokes basis domain differs from the state's")
    dom = state.n.domain
    n, c, u = state.n, state.c, state.u
    w = dom.cell_area

    fvals = params.f(n.values)
    gamma = params.gamma

    if gamma < 2.0:
        p_int = 2.0 / (3.0 - gamma)
        n_interp = lp_norm(n, p_int) ** 2
        slack = interp_inequality_slack(n, gamma)
        scale = max(1.0, lp_norm(n, p_int))
        if slack < -1e-9 * scale:
            raise AssertionError(f"interpolation inequality violated by {-slack:.3e}")
    else:
        n_interp = math.nan

    uc, vc = speed_interp_centers(u)
    speed_sq = uc * uc + vc * vc

    log_n = np.log1p(n.values)
    inv_n = 1.0 / (1.0 + n.values)

    quasi = entropy_integral(n) + 0.5 * grad_sq_scalar(c)
    if quasi < -dom.area() / math.e - 1e-9:
        raise AssertionError("quasi-energy fell below its pointwise lower bound")

    rec = DiagnosticsRecord(
        time=state.time,
        mass=integrate(n),
        f_abs_integral=float(w * np.abs(fvals).sum()),
        n_gamma_norm=float(w * pow_gamma(n.values, gamma).sum()),
        n_interp_norm=n_interp,
        c_l2=float(w * (c.values**2).sum()),
        grad_c_l2=grad_sq_scalar(c),
        u_l2=inner_vec(u, u),
        grad_u_l2=ops.grad_norm_sq_vector(u),
        u_l4=float(w * (speed_sq**2).sum()),
        frac_c=spectral.fractional_norm_sq(basis, 0.5 * (params.beta + 1.0), c),
        frac_u=(
            spectral.stokes_fractional_norm_sq(stokes, 0.5 * (params.delta + 1.0), u)
            if stokes is not None
            else math.nan
        ),
        grad_log_n=dom.cell_area
        * _face_sums(log_n, dom.hx, dom.hy, lambda a, b, h: ((b - a) / h) ** 2),
        grad_inv_n=dom.cell_area
        * _face_sums(inv_n, dom.hx, dom.hy, lambda a, b, h: ((b - a) / h) ** 2),
        quasi_energy=quasi,
        n_l2_sq=float(w * (n.values**2).sum()),
        lap_c_l2=float(w * (ops.laplacian_neumann(c).values ** 2).sum()),
        n_linf=float(n.values.max()),
        grad_sqrt_n=grad_sq_sqrt(n),
        conv_c_sq=convective_signal_sq(state),
        n_lp={p: float(w * pow_gamma(n.values, p).sum()) for p in p_list},
    )

    for name, _ in RECORD_COLUMNS:
        val = getattr(rec, name)
        if name in ("n_interp_norm", "frac_u") and math.isnan(val):
            continue
        if not math.isfinite(val):
            raise AssertionError(f"record entry {name} is not finite")
    return rec


def spectral_cross_checks(state: SimState, params: Params, basis: spectral.SpectralBasis) -> dict:
    """(direct, spectral) pairs for entries computable both ways."""
    c = state.c
    coeffs = spectral.neumann_coefficients(c)
    w = c.domain.cell_area
    lam = basis.lam
    return {
        "c_l2": (float(w * (c.values**2).sum()), float(w * (coeffs**2).sum())),
        "grad_c_l2": (grad_sq_scalar(c), float(w * ((lam - 1.0) * coeffs**2).sum())),
        "lap_c_l2": (
            float(w * (ops.laplacian_neumann(c).values ** 2).sum()),
            float(w * ((lam - 1.0) ** 2 * coeffs**2).sum()),
        ),
        "frac_c": (
            spectral.fractional_norm_sq(basis, 0.5 * (params.beta + 1.0), c),
            float(w * (lam ** (params.beta + 1.0) * coeffs**2).sum()),
        ),
    }


# ----------------------------------------------------------------------------
# Verdicts

@dataclass
class MassVerdict:
    passed: bool
    worst: float        # max cumulative budget excess
    worst_index: int
    tolerance: float
    clip_mass_total: float


def check_mass_inequality(reports: list[StepReport], tol_rel: float = 1e-8) -> MassVerdict:
    """Cumulative mass budget: mass(t) <= mass(0) + sum dt*int(f - eps n^2) + clips."""
    if not reports:
        raise ValueError("empty history")
    mass0 = reports[0].mass_before
    budget = mass0
    clip_total = 0.0
    worst = -math.inf
    worst_idx = -1
    for k, rep in enumerate(reports):
        budget += rep.dt_used * rep.reaction_integral
        clip_total += rep.clip_mass
        excess = rep.mass_after - budget - clip_total
        if excess > worst:
            worst, worst_idx = excess, k
    tol = tol_rel * abs(mass0)
    return MassVerdict(worst <= tol, worst, worst_idx, tol, clip_total)


@dataclass
class EnergyVerdict:
    status: str          # "pass" | "fail" | "gated"
    violation_fraction: float
    checked_steps: int
    c3: float
    c4: float
    mass_gate: float
    window_start: float


def _scan_c4(params: Params, area: float) -> float:
    """|Omega| sup (r s - mu s^gamma)(1 + ln s) - |Omega| inf s^2 ln s by 1D scan."""
    s = np.logspace(-8, 8, 160001)
    g = (params.r * s - params.mu * pow_gamma(s, params.gamma)) * (1.0 + np.log(s))
    sup1 = max(float(g.max()), 0.0)  # s -> 0 limit of the integrand is 0
    inf2 = float((s**2 * np.log(s)).min())
    return area * (sup1 - inf2)


def check_energy_dissipation(
    records: list[DiagnosticsRecord],
    params: Params,
    t1_estimate: float,
    c_star: float,
    max_violation_fraction: float = 0.01,
) -> EnergyVerdict:
    """Discrete form of the eventual quasi-energy inequality.

    On the window where t >= t1_estimate and mass < 3/(16 c*^4), checks

        d/dt[quasi_energy] + int|grad sqrt n|^2 + 1/4 int|lap c|^2
            <= c3 * frac_u * grad_c_l2 + c4

    with c3 the measured sup of int|u.grad c|^2 / (frac_u * grad_c_l2) plus
    10% headroom and c4 from a 1D scan of the reaction entropy bound.
    """
    gate = 3.0 / (16.0 * c_star**4)
    window = [
        r
        for r in records
        if r.time >= t1_estimate and r.mass < gate and math.isfinite(r.frac_u)
    ]
    if len(window) < 3:
        return EnergyVerdict("gated", 0.0, 0, math.nan, math.nan, gate, t1_estimate)

    ratios = []
    for r in window:
        den = r.frac_u * r.grad_c_l2
        if den > 1e-300:
            ratios.append(r.conv_c_sq / den)
    c3 = 1.1 * max(ratios) if ratios else 0.0
    dom_area = params.potential.domain.area()
    c4 = _scan_c4(params, dom_area)

    violations = 0
    checked = 0
    for a, b in zip(window[:-1], window[1:]):
        dt = b.time - a.time
        if dt <= 0:
            continue
        lhs = (b.quasi_energy - a.quasi_energy) / dt + a.grad_sqrt_n + 0.25 * a.lap_c_l2
        rhs = c3 * a.frac_u * a.grad_c_l2 + c4
        checked += 1
        if lhs > rhs:
            violations += 1
    frac = violations / checked if checked else 0.0
    status = "pass" if frac < max_violation_fraction else "fail"
    return EnergyVerdict(status, frac, checked, c3, c4, gate, window[0].time)


# ----------------------------------------------------------------------------
# Emission

def records_to_csv(records: list[DiagnosticsRecord], path, p_list=(2.0, 4.0)) -> None:
    header = [f"{name}[{unit}]" for name, unit in RECORD_COLUMNS]
    header += [f"n_lp_{p:g}[-]" for p in p_list]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for rec in records:
            w.writerow([repr(float(x)) for x in rec.row(p_list)])


def reports_to_csv(reports: list[StepReport], path) -> None:
    header = [
        "dt_used[t]",
        "mass_before[-]",
        "mass_after[-]",
        "reaction_integral[-]",
        "clip_count[1]",
        "clip_mass[-]",
        "solver_iterations[1]",
    ]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in reports:
            w.writerow(
                [
                    repr(float(r.dt_used)),
                    repr(float(r.mass_before)),
                    repr(float(r.mass_after)),
                    repr(float(r.reaction_integral)),
                    r.clip_count,
                    repr(float(r.clip_mass)),
                    r.solver_iterations,
                ]
            )


def load_records_csv(path) -> list[DiagnosticsRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    names = [h.split("[")[0] for h in header]
    base = [name for name, _ in RECORD_COLUMNS]
    records = []
    for row in body:
        kw = {}
        n_lp = {}
        for name, cell in zip(names, row):
            if name in base:
                kw[name] = float(cell)
            elif name.startswith("n_lp_"):
                n_lp[float(name[5:])] = float(cell)
        records.append(DiagnosticsRecord(n_lp=n_lp, **kw))
    return records


def load_reports_csv(path) -> list[StepReport]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    out = []
    for row in rows[1:]:
        out.append(
            StepReport(
                dt_used=float(row[0]),
                mass_before=float(row[1]),
                mass_after=float(row[2]),
                reaction_integral=float(row[3]),
                clip_count=int(row[4]),
                clip_mass=float(row[5]),
                solver_iterations=int(row[6]),
            )
        )
    return out


def write_summary(path, verdicts: dict, extra: dict | None = None) -> None:
    doc = {"schema": 1, "verdicts": verdicts}
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))

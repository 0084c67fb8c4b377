"""Time integration of the regularized cell-signal-fluid system.

One step advances, in order and with beginning-of-step couplings,

    n:  implicit diffusion, explicit upwind advection + signal-gradient flux,
        explicit reaction r n - mu n^gamma and damping -eps n^2,
    c:  implicit (diffusion - 1), explicit advection, saturated source
        n / (1 + eps n),
    u:  explicit convection (energy-neutral form) and buoyancy n grad(phi),
        implicit diffusion, then pressure projection.

All implicit solves are spectral and monotone; residual negative cell values
of n (possible through the signal-gradient flux) are clipped to zero and the
clipped mass is reported, never dropped silently.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import (
    DomainSpec,
    FieldError,
    ScalarField,
    VectorField,
    integrate,
)
from . import operators as ops
from . import spectral


class NanError(ArithmeticError):
    """A state field went non-finite; carries the offending field name."""

    def __init__(self, field_name: str, time: float):
        self.field_name = field_name
        self.time = time
        super().__init__(f"non-finite values in field '{field_name}' at t={time:.6g}")


class StabilityError(ValueError):
    """Requested dt exceeds the stability estimate."""


def pow_gamma(values: np.ndarray, gamma: float) -> np.ndarray:
    """s^gamma for s >= 0 as exp(gamma ln s), with 0 mapped to 0 directly."""
    out = np.zeros_like(values)
    pos = values > 0
    out[pos] = np.exp(gamma * np.log(values[pos]))
    return out


def default_potential(domain: DomainSpec, gravity: float = 1.0) -> ScalarField:
    """Gravitational potential -g*y (buoyancy along -y)."""
    return ScalarField.from_function(domain, lambda X, Y: -gravity * Y)


@dataclass
class Params:
    """Model constants. gamma > 1, mu > 0, eps >= 0, sigma in (0, 1/4)."""

    r: float
    mu: float
    gamma: float
    kappa: float
    epsilon: float
    sigma: float
    potential: ScalarField
    # optional custom f(s); must satisfy f(0)=0 and f(s) <= r s - mu s^gamma
    reaction: object = None

    def __post_init__(self):
        if not self.gamma > 1:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.kappa not in (0, 1, 0.0, 1.0):
            raise ValueError(f"kappa must be 0 or 1, got {self.kappa}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        if not (0.0 < self.sigma < 0.25):
            raise ValueError(f"sigma must lie in (0, 1/4), got {self.sigma}")
        self.potential.check()

    @property
    def beta(self) -> float:
        """Signal regularity exponent min{2 sigma, gamma - 1}."""
        return min(2.0 * self.sigma, self.gamma - 1.0)

    @property
    def delta(self) -> float:
        """Fluid regularity exponent min{1/2, gamma - 1}."""
        return min(0.5, self.gamma - 1.0)

    def f(self, values: np.ndarray) -> np.ndarray:
        """Reaction term; logistic r s - mu s^gamma unless a custom one is set."""
        if self.reaction is not None:
            return np.asarray(self.reaction(values), dtype=np.float64)
        return self.r * values - self.mu * pow_gamma(values, self.gamma)

    def check_reaction_bound(self, max_n: float, samples: int = 64) -> None:
        """Sampled check of f(0) = 0 and f(s) <= r s - mu s^gamma on [0, 10 max n]."""
        if self.reaction is None:
            return
        s = np.linspace(0.0, 10.0 * max(max_n, 1e-12), samples)
        fs = np.asarray(self.reaction(s), dtype=np.float64)
        if abs(fs[0]) > 1e-12:
            raise ValueError(f"custom reaction violates f(0)=0: f(0)={fs[0]}")
        bound = self.r * s - self.mu * pow_gamma(s, self.gamma)
        worst = float((fs - bound).max())
        if worst > 1e-10 * max(1.0, np.abs(bound).max()):
            raise ValueError(f"custom reaction exceeds r s - mu s^gamma by {worst:.3e}")


@dataclass
class SimState:
    time: float
    n: ScalarField
    c: ScalarField
    u: VectorField
    pressure: ScalarField

    def validate(self, div_tol: float = 1e-8) -> None:
        for name, f in (("n", self.n), ("c", self.c), ("pressure", self.pressure)):
            if not np.all(np.isfinite(f.values)):
                raise NanError(name, self.time)
        if not (np.all(np.isfinite(self.u.u)) and np.all(np.isfinite(self.u.v))):
            raise NanError("u", self.time)
        if self.n.values.min() < 0:
            raise FieldError(f"n has negative values at t={self.time:.6g}")
        if self.c.values.min() < 0:
            raise FieldError(f"c has negative values at t={self.time:.6g}")
        d = ops.max_divergence(self.u)
        if d > div_tol:
            raise FieldError(f"max|div u| = {d:.3e} > {div_tol:.1e} at t={self.time:.6g}")


@dataclass
class StepReport:
    dt_used: float
    mass_before: float
    mass_after: float
    reaction_integral: float  # int (f(n) - eps n^2) at beginning of step
    clip_count: int
    clip_mass: float
    solver_iterations: int

    def mass_residual(self) -> float:
        """mass_after - mass_before - dt * reaction_integral (clip-free: ~0)."""
        return self.mass_after - self.mass_before - self.dt_used * self.reaction_integral


DT_MAX_DEFAULT = 1e-2
CFL_SAFETY = 0.4


def stable_dt(state: SimState, params: Params, dt_max: float = DT_MAX_DEFAULT) -> float:
    """CFL-style bound: advective+chemotactic face speeds and explicit reaction."""
    dom = state.n.domain
    for name, arr in (("n", state.n.values), ("c", state.c.values)):
        if not np.all(np.isfinite(arr)):
            raise NanError(name, state.time)
    if not (np.all(np.isfinite(state.u.u)) and np.all(np.isfinite(state.u.v))):
        raise NanError("u", state.time)

    gc = ops.gradient(state.c)
    speed_x = float(np.abs(state.u.u).max() + np.abs(gc.u).max())
    speed_y = float(np.abs(state.u.v).max() + np.abs(gc.v).max())
    bound = np.inf
    if speed_x > 0:
        bound = min(bound, dom.hx / speed_x)
    if speed_y > 0:
        bound = min(bound, dom.hy / speed_y)

    max_n = float(state.n.values.max(initial=0.0))
    if params.reaction is None:
        fp0 = abs(params.r)
        fp1 = abs(params.r - params.mu * params.gamma * max_n ** (params.gamma - 1.0))
        fprime = max(fp0, fp1)
    else:
        s = np.linspace(0.0, max(max_n, 1e-12), 65)
        fs = np.asarray(params.reaction(s), dtype=np.float64)
        fprime = float(np.abs(np.diff(fs) / np.diff(s)).max())
    rate = fprime + 2.0 * params.epsilon * max_n
    if rate > 0:
        bound = min(bound, 1.0 / rate)

    dt = CFL_SAFETY * bound
    return float(min(dt, dt_max))


def step_n(state: SimState, params: Params, dt: float, source: ScalarField | None = None):
    """Advance the cell density; returns (field, clip_count, clip_mass)."""
    n, c, u = state.n, state.c, state.u
    adv = ops.advect_scalar(u, n)
    chemo = ops.upwind_flux_divergence(ops.gradient(c), n)
    rhs = n.values - dt * (adv.values + chemo.values)
    rhs += dt * (params.f(n.values) - params.epsilon * n.values**2)
    if source is not None:
        rhs = rhs + dt * source.values
    sol = spectral.solve_scalar_implicit(ScalarField(n.domain, rhs), 1.0, dt)
    neg = sol.values < 0.0
    clip_count = int(neg.sum())
    clip_mass = float(-n.domain.cell_area * sol.values[neg].sum())
    if clip_count:
        sol.values[neg] = 0.0
    return sol, clip_count, clip_mass


def step_c(state: SimState, params: Params, dt: float, source: ScalarField | None = None) -> ScalarField:
    """Advance the signal; monotone, so c stays nonnegative."""
    n, c, u = state.n, state.c, state.u
    adv = ops.advect_scalar(u, c)
    rhs = c.values - dt * adv.values + dt * n.values / (1.0 + params.epsilon * n.values)
    if source is not None:
        rhs = rhs + dt * source.values
    sol = spectral.solve_scalar_implicit(ScalarField(c.domain, rhs), 1.0 + dt, dt)
    np.maximum(sol.values, 0.0, out=sol.values)  # roundoff guard; the scheme is monotone
    return sol


def buoyancy_force(n: ScalarField, potential: ScalarField) -> VectorField:
    """n grad(phi) with n interpolated to faces by arithmetic means."""
    g = ops.gradient(potential)
    nv = n.values
    g.u[1:-1, :] *= 0.5 * (nv[:-1, :] + nv[1:, :])
    g.v[:, 1:-1] *= 0.5 * (nv[:, :-1] + nv[:, 1:])
    return g


def step_u(state: SimState, params: Params, dt: float):
    """Advance the velocity; returns (velocity, pressure)."""
    u = state.u
    w = u.copy()
    if params.kappa:
        conv = ops.advect_vector(u)
        w.u -= dt * params.kappa * conv.u
        w.v -= dt * params.kappa * conv.v
    w = spectral.solve_velocity_diffusion(w, dt)
    force = buoyancy_force(state.n, params.potential)
    w.u += dt * force.u
    w.v += dt * force.v
    projected, p = ops.helmholtz_project(w)
    projected.enforce_noslip()
    pressure = ScalarField(p.domain, p.values / dt) if dt > 0 else p
    return projected, pressure


def step(state: SimState, params: Params, dt: float | None = None,
         dt_max: float = DT_MAX_DEFAULT):
    """One full step n -> c -> u; returns (new_state, StepReport)."""
    sdt = stable_dt(state, params, dt_max=dt_max)
    if dt is None:
        dt = sdt
    elif dt > sdt * (1.0 + 1e-9):
        raise StabilityError(f"dt={dt:.3e} exceeds stable_dt={sdt:.3e} at t={state.time:.6g}")
    params.check_reaction_bound(float(state.n.values.max(initial=0.0)))

    mass_before = integrate(state.n)
    reaction = params.f(state.n.values) - params.epsilon * state.n.values**2
    reaction_integral = float(state.n.domain.cell_area * reaction.sum())

    n_new, clip_count, clip_mass = step_n(state, params, dt)
    c_new = step_c(state, params, dt)
    u_new, pressure = step_u(state, params, dt)

    new_state = SimState(state.time + dt, n_new, c_new, u_new, pressure)
    new_state.validate()
    report = StepReport(
        dt_used=dt,
        mass_before=mass_before,
        mass_after=integrate(n_new),
        reaction_integral=reaction_integral,
        clip_count=clip_count,
        clip_mass=clip_mass,
        solver_iterations=3,
    )
    return new_state, report


# ----------------------------------------------------------------------------
# Checkpoints: one JSON document, exact round trip

def _encode(arr: np.ndarray) -> dict:
    a = np.ascontiguousarray(arr, dtype=np.float64)
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode(obj: dict) -> np.ndarray:
    raw = base64.b64decode(obj["data"])
    return np.frombuffer(raw, dtype=np.float64).reshape(obj["shape"]).copy()


def write_checkpoint(path, state: SimState, params: Params) -> None:
    if params.reaction is not None:
        raise ValueError("cannot checkpoint a run with a custom reaction callable")
    dom = state.n.domain
    doc = {
        "schema": 1,
        "time": state.time,
        "domain": {
            "length_x": dom.length_x,
            "length_y": dom.length_y,
            "cells_x": dom.cells_x,
            "cells_y": dom.cells_y,
        },
        "params": {
            "r": params.r,
            "mu": params.mu,
            "gamma": params.gamma,
            "kappa": params.kappa,
            "epsilon": params.epsilon,
            "sigma": params.sigma,
            "potential": _encode(params.potential.values),
        },
        "fields": {
            "n": _encode(state.n.values),
            "c": _encode(state.c.values),
            "u": _encode(state.u.u),
            "v": _encode(state.u.v),
            "pressure": _encode(state.pressure.values),
        },
    }
    Path(path).write_text(json.dumps(doc))


def read_checkpoint(path):
    doc = json.loads(Path(path).read_text())
    if doc.get("schema") != 1:
        raise ValueError(f"unsupported checkpoint schema {doc.get('schema')!r}")
    d = doc["domain"]
    dom = DomainSpec(d["length_x"], d["length_y"], d["cells_x"], d["cells_y"])
    p = doc["params"]
    params = Params(
        r=p["r"], mu=p["mu"], gamma=p["gamma"], kappa=p["kappa"],
        epsilon=p["epsilon"], sigma=p["sigma"],
        potential=ScalarField(dom, _decode(p["potential"])),
    )
    f = doc["fields"]
    state = SimState(
        time=doc["time"],
        n=ScalarField(dom, _decode(f["n"])),
        c=ScalarField(dom, _decode(f["c"])),
        u=VectorField(dom, _decode(f["u"]), _decode(f["v"])),
        pressure=ScalarField(dom, _decode(f["pressure"])),
    )
    return state, params

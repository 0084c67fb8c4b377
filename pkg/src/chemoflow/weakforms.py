"""Weak-form residual evaluation against a bank of space-time test functions.

The trajectory is a list of sampled states; time integration is trapezoidal.
Spatial integrals use operator-compatible quadratures (face differences for
gradients, upwind-biased face values where the scheme transports a quantity),
so the residuals isolate the time-discretization error of the trajectory:
for an exact solution of the semi-discrete system they vanish identically.

Test functions are separable bumps B(t) * S(x, y) with B the C^2 cubic bump
(1 - s^2)^3; the logarithmic-supersolution bank additionally requires S >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    DomainSpec,
    ScalarField,
    VectorField,
    inner,
    inner_vec,
)
from . import operators as ops
from .stepper import Params, SimState


def bump(s: np.ndarray) -> np.ndarray:
    """C^2 compactly supported cubic bump on (-1, 1)."""
    s = np.asarray(s, dtype=np.float64)
    inside = np.abs(s) < 1.0
    out = np.zeros_like(s)
    out[inside] = (1.0 - s[inside] ** 2) ** 3
    return out


def bump_dt(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    inside = np.abs(s) < 1.0
    out = np.zeros_like(s)
    out[inside] = -6.0 * s[inside] * (1.0 - s[inside] ** 2) ** 2
    return out


@dataclass
class ScalarTestFunction:
    """phi(x, y, t) = B((t - t0)/w) * S(x, y) with S a cell field."""

    spatial: ScalarField
    t_center: float
    t_halfwidth: float
    label: str

    def time_factor(self, t: float) -> float:
        return float(bump((t - self.t_center) / self.t_halfwidth))

    def time_factor_dt(self, t: float) -> float:
        return float(bump_dt((t - self.t_center) / self.t_halfwidth) / self.t_halfwidth)

    def supported_in(self, t0: float, t1: float) -> bool:
        return t0 <= self.t_center - self.t_halfwidth and self.t_center + self.t_halfwidth <= t1


@dataclass
class VectorTestFunction:
    """Divergence-free field times a time bump."""

    spatial: VectorField
    t_center: float
    t_halfwidth: float
    label: str

    time_factor = ScalarTestFunction.time_factor
    time_factor_dt = ScalarTestFunction.time_factor_dt
    supported_in = ScalarTestFunction.supported_in


_PLACEMENTS = [(0.5, 0.5), (0.3, 0.35), (0.68, 0.3), (0.32, 0.66)]


def scalar_test_bank(
    domain: DomainSpec,
    t_start: float,
    t_end: float,
    n_time: int = 3,
    nonnegative: bool = True,
) -> list[ScalarTestFunction]:
    """Tensor bump bank: n_time centers x (4 placements + 1 constant-in-space)."""
    X, Y = domain.cell_centers()
    lx, ly = domain.length_x, domain.length_y
    spatials = [("const", ScalarField.constant(domain, 1.0))]
    for k, (cx, cy) in enumerate(_PLACEMENTS):
        rx = bump((X - cx * lx) / (0.3 * lx))
        ry = bump((Y - cy * ly) / (0.3 * ly))
        spatials.append((f"bump{k}", ScalarField(domain, rx * ry)))
    span = t_end - t_start
    width = span / (2.0 * n_time)
    bank = []
    for m in range(n_time):
        tc = t_start + span * (m + 1) / (n_time + 1)
        for name, S in spatials:
            bank.append(
                ScalarTestFunction(S, tc, width, f"{name}@t{m}")
            )
    if not nonnegative:
        # flip every other member's sign for generic (signed) identities
        for k, tf in enumerate(bank):
            if k % 2:
                bank[k] = ScalarTestFunction(
                    ScalarField(tf.spatial.domain, -tf.spatial.values),
                    tf.t_center,
                    tf.t_halfwidth,
                    tf.label + "-neg",
                )
    return bank


def vector_test_bank(
    domain: DomainSpec, t_start: float, t_end: float, n_time: int = 3
) -> list[VectorTestFunction]:
    """Discretely divergence-free compact vector bumps from nodal streams."""
    Xn, Yn = domain.node_coords()
    lx, ly = domain.length_x, domain.length_y
    spatials = []
    for k, (cx, cy) in enumerate(_PLACEMENTS):
        psi = bump((Xn - cx * lx) / (0.28 * lx)) * bump((Yn - cy * ly) / (0.28 * ly))
        psi[0, :] = psi[-1, :] = 0.0
        psi[:, 0] = psi[:, -1] = 0.0
        spatials.append((f"swirl{k}", VectorField.from_stream_function(domain, psi)))
    span = t_end - t_start
    width = span / (2.0 * n_time)
    bank = []
    for m in range(n_time):
        tc = t_start + span * (m + 1) / (n_time + 1)
        for name, S in spatials:
            bank.append(VectorTestFunction(S, tc, width, f"{name}@t{m}"))
    return bank


@dataclass
class Trajectory:
    """Uniformly sampled run segment used by the residual quadratures."""

    times: np.ndarray
    states: list[SimState]

    @classmethod
    def from_states(cls, states: list[SimState]) -> "Trajectory":
        times = np.array([s.time for s in states])
        if len(times) < 3:
            raise ValueError("trajectory needs at least 3 samples")
        gaps = np.diff(times)
        if gaps.min() <= 0 or (gaps.max() - gaps.min()) > 1e-9 * gaps.max():
            raise ValueError("trajectory samples must be uniform in time")
        return cls(times, states)

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])


def _trapz(times: np.ndarray, series: np.ndarray) -> float:
    return float(np.trapezoid(series, times))


def _upwind_pair_sum(vel: VectorField, cellvals: np.ndarray, grad_phi: VectorField) -> float:
    """sum over faces of (upwinded cell value) * vel * grad_phi * cell_area.

    Flux-consistent quadrature of int q u . grad(phi): pairs exactly with the
    conservative upwind transport used by the stepper.
    """
    dom = vel.domain
    total = 0.0
    wu = vel.u[1:-1, :]
    qx = np.where(wu > 0, cellvals[:-1, :], cellvals[1:, :])
    total += (wu * qx * grad_phi.u[1:-1, :]).sum()
    wv = vel.v[:, 1:-1]
    qy = np.where(wv > 0, cellvals[:, :-1], cellvals[:, 1:])
    total += (wv * qy * grad_phi.v[:, 1:-1]).sum()
    return float(dom.cell_area * total)


def weak_residual_c(traj: Trajectory, params: Params, phi: ScalarTestFunction) -> float:
    """Residual of the weak signal identity for the regularized system.

        -int c0 phi(0) - II c phi_t + II grad c . grad phi - II c u . grad phi
        - II phi n/(1+eps n) + II c phi  ->  0
    """
    if not phi.supported_in(traj.t_start, traj.t_end):
        raise ValueError(f"test function {phi.label} not supported in the sampled window")
    S = phi.spatial
    gS = ops.gradient(S)
    vals = np.empty_like(traj.times)
    for m, st in enumerate(traj.states):
        b = phi.time_factor(st.time)
        bdot = phi.time_factor_dt(st.time)
        term = -inner(st.c, S) * bdot
        if b != 0.0:
            term += inner_vec(ops.gradient(st.c), gS) * b
            term -= _upwind_pair_sum(st.u, st.c.values, gS) * b
            src = st.n.values / (1.0 + params.epsilon * st.n.values)
            term -= inner(ScalarField(S.domain, src), S) * b
            term += inner(st.c, S) * b
        vals[m] = term
    total = _trapz(traj.times, vals)
    total -= inner(traj.states[0].c, S) * phi.time_factor(traj.t_start)
    return abs(total)


def weak_residual_u(traj: Trajectory, params: Params, phi: VectorTestFunction,
                    div_tol: float = 1e-8) -> float:
    """Residual of the weak momentum identity (divergence-free test fields)."""
    if not phi.supported_in(traj.t_start, traj.t_end):
        raise ValueError(f"test function {phi.label} not supported in the sampled window")
    S = phi.spatial
    d = ops.max_divergence(S)
    if d > div_tol:
        raise ValueError(f"test field {phi.label} has max|div| = {d:.2e} > {div_tol:.1e}")
    from .stepper import buoyancy_force

    lapS_pairing = None
    vals = np.empty_like(traj.times)
    for m, st in enumerate(traj.states):
        b = phi.time_factor(st.time)
        bdot = phi.time_factor_dt(st.time)
        term = -inner_vec(st.u, S) * bdot
        if b != 0.0:
            # -kappa II u x u : grad phi  ==  +kappa II (u.grad)u . phi
            term += params.kappa * inner_vec(ops.advect_vector(st.u), S) * b
            # II grad u : grad phi  ==  -II (lap u) . phi
            term -= inner_vec(ops.laplacian_vector(st.u), S) * b
            term -= inner_vec(buoyancy_force(st.n, params.potential), S) * b
        vals[m] = term
    total = _trapz(traj.times, vals)
    total -= inner_vec(traj.states[0].u, S) * phi.time_factor(traj.t_start)
    return abs(total)


@dataclass
class LogSupersolutionResidual:
    identity: float   # residual of the exact regularized identity (-> 0 with dt)
    slack: float      # inequality slack of the limit form (>= -eps damping term)
    eps_term: float   # eps II n^2/(n+1) phi, the term dropped in the limit


def _log_terms(state: SimState, params: Params, S: ScalarField, gS: VectorField) -> dict:
    """Spatial integrals of the seven supersolution terms at one sample."""
    dom = S.domain
    w = dom.cell_area
    nv = state.n.values
    phi = S.values
    inv1 = 1.0 / (1.0 + nv)
    log1 = np.log1p(nv)

    gc = ops.gradient(state.c)
    chemo_x, chemo_y = ops.upwind_fluxes(gc, state.n)  # n grad(c) on faces

    def face_terms(axis: int):
        if axis == 0:
            a, b = nv[:-1, :], nv[1:, :]
            pa, pb = phi[:-1, :], phi[1:, :]
            h = dom.hx
            gphi = gS.u[1:-1, :]
            flux = chemo_x[1:-1, :]
        else:
            a, b = nv[:, :-1], nv[:, 1:]
            pa, pb = phi[:, :-1], phi[:, 1:]
            h = dom.hy
            gphi = gS.v[:, 1:-1]
            flux = chemo_y[:, 1:-1]
        dn = (b - a) / h
        phibar = 0.5 * (pa + pb)
        fpbar = 0.5 * (1.0 / (1.0 + a) + 1.0 / (1.0 + b))
        dinv = (1.0 / (1.0 + b) - 1.0 / (1.0 + a)) / h
        grad_log = (phibar * dn * dn / ((1.0 + a) * (1.0 + b))).sum()
        diff_pair = (fpbar * dn * gphi).sum()
        cross = -(phibar * dinv * flux).sum()
        chemo_pair = (fpbar * flux * gphi).sum()
        return grad_log, diff_pair, cross, chemo_pair

    gx = face_terms(0)
    gy = face_terms(1)
    t_grad = w * (gx[0] + gy[0])        # II |grad ln(n+1)|^2 phi
    t_diff = w * (gx[1] + gy[1])        # II (n+1)^-1 grad n . grad phi
    t_cross = w * (gx[2] + gy[2])       # II (n+1)^-2 n grad n . grad c phi
    t_chemo = w * (gx[3] + gy[3])       # II (n+1)^-1 n grad c . grad phi
    t_adv = _upwind_pair_sum(state.u, log1, gS)  # II ln(n+1) u . grad phi
    t_f = float(w * (inv1 * params.f(nv) * phi).sum())
    t_eps = float(params.epsilon * w * (inv1 * nv * nv * phi).sum())
    return {
        "grad": t_grad,
        "diff": t_diff,
        "cross": t_cross,
        "chemo": t_chemo,
        "adv": t_adv,
        "f": t_f,
        "eps": t_eps,
    }


def log_supersolution_residual(
    traj: Trajectory, params: Params, phi: ScalarTestFunction
) -> LogSupersolutionResidual:
    """Exact-identity residual and inequality slack for one nonnegative phi."""
    if np.any(phi.spatial.values < 0):
        raise ValueError(f"test function {phi.label} must be nonnegative")
    if not phi.supported_in(traj.t_start, traj.t_end):
        raise ValueError(f"test function {phi.label} not supported in the sampled window")
    S = phi.spatial
    gS = ops.gradient(S)

    lhs_series = np.empty_like(traj.times)   # II ln(n+1) phi_t
    rhs_series = np.empty_like(traj.times)   # spatial terms of the def32 right side
    eps_series = np.empty_like(traj.times)
    for m, st in enumerate(traj.states):
        b = phi.time_factor(st.time)
        bdot = phi.time_factor_dt(st.time)
        log_int = float(S.domain.cell_area * (np.log1p(st.n.values) * S.values).sum())
        lhs_series[m] = log_int * bdot
        if b != 0.0:
            t = _log_terms(st, params, S, gS)
            rhs_series[m] = b * (
                -t["adv"] - t["grad"] + t["diff"] + t["cross"] - t["chemo"] - t["f"]
            )
            eps_series[m] = b * t["eps"]
        else:
            rhs_series[m] = 0.0
            eps_series[m] = 0.0

    lhs = _trapz(traj.times, lhs_series)
    lhs += float(
        S.domain.cell_area * (np.log1p(traj.states[0].n.values) * S.values).sum()
    ) * phi.time_factor(traj.t_start)
    rhs = _trapz(traj.times, rhs_series)
    eps_term = _trapz(traj.times, eps_series)

    slack = rhs - lhs
    identity = abs(slack + eps_term)
    return LogSupersolutionResidual(identity=identity, slack=slack, eps_term=eps_term)

"""Self-contained comparison oracles: the differential-inequality bound, the
logistic mass limit, and the numerical lower estimate of the interpolation
constant driving the degradation threshold."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import DomainSpec, ScalarField, lp_norm
from .diagnostics import grad_sq_scalar


# ----------------------------------------------------------------------------
# Ordinary differential inequality: y' + h <= a y + b with integrable a, b
# gives sup y <= C y(tau) + C and int h <= C y(tau) + C.

def odi_constant(m1: float, m2: float) -> float:
    """C = (M1 + 1) max{e^M1, M2 e^M1}; exact closed form."""
    if m1 < 0 or m2 < 0:
        raise ValueError(f"M1 and M2 must be nonnegative, got {m1}, {m2}")
    e1 = math.exp(m1)
    return (m1 + 1.0) * max(e1, m2 * e1)


@dataclass
class OdiInput:
    """Sampled inequality system on a uniform grid over [tau, t_end]."""

    tau: float
    t_end: float
    y: np.ndarray
    h: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64)
        self.h = np.asarray(self.h, dtype=np.float64)
        self.a = np.asarray(self.a, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        m = len(self.y)
        if not (len(self.h) == len(self.a) == len(self.b) == m) or m < 5:
            raise ValueError("series must share a length of at least 5")
        if self.t_end <= self.tau:
            raise ValueError("t_end must exceed tau")
        for name, s in (("y", self.y), ("h", self.h), ("a", self.a), ("b", self.b)):
            if np.any(s < 0):
                raise ValueError(f"series {name} must be nonnegative")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.tau, self.t_end, len(self.y))


@dataclass
class OdiVerdict:
    passed: bool
    constant: float
    m1: float
    m2: float
    sup_y: float
    h_integral: float
    bound: float


def odi_verify(inp: OdiInput, ineq_tol: float = 1e-3, slack: float = 1e-9) -> OdiVerdict:
    """Check the comparison bound on a sampled admissible system.

    The sampled differential inequality itself is validated first (central
    differences, relative tolerance; this is a sanity filter at sampling
    resolution, not a smoothness certificate).  A violation there rejects
    the input rather than counting as a failure of the bound.
    """
    t = inp.times
    dt = t[1] - t[0]
    y = inp.y
    dy = (-y[4:] + 8.0 * y[3:-1] - 8.0 * y[1:-3] + y[:-4]) / (12.0 * dt)
    lhs = dy + inp.h[2:-2]
    rhs = inp.a[2:-2] * inp.y[2:-2] + inp.b[2:-2]
    scale = max(1.0, float(np.abs(inp.y).max()), float(np.abs(rhs).max()))
    worst = float((lhs - rhs).max())
    if worst > ineq_tol * scale:
        raise ValueError(
            f"sampled differential inequality violated by {worst:.3e} "
            f"(tolerance {ineq_tol * scale:.3e}); input rejected"
        )

    m1 = float(np.trapezoid(inp.a, t))
    m2 = float(np.trapezoid(inp.b, t))
    c = odi_constant(m1, m2)
    bound = c * inp.y[0] + c
    sup_y = float(inp.y.max())
    h_int = float(np.trapezoid(inp.h, t))
    passed = sup_y <= bound + slack and h_int <= bound + slack
    return OdiVerdict(passed, c, m1, m2, sup_y, h_int, bound)


def _fourier_batch(rng, count: int, s: np.ndarray) -> np.ndarray:
    out = rng.normal(size=(count, 1)) * np.ones_like(s)[None, :]
    for k in range(1, 4):
        amp = rng.normal(size=(count, 1)) / k
        phase = rng.uniform(0, 2 * np.pi, size=(count, 1))
        out += amp * np.sin(2 * np.pi * k * s[None, :] + phase)
    return out


def _smooth_nonneg_batch(rng, count: int, s: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Random smooth nonnegative functions on the unit grid s (count x len(s)).

    Nonnegativity by squaring (no clipping kinks: the admissibility check
    differentiates these numerically).
    """
    scale = rng.uniform(lo, hi, size=(count, 1))
    base = _fourier_batch(rng, count, s)
    return scale * base**2 / 3.0


def random_saturated_batch(seed: int, count: int, samples: int = 513, sub: int = 4) -> list[OdiInput]:
    """Admissible systems from integrating y' = (1-theta)(a y + b), h = theta(a y + b).

    theta in [0, 1] keeps y nondecreasing and the inequality saturated, so
    every generated input is admissible by construction.  The RK4 sweep is
    vectorized across systems on a shared unit time grid.
    """
    rng = np.random.default_rng(seed)
    t_end = rng.uniform(0.5, 4.0, size=count)
    n_fine = (samples - 1) * 2 * sub + 1
    s_fine = np.linspace(0.0, 1.0, n_fine)
    a_f = _smooth_nonneg_batch(rng, count, s_fine, 0.1, 2.0)
    b_f = _smooth_nonneg_batch(rng, count, s_fine, 0.1, 2.0)
    th_f = np.sin(_fourier_batch(rng, count, s_fine)) ** 2  # smooth, in [0, 1]
    y0 = rng.uniform(0.0, 3.0, size=count)

    g_f = (1.0 - th_f) * a_f  # rhs = g*y + (1-theta)*b
    gb_f = (1.0 - th_f) * b_f
    hstep = t_end / ((samples - 1) * sub)

    y = y0.copy()
    y_coarse = np.empty((count, samples))
    y_coarse[:, 0] = y
    stride = 2 * sub
    for m in range(samples - 1):
        for j in range(sub):
            i0 = m * stride + 2 * j
            k1 = g_f[:, i0] * y + gb_f[:, i0]
            k2 = g_f[:, i0 + 1] * (y + 0.5 * hstep * k1) + gb_f[:, i0 + 1]
            k3 = g_f[:, i0 + 1] * (y + 0.5 * hstep * k2) + gb_f[:, i0 + 1]
            k4 = g_f[:, i0 + 2] * (y + hstep * k3) + gb_f[:, i0 + 2]
            y = y + (hstep / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        y_coarse[:, m + 1] = y

    idx = np.arange(samples) * stride
    a_c, b_c, th_c = a_f[:, idx], b_f[:, idx], th_f[:, idx]
    h_c = th_c * (a_c * y_coarse + b_c)
    return [
        OdiInput(0.0, float(t_end[i]), y_coarse[i], h_c[i], a_c[i], b_c[i])
        for i in range(count)
    ]


def random_saturated_system(seed: int, samples: int = 513) -> OdiInput:
    return random_saturated_batch(seed, 1, samples=samples)[0]


# ----------------------------------------------------------------------------
# Logistic mass comparison

def logistic_limit(r: float, mu: float, gamma: float, area: float) -> float:
    """area * (max(r,0)/mu)^(1/(gamma-1)); the large-time mass ceiling."""
    if mu <= 0 or gamma <= 1 or area <= 0:
        raise ValueError("need mu > 0, gamma > 1, area > 0")
    r_plus = max(r, 0.0)
    if r_plus == 0.0:
        return 0.0
    return area * (r_plus / mu) ** (1.0 / (gamma - 1.0))


def logistic_closed_form(r: float, mu: float, area: float, y0: float, t: np.ndarray) -> np.ndarray:
    """Exact solution of y' = r y - (mu/area) y^2 (the gamma = 2 case)."""
    if r == 0.0:
        return y0 / (1.0 + (mu / area) * y0 * t)
    K = r * area / mu
    et = np.exp(-r * t)
    return K * y0 / (y0 + (K - y0) * et)


class OdeStiffnessError(RuntimeError):
    pass


def logistic_ode_solve(
    r: float,
    mu: float,
    gamma: float,
    area: float,
    y0: float,
    t_grid: np.ndarray,
    min_dt: float = 1e-12,
) -> np.ndarray:
    """RK4 with step halving for y' = r y - (mu/area^(gamma-1)) y^gamma, y >= 0."""
    if y0 < 0:
        raise ValueError("y0 must be nonnegative")
    coeff = mu / area ** (gamma - 1.0)

    def f(y):
        return r * y - coeff * (y ** gamma if y > 0 else 0.0)

    t_grid = np.asarray(t_grid, dtype=np.float64)
    out = np.empty_like(t_grid)
    out[0] = y0
    y = float(y0)
    for m in range(len(t_grid) - 1):
        t0, t1 = t_grid[m], t_grid[m + 1]
        base = (t1 - t0) / 8.0  # accuracy floor; halves further on stiffness
        dt = base
        while t1 - t0 > 1e-12 * max(1.0, abs(t1)):
            dt = min(dt, t1 - t0)
            k1 = f(y)
            k2 = f(y + 0.5 * dt * k1)
            k3 = f(y + 0.5 * dt * k2)
            k4 = f(y + dt * k3)
            ynew = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            # reject on negativity or violent relative change (stiffness guard)
            if ynew < 0 or (y > 0 and abs(ynew - y) > 0.5 * max(y, 1e-30)):
                dt *= 0.5
                if dt < min_dt:
                    raise OdeStiffnessError(f"step collapsed below {min_dt} at t={t0}")
                continue
            y = ynew
            t0 += dt
            dt = min(dt * 1.5, base)
        out[m + 1] = y
    return out


# ----------------------------------------------------------------------------
# Interpolation-constant estimation (lower bound by ascent over grid fields)

@dataclass
class GnEstimate:
    c_star_lower: float
    maximizer: ScalarField
    iterations: int
    mu0: float
    gamma: float
    warning: str | None = None


def gn_ratio(phi: ScalarField) -> float:
    """R(phi) = ||phi||_4 / (||grad phi||_2^(1/2) ||phi||_2^(1/2) + ||phi||_2)."""
    l2 = lp_norm(phi, 2.0)
    if l2 == 0.0:
        return 0.0
    l4 = lp_norm(phi, 4.0)
    g = math.sqrt(grad_sq_scalar(phi))
    return l4 / (math.sqrt(g) * math.sqrt(l2) + l2)


def mu0_threshold(c_star: float, area: float, gamma: float) -> float:
    """(16 c*^4 |Omega| / 3)^(gamma-1): degradation threshold scale."""
    return (16.0 * c_star**4 * area / 3.0) ** (gamma - 1.0)


def splitmix64(seed: int) -> int:
    """Deterministic per-probe seed derivation."""
    z = (seed + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def _fd_gradient(domain: DomainSpec, vals: np.ndarray, delta: float) -> np.ndarray:
    """Central finite-difference gradient of R via incremental norm updates.

    Perturbing one cell changes ||phi||_4^4, ||phi||_2^2 and the four face
    differences touching the cell; all coordinates are updated at once.
    """
    w = domain.cell_area
    hx2, hy2 = domain.hx**2, domain.hy**2
    s4 = (vals**4).sum()
    s2 = (vals**2).sum()

    def grad_sq_delta(v, d):
        # change of sum of squared face differences when one cell moves by d
        out = np.zeros_like(v)
        dx = (v[1:, :] - v[:-1, :]) / hx2
        out[1:, :] += 2 * d * dx + d * d / hx2
        out[:-1, :] += -2 * d * dx + d * d / hx2
        dy = (v[:, 1:] - v[:, :-1]) / hy2
        out[:, 1:] += 2 * d * dy + d * d / hy2
        out[:, :-1] += -2 * d * dy + d * d / hy2
        return out

    gsum = ((vals[1:, :] - vals[:-1, :]) ** 2).sum() / hx2
    gsum += ((vals[:, 1:] - vals[:, :-1]) ** 2).sum() / hy2

    def ratio_all(d):
        s4d = s4 + (vals + d) ** 4 - vals**4
        s2d = s2 + (vals + d) ** 2 - vals**2
        gd = gsum + grad_sq_delta(vals, d)
        l4 = (w * s4d) ** 0.25
        l2 = np.sqrt(w * s2d)
        g = np.sqrt(np.maximum(w * gd, 0.0))
        return l4 / (np.sqrt(g) * np.sqrt(l2) + l2)

    return (ratio_all(delta) - ratio_all(-delta)) / (2.0 * delta)


def gn_estimate(
    domain: DomainSpec,
    probes: int = 6,
    ascent_iters: int = 200,
    seed: int = 0,
    gamma: float = 2.0,
) -> GnEstimate:
    """Lower-bound the interpolation constant by projected gradient ascent.

    Starts: `probes` random smooth fields plus the constant field.  Each
    iterate renormalizes to unit L2 norm.  Divergence guard: 50 consecutive
    non-improvements return the best-so-far with a warning flag.
    """
    if probes < 1:
        raise ValueError("probes must be at least 1")
    nx, ny = domain.cells_x, domain.cells_y
    X, Y = domain.cell_centers()
    lx, ly = domain.length_x, domain.length_y
    starts = [np.ones((nx, ny))]
    for p in range(probes):
        rng = np.random.default_rng(splitmix64(seed + p))
        if p % 2 == 0:
            # localized bump: random center (corners included), width, offset
            cx, cy = rng.uniform(-0.1, 1.1) * lx, rng.uniform(-0.1, 1.1) * ly
            w = rng.uniform(0.02, 0.3) * min(lx, ly)
            vals = np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2 * w * w))
            vals += rng.uniform(0.0, 0.2)
        else:
            raw = rng.normal(size=(nx, ny))
            sm = raw.copy()
            sm[1:-1, 1:-1] = 0.2 * (
                raw[1:-1, 1:-1] + raw[2:, 1:-1] + raw[:-2, 1:-1] + raw[1:-1, 2:] + raw[1:-1, :-2]
            )
            vals = 1.0 + 0.5 * sm
        starts.append(vals)

    best_val = -np.inf
    best_field = None
    total_iters = 0
    warning = None
    for vals0 in starts:
        phi = vals0 / math.sqrt(domain.cell_area * (vals0**2).sum())
        val = gn_ratio(ScalarField(domain, phi))
        if val > best_val:
            best_val, best_field = val, phi.copy()
        eta = 0.1
        bad = 0
        for _ in range(ascent_iters):
            total_iters += 1
            g = _fd_gradient(domain, phi, 1e-6)
            cand = phi + eta * g
            cand /= math.sqrt(domain.cell_area * (cand**2).sum())
            cval = gn_ratio(ScalarField(domain, cand))
            if cval > val:
                phi, val = cand, cval
                eta = min(eta * 1.2, 10.0)
                bad = 0
                if val > best_val:
                    best_val, best_field = val, phi.copy()
            else:
                eta *= 0.5
                bad += 1
                if bad >= 50:
                    warning = "ascent stalled for 50 consecutive iterations"
                    break

    return GnEstimate(
        c_star_lower=best_val,
        maximizer=ScalarField(domain, best_field),
        iterations=total_iters,
        mu0=mu0_threshold(best_val, domain.area(), gamma),
        gamma=gamma,
        warning=warning,
    )


def gn_cache_key(domain: DomainSpec, seed: int, probes: int, ascent_iters: int) -> str:
    return (
        f"{domain.length_x!r}x{domain.length_y!r}_{domain.cells_x}x{domain.cells_y}"
        f"_seed{seed}_probes{probes}_iters{ascent_iters}"
    )


def gn_estimate_cached(
    cache_path,
    domain: DomainSpec,
    probes: int = 6,
    ascent_iters: int = 200,
    seed: int = 0,
    gamma: float = 2.0,
) -> GnEstimate:
    """gn_estimate with a JSON sidecar cache keyed by (domain, grid, seed, iters)."""
    key = gn_cache_key(domain, seed, probes, ascent_iters)
    path = Path(cache_path)
    cache = {}
    if path.exists():
        cache = json.loads(path.read_text())
    if key in cache:
        entry = cache[key]
        maximizer = ScalarField(domain, np.array(entry["maximizer"]))
        return GnEstimate(
            c_star_lower=entry["c_star_lower"],
            maximizer=maximizer,
            iterations=entry["iterations"],
            mu0=mu0_threshold(entry["c_star_lower"], domain.area(), gamma),
            gamma=gamma,
            warning=entry.get("warning"),
        )
    est = gn_estimate(domain, probes, ascent_iters, seed, gamma)
    cache[key] = {
        "c_star_lower": est.c_star_lower,
        "iterations": est.iterations,
        "maximizer": est.maximizer.values.tolist(),
        "warning": est.warning,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(cache))
    return est

"""Initial-data presets: nonnegative n0 (not identically zero), nonnegative c0,
and a discretely divergence-free no-slip u0 (raw presets are projected)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import DomainSpec, ScalarField, VectorField, integrate
from . import operators as ops

PRESETS = ("gaussian-bump", "two-bump", "random-positive", "constant")


@dataclass(frozen=True)
class InitialSpec:
    preset: str
    seed: int = 0
    mass: float = 1.0          # target integral of n0 (ignored by 'constant')
    n_level: float = 1.0       # constant preset: n value
    c_level: float = 0.0       # background signal level
    c_amplitude: float = 0.0   # amplitude of a smooth bump added to c0
    u_amplitude: float = 0.0   # scale of the initial swirl

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; choose one of {PRESETS}")


def _gauss(X, Y, cx, cy, w):
    return np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2.0 * w * w))


def _normalized(field: ScalarField, mass: float) -> ScalarField:
    total = integrate(field)
    if total <= 0:
        raise ValueError("preset produced a nonpositive-mass density")
    field.values *= mass / total
    return field


def _swirl(domain: DomainSpec, amplitude: float, rng) -> VectorField:
    """Random low-mode stream-function swirl; exactly divergence-free, no-slip."""
    if amplitude == 0.0:
        return VectorField.zeros(domain)
    X, Y = domain.node_coords()
    sx, sy = X / domain.length_x, Y / domain.length_y
    psi = np.zeros_like(X)
    for kx in (1, 2):
        for ky in (1, 2):
            psi += rng.normal() * np.sin(np.pi * kx * sx) * np.sin(np.pi * ky * sy)
    psi[0, :] = psi[-1, :] = 0.0  # exact zero on walls: curl is then no-penetration
    psi[:, 0] = psi[:, -1] = 0.0
    scale = np.abs(psi).max()
    if scale > 0:
        psi *= amplitude / scale * min(domain.length_x, domain.length_y) / np.pi
    return VectorField.from_stream_function(domain, psi)


def make_initial_data(domain: DomainSpec, spec: InitialSpec):
    """Build (n0, c0, u0) for a named preset; u0 is helmholtz-projected."""
    rng = np.random.default_rng(spec.seed)
    X, Y = domain.cell_centers()
    lx, ly = domain.length_x, domain.length_y

    if spec.preset == "constant":
        n0 = ScalarField.constant(domain, spec.n_level)
        c0 = ScalarField.constant(domain, spec.c_level)
        u0 = VectorField.zeros(domain)
    elif spec.preset == "gaussian-bump":
        vals = _gauss(X, Y, 0.5 * lx, 0.5 * ly, 0.12 * min(lx, ly)) + 1e-3
        n0 = _normalized(ScalarField(domain, vals), spec.mass)
        c0 = ScalarField(
            domain,
            spec.c_level + spec.c_amplitude * _gauss(X, Y, 0.5 * lx, 0.5 * ly, 0.2 * min(lx, ly)),
        )
        u0 = _swirl(domain, spec.u_amplitude, rng)
    elif spec.preset == "two-bump":
        vals = (
            _gauss(X, Y, 0.3 * lx, 0.4 * ly, 0.10 * min(lx, ly))
            + 0.8 * _gauss(X, Y, 0.7 * lx, 0.65 * ly, 0.12 * min(lx, ly))
            + 1e-3
        )
        n0 = _normalized(ScalarField(domain, vals), spec.mass)
        c0 = ScalarField(
            domain,
            spec.c_level + spec.c_amplitude * _gauss(X, Y, 0.5 * lx, 0.5 * ly, 0.25 * min(lx, ly)),
        )
        u0 = _swirl(domain, spec.u_amplitude, rng)
    elif spec.preset == "random-positive":
        sx, sy = X / lx, Y / ly
        vals = np.ones_like(X)
        for kx in range(3):
            for ky in range(3):
                if kx == ky == 0:
                    continue
                vals += 0.3 * rng.normal() * np.cos(np.pi * kx * sx) * np.cos(np.pi * ky * sy)
        vals = np.maximum(vals, 0.05)
        n0 = _normalized(ScalarField(domain, vals), spec.mass)
        cv = np.full_like(X, spec.c_level)
        if spec.c_amplitude:
            bump = np.zeros_like(X)
            for kx in range(1, 3):
                for ky in range(1, 3):
                    bump += rng.normal() * np.cos(np.pi * kx * sx) * np.cos(np.pi * ky * sy)
            cv += spec.c_amplitude * (bump - bump.min())
        c0 = ScalarField(domain, np.maximum(cv, 0.0))
        u0 = _swirl(domain, spec.u_amplitude if spec.u_amplitude else 0.1, rng)
    else:  # pragma: no cover - guarded by InitialSpec
        raise ValueError(spec.preset)

    if np.all(n0.values == 0.0):
        raise ValueError("n0 must not be identically zero")
    u0, _ = ops.helmholtz_project(u0)
    u0.enforce_noslip()
    return n0, c0, u0

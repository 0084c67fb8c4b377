"""Spatial discrete operators on the MAC grid.

Conventions that the rest of the code relies on:

* ``gradient`` and ``-divergence`` are exact adjoints under the discrete
  L2 inner products (cell values vs. face values, uniform weight hx*hy),
  provided the vector field has zero boundary-normal faces.
* ``laplacian_neumann`` is divergence(gradient(.)): the 5-point stencil with
  mirror ghosts.  It is symmetric negative semidefinite and integrates to 0.
* Advection of scalars is the conservative flux form with first-order upwind
  face reconstruction, so integrals telescope to exactly zero.
* ``advect_vector`` uses the energy-conserving divergence form: transported
  face values are arithmetic means, transporting fluxes are interpolated so
  their discrete divergence around every momentum cell is a mean of cell
  divergences.  For a discretely divergence-free no-slip field the convection
  term is then exactly orthogonal to the field (up to roundoff).
"""

from __future__ import annotations

import numpy as np

from .grid import ScalarField, VectorField, same_domain
from . import spectral


class DivergenceError(ValueError):
    """Advecting field is not discretely divergence-free."""


def gradient(f: ScalarField) -> VectorField:
    """Face-centered differences; boundary-normal faces are zero (Neumann)."""
    dom = f.domain
    out = VectorField.zeros(dom)
    out.u[1:-1, :] = (f.values[1:, :] - f.values[:-1, :]) / dom.hx
    out.v[:, 1:-1] = (f.values[:, 1:] - f.values[:, :-1]) / dom.hy
    return out


def divergence(vel: VectorField) -> ScalarField:
    dom = vel.domain
    div = (vel.u[1:, :] - vel.u[:-1, :]) / dom.hx + (vel.v[:, 1:] - vel.v[:, :-1]) / dom.hy
    return ScalarField(dom, div)


def laplacian_neumann(f: ScalarField) -> ScalarField:
    """5-point Laplacian with mirror ghosts (zero-flux boundary)."""
    return divergence(gradient(f))


def max_divergence(vel: VectorField) -> float:
    return float(np.abs(divergence(vel).values).max())


def upwind_flux_divergence(face_vel: VectorField, f: ScalarField) -> ScalarField:
    """div(w f) with first-order upwind reconstruction of f on faces.

    ``face_vel`` is any face-valued transporting field (a velocity or a
    signal gradient); no divergence-free assumption is made here.  Boundary
    faces carry zero flux, so the output integrates to exactly zero.
    """
    dom = same_domain(face_vel, f)
    Fx, Fy = upwind_fluxes(face_vel, f)
    div = (Fx[1:, :] - Fx[:-1, :]) / dom.hx + (Fy[:, 1:] - Fy[:, :-1]) / dom.hy
    return ScalarField(dom, div)


def upwind_fluxes(face_vel: VectorField, f: ScalarField):
    """Face fluxes (w * f_upwind) on the full face grids, zero on boundaries."""
    n = f.values
    Fx = np.zeros_like(face_vel.u)
    wu = face_vel.u[1:-1, :]
    Fx[1:-1, :] = wu * np.where(wu > 0, n[:-1, :], n[1:, :])
    Fy = np.zeros_like(face_vel.v)
    wv = face_vel.v[:, 1:-1]
    Fy[:, 1:-1] = wv * np.where(wv > 0, n[:, :-1], n[:, 1:])
    return Fx, Fy


def advect_scalar(vel: VectorField, f: ScalarField, div_tol: float = 1e-8) -> ScalarField:
    """Conservative upwind div(v f); requires v discretely divergence-free."""
    d = max_divergence(vel)
    if d > div_tol:
        raise DivergenceError(
            f"advecting field has max|div| = {d:.3e} > {div_tol:.1e}; project it first"
        )
    return upwind_flux_divergence(vel, f)


def advect_vector(vel: VectorField) -> VectorField:
    """(v . grad) v in the energy-conserving MAC divergence form.

    For the u-equation the x-fluxes live at cell centers and the y-fluxes at
    interior corners; wall corners carry zero flux because the transporting
    normal velocity vanishes there.  Mirror construction for v.
    """
    dom = vel.domain
    nx, ny = dom.cells_x, dom.cells_y
    hx, hy = dom.hx, dom.hy
    u, v = vel.u, vel.v
    out = VectorField.zeros(dom)

    # u-component: faces i=1..nx-1, j=0..ny-1
    # x-fluxes at cell centers: T = ubar, transported = ubar
    ubar_c = 0.5 * (u[:-1, :] + u[1:, :])            # (nx, ny)
    Fxx = ubar_c * ubar_c
    # y-fluxes at corners (i=1..nx-1, j=0..ny): T = vbar at corner
    vbar_corner = 0.5 * (v[:-1, 1:-1] + v[1:, 1:-1])  # interior corners (nx-1, ny-1)
    ubar_y = 0.5 * (u[1:-1, :-1] + u[1:-1, 1:])       # (nx-1, ny-1)
    Fxy = np.zeros((nx - 1, ny + 1))
    Fxy[:, 1:-1] = vbar_corner * ubar_y               # wall rows stay 0 (v=0 there)
    out.u[1:-1, :] = (Fxx[1:, :] - Fxx[:-1, :]) / hx + (Fxy[:, 1:] - Fxy[:, :-1]) / hy

    # v-component: faces i=0..nx-1, j=1..ny-1
    vbar_c = 0.5 * (v[:, :-1] + v[:, 1:])             # (nx, ny)
    Fyy = vbar_c * vbar_c
    ubar_corner = 0.5 * (u[1:-1, :-1] + u[1:-1, 1:])  # (nx-1, ny-1)
    vbar_x = 0.5 * (v[:-1, 1:-1] + v[1:, 1:-1])       # (nx-1, ny-1)
    Fyx = np.zeros((nx + 1, ny - 1))
    Fyx[1:-1, :] = ubar_corner * vbar_x
    out.v[:, 1:-1] = (Fyx[1:, :] - Fyx[:-1, :]) / hx + (Fyy[:, 1:] - Fyy[:, :-1]) / hy
    return out


def laplacian_vector(vel: VectorField) -> VectorField:
    """Componentwise Laplacian with no-slip walls.

    Normal boundary faces are pinned at zero; across tangential walls the
    ghost value is the reflection -u (wall value 0 midway).
    """
    dom = vel.domain
    hx2, hy2 = dom.hx ** 2, dom.hy ** 2
    u, v = vel.u, vel.v
    out = VectorField.zeros(dom)

    def _cross_wall(arr: np.ndarray, h2: float, axis: int) -> np.ndarray:
        """Second difference along ``axis`` with reflected (-value) wall ghosts."""
        a = np.moveaxis(arr, axis, 0)
        out = np.empty_like(a)
        if a.shape[0] == 1:
            out[0] = -4.0 * a[0] / h2  # walls on both sides
        else:
            out[1:-1] = (a[2:] - 2.0 * a[1:-1] + a[:-2]) / h2
            out[0] = (a[1] - 3.0 * a[0]) / h2
            out[-1] = (a[-2] - 3.0 * a[-1]) / h2
        return np.moveaxis(out, 0, axis)

    ui = u[1:-1, :]
    if ui.size:
        lap_u = (u[2:, :] - 2.0 * ui + u[:-2, :]) / hx2
        out.u[1:-1, :] = lap_u + _cross_wall(ui, hy2, 1)

    vi = v[:, 1:-1]
    if vi.size:
        lap_v = (v[:, 2:] - 2.0 * vi + v[:, :-2]) / hy2
        out.v[:, 1:-1] = lap_v + _cross_wall(vi, hx2, 0)
    return out


def grad_norm_sq_vector(vel: VectorField) -> float:
    """Discrete integral of |grad u|^2, matching -inner(laplacian_vector(u), u).

    Interior differences plus reflected-ghost wall terms (2 u_w^2 / h^2 per
    wall-adjacent face).
    """
    dom = vel.domain
    w = dom.cell_area
    hx2, hy2 = dom.hx ** 2, dom.hy ** 2
    u, v = vel.u, vel.v
    total = 0.0
    # u: x-differences across cells, y-differences between stacked faces + walls
    du = (u[1:, :] - u[:-1, :])
    total += (du * du).sum() / hx2
    ui = u[1:-1, :]
    if ui.size:
        dy = ui[:, 1:] - ui[:, :-1]
        total += (dy * dy).sum() / hy2
        total += 2.0 * ((ui[:, 0] ** 2).sum() + (ui[:, -1] ** 2).sum()) / hy2
    # v: mirror
    dv = (v[:, 1:] - v[:, :-1])
    total += (dv * dv).sum() / hy2
    vi = v[:, 1:-1]
    if vi.size:
        dx = vi[1:, :] - vi[:-1, :]
        total += (dx * dx).sum() / hx2
        total += 2.0 * ((vi[0, :] ** 2).sum() + (vi[-1, :] ** 2).sum()) / hx2
    return float(w * total)


def helmholtz_project(vel: VectorField):
    """Project onto the discretely divergence-free space.

    Returns ``(projected, p)`` with ``vel = projected + gradient(p)``,
    ``p`` zero-mean.  The Neumann Poisson solve is spectral (cosine basis),
    exact for the discrete operator up to roundoff.
    """
    dom = vel.domain
    div = divergence(vel)
    p = spectral.solve_neumann_poisson(div)
    g = gradient(p)
    out = VectorField(dom, vel.u - g.u, vel.v - g.v)
    return out, p

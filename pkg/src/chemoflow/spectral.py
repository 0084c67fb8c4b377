"""Spectral machinery: eigenbases of the discrete operators and exact solvers.

On a rectangle the discrete Neumann Laplacian (mirror ghosts) is diagonalized
by tensorized DCT-II modes, with 1D eigenvalues

    mu_k = (2/h^2) (1 - cos(k pi / N)),   k = 0..N-1.

The shifted operator -Delta + 1 therefore has eigenvalues 1 + mu_j + mu_k,
smallest exactly 1 (constant mode).  Velocity components with pinned normal
faces and reflected tangential ghosts are diagonalized by DST-I (face
direction) and DST-II (cell direction).  All implicit solves below use these
transforms and are exact for the discrete stencils up to roundoff.

The Stokes operator -P Delta on the discretely divergence-free no-slip space
is handled densely: the kernel of the MAC divergence is spanned exactly by
discrete curls of interior nodal stream functions, so an orthonormal basis is
a QR factor away, and the operator restricted to that space is a symmetric
positive definite matrix whose eigendecomposition defines the fractional
powers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
import scipy.linalg

from .grid import DomainSpec, ScalarField, VectorField, FieldError


def neumann_mu_1d(n: int, h: float) -> np.ndarray:
    """1D Neumann-Laplacian eigenvalues in DCT-II ordering (nonnegative)."""
    k = np.arange(n)
    return (2.0 / h**2) * (1.0 - np.cos(k * np.pi / n))


def dirichlet_face_mu_1d(n_cells: int, h: float) -> np.ndarray:
    """Eigenvalues for interior faces with pinned boundary faces (DST-I order)."""
    k = np.arange(1, n_cells)
    return (2.0 / h**2) * (1.0 - np.cos(k * np.pi / n_cells))


def dirichlet_cell_mu_1d(n: int, h: float) -> np.ndarray:
    """Eigenvalues for cell direction with reflected wall ghosts (DST-II order)."""
    k = np.arange(1, n + 1)
    return (2.0 / h**2) * (1.0 - np.cos(k * np.pi / n))


def _dct2(values: np.ndarray) -> np.ndarray:
    return sfft.dctn(values, type=2, norm="ortho")


def _idct2(coeffs: np.ndarray) -> np.ndarray:
    return sfft.idctn(coeffs, type=2, norm="ortho")


@dataclass(frozen=True)
class SpectralBasis:
    """Eigenpairs of a discrete operator (cosine tensor basis or dense Stokes)."""

    domain: DomainSpec
    kind: str  # "cosine-tensor" | "dense-stokes"
    lam: np.ndarray = field(repr=False)      # cosine: (nx, ny); dense: (n_modes,)
    modes: np.ndarray | None = field(default=None, repr=False)  # dense only

    @property
    def eigenvalues(self) -> np.ndarray:
        """Flat ascending eigenvalue list."""
        return np.sort(self.lam.ravel())

    def gram_error(self) -> float:
        """Max deviation of the discrete Gram matrix from the identity (dense)."""
        if self.kind != "dense-stokes":
            return 0.0  # cosine modes are orthonormal analytically
        g = self.domain.cell_area * (self.modes.T @ self.modes)
        return float(np.abs(g - np.eye(g.shape[0])).max())


def neumann_spectral_basis(domain: DomainSpec) -> SpectralBasis:
    """Eigenvalues of L = -Delta + 1 with Neumann walls, cosine tensor modes."""
    mux = neumann_mu_1d(domain.cells_x, domain.hx)
    muy = neumann_mu_1d(domain.cells_y, domain.hy)
    lam = 1.0 + mux[:, None] + muy[None, :]
    return SpectralBasis(domain, "cosine-tensor", lam)


def neumann_coefficients(f: ScalarField) -> np.ndarray:
    """Orthonormal cosine coefficients; Parseval: sum(c^2)*cell_area = int f^2."""
    return _dct2(f.values)


def fractional_power_apply(basis: SpectralBasis, alpha: float, f: ScalarField) -> ScalarField:
    """L^alpha f via the cosine eigenbasis; alpha may be negative or fractional."""
    if basis.kind != "cosine-tensor":
        raise ValueError("fractional_power_apply expects a cosine-tensor basis")
    if basis.domain != f.domain:
        raise FieldError("basis and field domains differ")
    coeffs = _dct2(f.values)
    coeffs *= basis.lam ** alpha
    return ScalarField(f.domain, _idct2(coeffs))


def fractional_norm_sq(basis: SpectralBasis, alpha: float, f: ScalarField) -> float:
    """||L^alpha f||_2^2 evaluated on the spectral coefficients."""
    if basis.domain != f.domain:
        raise FieldError("basis and field domains differ")
    c = _dct2(f.values)
    return float(basis.domain.cell_area * ((basis.lam ** (2.0 * alpha)) * c * c).sum())


def solve_neumann_poisson(rhs: ScalarField) -> ScalarField:
    """Solve Delta p = rhs with Neumann walls; p has zero mean.

    The incompatible (mean) component of rhs is dropped; for projection use
    the right-hand side is a discrete divergence and has zero mean anyway.
    """
    dom = rhs.domain
    mux = neumann_mu_1d(dom.cells_x, dom.hx)
    muy = neumann_mu_1d(dom.cells_y, dom.hy)
    denom = -(mux[:, None] + muy[None, :])
    coeffs = _dct2(rhs.values)
    coeffs[0, 0] = 0.0
    denom[0, 0] = 1.0
    return ScalarField(dom, _idct2(coeffs / denom))


def solve_scalar_implicit(rhs: ScalarField, a: float, b: float) -> ScalarField:
    """Solve (a I - b Delta) x = rhs with Neumann walls; needs a > 0, b >= 0.

    The operator is an M-matrix, so the solve is monotone: rhs >= 0 gives
    x >= 0 (up to roundoff).
    """
    if a <= 0 or b < 0:
        raise ValueError(f"need a > 0 and b >= 0, got a={a}, b={b}")
    dom = rhs.domain
    mux = neumann_mu_1d(dom.cells_x, dom.hx)
    muy = neumann_mu_1d(dom.cells_y, dom.hy)
    denom = a + b * (mux[:, None] + muy[None, :])
    return ScalarField(dom, _idct2(_dct2(rhs.values) / denom))


def solve_velocity_diffusion(rhs: VectorField, dt: float) -> VectorField:
    """Solve (I - dt Delta) w = rhs componentwise with no-slip walls."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    dom = rhs.domain
    out = VectorField.zeros(dom)

    ui = rhs.u[1:-1, :]
    if ui.size:
        mux = dirichlet_face_mu_1d(dom.cells_x, dom.hx)
        muy = dirichlet_cell_mu_1d(dom.cells_y, dom.hy)
        denom = 1.0 + dt * (mux[:, None] + muy[None, :])
        c = sfft.dst(sfft.dst(ui, type=1, norm="ortho", axis=0), type=2, norm="ortho", axis=1)
        c /= denom
        out.u[1:-1, :] = sfft.idst(
            sfft.idst(c, type=2, norm="ortho", axis=1), type=1, norm="ortho", axis=0
        )

    vi = rhs.v[:, 1:-1]
    if vi.size:
        mux = dirichlet_cell_mu_1d(dom.cells_x, dom.hx)
        muy = dirichlet_face_mu_1d(dom.cells_y, dom.hy)
        denom = 1.0 + dt * (mux[:, None] + muy[None, :])
        c = sfft.dst(sfft.dst(vi, type=2, norm="ortho", axis=0), type=1, norm="ortho", axis=1)
        c /= denom
        out.v[:, 1:-1] = sfft.idst(
            sfft.idst(c, type=1, norm="ortho", axis=1), type=2, norm="ortho", axis=0
        )
    return out


# ----------------------------------------------------------------------------
# Dense Stokes eigenbasis

STOKES_MAX_DOF = 8192


def velocity_dof_count(domain: DomainSpec) -> int:
    nx, ny = domain.cells_x, domain.cells_y
    return (nx - 1) * ny + nx * (ny - 1)


def pack_velocity(vel: VectorField) -> np.ndarray:
    return np.concatenate([vel.u[1:-1, :].ravel(), vel.v[:, 1:-1].ravel()])


def unpack_velocity(domain: DomainSpec, dof: np.ndarray) -> VectorField:
    nx, ny = domain.cells_x, domain.cells_y
    nu = (nx - 1) * ny
    out = VectorField.zeros(domain)
    out.u[1:-1, :] = dof[:nu].reshape(nx - 1, ny)
    out.v[:, 1:-1] = dof[nu:].reshape(nx, ny - 1)
    return out


def stokes_basis(domain: DomainSpec, max_dof: int = STOKES_MAX_DOF) -> SpectralBasis:
    """Dense eigenbasis of A = -P Delta on discrete divergence-free fields.

    The kernel of the MAC divergence is spanned exactly by curls of interior
    nodal stream functions; orthonormalizing those and restricting -Delta
    gives a symmetric positive definite matrix to diagonalize.  Gated by
    grid size: dense linear algebra only.
    """
    from . import operators  # local import: operators pulls in this module

    n_dof = velocity_dof_count(domain)
    if n_dof > max_dof:
        raise ValueError(
            f"grid has {n_dof} velocity unknowns > {max_dof}; the dense Stokes "
            "path is infeasible here - disable the Stokes diagnostics"
        )
    nx, ny = domain.cells_x, domain.cells_y
    if nx < 2 or ny < 2:
        raise ValueError("Stokes basis needs at least 2 cells per direction")
    n_nodes = (nx - 1) * (ny - 1)

    # Curl columns: one per interior node.
    C = np.zeros((n_dof, n_nodes))
    nu = (nx - 1) * ny
    col = 0
    for i in range(1, nx):
        for j in range(1, ny):
            # u[i, j-1] += 1/hy ; u[i, j] -= 1/hy  (interior u index (i-1, col j))
            C[(i - 1) * ny + (j - 1), col] += 1.0 / domain.hy
            C[(i - 1) * ny + j, col] -= 1.0 / domain.hy
            # v[i-1, j] += -(-1/hx)? : v[a,b] = -(psi[a+1,b]-psi[a,b])/hx
            C[nu + (i - 1) * (ny - 1) + (j - 1), col] -= 1.0 / domain.hx
            C[nu + i * (ny - 1) + (j - 1), col] += 1.0 / domain.hx
            col += 1

    Z, _ = scipy.linalg.qr(C, mode="economic")

    # Restrict -Delta to the subspace: LZ column by column via the stencil.
    LZ = np.empty_like(Z)
    for k in range(Z.shape[1]):
        w = unpack_velocity(domain, Z[:, k])
        LZ[:, k] = pack_velocity(operators.laplacian_vector(w))
    A = -(Z.T @ LZ)
    A = 0.5 * (A + A.T)
    lam, V = scipy.linalg.eigh(A)
    if lam[0] <= 0:
        raise ArithmeticError(f"Stokes spectrum not positive: min eigenvalue {lam[0]}")
    modes = (Z @ V) / np.sqrt(domain.cell_area)  # discrete-orthonormal columns
    return SpectralBasis(domain, "dense-stokes", lam, modes)


def stokes_coefficients(basis: SpectralBasis, vel: VectorField) -> np.ndarray:
    """Expansion coefficients of the divergence-free part of vel."""
    if basis.kind != "dense-stokes":
        raise ValueError("stokes_coefficients expects a dense-stokes basis")
    if basis.domain != vel.domain:
        raise FieldError("basis and field domains differ")
    return basis.domain.cell_area * (basis.modes.T @ pack_velocity(vel))


def stokes_fractional_apply(basis: SpectralBasis, alpha: float, vel: VectorField) -> VectorField:
    """A^alpha applied to the divergence-free part of vel."""
    c = stokes_coefficients(basis, vel)
    dof = basis.modes @ ((basis.lam ** alpha) * c)
    return unpack_velocity(basis.domain, dof)


def stokes_fractional_norm_sq(basis: SpectralBasis, alpha: float, vel: VectorField) -> float:
    """||A^alpha P vel||_2^2 from the expansion coefficients."""
    c = stokes_coefficients(basis, vel)
    return float(((basis.lam ** (2.0 * alpha)) * c * c).sum())

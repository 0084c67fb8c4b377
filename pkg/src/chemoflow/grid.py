"""Rectangular cell-centered / MAC-staggered grid containers and quadrature.

Scalars live at cell centers of an ``cells_x x cells_y`` grid over
``[0, length_x] x [0, length_y]``; index ``[i, j]`` sits at
``((i + 1/2) hx, (j + 1/2) hy)``.  Velocities are staggered: the x-component
``u`` on x-normal faces (shape ``(cells_x + 1, cells_y)``), the y-component
``v`` on y-normal faces (shape ``(cells_x, cells_y + 1)``).  Boundary-normal
faces are pinned to zero (no-penetration / no-slip walls).

All integrals are midpoint quadrature: cell value times cell area.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np


class FieldError(ValueError):
    """Invalid field data (shape mismatch, NaN/Inf, broken boundary)."""


@dataclass(frozen=True)
class DomainSpec:
    """Axis-aligned rectangle with a uniform cell partition."""

    length_x: float
    length_y: float
    cells_x: int
    cells_y: int

    def __post_init__(self):
        if not (self.length_x > 0 and np.isfinite(self.length_x)):
            raise FieldError(f"length_x must be positive and finite, got {self.length_x}")
        if not (self.length_y > 0 and np.isfinite(self.length_y)):
            raise FieldError(f"length_y must be positive and finite, got {self.length_y}")
        if self.cells_x < 1 or self.cells_y < 1:
            raise FieldError("cell counts must be positive integers")

    @property
    def hx(self) -> float:
        return self.length_x / self.cells_x

    @property
    def hy(self) -> float:
        return self.length_y / self.cells_y

    def area(self) -> float:
        return self.length_x * self.length_y

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    def cell_centers(self):
        """(X, Y) meshgrids of cell-center coordinates, shape (cells_x, cells_y)."""
        x = (np.arange(self.cells_x) + 0.5) * self.hx
        y = (np.arange(self.cells_y) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def face_coords_x(self):
        """(X, Y) meshgrids of x-face coordinates, shape (cells_x+1, cells_y)."""
        x = np.arange(self.cells_x + 1) * self.hx
        y = (np.arange(self.cells_y) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def face_coords_y(self):
        """(X, Y) meshgrids of y-face coordinates, shape (cells_x, cells_y+1)."""
        x = (np.arange(self.cells_x) + 0.5) * self.hx
        y = np.arange(self.cells_y + 1) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def node_coords(self):
        """(X, Y) meshgrids of cell-corner coordinates, shape (cells_x+1, cells_y+1)."""
        x = np.arange(self.cells_x + 1) * self.hx
        y = np.arange(self.cells_y + 1) * self.hy
        return np.meshgrid(x, y, indexing="ij")


@dataclass
class ScalarField:
    """Cell-centered grid function (cell density, signal, test function, ...)."""

    domain: DomainSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        shape = (self.domain.cells_x, self.domain.cells_y)
        if self.values.shape != shape:
            raise FieldError(f"scalar values shape {self.values.shape} != grid {shape}")
        if not np.all(np.isfinite(self.values)):
            raise FieldError("scalar field contains NaN or Inf")

    @classmethod
    def zeros(cls, domain: DomainSpec) -> "ScalarField":
        return cls(domain, np.zeros((domain.cells_x, domain.cells_y)))

    @classmethod
    def constant(cls, domain: DomainSpec, value: float) -> "ScalarField":
        return cls(domain, np.full((domain.cells_x, domain.cells_y), float(value)))

    @classmethod
    def from_function(cls, domain: DomainSpec, fn) -> "ScalarField":
        X, Y = domain.cell_centers()
        return cls(domain, np.asarray(fn(X, Y), dtype=np.float64))

    def copy(self) -> "ScalarField":
        return ScalarField(self.domain, self.values.copy())

    def check(self) -> None:
        if not np.all(np.isfinite(self.values)):
            raise FieldError("scalar field contains NaN or Inf")


@dataclass
class VectorField:
    """MAC-staggered velocity; boundary-normal faces are exactly zero."""

    domain: DomainSpec
    u: np.ndarray = field(repr=False)  # x-faces, (cells_x+1, cells_y)
    v: np.ndarray = field(repr=False)  # y-faces, (cells_x, cells_y+1)

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        nx, ny = self.domain.cells_x, self.domain.cells_y
        if self.u.shape != (nx + 1, ny):
            raise FieldError(f"u faces shape {self.u.shape} != {(nx + 1, ny)}")
        if self.v.shape != (nx, ny + 1):
            raise FieldError(f"v faces shape {self.v.shape} != {(nx, ny + 1)}")
        self.check()

    @classmethod
    def zeros(cls, domain: DomainSpec) -> "VectorField":
        nx, ny = domain.cells_x, domain.cells_y
        return cls(domain, np.zeros((nx + 1, ny)), np.zeros((nx, ny + 1)))

    @classmethod
    def from_stream_function(cls, domain: DomainSpec, psi: np.ndarray) -> "VectorField":
        """Discrete curl of a nodal stream function: exactly divergence-free.

        ``psi`` has shape (cells_x+1, cells_y+1); u = d(psi)/dy, v = -d(psi)/dx.
        Normal boundary faces vanish iff psi is constant along each wall.
        """
        psi = np.asarray(psi, dtype=np.float64)
        nx, ny = domain.cells_x, domain.cells_y
        if psi.shape != (nx + 1, ny + 1):
            raise FieldError(f"stream function shape {psi.shape} != {(nx + 1, ny + 1)}")
        u = (psi[:, 1:] - psi[:, :-1]) / domain.hy
        v = -(psi[1:, :] - psi[:-1, :]) / domain.hx
        return cls(domain, u, v)

    def copy(self) -> "VectorField":
        return VectorField(self.domain, self.u.copy(), self.v.copy())

    def check(self) -> None:
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise FieldError("vector field contains NaN or Inf")
        if np.any(self.u[0, :] != 0.0) or np.any(self.u[-1, :] != 0.0):
            raise FieldError("u normal boundary faces must be exactly 0")
        if np.any(self.v[:, 0] != 0.0) or np.any(self.v[:, -1] != 0.0):
            raise FieldError("v normal boundary faces must be exactly 0")

    def enforce_noslip(self) -> None:
        """Pin boundary-normal faces to zero in place."""
        self.u[0, :] = 0.0
        self.u[-1, :] = 0.0
        self.v[:, 0] = 0.0
        self.v[:, -1] = 0.0


def same_domain(*fields) -> DomainSpec:
    dom = fields[0].domain
    for f in fields[1:]:
        if f.domain != dom:
            raise FieldError("fields live on different domains")
    return dom


def integrate(f: ScalarField) -> float:
    """Midpoint-rule integral over the rectangle; exact for cellwise-constant data."""
    return float(f.domain.cell_area * f.values.sum())


def inner(f: ScalarField, g: ScalarField) -> float:
    """Discrete L2 inner product of two cell fields."""
    same_domain(f, g)
    return float(f.domain.cell_area * np.vdot(f.values, g.values).real)


def inner_vec(a: VectorField, b: VectorField) -> float:
    """Discrete L2 inner product of two MAC fields (all faces, uniform weight)."""
    same_domain(a, b)
    w = a.domain.cell_area
    return float(w * (np.vdot(a.u, b.u).real + np.vdot(a.v, b.v).real))


def norm_vec(a: VectorField) -> float:
    return float(np.sqrt(max(inner_vec(a, a), 0.0)))


def lp_norm(f: ScalarField, p: float) -> float:
    """(integral |f|^p)^(1/p); p = inf gives the max norm.  Rejects p < 1."""
    if p != np.inf and p < 1:
        raise ValueError(f"lp_norm requires p >= 1 (or inf), got {p}")
    a = np.abs(f.values)
    if p == np.inf:
        return float(a.max()) if a.size else 0.0
    return float((f.domain.cell_area * (a ** p).sum()) ** (1.0 / p))


def speed_interp_centers(vel: VectorField):
    """Velocity components averaged to cell centers, shape (cells_x, cells_y)."""
    uc = 0.5 * (vel.u[:-1, :] + vel.u[1:, :])
    vc = 0.5 * (vel.v[:, :-1] + vel.v[:, 1:])
    return uc, vc


# ----------------------------------------------------------------------------
# Flat-CSV scalar serialization (debugging aid)

_CSV_HEADER = "# scalar"


def scalar_to_csv(f: ScalarField) -> str:
    dom = f.domain
    buf = io.StringIO()
    buf.write(f"{_CSV_HEADER} {dom.cells_x} {dom.cells_y} {dom.hx!r} {dom.hy!r}\n")
    for i in range(dom.cells_x):
        buf.write(",".join(repr(float(x)) for x in f.values[i, :]) + "\n")
    return buf.getvalue()


def scalar_from_csv(text: str) -> ScalarField:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    if len(head) != 6 or head[0] != "#" or head[1] != "scalar":
        raise FieldError(f"bad scalar CSV header: {lines[0]!r}")
    nx, ny = int(head[2]), int(head[3])
    hx, hy = float(head[4]), float(head[5])
    dom = DomainSpec(hx * nx, hy * ny, nx, ny)
    vals = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    if vals.shape != (nx, ny):
        raise FieldError(f"scalar CSV body shape {vals.shape} != {(nx, ny)}")
    return ScalarField(dom, vals)

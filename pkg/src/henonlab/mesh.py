"""Polar finite-volume discretization of the disc reduced to a 2*pi/n sector.

Grid values live on an ``(N_r + 1, N_theta)`` array: row 0 is the pole
(one shared degree of freedom, replicated across columns), rows
``1..N_r-1`` are interior rings and row ``N_r`` is the Dirichlet ring
``r = 1``.  Column ``j`` sits at angle ``j * angular_step``; the sector is
periodic with period ``2*pi/n``, which is exactly membership in the
rotation-invariant subspace.

All integrals returned here are over the *full* disc.  A ring node stands
for ``n`` rotated copies, the pole for a single point.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .constants import ConfigurationError

GRADINGS = ("uniform", "boundary", "log")

MIN_RADIAL = 16
MIN_ANGULAR = 8
DEFAULT_R_MIN = 1e-6


@dataclass(frozen=True, eq=False)
class SectorMesh:
    n: int
    N_r: int
    N_theta: int
    grading: str
    r: np.ndarray  # node radii, r[0] = 0, r[-1] = 1
    faces: np.ndarray  # faces[i] = r_{i+1/2}, i = 0..N_r-1
    weight_alpha: float = 0.0
    r_min: float | None = None

    # ---- geometry -------------------------------------------------------
    @property
    def angular_step(self) -> float:
        return 2.0 * math.pi / (self.n * self.N_theta)

    @property
    def sector_angle(self) -> float:
        return 2.0 * math.pi / self.n

    @property
    def radial_nodes(self) -> np.ndarray:
        return self.r[1:]

    @property
    def theta(self) -> np.ndarray:
        return np.arange(self.N_theta) * self.angular_step

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N_r + 1, self.N_theta)

    @property
    def ndof(self) -> int:
        return 1 + (self.N_r - 1) * self.N_theta

    def grid_coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Broadcast (r, theta) arrays of the grid shape."""
        rr, tt = np.meshgrid(self.r, self.theta, indexing="ij")
        return rr, tt

    def same_as(self, other: "SectorMesh") -> bool:
        return other is self or (
            self.n == other.n and self.N_theta == other.N_theta
            and self.weight_alpha == other.weight_alpha
            and np.array_equal(self.r, other.r) and np.array_equal(self.faces, other.faces))

    def with_alpha(self, alpha: float) -> "SectorMesh":
        return SectorMesh(self.n, self.N_r, self.N_theta, self.grading, self.r, self.faces, float(alpha),
                          self.r_min)

    # ---- vector <-> grid ------------------------------------------------
    def to_vector(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != self.shape:
            raise ValueError(f"grid shape {values.shape} does not match mesh {self.shape}")
        return np.concatenate(([values[0, 0]], values[1:-1].ravel()))

    def to_grid(self, vector: np.ndarray, boundary: np.ndarray | float = 0.0) -> np.ndarray:
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (self.ndof,):
            raise ValueError(f"vector of length {vector.shape} does not match mesh ndof {self.ndof}")
        out = np.empty(self.shape)
        out[0] = vector[0]
        out[1:-1] = vector[1:].reshape(self.N_r - 1, self.N_theta)
        out[-1] = boundary
        return out

    # ---- cell measures ----------------------------------------------------
    def _cell_integral(self, power: float) -> np.ndarray:
        """Per-row integral of r**power * r dr over each radial cell (row 0 is the pole disc)."""
        f = self.faces
        e = power + 2.0
        lower = np.concatenate(([0.0], f))
        upper = np.concatenate((f, [1.0]))
        return (upper**e - lower**e) / e

    @cached_property
    def row_area(self) -> np.ndarray:
        """Full-disc area attached to one grid node of each row."""
        return self._row_measure(0.0)

    @cached_property
    def row_weight(self) -> np.ndarray:
        """Full-disc integral of |x|**alpha attached to one grid node of each row."""
        return self._row_measure(self.weight_alpha)

    def _row_measure(self, power: float) -> np.ndarray:
        c = self._cell_integral(power)
        out = c * self.angular_step * self.n
        out[0] = 2.0 * math.pi * c[0]  # pole disc, counted once
        return out

    def grid_measure(self, weighted: bool) -> np.ndarray:
        """Per-grid-node measure; the pole total is split over its replicated columns."""
        row = self.row_weight if weighted else self.row_area
        out = np.repeat(row[:, None], self.N_theta, axis=1)
        out[0] = row[0] / self.N_theta
        return out

    @cached_property
    def mass(self) -> np.ndarray:
        """Lumped mass (cell areas) per degree of freedom."""
        return self._dof_from_rows(self.row_area)

    @cached_property
    def weight(self) -> np.ndarray:
        """Cell integrals of |x|**alpha per degree of freedom."""
        return self._dof_from_rows(self.row_weight)

    def _dof_from_rows(self, row: np.ndarray) -> np.ndarray:
        return np.concatenate(([row[0]], np.repeat(row[1:-1], self.N_theta)))

    @cached_property
    def dof_radius(self) -> np.ndarray:
        return self._dof_from_rows(self.r)

    # ---- stiffness ------------------------------------------------------------
    @cached_property
    def edge_weights(self) -> tuple[np.ndarray, np.ndarray, float]:
        """(radial weights per row i -> i+1, angular weights per ring, pole weight).

        Weights are for one sector edge; full-disc energies multiply by n.
        """
        dth = self.angular_step
        r, f = self.r, self.faces
        radial = np.empty(self.N_r)
        radial[0] = dth * f[0] / r[1]
        radial[1:] = dth * f[1:] / np.diff(r[1:])
        angular = np.zeros(self.N_r + 1)
        angular[1:-1] = (f[1:] - f[:-1]) / (r[1:-1] * dth)
        return radial, angular, radial[0]

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        """Symmetric positive definite Dirichlet form, full-disc normalization."""
        radial, angular, _ = self.edge_weights
        Nt, Nr, n = self.N_theta, self.N_r, self.n
        rows, cols, vals = [], [], []
        diag = np.zeros(self.ndof)

        def ring_index(i):
            return 1 + (i - 1) * Nt + np.arange(Nt)

        def add_edge(a, b, w):
            rows.extend((a, b))
            cols.extend((b, a))
            vals.extend((-w, -w))
            np.add.at(diag, a, w)
            np.add.at(diag, b, w)

        # pole to first ring
        if Nr >= 2:
            add_edge(np.zeros(Nt, dtype=int), ring_index(1), np.full(Nt, n * radial[0]))
        for i in range(1, Nr - 1):
            add_edge(ring_index(i), ring_index(i + 1), np.full(Nt, n * radial[i]))
        for i in range(1, Nr):
            idx = ring_index(i)
            add_edge(idx, np.roll(idx, -1), np.full(Nt, n * angular[i]))
            if i == Nr - 1:
                diag[idx] += n * radial[Nr - 1]  # Dirichlet neighbour at r = 1
        rows = np.concatenate(rows + [np.arange(self.ndof)])
        cols = np.concatenate(cols + [np.arange(self.ndof)])
        vals = np.concatenate(vals + [diag])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.ndof, self.ndof))

    @cached_property
    def ring_blocks(self) -> list[np.ndarray]:
        """Index sets of the pole and each ring (block tridiagonal structure)."""
        blocks = [np.array([0])]
        for i in range(1, self.N_r):
            blocks.append(1 + (i - 1) * self.N_theta + np.arange(self.N_theta))
        return blocks

    @cached_property
    def factorized_stiffness(self):
        from scipy.sparse.linalg import factorized
        return factorized(self.stiffness.tocsc())


def _radial_layout(N_r: int, grading: str, r_min: float | None):
    if grading == "uniform":
        xi = np.arange(N_r + 1) / N_r
        r = xi.copy()
        faces = (np.arange(N_r) + 0.5) / N_r
    elif grading == "boundary":
        xi = np.arange(N_r + 1) / N_r
        r = np.sin(0.5 * math.pi * xi)
        faces = np.sin(0.5 * math.pi * (np.arange(N_r) + 0.5) / N_r)
    elif grading == "log":
        if r_min is None:
            r_min = DEFAULT_R_MIN
        if not 0 < r_min < 1:
            raise ConfigurationError("r_min must lie in (0, 1)")
        s = np.linspace(math.log(r_min), 0.0, N_r)
        ds = s[1] - s[0]
        r = np.concatenate(([0.0], np.exp(s)))
        faces = np.concatenate(([math.exp(s[0] - 0.5 * ds)], np.exp(0.5 * (s[:-1] + s[1:]))))
    else:
        raise ConfigurationError(f"unknown grading {grading!r}; choose from {GRADINGS}")
    r[-1] = 1.0
    return r, faces


def build_mesh(n: int, N_r: int, N_theta: int, grading: str = "uniform",
               alpha: float = 0.0, r_min: float | None = None) -> SectorMesh:
    """Sector mesh of opening 2*pi/n with N_r radial intervals and N_theta angular cells.

    ``grading='log'`` places the rings geometrically between ``r_min`` and 1,
    which is what resolves the concentration of large-p solutions at the
    origin.
    """
    if int(n) != n or n < 1:
        raise ConfigurationError("n must be a positive integer")
    if N_r < MIN_RADIAL or N_theta < MIN_ANGULAR:
        raise ConfigurationError(
            f"resolution below minimum: need N_r >= {MIN_RADIAL}, N_theta >= {MIN_ANGULAR}")
    if N_theta % 2:
        raise ConfigurationError("N_theta must be even so the bisector is a grid line")
    if alpha < 0:
        raise ConfigurationError("alpha must be >= 0")
    r, faces = _radial_layout(int(N_r), grading, r_min)
    return SectorMesh(int(n), int(N_r), int(N_theta), grading, r, faces, float(alpha),
                      float(r[1]) if grading == "log" else None)


def full_disc_mesh(mesh: SectorMesh) -> SectorMesh:
    """The n = 1 mesh carrying n*N_theta columns and the same rings."""
    return SectorMesh(1, mesh.N_r, mesh.N_theta * mesh.n, mesh.grading, mesh.r, mesh.faces,
                      mesh.weight_alpha, mesh.r_min)


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

class Field:
    """Grid function on a SectorMesh (see module docstring for the layout)."""

    __slots__ = ("mesh", "values")

    def __init__(self, mesh: SectorMesh, values):
        values = np.array(values, dtype=float)
        if values.shape != mesh.shape:
            raise ValueError(f"values of shape {values.shape} do not fit mesh {mesh.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        if np.ptp(values[0]) != 0.0:
            raise ValueError("pole row must be constant")
        self.mesh = mesh
        self.values = values

    @classmethod
    def from_vector(cls, mesh: SectorMesh, vector) -> "Field":
        return cls(mesh, mesh.to_grid(vector))

    @classmethod
    def zeros(cls, mesh: SectorMesh) -> "Field":
        return cls(mesh, np.zeros(mesh.shape))

    @classmethod
    def from_function(cls, mesh: SectorMesh, func, dirichlet: bool = True) -> "Field":
        """Sample ``func(r, theta)`` on the grid; the pole takes the value at theta = 0."""
        rr, tt = mesh.grid_coordinates()
        values = np.asarray(func(rr, tt), dtype=float) * np.ones(mesh.shape)
        values[0] = values[0, 0]
        if dirichlet:
            values[-1] = 0.0
        return cls(mesh, values)

    @property
    def vector(self) -> np.ndarray:
        return self.mesh.to_vector(self.values)

    @property
    def satisfies_dirichlet(self) -> bool:
        return bool(np.all(self.values[-1] == 0.0))

    def copy(self) -> "Field":
        return Field(self.mesh, self.values.copy())

    def __neg__(self):
        return Field(self.mesh, -self.values)

    def __mul__(self, c):
        return Field(self.mesh, self.values * float(c))

    __rmul__ = __mul__


def _vector(mesh: SectorMesh, field) -> np.ndarray:
    if isinstance(field, Field):
        if not field.mesh.same_as(mesh):
            raise ValueError("field belongs to a different mesh")
        return field.vector
    vec = np.asarray(field, dtype=float)
    if vec.shape != (mesh.ndof,):
        raise ValueError("array does not match mesh degrees of freedom")
    return vec


def _grid(mesh: SectorMesh, field) -> np.ndarray:
    if isinstance(field, Field):
        if not field.mesh.same_as(mesh):
            raise ValueError("field belongs to a different mesh")
        return field.values
    arr = np.asarray(field, dtype=float)
    if arr.shape == mesh.shape:
        return arr
    return mesh.to_grid(arr)


# ---------------------------------------------------------------------------
# integrals
# ---------------------------------------------------------------------------

def dirichlet_energy(mesh: SectorMesh, field) -> float:
    """Full-disc Dirichlet integral of |grad u|^2."""
    u = _vector(mesh, field)
    return float(u @ (mesh.stiffness @ u))


def log_weighted_integral(mesh: SectorMesh, field, q: float) -> float:
    """log of the full-disc integral of |x|^alpha |u|^q, accumulated relative to max|u|."""
    if q < 1:
        raise ValueError("q must be >= 1")
    values = np.abs(_grid(mesh, field))
    scale = values.max()
    if scale == 0.0:
        return -math.inf
    total = float(np.sum(mesh.grid_measure(True) * (values / scale) ** q))
    if total == 0.0:
        return -math.inf
    return q * math.log(scale) + math.log(total)


def weighted_integral(mesh: SectorMesh, field, q: float) -> float:
    """Full-disc integral of |x|^alpha |u|^q (boundary row included, for relaxed tests)."""
    return math.exp(log_weighted_integral(mesh, field, q))


def nonlinear_terms(mesh: SectorMesh, u: np.ndarray, p: float) -> tuple[np.ndarray, float]:
    """(W |u|^(p-1) u per dof, sum W |u|^(p+1)) computed without overflow for |u| <= 1e100."""
    au = np.abs(u)
    scale = au.max()
    if scale == 0.0:
        return np.zeros_like(u), 0.0
    ratio = au / scale
    pw = ratio ** (p - 1.0)
    factor = scale ** (p - 1.0)
    force = mesh.weight * pw * u * factor
    integral = float(np.sum(mesh.weight * pw * ratio**2)) * factor * scale**2
    return force, integral


def energy(mesh: SectorMesh, field, p: float) -> float:
    """E_p(u) = 1/2 int |grad u|^2 - 1/(p+1) int |x|^alpha |u|^(p+1)."""
    u = _vector(mesh, field)
    _, nl = nonlinear_terms(mesh, u, p)
    return 0.5 * dirichlet_energy(mesh, u) - nl / (p + 1.0)


def gradient(mesh: SectorMesh, u: np.ndarray, p: float) -> np.ndarray:
    """Euclidean gradient of the discrete energy, K u - W |u|^(p-1) u."""
    force, _ = nonlinear_terms(mesh, u, p)
    return mesh.stiffness @ u - force


def pde_residual(mesh: SectorMesh, field, p: float) -> float:
    """L^2 norm of -Lap u - |x|^alpha |u|^(p-1) u divided by the H^1_0 norm of u."""
    u = _vector(mesh, field)
    h1 = dirichlet_energy(mesh, u)
    if h1 == 0.0:
        return 0.0
    g = gradient(mesh, u, p)
    return math.sqrt(float(np.sum(g * g / mesh.mass))) / math.sqrt(h1)


def dual_residual(mesh: SectorMesh, field, p: float) -> float:
    """H^-1 norm of the residual relative to the H^1_0 norm (mesh independent)."""
    u = _vector(mesh, field)
    h1 = dirichlet_energy(mesh, u)
    if h1 == 0.0:
        return 0.0
    g = gradient(mesh, u, p)
    return math.sqrt(max(float(g @ mesh.factorized_stiffness(g)), 0.0) / h1)


def inner(mesh: SectorMesh, a, b) -> float:
    """Lumped L^2 inner product over the full disc."""
    return float(np.sum(mesh.mass * _vector(mesh, a) * _vector(mesh, b)))


# ---------------------------------------------------------------------------
# symmetry actions
# ---------------------------------------------------------------------------

def unfold_full_disc(mesh: SectorMesh, field) -> Field:
    """Replicate the sector n times; the result lives on ``full_disc_mesh(mesh)``."""
    values = _grid(mesh, field)
    full = full_disc_mesh(mesh)
    return Field(full, np.tile(values, (1, mesh.n)))


def angular_shift(field: Field, k_cells: int) -> Field:
    """Rotate by ``k_cells * angular_step``: u_new(theta) = u(theta - k*dtheta)."""
    return Field(field.mesh, np.roll(field.values, int(k_cells), axis=1))


def reflect_bisector(field: Field) -> Field:
    """Reflection theta -> 2*pi/n - theta (column j -> -j mod N_theta)."""
    idx = (-np.arange(field.mesh.N_theta)) % field.mesh.N_theta
    return Field(field.mesh, field.values[:, idx])


# ---------------------------------------------------------------------------
# CSV dumps
# ---------------------------------------------------------------------------

def mesh_metadata(mesh: SectorMesh) -> dict:
    return {
        "n": mesh.n, "N_r": mesh.N_r, "N_theta": mesh.N_theta, "alpha": mesh.weight_alpha,
        "grading": mesh.grading, "r_min": mesh.r_min,
    }


def write_field_csv(path, field: Field, **extra) -> Path:
    """Write ``r,theta,value`` rows (17 significant digits) plus a JSON sidecar."""
    path = Path(path)
    rr, tt = field.mesh.grid_coordinates()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "theta", "value"])
        for r, t, v in zip(rr.ravel(), tt.ravel(), field.values.ravel()):
            w.writerow([f"{r:.17g}", f"{t:.17g}", f"{v:.17g}"])
    meta = mesh_metadata(field.mesh)
    meta.update(extra)
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True))
    return path


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_suffix(path.suffix + ".json")


def read_field_csv(path) -> tuple[Field, dict]:
    """Inverse of :func:`write_field_csv`; rebuilds the mesh from the sidecar."""
    path = Path(path)
    meta = json.loads(sidecar_path(path).read_text())
    mesh = build_mesh(meta["n"], meta["N_r"], meta["N_theta"], meta.get("grading", "uniform"),
                      alpha=meta.get("alpha", 0.0), r_min=meta.get("r_min"))
    with path.open() as fh:
        rows = list(csv.reader(fh))
    if rows[0] != ["r", "theta", "value"]:
        raise ValueError(f"{path}: unexpected header {rows[0]}")
    values = np.array([float(row[2]) for row in rows[1:]])
    return Field(mesh, values.reshape(mesh.shape)), meta

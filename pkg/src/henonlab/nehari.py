"""Minimization of the energy over the discrete nodal Nehari set.

A sign-changing grid function ``u = u+ + u-`` lies on the nodal Nehari set
when the energy derivative vanishes in the directions ``u+`` and ``u-``.  In
the continuum the two parts do not interact and can be scaled separately.
On the grid the Dirichlet form couples them along the edges that cross the
nodal line, so :func:`nodal_nehari_project` solves the small coupled system
for the two scale factors instead.  This is what makes the constrained
minimizer an exact critical point of the discrete energy.

The descent is an H^1 (Sobolev) gradient flow with Armijo backtracking and
reprojection after each step.  Once the dual residual is small a few Newton
steps on the full Euler-Lagrange system finish the solve.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .constants import ConfigurationError, ProblemParams
from .mesh import (
    Field,
    SectorMesh,
    _vector,
    dirichlet_energy,
    dual_residual,
    nonlinear_terms,
    pde_residual,
)

log = logging.getLogger(__name__)

INIT_KINDS = ("radial-perturbed", "two-bump", "annular-split")


class ProjectionError(ValueError):
    """The field cannot be placed on the (nodal) Nehari set."""


@dataclass(frozen=True)
class SolveConfig:
    init_kind: str = "radial-perturbed"
    perturbation_amplitude: float = 0.2
    step_size: float = 1.0
    max_iterations: int = 2000
    residual_tolerance: float = 1e-8
    nehari_tolerance: float = 1e-10
    random_seed: int = 0
    restarts: int = 1
    newton_switch: float = 1e-3
    newton_max: int = 30
    cycle_kinds: bool = True
    floor_aware: bool = False

    def __post_init__(self):
        if self.init_kind not in INIT_KINDS:
            raise ConfigurationError(f"unknown init kind {self.init_kind!r}; choose from {INIT_KINDS}")
        for name in ("step_size", "residual_tolerance", "nehari_tolerance"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be >= 1")
        if self.restarts < 1:
            raise ConfigurationError("restarts must be >= 1")
        if self.perturbation_amplitude < 0:
            raise ConfigurationError("perturbation_amplitude must be >= 0")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Solution:
    field: Field
    params: ProblemParams
    energy: float
    scaled_energy: float
    residual: float
    nehari_defect_plus: float
    nehari_defect_minus: float
    iterations_used: int
    init_kind: str
    converged: bool
    seed: int = 0
    dual_residual: float = math.nan
    energy_history: list = field(default_factory=list, repr=False)
    basins: list = field(default_factory=list, repr=False)
    message: str = ""
    multi_basin: bool = False
    residual_floor: float = math.nan

    @property
    def changes_sign(self) -> bool:
        v = self.field.values
        return bool(v.max() > 0 and v.min() < 0)

    def record(self) -> dict:
        return {
            "alpha": self.params.alpha, "p": self.params.p, "n": self.params.n,
            "energy": self.energy, "p_energy": self.scaled_energy,
            "residual": self.residual, "dual_residual": self.dual_residual,
            "residual_floor": self.residual_floor,
            "nehari_defect_plus": self.nehari_defect_plus,
            "nehari_defect_minus": self.nehari_defect_minus,
            "iterations": self.iterations_used, "init_kind": self.init_kind,
            "seed": self.seed, "converged": self.converged,
            "changes_sign": self.changes_sign, "message": self.message,
            "basins": self.basins, "multi_basin": self.multi_basin,
        }


# ---------------------------------------------------------------------------
# Nehari projections
# ---------------------------------------------------------------------------

def _log_nonlinear(mesh: SectorMesh, u: np.ndarray, p: float) -> float:
    """log sum W |u|^(p+1), evaluated relative to max |u|."""
    au = np.abs(u)
    m = au.max()
    if m == 0.0:
        return -math.inf
    s = float(np.sum(mesh.weight * (au / m) ** (p + 1.0)))
    return -math.inf if s == 0.0 else (p + 1.0) * math.log(m) + math.log(s)


def nehari_factor(mesh: SectorMesh, field, p: float) -> float:
    """sigma with sigma * u on the Nehari set: (int|grad u|^2 / int|x|^a|u|^(p+1))^(1/(p-1))."""
    u = _vector(mesh, field)
    if not np.any(u):
        raise ProjectionError("cannot project the zero field")
    a = dirichlet_energy(mesh, u)
    lb = _log_nonlinear(mesh, u, p)
    if lb == -math.inf:
        raise ProjectionError("weighted integral vanishes on the grid")
    return math.exp((math.log(a) - lb) / (p - 1.0))


def nehari_scale(mesh: SectorMesh, field, p: float):
    """Scale ``field`` onto the Nehari set of the energy.

    Returns the same type as ``field`` (Field or dof vector).
    """
    sigma = nehari_factor(mesh, field, p)
    if isinstance(field, Field):
        return field * sigma
    return sigma * np.asarray(field, dtype=float)


def nehari_defect(mesh: SectorMesh, field, p: float) -> float:
    """|int|grad u|^2 - int|x|^a|u|^(p+1)| relative to the Dirichlet integral."""
    u = _vector(mesh, field)
    a = dirichlet_energy(mesh, u)
    b = math.exp(_log_nonlinear(mesh, u, p))
    return abs(a - b) / a


def split_signs(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.where(u > 0, u, 0.0), np.where(u < 0, u, 0.0)


def nodal_forms(mesh: SectorMesh, u: np.ndarray, p: float) -> dict:
    """Quadratic and nonlinear pieces of the energy split by sign."""
    up, um = split_signs(u)
    K = mesh.stiffness
    Kup = K @ up
    Kum = K @ um
    return {
        "A": float(up @ Kup), "B": float(um @ Kum), "C": float(up @ Kum),
        "logP": _log_nonlinear(mesh, up, p), "logN": _log_nonlinear(mesh, um, p),
    }


def _solve_scales(forms: dict, p: float) -> tuple[float, float]:
    """Solve s A + t C = s^p P,  t B + s C = t^p N for log s, log t (Newton)."""
    A, B, C = forms["A"], forms["B"], forms["C"]
    lP, lN = forms["logP"], forms["logN"]
    q = p - 1.0
    # independent scaling as the starting point
    x = (math.log(A) - lP) / q
    y = (math.log(B) - lN) / q
    if C == 0.0:
        return x, y
    for _ in range(100):
        ex = math.exp(y - x) * C
        ey = math.exp(x - y) * C
        F1 = q * x + lP - math.log(A + ex)
        F2 = q * y + lN - math.log(B + ey)
        d1 = ex / (A + ex)
        d2 = ey / (B + ey)
        J = np.array([[q + d1, -d1], [-d2, q + d2]])
        step = np.linalg.solve(J, [-F1, -F2])
        x += step[0]
        y += step[1]
        if max(abs(step[0]), abs(step[1])) < 1e-16 * max(1.0, abs(x), abs(y)):
            break
    return x, y


def nodal_nehari_project(mesh: SectorMesh, field, p: float):
    """Place a sign-changing field on the discrete nodal Nehari set.

    Finds ``s, t > 0`` with ``E'(s u+ + t u-) u+ = 0`` and ``E'(s u+ + t u-) u- = 0``.
    Signs of all nodes are preserved.  Returns the same type as ``field``.
    """
    u = _vector(mesh, field)
    if not (u.max() > 0 and u.min() < 0):
        raise ProjectionError("field does not change sign")
    forms = nodal_forms(mesh, u, p)
    if forms["logP"] == -math.inf or forms["logN"] == -math.inf:
        raise ProjectionError("one signed part carries no weighted mass")
    x, y = _solve_scales(forms, p)
    s, t = math.exp(x), math.exp(y)
    out = np.where(u > 0, s * u, t * u)
    if isinstance(field, Field):
        return Field.from_vector(mesh, out)
    return out


def nehari_defects(mesh: SectorMesh, field, p: float) -> tuple[float, float]:
    """Relative defects |E'(u) u+| / int|x|^a|u+|^(p+1| and the same for u-."""
    u = _vector(mesh, field)
    up, um = split_signs(u)
    force, _ = nonlinear_terms(mesh, u, p)
    Ku = mesh.stiffness @ u
    out = []
    for part in (up, um):
        nl = float(force @ part)
        if nl == 0.0:
            out.append(math.inf)
            continue
        out.append(abs(float(Ku @ part) - nl) / abs(nl))
    return out[0], out[1]


# ---------------------------------------------------------------------------
# initial guesses
# ---------------------------------------------------------------------------

def _radial_shape(params: ProblemParams):
    from .radial import radial_profile
    return radial_profile(params.alpha, params.p)


def initial_guess(kind: str, mesh: SectorMesh, params: ProblemParams, seed: int = 0,
                  amplitude: float = 0.2, profile=None) -> Field:
    """n-invariant starting field of the requested kind (deterministic in ``seed``).

    ``radial-perturbed``: u_rad(r) (1 + amplitude cos(n(theta - phase))).
    ``two-bump``: one positive and one negative angular bump per sector.
    ``annular-split``: u_rad composed with an angularly modulated radius so the
    interior nodal circle becomes a curve.
    """
    if kind not in INIT_KINDS:
        raise ConfigurationError(f"unknown init kind {kind!r}; choose from {INIT_KINDS}")
    if mesh.n != params.n:
        raise ConfigurationError("mesh symmetry order differs from params.n")
    rng = np.random.default_rng(seed)
    n = params.n
    phase = rng.uniform(0.0, 2.0 * math.pi / n) if seed else 0.0
    prof = profile if profile is not None else None

    if kind == "radial-perturbed":
        prof = prof or _radial_shape(params)

        def f(r, th):
            base = prof(r) / prof.central_value
            return base * (1.0 + amplitude * np.cos(n * (th - phase)))
    elif kind == "annular-split":
        prof = prof or _radial_shape(params)

        def f(r, th):
            expo = 1.0 + amplitude * np.cos(n * (th - phase))
            return prof(np.power(r, expo)) / prof.central_value
    else:
        width = 0.35 + 0.1 * rng.uniform()
        radius = 0.45 + 0.1 * rng.uniform()

        def f(r, th):
            # alternating signs every pi/n of angle, concentrated near one radius
            ang = np.sin(n * (th - phase))
            radial_part = np.exp(-((r - radius) / width) ** 2) * (1.0 - r) * r
            return np.sign(ang) * np.abs(ang) ** 2 * radial_part * 4.0

    return Field.from_function(mesh, f)


# ---------------------------------------------------------------------------
# minimization
# ---------------------------------------------------------------------------

def _energy(mesh, u, p) -> float:
    _, nl = nonlinear_terms(mesh, u, p)
    return 0.5 * float(u @ (mesh.stiffness @ u)) - nl / (p + 1.0)


def _hessian(mesh: SectorMesh, u: np.ndarray, p: float) -> sp.csr_matrix:
    au = np.abs(u)
    m = au.max()
    pot = p * mesh.weight * (au / m) ** (p - 1.0) * m ** (p - 1.0)
    return (mesh.stiffness - sp.diags(pot)).tocsc()


def _changes_sign(u: np.ndarray) -> bool:
    return bool(u.max() > 0 and u.min() < 0)


def _descend(mesh: SectorMesh, u: np.ndarray, p: float, cfg: SolveConfig,
             history: list) -> tuple[np.ndarray, int, str]:
    """Projected Sobolev gradient descent followed by a Newton finish."""
    solve_K = mesh.factorized_stiffness
    K = mesh.stiffness
    step = cfg.step_size
    E = _energy(mesh, u, p)
    history.append(E)
    it = 0
    status = "max-iterations"
    while it < cfg.max_iterations:
        it += 1
        g = K @ u - nonlinear_terms(mesh, u, p)[0]
        d = solve_K(g)
        gnorm2 = float(g @ d)
        h1 = float(u @ (K @ u))
        dual = math.sqrt(max(gnorm2, 0.0) / h1)
        if dual < cfg.newton_switch:
            status = "newton"
            break
        tau = min(2.0 * step, cfg.step_size)
        accepted = False
        while tau > 1e-12:
            trial = u - tau * d
            if _changes_sign(trial):
                try:
                    trial = nodal_nehari_project(mesh, trial, p)
                except ProjectionError:
                    trial = None
                if trial is not None:
                    E_new = _energy(mesh, trial, p)
                    if E_new <= E - 1e-4 * tau * gnorm2:
                        accepted = True
                        break
            tau *= 0.5
        if not accepted:
            status = "line-search-stalled"
            break
        step = tau
        u, E = trial, E_new
        history.append(E)
        if not _changes_sign(u):
            return u, it, "lost-sign-change"
    if status in ("newton", "line-search-stalled"):
        u, n_it, status = _newton(mesh, u, p, cfg, history)
        it += n_it
    return u, it, status


def _newton(mesh, u, p, cfg, history):
    """Newton on K u = W |u|^(p-1) u from a point close to a critical point."""
    res = pde_residual(mesh, u, p)
    for k in range(1, cfg.newton_max + 1):
        g = mesh.stiffness @ u - nonlinear_terms(mesh, u, p)[0]
        delta = spsolve(_hessian(mesh, u, p), -g)
        lam = 1.0
        improved = False
        while lam >= 1.0 / 64:
            trial = u + lam * delta
            if _changes_sign(trial):
                r_new = pde_residual(mesh, trial, p)
                if r_new < res:
                    improved = True
                    break
            lam *= 0.5
        if not improved:
            break
        u, res = trial, r_new
        if res <= 0.1 * cfg.residual_tolerance:
            break
    # land exactly on the nodal set used for reporting; at a critical point this is the identity
    u = nodal_nehari_project(mesh, u, p)
    history.append(_energy(mesh, u, p))
    tol = cfg.residual_tolerance
    if cfg.floor_aware:
        tol = max(tol, residual_floor(mesh, u, p))
    status = "converged" if pde_residual(mesh, u, p) <= tol else "newton-stalled"
    return u, k, status


def residual_floor(mesh: SectorMesh, field, p: float) -> float:
    """Rounding-error bound for :func:`pde_residual` at ``field``.

    Each entry of ``K u - force`` is a sum of terms of size up to
    ``|K| |u| + |force|``; one unit roundoff of that magnitude per node,
    measured in the same norm as the residual, bounds what double precision
    can resolve.  Near a narrow core with small inner rings this bound
    dominates the attainable residual.
    """
    u = _vector(mesh, field)
    h1 = dirichlet_energy(mesh, u)
    if h1 == 0.0:
        return 0.0
    force, _ = nonlinear_terms(mesh, u, p)
    scale = np.finfo(float).eps * (abs(mesh.stiffness) @ np.abs(u) + np.abs(force))
    return math.sqrt(float(np.sum(scale * scale / mesh.mass))) / math.sqrt(h1)


def _single_run(mesh, params, cfg, kind, seed, profile) -> Solution:
    p = params.p
    u0 = initial_guess(kind, mesh, params, seed, cfg.perturbation_amplitude, profile)
    u = nodal_nehari_project(mesh, u0.vector, p)
    history: list = []
    u, iters, status = _descend(mesh, u, p, cfg, history)
    fld = Field.from_vector(mesh, u)
    sign_change = _changes_sign(u)
    E = _energy(mesh, u, p) if sign_change else math.nan
    dp, dm = nehari_defects(mesh, u, p) if sign_change else (math.inf, math.inf)
    res = pde_residual(mesh, u, p)
    floor = residual_floor(mesh, u, p)
    tol = max(cfg.residual_tolerance, floor) if cfg.floor_aware else cfg.residual_tolerance
    converged = (status == "converged" and res <= tol
                 and max(dp, dm) <= cfg.nehari_tolerance)
    return Solution(
        field=fld, params=params, energy=E, scaled_energy=p * E, residual=res,
        nehari_defect_plus=dp, nehari_defect_minus=dm, iterations_used=iters,
        init_kind=kind, converged=converged, seed=seed,
        dual_residual=dual_residual(mesh, u, p), energy_history=history, message=status,
        residual_floor=floor,
    )


def run_kinds(config: SolveConfig) -> list[str]:
    """Initial-guess kind used by each restart."""
    if not config.cycle_kinds:
        return [config.init_kind] * config.restarts
    start = INIT_KINDS.index(config.init_kind)
    return [INIT_KINDS[(start + r) % len(INIT_KINDS)] for r in range(config.restarts)]


BASIN_TOLERANCE = 1e-4


def minimize(config: SolveConfig, params: ProblemParams, mesh: SectorMesh, profile=None) -> Solution:
    """Lowest-energy converged solution over ``config.restarts`` runs.

    Restart ``r`` uses seed ``random_seed + r`` and, with ``cycle_kinds``,
    the r-th initial-guess kind counted from ``init_kind``.  A run whose
    field stops changing sign is retried with a fresh seed.  If no run
    converges, the lowest-energy attempt is returned with
    ``converged=False``.  ``basins`` lists every run; ``multi_basin`` is set
    when converged runs disagree in energy by more than 1e-4 relative.
    """
    if mesh.n != params.n:
        raise ConfigurationError(f"mesh has n={mesh.n} but params.n={params.n}")
    if mesh.weight_alpha != params.alpha:
        mesh = mesh.with_alpha(params.alpha)
    if profile is None:
        profile = _radial_shape(params)
    runs = []
    for r, kind in enumerate(run_kinds(config)):
        seed = config.random_seed + r
        for retry in range(3):
            try:
                sol = _single_run(mesh, params, config, kind, seed + 1000 * retry, profile)
            except ProjectionError as exc:
                log.info("%s seed %d: %s", kind, seed, exc)
                continue
            if sol.message != "lost-sign-change":
                runs.append(sol)
                break
    if not runs:
        raise ProjectionError("no run kept a sign change")
    converged = [s for s in runs if s.converged]
    pool = converged or runs
    best = min(pool, key=lambda s: (s.energy, s.seed))
    best.basins = [{"init_kind": s.init_kind, "seed": s.seed, "energy": s.energy,
                    "p_energy": s.scaled_energy, "converged": s.converged,
                    "residual": s.residual} for s in runs]
    energies = [s.energy for s in converged]
    if len(energies) > 1:
        spread = (max(energies) - min(energies)) / abs(min(energies))
        best.multi_basin = spread > BASIN_TOLERANCE
    return best


def core_radius(params: ProblemParams) -> float:
    """Half-value radius of the radial two-zone profile at (alpha, p)."""
    return _radial_shape(params).core_radius


def solver_mesh(params: ProblemParams, N_r: int, N_theta: int, r_min_factor: float = 3.0,
                grading: str = "log", profile=None) -> SectorMesh:
    """Mesh for a solve at ``params``.

    Log grading starts at ``r_min_factor`` times the radial core radius.
    Smaller inner rings resolve the core better, but they raise the
    floating-point floor of the L^2 residual roughly like 1/r_min.
    """
    from .mesh import build_mesh

    if grading != "log":
        return build_mesh(params.n, N_r, N_theta, grading, alpha=params.alpha)
    prof = profile or _radial_shape(params)
    r_min = min(max(r_min_factor * prof.core_radius, 1e-300), 1e-2)
    return build_mesh(params.n, N_r, N_theta, "log", alpha=params.alpha, r_min=r_min)

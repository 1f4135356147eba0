"""Radial two-zone solutions by shooting in the logarithmic variable.

The radial Henon ODE ``u'' + u'/r + r^alpha |u|^(p-1) u = 0`` becomes, with
``s = log r`` and ``w(s) = u(e^s)``,

    w'' = -exp((2 + alpha) s) |w|^(p-1) w,

which is integrated from a small radius with the regular series start and
``w(-inf) = 1``.  The second zero ``s2`` is located by event detection and
the autonomous scaling ``u_d(r) = d * u_1(d^((p-1)/(2+alpha)) r)`` moves it
to ``r = 1``.  Working in ``s`` keeps the integration well scaled even when
the positive core has width 1e-10, and the amplitude ``d`` is carried as a
logarithm so no power of it is ever formed explicitly.

The 2-D Dirichlet integral is conformally invariant, so
``int |grad u|^2 = 2*pi * d^2 * int w'(s)^2 ds`` is accumulated alongside the
solution.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .constants import (
    ConfigurationError,
    PUBLISHED_GAMMA,
    default_constants,
    lane_emden_dirichlet_limit,
    radial_energy_limit,
)

START_RADIUS = 1e-8
MAX_LOG_RADIUS = 5000.0


class ShootingError(RuntimeError):
    pass


@dataclass
class RadialProfile:
    """Radial solution on the unit disc with one interior sign change."""

    p: float
    alpha: float
    nodes: np.ndarray
    values: np.ndarray
    interior_zero: float
    central_value: float
    dirichlet_energy: float
    nonlinear_integral: float
    region_dirichlet: tuple[float, float]
    zero_slope: float
    boundary_value: float
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    log_scale: float = 0.0  # log of the shooting rescaling factor d

    def __call__(self, r) -> np.ndarray:
        return self.evaluator(np.asarray(r, dtype=float))

    @property
    def p_dirichlet(self) -> float:
        return self.p * self.dirichlet_energy

    @property
    def energy(self) -> float:
        return 0.5 * self.dirichlet_energy - self.nonlinear_integral / (self.p + 1.0)

    @property
    def p_energy(self) -> float:
        return self.p * self.energy

    @property
    def core_radius(self) -> float:
        """Radius where the profile first drops to half its central value."""
        r = np.geomspace(1e-300, self.interior_zero, 4000)
        vals = self(r)
        below = np.nonzero(vals <= 0.5 * self.central_value)[0]
        return float(r[below[0]]) if below.size else self.interior_zero

    def record(self, target: float | None = None) -> dict:
        out = {
            "p": self.p,
            "alpha": self.alpha,
            "interior_zero": self.interior_zero,
            "central_value": self.central_value,
            "dirichlet_energy": self.dirichlet_energy,
            "p_energy": self.p_energy,
            "target": radial_energy_limit(self.alpha) if target is None else target,
        }
        return out


def _shoot(p: float, alpha: float, rtol: float = 1e-12):
    """Integrate the normalized problem w(-inf) = 1 up to the second zero."""
    a2 = 2.0 + alpha
    plm1 = p - 1.0

    def rhs(s, y):
        w = y[0]
        if w == 0.0:
            nl = 0.0
        else:
            expo = min(a2 * s + plm1 * math.log(abs(w)), 700.0)
            nl = math.copysign(math.exp(expo), w) * abs(w)
        return [y[1], -nl, y[1] * y[1], nl * w]

    s0 = math.log(START_RADIUS)
    r0a = START_RADIUS**a2
    # regular series w = 1 - r^(2+a)/(2+a)^2
    y0 = [1.0 - r0a / a2**2, -r0a / a2, (r0a / a2) ** 2 / (2 * a2), r0a / a2]

    def zero(s, y):
        return y[0]

    zero.terminal = 2
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sol = solve_ivp(rhs, (s0, MAX_LOG_RADIUS), y0, method="DOP853", rtol=rtol,
                        atol=1e-15, events=zero, dense_output=True)
    zeros = sol.t_events[0]
    if sol.status < 0 or len(zeros) < 2:
        raise ShootingError(f"second zero not found for p={p}, alpha={alpha}: {sol.message}")
    return sol, zeros[0], zeros[1], sol.y_events[0]


def _profile_from_shot(p, alpha, sol, s1, s2, ev_states, rtol) -> RadialProfile:
    a2 = 2.0 + alpha
    log_d = a2 * s2 / (p - 1.0)  # u_d(r) = d u_1(r e^{s2}),  d^{(p-1)/(2+a)} = e^{s2}
    d = math.exp(log_d)
    s0 = math.log(START_RADIUS)

    def evaluate(r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        inside = (r > 0) & (r < 1.0)
        sig = np.full(r.shape, -np.inf)
        sig[inside] = np.log(r[inside]) + s2
        deep = inside & (sig < s0)
        mid = inside & ~deep
        if np.any(mid):
            out[mid] = sol.sol(sig[mid])[0]
        if np.any(deep):
            ra = np.exp(a2 * sig[deep])
            out[deep] = 1.0 - ra / a2**2
        out[r == 0] = 1.0
        return d * out

    grad1, nl1 = ev_states[0][2], ev_states[0][3]
    grad2, nl2 = ev_states[1][2], ev_states[1][3]
    # int |grad u|^2 = 2 pi d^2 int w'^2 ds ; int |x|^a |u|^{p+1} = 2 pi d^2 int e^{a2 s}|w|^{p+1} ds
    scale = 2.0 * math.pi * d * d
    dirichlet = scale * grad2
    nonlinear = scale * nl2
    slope = d * ev_states[0][1] * math.exp(s2 - s1)  # du/dr at interior zero, r1 = e^{s1-s2}
    nodes = np.concatenate(([0.0], np.geomspace(1e-14, 1.0, 2001)))
    nodes = np.unique(np.concatenate((nodes, np.linspace(0, 1, 1001))))
    values = evaluate(nodes)
    return RadialProfile(
        p=float(p), alpha=float(alpha), nodes=nodes, values=values,
        interior_zero=math.exp(s1 - s2), central_value=d,
        dirichlet_energy=dirichlet, nonlinear_integral=nonlinear,
        region_dirichlet=(scale * grad1, scale * (grad2 - grad1)),
        zero_slope=slope, boundary_value=d * ev_states[1][0],
        evaluator=evaluate, log_scale=log_d,
    )


def henon_radial_direct(p: float, alpha: float, rtol: float = 1e-12) -> RadialProfile:
    """Two-zone radial Henon solution by direct shooting with the weight r^alpha."""
    if not p > 1:
        raise ConfigurationError("p must exceed 1")
    if alpha < 0:
        raise ConfigurationError("alpha must be >= 0")
    sol, s1, s2, ev = _shoot(float(p), float(alpha), rtol)
    return _profile_from_shot(float(p), float(alpha), sol, s1, s2, ev, rtol)


def lane_emden_nodal(p: float, tolerance: float = 1e-10) -> RadialProfile:
    """Radial Lane-Emden solution (alpha = 0) with two nodal zones and v(1) = 0."""
    prof = henon_radial_direct(p, 0.0)
    if abs(prof.boundary_value) > tolerance:
        raise ShootingError(f"shooting residual {prof.boundary_value:.3e} exceeds {tolerance:.1e}")
    return prof


def henon_from_lane_emden(profile: RadialProfile, alpha: float) -> RadialProfile:
    """Map a Lane-Emden profile to the radial Henon solution via t = r^((2+alpha)/2).

    u(r) = ((2+alpha)/2)^(2/(p-1)) v(r^((2+alpha)/2)).  Energies follow from the
    conformal change of variables: the Dirichlet integral picks up the factor
    ((2+alpha)/2)^((p+3)/(p-1)).
    """
    if profile.alpha != 0.0:
        raise ValueError("expected a Lane-Emden (alpha = 0) profile")
    if alpha < 0:
        raise ConfigurationError("alpha must be >= 0")
    p = profile.p
    beta = (2.0 + alpha) / 2.0
    c = beta ** (2.0 / (p - 1.0))

    def evaluate(r):
        r = np.asarray(r, dtype=float)
        return c * profile(np.power(r, beta))

    factor = beta ** ((p + 3.0) / (p - 1.0))
    nodes = profile.nodes.copy()
    return RadialProfile(
        p=p, alpha=float(alpha), nodes=nodes, values=evaluate(nodes),
        interior_zero=profile.interior_zero ** (1.0 / beta),
        central_value=c * profile.central_value,
        dirichlet_energy=factor * profile.dirichlet_energy,
        nonlinear_integral=factor * profile.nonlinear_integral,
        region_dirichlet=tuple(factor * x for x in profile.region_dirichlet),
        zero_slope=c * beta * profile.zero_slope * profile.interior_zero ** ((beta - 1.0) / beta),
        boundary_value=c * profile.boundary_value,
        evaluator=evaluate,
        log_scale=math.log(c) + profile.log_scale,
    )


def radial_profile(alpha: float, p: float) -> RadialProfile:
    """Radial two-zone Henon solution through the Lane-Emden map."""
    return henon_from_lane_emden(lane_emden_nodal(p), alpha)


def radial_energy_table(alpha: float, p_list, gamma_value: float | None = None) -> dict:
    """p * E_p(u_rad) against its limit 2(2+alpha) gamma pi e for each p.

    Rows carry the scaled energy, the target (closed-form gamma) and the target
    with the published gamma; ``gap_decreasing`` reports whether
    |p E_p - target| shrinks strictly along ``p_list``.
    """
    g = default_constants().gamma if gamma_value is None else gamma_value
    target = radial_energy_limit(alpha, g)
    rows = []
    for p in p_list:
        row = {"p": float(p), "target": target,
               "target_published": radial_energy_limit(alpha, PUBLISHED_GAMMA)}
        try:
            prof = radial_profile(alpha, p)
        except ShootingError as exc:
            row["error"] = str(exc)
            rows.append(row)
            continue
        row.update({
            "p_energy": prof.p_energy,
            "p_dirichlet": prof.p_dirichlet,
            "gap": abs(prof.p_energy - target),
            "interior_zero": prof.interior_zero,
            "central_value": prof.central_value,
        })
        rows.append(row)
    gaps = [row.get("gap") for row in rows]
    decreasing = all(g is not None for g in gaps) and all(b < a for a, b in zip(gaps, gaps[1:]))
    return {"alpha": float(alpha), "target": target, "rows": rows, "gap_decreasing": decreasing}


def lane_emden_dirichlet_table(p_list, gamma_value: float | None = None) -> dict:
    """p * int |grad v_p|^2 against 8 pi gamma e for the Lane-Emden profiles."""
    g = default_constants().gamma if gamma_value is None else gamma_value
    target = lane_emden_dirichlet_limit(g)
    rows = []
    for p in p_list:
        prof = lane_emden_nodal(p)
        rows.append({"p": float(p), "p_dirichlet": prof.p_dirichlet,
                     "gap": abs(prof.p_dirichlet - target)})
    gaps = [row["gap"] for row in rows]
    return {"target": target, "rows": rows,
            "gap_decreasing": all(b < a for a, b in zip(gaps, gaps[1:]))}


def suggested_r_min(profile: RadialProfile, fraction: float = 0.02) -> float:
    """Innermost ring radius resolving the positive core of ``profile``."""
    return float(min(max(fraction * profile.core_radius, 1e-300), 1e-2))

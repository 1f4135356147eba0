"""Asymptotic constants and the integer thresholds derived from them.

All quantities are pure functions of the root ``tbar`` of
``2*sqrt(e)*log(t) + t = 0``.  Integer parts and ceilings go through an
epsilon guard so that values meant to be exact integers do not flip under
floating-point noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

SQRT_E = math.sqrt(math.e)

#: Values quoted in the literature, kept for side-by-side reporting.
PUBLISHED_KAPPA = 5.1869
PUBLISHED_GAMMA = 4.859

#: 8*pi*e, the asymptotic energy carried by one nodal region (times p).
EIGHT_PI_E = 8.0 * math.pi * math.e
FOUR_PI_E = 4.0 * math.pi * math.e

INTEGER_GUARD = 1e-9

BRACKET = (0.1, 1.0)


class ConfigurationError(ValueError):
    """Raised for invalid problem or discretization parameters."""


@dataclass(frozen=True)
class ProblemParams:
    """The triple (alpha, p, n) identifying one variational problem."""

    alpha: float = 0.0
    p: float = 2.0
    n: int = 1

    def __post_init__(self):
        if not (self.alpha >= 0.0 and math.isfinite(self.alpha)):
            raise ConfigurationError(f"alpha must be finite and >= 0, got {self.alpha!r}")
        if not (self.p > 1.0 and math.isfinite(self.p)):
            raise ConfigurationError(f"p must be finite and > 1, got {self.p!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigurationError(f"n must be an integer >= 1, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "p", float(self.p))


def tbar_residual(t: float) -> float:
    return 2.0 * SQRT_E * math.log(t) + t


def solve_tbar(tolerance: float = 1e-15) -> float:
    """Bisection for the root of ``2*sqrt(e)*log(t) + t`` on [0.1, 1].

    Stops once the residual is below ``tolerance`` or the bracket can no
    longer be split in double precision.
    """
    if not tolerance > 0:
        raise ConfigurationError("tolerance must be positive")
    lo, hi = BRACKET
    f_lo = tbar_residual(lo)
    # residual is increasing: negative at 0.1, positive at 1.0
    assert f_lo < 0 < tbar_residual(hi)
    best = lo if abs(f_lo) < abs(tbar_residual(hi)) else hi
    while True:
        mid = 0.5 * (lo + hi)
        f_mid = tbar_residual(mid)
        if abs(f_mid) < abs(tbar_residual(best)):
            best = mid
        if abs(f_mid) <= tolerance or mid in (lo, hi):
            return best
        if f_mid < 0:
            lo = mid
        else:
            hi = mid


def _tbar_of(value) -> float:
    if isinstance(value, AsymptoticConstants):
        return value.tbar
    return float(value)


def kappa(constants) -> float:
    """``1 + 2*sqrt(e)/tbar``; accepts an AsymptoticConstants or a bare tbar."""
    t = _tbar_of(constants)
    return 1.0 + 2.0 * SQRT_E / t


def gamma(constants) -> float:
    """Energy constant ``exp(-sqrt(e)/(tbar+sqrt(e))) * (e/tbar^2 + 1 + 2 sqrt(e)/tbar)``."""
    t = _tbar_of(constants)
    return math.exp(-SQRT_E / (t + SQRT_E)) * (math.e / t**2 + 1.0 + 2.0 * SQRT_E / t)


@dataclass(frozen=True)
class AsymptoticConstants:
    tbar: float
    kappa: float
    gamma: float
    published_kappa: float = PUBLISHED_KAPPA
    published_gamma: float = PUBLISHED_GAMMA

    @classmethod
    def from_tbar(cls, tbar: float) -> "AsymptoticConstants":
        return cls(tbar=tbar, kappa=kappa(tbar), gamma=gamma(tbar))

    @property
    def residual(self) -> float:
        return tbar_residual(self.tbar)

    @property
    def gamma_discrepancy(self) -> float:
        """Relative gap between the closed-form gamma and the published 4.859."""
        return (self.gamma - self.published_gamma) / self.published_gamma

    def as_dict(self) -> dict:
        return {
            "tbar": self.tbar,
            "tbar_residual": self.residual,
            "kappa": self.kappa,
            "kappa_published": self.published_kappa,
            "gamma": self.gamma,
            "gamma_published": self.published_gamma,
            "gamma_relative_discrepancy": self.gamma_discrepancy,
        }


@lru_cache(maxsize=None)
def default_constants(tolerance: float = 1e-15) -> AsymptoticConstants:
    return AsymptoticConstants.from_tbar(solve_tbar(tolerance))


def floor_int(x: float) -> int:
    return math.floor(x + INTEGER_GUARD)


def ceil_int(x: float) -> int:
    return math.ceil(x - INTEGER_GUARD)


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (alpha >= 0 and math.isfinite(alpha)):
        raise ConfigurationError(f"alpha must be finite and >= 0, got {alpha!r}")
    return alpha


def multiplicity_lower_bound(alpha: float, constants: AsymptoticConstants | None = None) -> int:
    """Number of distinct nonradial nodal solutions, ceil((2+alpha)*kappa/2 - 1)."""
    c = constants or default_constants()
    alpha = _check_alpha(alpha)
    return ceil_int((2.0 + alpha) * c.kappa / 2.0 - 1.0)


def max_nodal_regions(alpha: float, constants: AsymptoticConstants | None = None) -> int:
    """N_alpha = [(2+alpha)*gamma/2]."""
    c = constants or default_constants()
    alpha = _check_alpha(alpha)
    return floor_int((2.0 + alpha) * c.gamma / 2.0)


def case1_threshold(alpha: float, constants: AsymptoticConstants | None = None) -> int:
    c = constants or default_constants()
    return floor_int((2.0 + _check_alpha(alpha)) * c.gamma / 4.0)


def case2_threshold(alpha: float, constants: AsymptoticConstants | None = None) -> int:
    c = constants or default_constants()
    return floor_int((2.0 + _check_alpha(alpha)) * c.gamma / 2.0 - 1.0)


def radial_energy_limit(alpha: float, gamma_value: float | None = None) -> float:
    """Limit of p*E_p(u_rad): 2*(2+alpha)*gamma*pi*e."""
    g = default_constants().gamma if gamma_value is None else gamma_value
    return 2.0 * (2.0 + alpha) * g * math.pi * math.e


def lane_emden_dirichlet_limit(gamma_value: float | None = None) -> float:
    """Limit of p * int |grad v_p|^2 for the two-zone Lane-Emden solution: 8*pi*gamma*e."""
    g = default_constants().gamma if gamma_value is None else gamma_value
    return 8.0 * math.pi * g * math.e


@dataclass(frozen=True)
class CasePrediction:
    max_regions: int
    case1_admissible: bool
    case2_admissible: bool
    case3_forced: bool
    multiplicity: int
    guaranteed_quasiradial: int
    case1_max_n: int = 0
    case2_max_n: int = 0
    nonradial_expected: bool = True
    admissible: frozenset = field(default_factory=frozenset)

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "max_regions", "case1_admissible", "case2_admissible", "case3_forced",
            "multiplicity", "guaranteed_quasiradial", "case1_max_n", "case2_max_n",
            "nonradial_expected")}
        d["admissible"] = sorted(self.admissible)
        return d


def predict_cases(params: ProblemParams, constants: AsymptoticConstants | None = None) -> CasePrediction:
    """Which nodal configurations the asymptotic counting allows for (alpha, n).

    ``admissible`` is the set of case labels an observed least-energy
    n-invariant solution may carry.  Case 3 is always possible; ``radial`` is
    only admissible once n exceeds the multiplicity bound, where no
    nonradiality is guaranteed.
    """
    c = constants or default_constants()
    t1 = case1_threshold(params.alpha, c)
    t2 = case2_threshold(params.alpha, c)
    mult = multiplicity_lower_bound(params.alpha, c)
    c1 = params.n <= t1
    c2 = params.n <= t2
    nonradial = params.n <= mult
    admissible = {"case3"}
    if c1:
        admissible.add("case1")
    if c2:
        admissible.add("case2")
    if not nonradial:
        admissible.add("radial")
    return CasePrediction(
        max_regions=max_nodal_regions(params.alpha, c),
        case1_admissible=c1,
        case2_admissible=c2,
        case3_forced=not c1 and not c2,
        multiplicity=mult,
        guaranteed_quasiradial=max(mult - t2, 0),
        case1_max_n=t1,
        case2_max_n=t2,
        nonradial_expected=nonradial,
        admissible=frozenset(admissible),
    )


def threshold_table(alphas, constants: AsymptoticConstants | None = None) -> list[dict]:
    c = constants or default_constants()
    rows = []
    for alpha in alphas:
        alpha = _check_alpha(alpha)
        mult = multiplicity_lower_bound(alpha, c)
        t2 = case2_threshold(alpha, c)
        rows.append({
            "alpha": alpha,
            "multiplicity": mult,
            "case1_max_n": case1_threshold(alpha, c),
            "case2_max_n": t2,
            "N_alpha": max_nodal_regions(alpha, c),
            "guaranteed_quasiradial": max(mult - t2, 0),
            "radial_energy_target": radial_energy_limit(alpha, c.gamma),
            "radial_energy_target_published": radial_energy_limit(alpha, c.published_gamma),
        })
    return rows

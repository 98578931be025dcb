import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from nlsgraph.discrete import interval_lp
from nlsgraph.graph_topology import TopologyClass
from nlsgraph.models import TopologyTag


@dataclass(frozen=True)
class Constants:
    """Critical masses and best Gagliardo-Nirenberg constants of the line and the half-line."""

    mu_R: float = math.pi * math.sqrt(3.0) / 2.0
    mu_R_plus: float = math.pi * math.sqrt(3.0) / 4.0
    K_R: float = 4.0 / math.pi**2
    K_R_plus: float = 16.0 / math.pi**2

    def to_dict(self) -> dict:
        return {
            "mu_R": self.mu_R,
            "mu_R_plus": self.mu_R_plus,
            "K_R": self.K_R,
            "K_R_plus": self.K_R_plus,
        }


CONSTANTS = Constants()


@dataclass(frozen=True)
class CriticalMass:
    """Critical mass implied by topology: exact where topology decides it, else a bracket."""

    value: Optional[float]
    lower: float
    upper: float

    @property
    def exact(self) -> bool:
        return self.value is not None

    @property
    def gn_constant(self) -> Optional[float]:
        return None if self.value is None else 3.0 / self.value**2

    def describe(self) -> str:
        if self.value is not None:
            name = "pi*sqrt(3)/2" if self.value == CONSTANTS.mu_R else "pi*sqrt(3)/4"
            return f"mu_G = {name} = {self.value:.6f} exactly"
        return f"mu_G in [pi*sqrt(3)/4, pi*sqrt(3)/2] = [{self.lower:.6f}, {self.upper:.6f}]"

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "lower": self.lower,
            "upper": self.upper,
            "exact": self.exact,
            "gn_constant": self.gn_constant,
        }


def _sqrt_sech(a: np.ndarray) -> np.ndarray:
    # sech^(1/2) through exp(-|a|), which underflows to 0 instead of overflowing
    t = np.exp(-np.abs(a))
    return np.sqrt(2.0 * t / (1.0 + t * t))


def soliton(lam: float, x):
    """phi_lam(x) = sqrt(lam) sech^(1/2)(2 lam x / sqrt(3))."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    values = math.sqrt(lam) * _sqrt_sech(2.0 * lam * np.asarray(x, dtype=float) / math.sqrt(3.0))
    return float(values) if np.ndim(values) == 0 else values


def half_soliton(lam: float, x):
    """Soliton restricted to the half-line x >= 0."""
    if np.any(np.asarray(x) < 0):
        raise ValueError("half-soliton is defined for x >= 0 only")
    return soliton(lam, x)


def soliton_energy_defect(lam: float, L: float, h: float) -> float:
    """
    Energy of the piecewise-linear interpolant of phi_lam on [-L, L] with step h.

    The continuum energy is zero; what remains is discretization plus truncation error.
    Truncation removes tails whose energy is positive, so short windows give a negative value.
    """
    if not (L > 0 and h > 0):
        raise ValueError("L and h must be positive")
    n = max(2, math.ceil(2 * L / h - 1e-9))
    x = np.linspace(-L, L, n + 1)
    u = soliton(lam, x)
    dx = np.diff(x)
    kinetic = np.sum(np.diff(u) ** 2 / dx)
    sextic = np.sum(interval_lp(u[:-1], u[1:], dx, 6))
    return float(0.5 * kinetic - sextic / 6.0)


def critical_mass_exact(tc: TopologyClass) -> CriticalMass:
    c = CONSTANTS
    if tc.tag == TopologyTag.CYCLE_COVERED:
        return CriticalMass(value=c.mu_R, lower=c.mu_R, upper=c.mu_R)
    if tc.tag in (TopologyTag.TIP, TopologyTag.ONE_HALF_LINE_NO_TIP):
        return CriticalMass(value=c.mu_R_plus, lower=c.mu_R_plus, upper=c.mu_R_plus)
    return CriticalMass(value=None, lower=c.mu_R_plus, upper=c.mu_R)


def soliton_norms() -> dict:
    """Closed-form integrals of phi_1 over the line: mass, int phi^6, int phi'^2."""
    sextic = math.pi * math.sqrt(3.0) / 4.0
    return {
        "mass": CONSTANTS.mu_R,
        "sextic": sextic,
        "kinetic": sextic / 3.0,  # E(phi) = 0
    }


def spread_quotient(half_lines: int, core_length: float, eps: float) -> float:
    """
    Quotient of the family equal to sqrt(eps) on the compact core and to
    sqrt(eps) phi(eps x) on each half-line, in closed form.
    """
    if half_lines < 1 or eps <= 0 or core_length < 0:
        raise ValueError("need at least one half-line, eps > 0 and a nonnegative core length")
    norms = soliton_norms()
    half_mass = norms["mass"] / 2
    half_sextic = norms["sextic"] / 2
    half_kinetic = norms["kinetic"] / 2
    k = half_lines
    numerator = half_sextic * k + core_length * eps
    denominator = (half_mass * k + core_length * eps) ** 2 * half_kinetic * k
    return numerator / denominator

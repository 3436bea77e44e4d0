"""Physical parameters of the mirror/laser detector and the constants derived from them.

All inputs are SI. Angular frequencies are in rad/s, rates in 1/s.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Any

# CODATA 2018 exact/recommended values; single source of truth for the package.
HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J / K
C_LIGHT = 2.99792458e8  # m / s

BANDWIDTH_CONVENTIONS = ("literal", "angular_det")


class ParameterError(ValueError):
    """A parameter record is malformed (bad sign, unknown field, wrong type)."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class PhysicsDomainError(ValueError):
    """Parameters are well formed but outside the regime the model supports."""


@dataclass(frozen=True)
class PhysicalParams:
    """Experimental knobs. Defaults reproduce the reference operating point."""

    wavelength_m: float = 600e-9
    mech_freq_rad_s: float = 2 * math.pi * 1e7
    laser_power_w: float = 50e-3
    eff_mass_kg: float = 5e-12
    det_bandwidth_hz: float = 1e6
    mode_bandwidth_hz: float = 1e2
    damping_hz: float = 1.0
    temperature_k: float = 0.0
    incidence_angle_rad: float = 0.0
    squeezing: float = 0.0
    force: float = 1.0
    bandwidth_convention: str = "angular_det"

    def __post_init__(self):
        for name in ("wavelength_m", "mech_freq_rad_s", "laser_power_w", "eff_mass_kg",
                     "det_bandwidth_hz", "mode_bandwidth_hz"):
            value = getattr(self, name)
            if not _is_real(value) or not value > 0 or not math.isfinite(value):
                raise ParameterError(name, f"must be a finite positive number, got {value!r}")
        for name in ("damping_hz", "temperature_k"):
            value = getattr(self, name)
            if not _is_real(value) or not value >= 0 or not math.isfinite(value):
                raise ParameterError(name, f"must be a finite non-negative number, got {value!r}")
        phi = self.incidence_angle_rad
        if not _is_real(phi) or not abs(phi) < math.pi / 2:
            raise ParameterError("incidence_angle_rad", f"must satisfy |phi| < pi/2, got {phi!r}")
        for name in ("squeezing", "force"):
            value = getattr(self, name)
            if not _is_real(value) or not math.isfinite(value):
                raise ParameterError(name, f"must be a finite real number, got {value!r}")
        if self.bandwidth_convention not in BANDWIDTH_CONVENTIONS:
            raise ParameterError("bandwidth_convention",
                                 f"must be one of {BANDWIDTH_CONVENTIONS}, got {self.bandwidth_convention!r}")

    @property
    def carrier_freq(self) -> float:
        """Laser angular frequency 2 pi c / lambda."""
        return 2 * math.pi * C_LIGHT / self.wavelength_m

    def replace(self, **changes) -> "PhysicalParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PhysicalParams":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ParameterError(unknown[0], "unknown parameter")
        kwargs = {}
        for key, value in data.items():
            if key == "bandwidth_convention":
                kwargs[key] = value
            elif isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ParameterError(key, f"expected a number, got {value!r}")
            else:
                kwargs[key] = float(value)
        return cls(**kwargs)


def _is_real(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


@dataclass(frozen=True)
class DerivedParams:
    """Couplings and composite rates for one parameter set.

    ``theta_minus_chi`` and ``Theta2`` are computed without subtracting the
    nearly equal couplings, since theta/chi - 1 is of order Omega/omega0 ~ 1e-8.
    """

    omega0: float
    Omega: float
    gamma: float
    chi: float
    theta: float
    theta_minus_chi: float
    Theta2: float
    Theta: float
    omega: float
    nbar: float
    force_scale: float
    mass: float

    @property
    def theta_plus_chi(self) -> float:
        return self.theta + self.chi

    @classmethod
    def from_couplings(cls, chi: float, theta: float, gamma: float, Omega: float, nbar: float = 0.0,
                       mass: float = 1.0) -> "DerivedParams":
        """Build directly from couplings (toy models, tests); theta - chi is taken literally."""
        if not theta > chi >= 0:
            raise PhysicsDomainError("invalid sideband structure: need theta > chi >= 0")
        return _finish(math.inf, Omega, gamma, chi, theta, theta - chi, (theta - chi) * (theta + chi),
                       nbar, mass)

    def with_gamma(self, gamma: float) -> "DerivedParams":
        """Same couplings at a different damping rate (nbar kept)."""
        return _finish(self.omega0, self.Omega, gamma, self.chi, self.theta, self.theta_minus_chi,
                       self.Theta2, self.nbar, self.mass)

    def with_nbar(self, nbar: float) -> "DerivedParams":
        return dataclasses.replace(self, nbar=nbar)


def thermal_occupation(temperature: float, Omega: float) -> float:
    """Bose occupation of a mode at angular frequency ``Omega``; exactly 0 at T = 0."""
    if temperature < 0:
        raise ParameterError("temperature_k", "must be non-negative")
    if temperature == 0:
        return 0.0
    x = HBAR * Omega / (K_B * temperature)
    return 1.0 / math.expm1(x)


def force_scale(mass: float, Omega: float) -> float:
    """Newtons per unit of the dimensionless force amplitude."""
    return Omega * math.sqrt(2 * HBAR * mass * Omega)


def sql_force(mass: float, Omega: float, tau: float) -> float:
    """Standard quantum limit sqrt(hbar Omega M)/tau for a constant force."""
    if not tau > 0:
        raise ParameterError("tau", "must be positive")
    return math.sqrt(HBAR * Omega * mass) / tau


def default_tau(Theta: float) -> float:
    """Interaction time 2 pi / Theta used as the SQL reference."""
    if not Theta > 0:
        raise ParameterError("Theta", "must be positive")
    return 2 * math.pi / Theta


def derive_couplings(p: PhysicalParams) -> DerivedParams:
    omega0 = p.carrier_freq
    Omega = p.mech_freq_rad_s
    if not omega0 > Omega:
        raise PhysicsDomainError(
            f"invalid sideband structure: carrier {omega0:.6g} rad/s must exceed Omega {Omega:.6g} rad/s")
    det_bw = p.det_bandwidth_hz
    if p.bandwidth_convention == "angular_det":
        det_bw = 2 * math.pi * det_bw
    chi = math.cos(p.incidence_angle_rad) * math.sqrt(
        p.laser_power_w * det_bw**2 * (omega0 - Omega)
        / (2 * p.eff_mass_kg * Omega * C_LIGHT**2 * p.mode_bandwidth_hz))
    # ratio - 1 = 2 Omega / (omega0 - Omega), kept exact
    excess = 2 * Omega / (omega0 - Omega)
    root = math.sqrt(1 + excess)
    theta = chi * root
    theta_minus_chi = chi * excess / (root + 1)
    Theta2 = chi**2 * excess
    nbar = thermal_occupation(p.temperature_k, Omega)
    return _finish(omega0, Omega, p.damping_hz, chi, theta, theta_minus_chi, Theta2, nbar, p.eff_mass_kg)


def _finish(omega0, Omega, gamma, chi, theta, theta_minus_chi, Theta2, nbar, mass) -> DerivedParams:
    Theta = math.sqrt(Theta2)
    if not gamma < Theta:
        raise PhysicsDomainError(
            f"overdamped regime unsupported: damping {gamma:.6g} 1/s >= Theta {Theta:.6g} 1/s")
    omega = Theta if gamma == 0 else math.sqrt((Theta - gamma) * (Theta + gamma))
    return DerivedParams(
        omega0=omega0, Omega=Omega, gamma=float(gamma), chi=chi, theta=theta,
        theta_minus_chi=theta_minus_chi, Theta2=Theta2, Theta=Theta, omega=omega,
        nbar=nbar, force_scale=force_scale(mass, Omega), mass=mass)

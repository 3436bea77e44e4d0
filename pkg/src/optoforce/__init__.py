"""Sensitivity of an optomechanical sideband force detector with damping, thermal noise and squeezed input."""

from .params import (HBAR, K_B, C_LIGHT, PhysicalParams, DerivedParams, ParameterError, PhysicsDomainError,
                     derive_couplings, thermal_occupation, force_scale, sql_force, default_tau)
from .closed_form import (CoefficientSet, SensitivityResult, coefficients, signal, noise_variance, f_min,
                          sensitivity, heisenberg_coefficients)

__all__ = [
    "HBAR", "K_B", "C_LIGHT", "PhysicalParams", "DerivedParams", "ParameterError", "PhysicsDomainError",
    "derive_couplings", "thermal_occupation", "force_scale", "sql_force", "default_tau",
    "CoefficientSet", "SensitivityResult", "coefficients", "signal", "noise_variance", "f_min",
    "sensitivity", "heisenberg_coefficients",
]

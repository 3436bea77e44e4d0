"""Closed-form solution of the damped three-mode dynamics and the resulting force sensitivity.

Every function accepts a scalar time or a numpy array of times and broadcasts.
Combinations that are differences of nearly equal numbers (theta - chi,
1 + Upsilon_plus, A1 - A2) are rewritten so they never subtract large terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import DerivedParams, PhysicsDomainError, default_tau, sql_force

RESONANCE_GUARD = 1e-6


class SingularSensitivity(ZeroDivisionError):
    """Raised when the signal vanishes, so no finite force is detectable."""


@dataclass(frozen=True)
class CoefficientSet:
    t: np.ndarray
    S: np.ndarray
    C: np.ndarray
    ups_plus: np.ndarray
    ups_minus: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    A_diff: np.ndarray  # A1 - A2, computed directly
    B: np.ndarray
    E2: np.ndarray
    delta: np.ndarray
    G_over_f: np.ndarray
    F_plus: complex
    F_minus: complex


@dataclass(frozen=True)
class SensitivityResult:
    t: float
    s: float
    nbar: float
    signal: float
    noise_var: float
    f_min: float
    F_min: float
    sql_ratio: float
    tau: float
    F_sql: float


def check_resonance(d: DerivedParams) -> None:
    if d.gamma == 0 and abs(d.Theta2 - d.Omega**2) < RESONANCE_GUARD * d.Omega**2:
        raise PhysicsDomainError("singular configuration: Theta = Omega with zero damping (drive response diverges)")


def response_denominator(d: DerivedParams) -> float:
    """Squared fast-response amplitude (Theta^2 - Omega^2)^2 + 4 gamma^2 Omega^2."""
    return (d.Theta2 - d.Omega**2) ** 2 + 4 * d.gamma**2 * d.Omega**2


def _slow_terms(d: DerivedParams, t):
    """S, C, Upsilon+-, 1 + Upsilon+ and E^2 at times t."""
    t = np.asarray(t, dtype=float)
    g, w = d.gamma, d.omega
    wt = w * t
    sin, cos = np.sin(wt), np.cos(wt)
    if g == 0:
        S, C = sin, cos
        up = um = C
        one_plus_up = 2 * np.cos(wt / 2) ** 2
        E2 = np.zeros_like(t)
        return S, C, up, um, one_plus_up, E2
    decay = np.exp(-g * t)
    S = decay * sin
    C = decay * cos
    r = g / w
    up = C + r * S
    um = C - r * S
    one_plus_up = -np.expm1(-g * t) + decay * 2 * np.cos(wt / 2) ** 2 + r * S
    # 4 gamma int_0^t B^2, rearranged so the only near-cancellation is at omega t -> 0
    decay2 = decay * decay
    E2 = (-np.expm1(-2 * g * t) - 2 * g / w**2 * decay2 * sin * (g * sin + w * cos)) / d.Theta2
    return S, C, up, um, one_plus_up, E2


def delta_slow_part(d: DerivedParams, t):
    """Slowly varying part P(t) of Delta(t) = P(t) - [(Omega^2-Theta^2) cos Omega t - 2 gamma Omega sin Omega t]."""
    S, C, up, *_ = _slow_terms(d, t)
    return (d.Omega**2 - d.Theta2) * up - 2 * d.gamma * d.Omega**2 * S / d.omega


def coefficients(d: DerivedParams, t) -> CoefficientSet:
    check_resonance(d)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    S, C, up, um, one_plus_up, E2 = _slow_terms(d, t)
    tmc, chi, theta, Th2 = d.theta_minus_chi, d.chi, d.theta, d.Theta2
    A1 = (tmc + chi * one_plus_up) / Th2
    A2 = (-tmc + theta * one_plus_up) / Th2
    A_diff = tmc * (1 - up) / Th2
    B = S / d.omega
    Om, g = d.Omega, d.gamma
    delta = (Om**2 - Th2) * (up - np.cos(Om * t)) - 2 * g * Om * (Om * S / d.omega - np.sin(Om * t))
    G_over_f = Om * delta / response_denominator(d)
    F_plus = Om / complex(Th2 - Om**2, 2 * g * Om)
    F_minus = Om / complex(Th2 - Om**2, -2 * g * Om)
    return CoefficientSet(t=t, S=S, C=C, ups_plus=up, ups_minus=um, A1=A1, A2=A2, A_diff=A_diff,
                          B=B, E2=E2, delta=delta, G_over_f=G_over_f, F_plus=F_plus, F_minus=F_minus)


def squeezing_bracket(A1, A2, A_diff, s):
    """[A1 cosh s - A2 sinh s]^2 + [A1 sinh s - A2 cosh s]^2 without cancellation at large s."""
    es = np.exp(-s)
    sh = np.sinh(s)
    return (A1 * es + A_diff * sh) ** 2 + (-A2 * es + A_diff * sh) ** 2


def signal(d: DerivedParams, t, f):
    c = coefficients(d, t)
    return np.abs(d.theta_minus_chi * c.G_over_f * f)


def noise_variance(d: DerivedParams, t, s, nbar):
    """Variance of the measured phase-quadrature sum."""
    c = coefficients(d, t)
    return _noise_from(d, c, s, nbar)


def _noise_from(d, c: CoefficientSet, s, nbar):
    thermal = (2 * np.asarray(nbar, dtype=float) + 1) * (c.B**2 + c.E2)
    return d.theta_minus_chi**2 * (squeezing_bracket(c.A1, c.A2, c.A_diff, s) + thermal) / 4


def f_min_from(d: DerivedParams, c: CoefficientSet, s, nbar, abs_delta=None):
    """Minimum detectable dimensionless force; ``abs_delta`` overrides |Delta| (envelope evaluation)."""
    if abs_delta is None:
        abs_delta = np.abs(c.delta)
    thermal = (2 * np.asarray(nbar, dtype=float) + 1) * (c.B**2 + c.E2)
    root = np.sqrt(squeezing_bracket(c.A1, c.A2, c.A_diff, s) + thermal)
    with np.errstate(divide="ignore"):
        return response_denominator(d) / (2 * d.Omega * abs_delta) * root


def f_min(d: DerivedParams, t, s, nbar):
    c = coefficients(d, t)
    if np.any(c.delta == 0):
        raise SingularSensitivity("sensitivity undefined (zero signal)")
    return f_min_from(d, c, s, nbar)


def sensitivity(d: DerivedParams, t: float, s: float, f: float = 1.0, tau: float | None = None) -> SensitivityResult:
    """All figures of merit at one operating point; ``tau`` defaults to 2 pi / Theta."""
    c = coefficients(d, t)
    if c.delta == 0:
        raise SingularSensitivity("sensitivity undefined (zero signal)")
    fm = float(f_min_from(d, c, s, d.nbar))
    tau = default_tau(d.Theta) if tau is None else tau
    F_sql = sql_force(d.mass, d.Omega, tau)
    F_min = fm * d.force_scale
    return SensitivityResult(
        t=float(t), s=float(s), nbar=d.nbar,
        signal=float(abs(d.theta_minus_chi * c.G_over_f * f)),
        noise_var=float(_noise_from(d, c, s, d.nbar)),
        f_min=fm, F_min=F_min, sql_ratio=F_min / F_sql, tau=tau, F_sql=F_sql)


# ---------------------------------------------------------------------------
# Full Heisenberg-picture map
# ---------------------------------------------------------------------------

OPERATOR_ORDER = ("a1", "a1_dag", "a2", "a2_dag", "b", "b_dag")


@dataclass(frozen=True)
class HeisenbergMap:
    """Linear map from initial operators to b(t), a1(t), a2(t).

    ``rows`` has shape (3, 6): rows (b, a1, a2), columns in ``OPERATOR_ORDER``.
    ``drive`` holds the c-number displacement of each row per unit force.
    """

    t: float
    rows: np.ndarray
    drive: np.ndarray
    gamma: float
    omega: float

    def full_matrix(self) -> np.ndarray:
        """6x6 map on (a1, a1^dag, a2, a2^dag, b, b^dag); creation rows are conjugated annihilation rows."""
        swap = [1, 0, 3, 2, 5, 4]
        b, a1, a2 = self.rows
        m = np.empty((6, 6), dtype=complex)
        m[0], m[2], m[4] = a1, a2, b
        m[1], m[3], m[5] = a1.conj()[swap], a2.conj()[swap], b.conj()[swap]
        return m

    def noise_kernel(self, tau):
        """Kernel K(tau) weighting b_in(t - tau) in b(t); equals 2 sqrt(gamma) Upsilon_minus(tau)."""
        tau = np.asarray(tau, dtype=float)
        g, w = self.gamma, self.omega
        return 2 * math.sqrt(g) * np.exp(-g * tau) * (np.cos(w * tau) - g / w * np.sin(w * tau))

    def integrated_noise_kernel(self, tau):
        """int_0^tau K, the kernel of b_in in a1 (times chi) and a2 (times theta)."""
        tau = np.asarray(tau, dtype=float)
        g, w = self.gamma, self.omega
        return 2 * math.sqrt(g) * np.exp(-g * tau) * np.sin(w * tau) / w


def commutator_defect(m: np.ndarray, relative: bool = False) -> float:
    """max |M J M^T - J| for the canonical form J of (a, a^dag) pairs.

    With ``relative`` each entry is divided by the size of the terms summed
    into it, max(|M| |J| |M|^T, 1): large coefficients cancel down to O(1)
    commutators, so the absolute defect is bounded below by rounding.
    """
    J = np.kron(np.eye(3), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    defect = np.abs(m @ J @ m.T - J)
    if relative:
        a = np.abs(m)
        defect = defect / np.maximum(a @ np.abs(J) @ a.T, 1.0)
    return float(np.max(defect))


def heisenberg_coefficients(d: DerivedParams, t: float) -> HeisenbergMap:
    check_resonance(d)
    S, C, up, um, one_plus_up, _ = (float(x) for x in _slow_terms(d, t))
    chi, theta, Th2, w, g, Om = d.chi, d.theta, d.Theta2, d.omega, d.gamma, d.Omega
    idx = {name: i for i, name in enumerate(OPERATOR_ORDER)}
    rows = np.zeros((3, 6), dtype=complex)
    # b(t)
    rows[0, idx["a1_dag"]] = chi / w * S
    rows[0, idx["a2"]] = -theta / w * S
    rows[0, idx["b"]] = um
    # a1(t); theta^2 - chi^2 up = Theta^2 + chi^2 (1 - up)
    rows[1, idx["a1"]] = 1 + chi**2 * (1 - up) / Th2
    rows[1, idx["b_dag"]] = chi / w * S
    rows[1, idx["a2_dag"]] = chi * theta / Th2 * (up - 1)
    # a2(t); theta^2 up - chi^2 = Theta^2 - theta^2 (1 - up)
    rows[2, idx["a1_dag"]] = chi * theta / Th2 * (1 - up)
    rows[2, idx["b"]] = theta / w * S
    rows[2, idx["a2"]] = 1 - theta**2 * (1 - up) / Th2
    Fp = Om / complex(Th2 - Om**2, 2 * g * Om)
    Fm = Om / complex(Th2 - Om**2, -2 * g * Om)
    e_plus = complex(math.cos(Om * t), math.sin(Om * t))
    drive = np.array([
        Om * Fp * (C - complex(g / w, -Th2 / (w * Om)) * S - e_plus),
        1j * chi * Fm * (C + complex(g / w, -Om / w) * S - e_plus.conjugate()),
        -1j * theta * Fp * (C + complex(g / w, Om / w) * S - e_plus),
    ])
    return HeisenbergMap(t=float(t), rows=rows, drive=drive, gamma=g, omega=w)

"""Envelope extraction, minima search, optimal squeezing and parameter sweeps.

Delta(t) oscillates at the mechanical frequency Omega, about 1e5 times faster
than the slow scale omega, so sweeps never sample it directly. Instead Delta is
split into a slow part P(t) and a pure tone of amplitude R; over one fast
cycle |Delta| ranges over [max(|P| - R, 0), |P| + R].
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .closed_form import coefficients, delta_slow_part, f_min_from, response_denominator
from .params import (DerivedParams, ParameterError, PhysicalParams, PhysicsDomainError, default_tau,
                     derive_couplings, sql_force, thermal_occupation)

GOLDEN_TOL = 1e-4  # in units of pi / omega
COARSE_POINTS = 801


class NoMinimumError(RuntimeError):
    pass


class UnboundedSqueezingError(ValueError):
    pass


@dataclass(frozen=True)
class EnvelopePoint:
    t_slow: float
    lower: float
    upper: float  # math.inf when |Delta| reaches zero inside the cycle
    slow_part: float
    fast_amplitude: float

    @property
    def max_abs_delta(self) -> float:
        return abs(self.slow_part) + self.fast_amplitude

    @property
    def min_abs_delta(self) -> float:
        return max(abs(self.slow_part) - self.fast_amplitude, 0.0)


def fast_amplitude(d: DerivedParams) -> float:
    return math.sqrt(response_denominator(d))


def delta_envelope(d: DerivedParams, t: float, s: float = 0.0, nbar: float | None = None) -> EnvelopePoint:
    """Lower/upper envelope of f_min around slow time ``t``."""
    nbar = d.nbar if nbar is None else nbar
    P = float(delta_slow_part(d, t))
    R = fast_amplitude(d)
    c = coefficients(d, t)
    lower = float(f_min_from(d, c, s, nbar, abs_delta=abs(P) + R))
    lo_delta = max(abs(P) - R, 0.0)
    upper = math.inf if lo_delta == 0 else float(f_min_from(d, c, s, nbar, abs_delta=lo_delta))
    return EnvelopePoint(t_slow=float(t), lower=lower, upper=upper, slow_part=P, fast_amplitude=R)


def lower_envelope(d: DerivedParams, t, s=0.0, nbar: float | None = None):
    """Best f_min within the fast cycle at each slow time (vectorised over t or s)."""
    nbar = d.nbar if nbar is None else nbar
    c = coefficients(d, t)
    max_delta = np.abs(delta_slow_part(d, t)) + fast_amplitude(d)
    return f_min_from(d, c, s, nbar, abs_delta=max_delta)


def find_envelope_minimum(d: DerivedParams, k: int = 0, s: float = 0.0, nbar: float | None = None):
    """Local minimum of the lower envelope near (2k+1) pi/omega.

    Coarse grid on [(2k+0.2), (2k+1.8)] pi/omega, then golden-section
    refinement to 1e-4 pi/omega. Returns (t_k, f_min at t_k).
    """
    half = math.pi / d.omega
    grid = np.linspace((2 * k + 0.2) * half, (2 * k + 1.8) * half, COARSE_POINTS)
    values = lower_envelope(d, grid, s, nbar)
    i = int(np.argmin(values))
    if i == 0 or i == len(grid) - 1:
        raise NoMinimumError("envelope not unimodal in bracket")
    fn = functools.partial(_scalar_envelope, d, s=s, nbar=nbar)
    t_best = optimize.golden(fn, brack=(grid[i - 1], grid[i], grid[i + 1]),
                             tol=GOLDEN_TOL * half / grid[i])
    return float(t_best), float(fn(t_best))


def _scalar_envelope(d, t, s, nbar):
    return float(lower_envelope(d, t, s, nbar))


def find_first_minimum(p: PhysicalParams) -> tuple[float, float]:
    """First minimum t1 of the lower-envelope sensitivity for the parameters' s and T."""
    d = derive_couplings(p)
    return find_envelope_minimum(d, 0, p.squeezing, d.nbar)


def optimal_squeezing(d: DerivedParams, t: float, nbar: float | None = None) -> tuple[float, float]:
    """Two-mode squeezing minimising f_min at fixed t, and the lower-envelope f_min there.

    Stationarity gives tanh 2s = 2 A1 A2 / (A1^2 + A2^2), equivalently
    s = ln|(A1 + A2) / (A1 - A2)| / 2, the form used here.
    """
    c = coefficients(d, t)
    A_sum = float(c.A1 + c.A2)
    A_diff = float(c.A_diff)
    if A_diff == 0 or A_sum == 0:
        raise UnboundedSqueezingError("unbounded optimal squeezing (undamped degeneracy)")
    s_star = 0.5 * math.log(abs(A_sum / A_diff))
    return s_star, float(lower_envelope(d, t, s_star, nbar))


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

AXIS_NAMES = ("time", "squeezing", "damping", "temperature")
OUTPUTS = ("f_min", "F_newton", "sql_ratio", "log10_sql_ratio")
FLAGS = ("ok", "singular_delta", "invalid_params")


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    count: int
    scale: str = "linear"

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ParameterError("axis.name", f"must be one of {AXIS_NAMES}, got {self.name!r}")
        if self.scale not in ("linear", "log"):
            raise ParameterError("axis.scale", f"must be 'linear' or 'log', got {self.scale!r}")
        if not isinstance(self.count, int) or self.count < 2:
            raise ParameterError("axis.count", f"must be an integer >= 2, got {self.count!r}")
        if not self.min < self.max:
            raise ParameterError("axis.min", f"min ({self.min}) must be below max ({self.max})")
        if self.scale == "log" and not self.min > 0:
            raise ParameterError("axis.min", "log scale needs a positive minimum")

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.logspace(math.log10(self.min), math.log10(self.max), self.count)
        return np.linspace(self.min, self.max, self.count)


@dataclass(frozen=True)
class SweepSpec:
    """Grid definition.

    ``time`` fixes the interaction time when no axis is ``time``: a number in
    seconds, ``"first_min"`` (first envelope minimum at s = 0, T = 0 for the
    point's damping) or ``"pi_over_omega"``. ``tau`` is the SQL interaction
    time; None means 2 pi / Theta.
    """

    axis1: Axis
    axis2: Axis | None = None
    fixed: dict = field(default_factory=dict)
    output: str = "log10_sql_ratio"
    time: float | str = "first_min"
    tau: float | None = None

    def __post_init__(self):
        if self.output not in OUTPUTS:
            raise ParameterError("sweep.output", f"must be one of {OUTPUTS}, got {self.output!r}")
        if self.axis2 is not None and self.axis2.name == self.axis1.name:
            raise ParameterError("sweep.axis2", "must differ from axis1")
        if isinstance(self.time, str) and self.time not in ("first_min", "pi_over_omega"):
            raise ParameterError("sweep.time", f"unknown time rule {self.time!r}")

    @property
    def axes(self) -> list[Axis]:
        return [self.axis1] if self.axis2 is None else [self.axis1, self.axis2]

    def columns(self) -> list[str]:
        return [a.name for a in self.axes] + ["value", "f_min", "F_newton", "F_sql_newton", "sql_ratio", "flag"]


@dataclass
class SweepResult:
    columns: list[str]
    rows: list[dict]

    @property
    def flagged(self) -> int:
        return sum(1 for r in self.rows if r["flag"] != "ok")

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)


_PARAM_FOR_AXIS = {"squeezing": "squeezing", "damping": "damping_hz", "temperature": "temperature_k"}


@functools.lru_cache(maxsize=256)
def _first_min_time(p: PhysicalParams) -> float:
    d = derive_couplings(p.replace(squeezing=0.0, temperature_k=0.0))
    return find_envelope_minimum(d, 0, 0.0, 0.0)[0]


def evaluate_point(p: PhysicalParams, t: float | str, output: str, tau: float | None = None) -> dict:
    """One sweep row (without axis columns) for parameters ``p`` at time ``t``."""
    nan = math.nan
    try:
        d = derive_couplings(p)
        if t == "first_min":
            t = _first_min_time(p)
        elif t == "pi_over_omega":
            t = math.pi / d.omega
        fm = float(lower_envelope(d, t, p.squeezing, d.nbar))
    except (ParameterError, PhysicsDomainError, NoMinimumError):
        return {"value": nan, "f_min": nan, "F_newton": nan, "F_sql_newton": nan, "sql_ratio": nan,
                "flag": "invalid_params"}
    F_sql = sql_force(d.mass, d.Omega, default_tau(d.Theta) if tau is None else tau)
    if not math.isfinite(fm):
        return {"value": nan, "f_min": nan, "F_newton": nan, "F_sql_newton": F_sql, "sql_ratio": nan,
                "flag": "singular_delta"}
    F = fm * d.force_scale
    ratio = F / F_sql
    value = {"f_min": fm, "F_newton": F, "sql_ratio": ratio, "log10_sql_ratio": math.log10(ratio)}[output]
    return {"value": value, "f_min": fm, "F_newton": F, "F_sql_newton": F_sql, "sql_ratio": ratio, "flag": "ok"}


def sweep(spec: SweepSpec, base: PhysicalParams) -> SweepResult:
    """Evaluate ``spec.output`` on the grid, axis1-major, using the lower envelope."""
    try:
        base = base.replace(**spec.fixed)
    except TypeError as exc:
        raise ParameterError("sweep.fixed", str(exc)) from None
    grids = [a.values() for a in spec.axes]
    names = [a.name for a in spec.axes]
    rows = []
    for combo in itertools.product(*grids):
        point = dict(zip(names, (float(v) for v in combo)))
        changes = {_PARAM_FOR_AXIS[n]: v for n, v in point.items() if n != "time"}
        t = point.get("time", spec.time)
        try:
            p = base.replace(**changes)
        except ParameterError:
            row = {"value": math.nan, "f_min": math.nan, "F_newton": math.nan, "F_sql_newton": math.nan,
                   "sql_ratio": math.nan, "flag": "invalid_params"}
        else:
            row = evaluate_point(p, t, spec.output, spec.tau)
        rows.append({**point, **row})
    return SweepResult(columns=spec.columns(), rows=rows)


def nbar_for(temperature: float, p: PhysicalParams) -> float:
    return thermal_occupation(temperature, p.mech_freq_rad_s)

"""Moment-equation integration of the driven Heisenberg-Langevin system.

The model is linear with Gaussian white noise, so the mean vector and the
symmetrized covariance matrix obey closed ODEs:

    d(mean)/dt = A mean + u(t)
    d(cov)/dt  = A cov + cov A^T + D

They are advanced with classical fixed-step RK4. This path never uses the
closed-form solution and serves as the reference it is checked against.

Two coordinate systems are available. ``"quadrature"`` is the native basis
(X1, Y1, Xb, Yb, X2, Y2). ``"sum_difference"`` uses (X1 - X2, theta X1 - chi X2,
Xb, Yb, Y1 + Y2, theta Y1 + chi Y2): the measured quadrature sum is a
coordinate there, so it is not recovered by cancelling two numbers that are
~1e8 times larger than their sum.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .closed_form import coefficients, response_denominator, squeezing_bracket
from .params import DerivedParams, PhysicalParams, derive_couplings

BASES = ("quadrature", "sum_difference")
LABELS = {
    "quadrature": ("X1", "Y1", "Xb", "Yb", "X2", "Y2"),
    "sum_difference": ("X1-X2", "thX1-chX2", "Xb", "Yb", "Y1+Y2", "thY1+chY2"),
}
# weights w with Z = w . x for the measured quadrature Z = -(Y1 + Y2)
OBSERVABLE = {
    "quadrature": np.array([0.0, -1.0, 0.0, 0.0, 0.0, -1.0]),
    "sum_difference": np.array([0.0, 0.0, 0.0, 0.0, -1.0, 0.0]),
}
XB, YB = 2, 3


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class DriftModel:
    drift: np.ndarray
    drive_sin: np.ndarray
    drive_cos: np.ndarray
    drive_freq: float
    diffusion: np.ndarray
    basis: str = "quadrature"
    # reference trajectory ref_sin sin(Wt) + ref_cos cos(Wt) subtracted from the mean before stepping
    ref_sin: np.ndarray | None = None
    ref_cos: np.ndarray | None = None

    def drive(self, t: float) -> np.ndarray:
        return self.drive_sin * math.sin(self.drive_freq * t) + self.drive_cos * math.cos(self.drive_freq * t)

    def reference(self, t: float) -> np.ndarray:
        if self.ref_sin is None:
            return np.zeros(6)
        return self.ref_sin * math.sin(self.drive_freq * t) + self.ref_cos * math.cos(self.drive_freq * t)

    def deviation_drive(self) -> tuple[np.ndarray, np.ndarray]:
        """Sin/cos drive amplitudes felt by mean - reference."""
        if self.ref_sin is None:
            return self.drive_sin, self.drive_cos
        W = self.drive_freq
        us = (self.drive_sin + W * self.ref_cos) + self.drift @ self.ref_sin
        uc = (self.drive_cos - W * self.ref_sin) + self.drift @ self.ref_cos
        return us, uc

    @property
    def is_driven(self) -> bool:
        return bool(np.any(self.drive_sin) or np.any(self.drive_cos))

    def max_step(self) -> float:
        """Largest step allowed: 1/20 of the shortest period present (drive or natural)."""
        periods = []
        if self.is_driven and self.drive_freq > 0:
            periods.append(2 * math.pi / self.drive_freq)
        rate = float(np.max(np.abs(np.linalg.eigvals(self.drift)))) if np.any(self.drift) else 0.0
        if rate > 0:
            periods.append(2 * math.pi / rate)
        return min(periods) / 20 if periods else math.inf


@dataclass(frozen=True)
class MomentState:
    t: float
    mean: np.ndarray
    cov: np.ndarray
    basis: str = "quadrature"


def build_drift(d: DerivedParams, f: float, nbar: float, basis: str = "quadrature") -> DriftModel:
    """Drift, drive and diffusion of the linearised equations in the requested basis."""
    chi, theta, g, Om = d.chi, d.theta, d.gamma, d.Omega
    A = np.zeros((6, 6))
    if basis == "quadrature":
        X1, Y1, Xb, Yb, X2, Y2 = range(6)
        A[X1, Xb] = chi
        A[Y1, Yb] = -chi
        A[X2, Xb] = theta
        A[Y2, Yb] = theta
        A[Xb, X1] = chi
        A[Xb, X2] = -theta
        A[Yb, Y1] = -chi
        A[Yb, Y2] = -theta
    elif basis == "sum_difference":
        DX, KX, Xb, Yb, SY, LY = range(6)
        tmc, tpc = d.theta_minus_chi, d.theta_plus_chi
        A[DX, Xb] = -tmc
        A[Xb, DX] = tpc
        A[Xb, KX] = -1.0
        A[Yb, SY] = -tpc
        A[Yb, LY] = 1.0
        A[SY, Yb] = tmc
    else:
        raise ValueError(f"unknown basis {basis!r}")
    A[XB, XB] = A[YB, YB] = -2 * g
    drive_sin = np.zeros(6)
    drive_cos = np.zeros(6)
    drive_sin[XB] = -Om * f
    drive_cos[YB] = Om * f
    D = np.zeros((6, 6))
    D[XB, XB] = D[YB, YB] = g * (2 * nbar + 1)
    # The free mirror follows Xb = f cos(Wt), Yb = f sin(Wt). That O(f) fast motion
    # is ~1e8 times the slow part carrying the signal, so it is integrated analytically.
    ref_sin = np.zeros(6)
    ref_cos = np.zeros(6)
    ref_cos[XB] = f
    ref_sin[YB] = f
    return DriftModel(drift=A, drive_sin=drive_sin, drive_cos=drive_cos, drive_freq=Om, diffusion=D,
                      basis=basis, ref_sin=ref_sin, ref_cos=ref_cos)


def initial_moments(s: float, nbar: float, d: DerivedParams | None = None, basis: str = "quadrature") -> MomentState:
    """Two-mode squeezed sidebands times a thermal mirror, zero mean.

    The ``sum_difference`` basis needs the couplings ``d``; its entries are
    written in terms of exp(-2s) so the squeezed variances are exact.
    """
    cov = np.zeros((6, 6))
    mirror = (2 * nbar + 1) / 4
    cov[XB, XB] = cov[YB, YB] = mirror
    if basis == "quadrature":
        X1, Y1, _, _, X2, Y2 = range(6)
        ch, sh = math.cosh(2 * s) / 4, math.sinh(2 * s) / 4
        for i in (X1, Y1, X2, Y2):
            cov[i, i] = ch
        cov[X1, X2] = cov[X2, X1] = sh
        cov[Y1, Y2] = cov[Y2, Y1] = -sh
    elif basis == "sum_difference":
        if d is None:
            raise ValueError("sum_difference basis needs the derived couplings")
        small = math.exp(-2 * s)
        big = (d.theta_minus_chi**2 * math.cosh(2 * s) + 2 * d.theta * d.chi * small) / 4
        cross = d.theta_plus_chi * small / 4
        for diff, cons in ((0, 1), (4, 5)):
            cov[diff, diff] = small / 2
            cov[cons, cons] = big
            cov[diff, cons] = cov[cons, diff] = cross
    else:
        raise ValueError(f"unknown basis {basis!r}")
    return MomentState(t=0.0, mean=np.zeros(6), cov=cov, basis=basis)


@numba.njit(cache=True)
def _rhs_mean(A, m, us, uc, sn, cs, out):
    n = m.shape[0]
    for i in range(n):
        acc = us[i] * sn + uc[i] * cs
        for j in range(n):
            acc += A[i, j] * m[j]
        out[i] = acc


@numba.njit(cache=True)
def _rhs_cov(A, P, D, out):
    n = P.shape[0]
    AP = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                a = A[i, k]
                if a != 0.0:
                    acc += a * P[k, j]
            AP[i, j] = acc
    for i in range(n):
        for j in range(n):
            out[i, j] = AP[i, j] + AP[j, i] + D[i, j]


@numba.njit(cache=True)
def _rk4_run(m, P, A, D, us, uc, om, t0, h, nsteps, with_mean, with_cov):
    n = m.shape[0]
    k1 = np.empty(n); k2 = np.empty(n); k3 = np.empty(n); k4 = np.empty(n); tmp = np.empty(n)
    K1 = np.empty((n, n)); K2 = np.empty((n, n)); K3 = np.empty((n, n)); K4 = np.empty((n, n))
    Ptmp = np.empty((n, n))
    for step in range(nsteps):
        t = t0 + step * h
        if with_mean:
            s0 = math.sin(om * t); c0 = math.cos(om * t)
            s1 = math.sin(om * (t + 0.5 * h)); c1 = math.cos(om * (t + 0.5 * h))
            s2 = math.sin(om * (t + h)); c2 = math.cos(om * (t + h))
            _rhs_mean(A, m, us, uc, s0, c0, k1)
            for i in range(n):
                tmp[i] = m[i] + 0.5 * h * k1[i]
            _rhs_mean(A, tmp, us, uc, s1, c1, k2)
            for i in range(n):
                tmp[i] = m[i] + 0.5 * h * k2[i]
            _rhs_mean(A, tmp, us, uc, s1, c1, k3)
            for i in range(n):
                tmp[i] = m[i] + h * k3[i]
            _rhs_mean(A, tmp, us, uc, s2, c2, k4)
            for i in range(n):
                m[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if with_cov:
            _rhs_cov(A, P, D, K1)
            for i in range(n):
                for j in range(n):
                    Ptmp[i, j] = P[i, j] + 0.5 * h * K1[i, j]
            _rhs_cov(A, Ptmp, D, K2)
            for i in range(n):
                for j in range(n):
                    Ptmp[i, j] = P[i, j] + 0.5 * h * K2[i, j]
            _rhs_cov(A, Ptmp, D, K3)
            for i in range(n):
                for j in range(n):
                    Ptmp[i, j] = P[i, j] + h * K3[i, j]
            _rhs_cov(A, Ptmp, D, K4)
            for i in range(n):
                for j in range(n):
                    P[i, j] += h / 6.0 * (K1[i, j] + 2.0 * K2[i, j] + 2.0 * K3[i, j] + K4[i, j])
            for i in range(n):
                for j in range(i + 1, n):
                    avg = 0.5 * (P[i, j] + P[j, i])
                    P[i, j] = avg
                    P[j, i] = avg


def integrate(model: DriftModel, state: MomentState, t_end: float, dt: float,
              mean: bool = True, cov: bool = True) -> MomentState:
    """Advance ``state`` to ``t_end`` with RK4 steps no longer than ``dt``.

    The step is shrunk to land exactly on ``t_end``. ``mean``/``cov`` switch
    either half off; a skipped half is returned unchanged.
    """
    if state.basis != model.basis:
        raise ValueError(f"state basis {state.basis!r} does not match model basis {model.basis!r}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    limit = model.max_step() if mean else _undriven_limit(model)
    if dt > limit * (1 + 1e-12):
        raise IntegrationError(f"fast scale under-resolved: dt={dt:.3g} s exceeds {limit:.3g} s")
    span = t_end - state.t
    if span < 0:
        raise ValueError("t_end precedes the state time")
    m = state.mean.astype(float) - model.reference(state.t)
    P = state.cov.astype(float).copy()
    if span > 0:
        nsteps = int(math.ceil(span / dt - 1e-9))
        h = span / nsteps
        us, uc = model.deviation_drive()
        _rk4_run(m, P, model.drift, model.diffusion, us, uc,
                 model.drive_freq, state.t, h, nsteps, mean, cov)
    m = m + model.reference(t_end)
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(P))):
        raise IntegrationError(f"integration diverged before t={t_end:.6g} s")
    return MomentState(t=float(t_end), mean=m, cov=P, basis=state.basis)


def _undriven_limit(model: DriftModel) -> float:
    """Step limit when only the covariance (which never sees the drive) is advanced."""
    if not np.any(model.drift):
        return math.inf
    rate = float(np.max(np.abs(np.linalg.eigvals(model.drift))))
    return 2 * math.pi / rate / 20 if rate > 0 else math.inf


def integrate_path(model: DriftModel, state: MomentState, times, dt: float,
                   mean: bool = True, cov: bool = True) -> list[MomentState]:
    """States at each of the increasing ``times`` (all >= state.t)."""
    out = []
    current = state
    for t in times:
        current = integrate(model, current, float(t), dt, mean=mean, cov=cov)
        out.append(current)
    return out


def observable_stats(state: MomentState) -> tuple[float, float]:
    """Mean and variance of the measured quadrature sum -(Y1 + Y2)."""
    w = OBSERVABLE[state.basis]
    return float(w @ state.mean), float(w @ state.cov @ w)


def is_physical(state: MomentState, atol: float = 1e-9) -> bool:
    """Uncertainty relation cov + (i/4) Omega >= 0 (quadrature basis only)."""
    if state.basis != "quadrature":
        raise ValueError("physicality check is defined in the quadrature basis")
    symplectic = np.kron(np.eye(3), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    eig = np.linalg.eigvalsh(state.cov + 0.25j * symplectic)
    return bool(eig.min() >= -atol * max(1.0, np.abs(eig).max()))


# ---------------------------------------------------------------------------
# Verification against the closed forms
# ---------------------------------------------------------------------------

@dataclass
class PointError:
    gamma: float
    s: float
    nbar: float
    t: float
    signal_oracle: float
    signal_closed: float
    signal_rel_err: float
    noise_oracle: float
    noise_closed: float
    noise_rel_err: float

    @property
    def worst(self) -> float:
        return max(self.signal_rel_err, self.noise_rel_err)


@dataclass
class VerificationReport:
    points: list[PointError]
    tolerance: float
    settings: dict = field(default_factory=dict)

    @property
    def max_signal_error(self) -> float:
        return max(p.signal_rel_err for p in self.points)

    @property
    def max_noise_error(self) -> float:
        return max(p.noise_rel_err for p in self.points)

    @property
    def max_error(self) -> float:
        return max(self.max_signal_error, self.max_noise_error)

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance

    def worst_points(self, k: int = 5) -> list[PointError]:
        return sorted(self.points, key=lambda p: p.worst, reverse=True)[:k]

    def to_dict(self) -> dict:
        def row(p):
            return {"gamma": p.gamma, "s": p.s, "nbar": p.nbar, "t": p.t,
                    "signal_oracle": p.signal_oracle, "signal_closed": p.signal_closed,
                    "signal_rel_err": p.signal_rel_err, "noise_oracle": p.noise_oracle,
                    "noise_closed": p.noise_closed, "noise_rel_err": p.noise_rel_err}
        return {
            "passed": self.passed,
            "tolerance": self.tolerance,
            "max_signal_rel_err": self.max_signal_error,
            "max_noise_rel_err": self.max_noise_error,
            "max_rel_err": self.max_error,
            "n_points": len(self.points),
            "settings": self.settings,
            "worst_points": [row(p) for p in self.worst_points()],
            "points": [row(p) for p in self.points],
        }


@contextlib.contextmanager
def _point_context(**where):
    try:
        yield
    except IntegrationError as exc:
        label = ", ".join(f"{k}={v}" for k, v in where.items())
        raise IntegrationError(f"{exc} [{label}]") from None


def verify_against_closed_form(p: PhysicalParams, t_grid, s_list, nbar_list, gamma_list=None,
                               dt: float | None = None, cov_dt: float | None = None,
                               tolerance: float = 1e-6, basis: str = "sum_difference",
                               closed=None) -> VerificationReport:
    """Compare oracle moments with closed-form signal and noise on a grid.

    The mean is integrated once per damping value with the drive resolved
    (default step: drive period / 40). The covariance equation does not
    contain the drive, so it is integrated separately on the slow scale
    (default step: slow period / 2000).

    Signal errors are relative to max(|closed-form signal|, fast-response
    amplitude |theta - chi| f Omega R / R^2), because the signal crosses zero
    twice per drive period and a pointwise ratio is meaningless there.
    ``closed`` replaces the closed-form coefficient function (negative controls).
    """
    t_grid = np.sort(np.asarray(t_grid, dtype=float))
    if len(t_grid) == 0 or len(s_list) == 0 or len(nbar_list) == 0:
        raise ValueError("verification grids must be non-empty")
    coeff_fn = closed or coefficients
    gammas = [p.damping_hz] if gamma_list is None else list(gamma_list)
    f = p.force
    points: list[PointError] = []
    steps_used = {}
    for gamma in gammas:
        d = derive_couplings(p.replace(damping_hz=gamma))
        driven = build_drift(d, f, 0.0, basis)
        h_mean = dt if dt is not None else 2 * math.pi / d.Omega / 40
        start = initial_moments(0.0, 0.0, d, basis)
        with _point_context(gamma=gamma, part="mean"):
            means = [observable_stats(st)[0] for st in integrate_path(driven, start, t_grid, h_mean, cov=False)]
        c = coeff_fn(d, t_grid)
        sig_closed = np.abs(d.theta_minus_chi * c.G_over_f * f)
        R = math.sqrt(response_denominator(d))
        sig_scale = abs(d.theta_minus_chi * f) * d.Omega * R / R**2
        h_cov = cov_dt if cov_dt is not None else 2 * math.pi / d.omega / 2000
        steps_used[str(gamma)] = {"mean_dt": h_mean, "cov_dt": h_cov}
        for nbar in nbar_list:
            undriven = build_drift(d, 0.0, nbar, basis)
            for s in s_list:
                start = initial_moments(s, nbar, d, basis)
                with _point_context(gamma=gamma, s=s, nbar=nbar, part="covariance"):
                    states = integrate_path(undriven, start, t_grid, h_cov, mean=False)
                thermal = (2 * nbar + 1) * (c.B**2 + c.E2)
                noise_closed = d.theta_minus_chi**2 * (squeezing_bracket(c.A1, c.A2, c.A_diff, s) + thermal) / 4
                for i, (t, st) in enumerate(zip(t_grid, states)):
                    _, var = observable_stats(st)
                    sig = abs(means[i])
                    sc = float(sig_closed[i])
                    nc = float(noise_closed[i])
                    points.append(PointError(
                        gamma=float(gamma), s=float(s), nbar=float(nbar), t=float(t),
                        signal_oracle=sig, signal_closed=sc,
                        signal_rel_err=abs(sig - sc) / max(sc, sig_scale),
                        noise_oracle=var, noise_closed=nc,
                        noise_rel_err=abs(var - nc) / abs(nc)))
    settings = {"method": "rk4-fixed-step", "basis": basis, "steps": steps_used,
                "force": f}
    return VerificationReport(points=points, tolerance=tolerance, settings=settings)

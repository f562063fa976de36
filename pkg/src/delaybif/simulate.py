"""Method-of-steps integration of the delayed swing equation.

Each step is a Dormand-Prince 5(4) pair. Delayed values are read from the
trajectory's own quartic continuous extension, never extrapolated: steps
are clamped to the delay so that ``t + h - tau`` stays inside accepted
history. Derivative jumps at ``k * tau`` (from a constant initial function)
are hit exactly.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .model import PhysicalParams, SwingParams

__all__ = [
    "Constant",
    "Segment",
    "Trajectory",
    "StepSizeError",
    "integrate",
    "Section",
    "Crossing",
    "poincare_section",
]

# Dormand-Prince tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_E = _B - np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
# Continuous extension (Shampine), coefficients of theta, theta^2, theta^3, theta^4.
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


class StepSizeError(RuntimeError):
    """Step size underflow: the requested accuracy cannot be met."""


@dataclass(frozen=True)
class Constant:
    """Initial function equal to ``x`` on the whole history interval."""

    x: tuple

    def __call__(self, t):
        t = np.atleast_1d(t)
        return np.broadcast_to(np.asarray(self.x, dtype=float), (t.size, 2)).copy()

    def derivative_jump_free(self):
        return False


class Segment:
    """Initial function sampled on a mesh covering ``[-tau, 0]``, Hermite-interpolated."""

    def __init__(self, times, values, derivatives):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise ValueError("initial segment values must be finite")
        self.start, self.end = float(times[0]), float(times[-1])
        self._spline = CubicHermiteSpline(times, values, np.asarray(derivatives, dtype=float), axis=0)
        self.x = tuple(values[-1])

    def __call__(self, t):
        t = np.atleast_1d(t)
        if np.any(t < self.start - 1e-12) or np.any(t > self.end + 1e-12):
            raise ValueError("history query outside the initial segment")
        return self._spline(t)

    def derivative_jump_free(self):
        return True

    @classmethod
    def from_orbit(cls, orbit, tau=None, n=None):
        """History taken from a periodic orbit, phase origin at ``t = 0``."""
        tau = orbit.tau if tau is None else tau
        T = orbit.period
        n = n or max(64, int(40 * max(1.0, tau / T)) * 8)
        t = np.linspace(-tau, 0.0, n + 1) if tau > 0 else np.array([-1e-9, 0.0])
        s = (t / T) % 1.0
        return cls(t, orbit(s), orbit(s, derivative=True) / T)


def _coefficients(params):
    if isinstance(params, PhysicalParams):
        return params.a_hat, params.atilde_hat, params.ks_hat, params.w_hat, params.tau_hat
    return params.a, params.atilde, 1.0, params.w, params.tau


@dataclass
class Trajectory:
    """Dense solution on ``[-tau, t_end]`` in shifted coordinates ``x = (y - offset, y')``."""

    tau: float
    offset: float
    phi: object
    t: list = field(default_factory=list)
    y: list = field(default_factory=list)
    k: list = field(default_factory=list)
    breakpoints: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    @property
    def t_end(self):
        return self.t[-1]

    @property
    def steps(self):
        return np.diff(self.t)

    def _dense(self, j, s):
        t0, h = self.t[j], self.t[j + 1] - self.t[j]
        th = (s - t0) / h
        powers = np.stack([th, th**2, th**3, th**4])
        return self.y[j] + h * (np.asarray(self.k[j]).T @ (_P @ powers)).T

    def __call__(self, times):
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if times.size and (times.min() < -self.tau - 1e-12 or times.max() > self.t_end + 1e-12):
            raise ValueError("query outside the integrated interval")
        out = np.empty((times.size, 2))
        hist = times <= 0.0
        if np.any(hist):
            out[hist] = self.phi(times[hist]) if self.tau > 0 else np.asarray(self.y[0])
        rest = np.nonzero(~hist)[0]
        if rest.size:
            tt = np.asarray(self.t)
            j = np.clip(np.searchsorted(tt, times[rest], side="left") - 1, 0, len(self.k) - 1)
            for jj in np.unique(j):
                sel = rest[j == jj]
                out[sel] = self._dense(jj, times[sel])
        return out

    def value(self, s):
        """Scalar lookup used inside the stepper."""
        if s <= 0.0:
            return self.phi(s)[0] if self.tau > 0 else self.y[0]
        j = bisect.bisect_left(self.t, s) - 1
        j = min(max(j, 0), len(self.k) - 1)
        return self._dense(j, np.array([s]))[0]

    def sample(self, dt, t0=0.0):
        times = np.arange(t0, self.t_end + 1e-12, dt)
        return times, self(times)


def integrate(params, phi, t_end, tol=1e-8, h0=None, max_steps=2_000_000) -> Trajectory:
    """Integrate from the initial function ``phi`` up to ``t_end``.

    ``params`` is either :class:`SwingParams` or :class:`PhysicalParams`;
    ``phi`` is a :class:`Constant` or :class:`Segment` in shifted coordinates.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if not 1e-12 <= tol <= 1e-3:
        raise ValueError("tol must lie in [1e-12, 1e-3]")
    a, at, ks, w, tau = _coefficients(params)
    ratio = w / ks
    offset = math.asin(ratio) if 0 < ratio <= 1 else 0.0
    if isinstance(phi, Segment) and tau > 0 and phi.start > -tau + 1e-9:
        raise ValueError("initial segment must cover [-tau, 0]")

    x0 = np.asarray(phi(np.array([0.0]))[0], dtype=float)
    traj = Trajectory(tau=tau, offset=offset, phi=phi, t=[0.0], y=[x0])

    def rhs(t, x):
        xd = x[1] if tau == 0 else traj.value(t - tau)[1]
        return np.array([x[1], -a * x[1] - at * xd - ks * math.sin(x[0] + offset) + w])

    # Derivative jumps of a constant history propagate to k*tau, smoothing by one order each time.
    breaks = []
    if tau > 0 and not phi.derivative_jump_free():
        breaks = [k * tau for k in range(1, 7) if k * tau < t_end]
    traj.breakpoints = [0.0] + breaks
    targets = breaks + [t_end]

    t, x = 0.0, x0
    f0 = rhs(t, x)
    scale = tol + tol * np.abs(x)
    if h0 is None:
        h0 = 0.01 * max(float(np.sqrt(np.mean((x / scale) ** 2))), 1e-5) / max(
            float(np.sqrt(np.mean((f0 / scale) ** 2))), 1e-5)
        h0 = min(max(h0, 1e-6), 0.1)
    h = h0
    ti = 0
    K = np.empty((7, 2))
    for _ in range(max_steps):
        if t >= t_end:
            break
        while ti < len(targets) and targets[ti] <= t + 1e-12 * max(1.0, t):
            ti += 1
        h = min(h, targets[ti] - t)
        if tau > 0:
            h = min(h, tau)
        if h < 1e-13 * max(1.0, abs(t)):
            raise StepSizeError(f"step size underflow at t={t}")
        K[0] = f0
        for i in range(1, 7):
            xi = x + h * (np.asarray(_A[i]) @ K[:i])
            # stages evaluate the delayed term from accepted history only (h <= tau)
            K[i] = rhs(t + _C[i] * h, xi)
        x_new = x + h * (_B @ K)
        err_vec = h * (_E @ K)
        sc = tol + tol * np.maximum(np.abs(x), np.abs(x_new))
        err = float(np.sqrt(np.mean((err_vec / sc) ** 2)))
        if err <= 1.0:
            t_new = t + h
            if ti < len(targets) and abs(t_new - targets[ti]) <= 1e-12 * max(1.0, t_new):
                t_new = targets[ti]
            traj.t.append(t_new)
            traj.y.append(x_new.copy())
            traj.k.append(K.copy())
            traj.errors.append(err)
            t, x = t_new, x_new
            f0 = K[6].copy()
            fac = 5.0 if err == 0 else min(5.0, 0.9 * err ** -0.2)
        else:
            fac = max(0.2, 0.9 * err ** -0.2)
        h *= fac
    else:
        raise StepSizeError("maximum number of steps exceeded")
    return traj


@dataclass(frozen=True)
class Section:
    """Hyperplane ``normal . x = offset`` crossed in the sense of ``direction``.

    ``bounds`` optionally restricts accepted crossing points per coordinate,
    e.g. ``((2.1, inf), (-inf, 0))`` for ``x1 > 2.1, x2 < 0``.
    """

    normal: tuple = (0.0, 1.0)
    offset: float = 0.0
    direction: int = 1
    bounds: tuple | None = None

    def __post_init__(self):
        if not np.any(np.asarray(self.normal, dtype=float)):
            raise ValueError("section normal must be nonzero")


@dataclass(frozen=True)
class Crossing:
    t: float
    x: tuple
    ambiguous: bool = False


def poincare_section(traj: Trajectory, section: Section, t_min=0.0, grazing_tol=1e-9, time_tol=1e-10):
    """Oriented crossings of ``section`` located on the dense interpolant."""
    nrm = np.asarray(section.normal, dtype=float)
    t = np.asarray(traj.t)
    y = np.asarray(traj.y)
    g = y @ nrm - section.offset
    out = []
    a = a0 = np.searchsorted(t, t_min)

    def gfun(s):
        return float(traj(np.array([s]))[0] @ nrm - section.offset)

    for j in range(max(a0, 1), t.size):
        g0, g1 = g[j - 1], g[j]
        # sub-sample the step so double crossings inside one step are not missed
        ts = np.linspace(t[j - 1], t[j], 5)
        gs = traj(ts) @ nrm - section.offset
        gs[0], gs[-1] = g0, g1
        for m in range(4):
            lo, hi = ts[m], ts[m + 1]
            glo, ghi = gs[m], gs[m + 1]
            if glo == 0.0 and m > 0:
                continue
            if not ((glo < 0 <= ghi and section.direction > 0) or (glo > 0 >= ghi and section.direction < 0)):
                continue
            while hi - lo > time_tol:
                mid = 0.5 * (lo + hi)
                gm = gfun(mid)
                if (gm < 0) == (glo < 0):
                    lo, glo = mid, gm
                else:
                    hi = mid
            tc = 0.5 * (lo + hi)
            xc = traj(np.array([tc]))[0]
            if section.bounds is not None:
                ok = all(b[0] <= v <= b[1] for v, b in zip(xc, section.bounds))
                if not ok:
                    continue
            dt = 1e-7 * max(1.0, abs(tc))
            xa = traj(np.array([max(tc - dt, -traj.tau if traj.tau > 0 else 0.0), min(tc + dt, traj.t_end)]))
            vel = float((xa[1] - xa[0]) @ nrm) / (2 * dt)
            out.append(Crossing(tc, tuple(xc), abs(vel) < grazing_tol))
    return out

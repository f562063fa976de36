"""Closed-form stability switching of the delayed-damping oscillator.

For ``y'' + a y' + atilde y'(t - tau) + c y = 0`` with ``c > 0`` and
``a < atilde`` two sequences of delays put a root pair on the imaginary axis:

    tau1n = (arccos(-a/atilde) + 2 pi n) / omega1      (destabilizing)
    tau2n = (2 pi (n + 1) - arccos(-a/atilde)) / omega2 (restabilizing)

with ``omega1,2 = +-sqrt(atilde^2 - a^2)/2 + sqrt(c + (atilde^2 - a^2)/4)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .model import Branch, Equilibrium, InvalidParameterError, SwingParams

N_UPPER = 32


@dataclass(frozen=True)
class HopfFrequencies:
    omega1: float
    omega2: float


@dataclass(frozen=True)
class HopfPoint:
    """One delay at which a root pair ``+-i omega`` sits on the imaginary axis."""

    family: int
    n: int
    tau: float
    omega: float
    crossing: int


@dataclass(frozen=True)
class HopfPointTable:
    """Both Hopf sequences up to ``n_upper``, with flags for the degenerate cases.

    ``delay_independent`` is set when ``atilde < a`` (no crossings at all),
    ``nonhyperbolic`` when ``c <= 0`` (a real root at or right of zero), and
    ``bautin`` when ``atilde == a`` (both families coincide).
    """

    a: float
    atilde: float
    c: float
    tau1: np.ndarray = field(repr=False)
    tau2: np.ndarray = field(repr=False)
    omega: HopfFrequencies | None
    crossing_dir: tuple = (1, -1)
    delay_independent: bool = False
    nonhyperbolic: bool = False
    bautin: bool = False

    @property
    def empty(self):
        return self.tau1.size == 0 and self.tau2.size == 0

    def family(self, j):
        """Hopf points of family ``j`` (1 or 2), ascending."""
        taus = self.tau1 if j == 1 else self.tau2
        if self.omega is None:
            return []
        om = self.omega.omega1 if j == 1 else self.omega.omega2
        cr = self.crossing_dir[j - 1]
        return [HopfPoint(j, n, float(t), om, cr) for n, t in enumerate(taus)]

    def points(self):
        """All Hopf points sorted by delay."""
        return sorted(self.family(1) + self.family(2), key=lambda p: (p.tau, p.family))


def hopf_frequencies(a, atilde, c) -> HopfFrequencies:
    """Crossing frequencies ``omega1 >= omega2``; requires ``atilde >= a`` and ``c >= 0``."""
    d = atilde * atilde - a * a
    if d < 0:
        raise InvalidParameterError("crossing frequencies need atilde >= a")
    r = math.sqrt(c + 0.25 * d)
    h = 0.5 * math.sqrt(d)
    return HopfFrequencies(h + r, r - h)


def _tau1(n, a, atilde, om1):
    return (math.acos(-a / atilde) + 2 * math.pi * n) / om1


def _tau2(n, a, atilde, om2):
    return (2 * math.pi * (n + 1) - math.acos(-a / atilde)) / om2


def hopf_points(a, atilde, c, n_upper=N_UPPER) -> HopfPointTable:
    """Hopf delays of both families for ``n = 0..n_upper``.

    Parameters
    ----------
    a, atilde : float
        Instantaneous and delayed damping, non-negative.
    c : float
        Restoring coefficient of the linearization (``cos y_e``).
    n_upper : int
        Largest index returned in each family.

    Returns
    -------
    HopfPointTable
        Empty, with a flag, when ``atilde < a`` or ``c <= 0``. For
        ``atilde == a`` both families reduce to ``pi (2n+1)/sqrt(c)``.
    """
    if n_upper < 0:
        raise InvalidParameterError("n_upper must be non-negative")
    if not all(math.isfinite(v) for v in (a, atilde, c)) or a < 0 or atilde <= 0:
        raise InvalidParameterError("need finite a >= 0 and atilde > 0")
    empty = np.array([])
    if c <= 0:
        return HopfPointTable(a, atilde, c, empty, empty, None, nonhyperbolic=True)
    if atilde < a:
        return HopfPointTable(a, atilde, c, empty, empty, None, delay_independent=True)
    om = hopf_frequencies(a, atilde, c)
    n = range(n_upper + 1)
    t1 = np.array([_tau1(k, a, atilde, om.omega1) for k in n])
    t2 = np.array([_tau2(k, a, atilde, om.omega2) for k in n])
    return HopfPointTable(a, atilde, c, t1, t2, om, bautin=(atilde == a))


def hopf_table(params: SwingParams, n_upper=N_UPPER) -> HopfPointTable:
    """Hopf table of the lower equilibrium of the swing equation."""
    return hopf_points(params.a, params.atilde, params.c, n_upper)


class Verdict(enum.Enum):
    ASYMPTOTICALLY_STABLE = "asymptotically stable"
    UNSTABLE = "unstable"
    NON_HYPERBOLIC = "non-hyperbolic"


@dataclass(frozen=True)
class UnstableDelaySet:
    """Union of open delay intervals where the equilibrium is unstable.

    ``intervals`` are ``(tau1n, tau2n)`` for ``n <= n_max`` followed by the
    ray ``(tau1_{n_max+1}, inf)``. ``n_max`` is -1 when even ``tau20`` lies
    beyond ``tau11``.
    """

    n_max: int | None
    intervals: tuple
    a: float = 0.0
    atilde: float = 0.0
    c: float = 0.0

    @property
    def n_max_ordinal(self):
        """``n_max`` with Hopf delays labelled by ordinal (first delay = 1), i.e. the
        number of bounded unstable intervals."""
        return None if self.n_max is None else self.n_max + 1

    def contains(self, tau):
        return any(lo < tau < hi for lo, hi in self.intervals)

    def boundaries(self):
        return [v for iv in self.intervals for v in iv if math.isfinite(v)]

    def verdict(self, tau, rel_tol=1e-12):
        """Stability at ``tau``; delays on a boundary are non-hyperbolic."""
        for b in self.boundaries():
            if abs(tau - b) <= rel_tol * max(1.0, abs(tau)):
                return Verdict.NON_HYPERBOLIC
        return Verdict.UNSTABLE if self.contains(tau) else Verdict.ASYMPTOTICALLY_STABLE


def unstable_set(table: HopfPointTable) -> UnstableDelaySet:
    """Unstable delays from a Hopf table, with ``n_max = max{n : tau2n < tau1(n+1)}``.

    Ordering is decided on freshly evaluated formula values, not on the
    stored arrays, so ``n_max`` does not depend on ``n_upper``.
    """
    if table.omega is None or table.bautin:
        return UnstableDelaySet(None if table.bautin else -1, (), table.a, table.atilde, table.c)
    a, at = table.a, table.atilde
    om1, om2 = table.omega.omega1, table.omega.omega2
    n = 0
    while _tau2(n, a, at, om2) < _tau1(n + 1, a, at, om1):
        n += 1
    n_max = n - 1
    iv = [(_tau1(k, a, at, om1), _tau2(k, a, at, om2)) for k in range(n_max + 1)]
    iv.append((_tau1(n_max + 1, a, at, om1), math.inf))
    return UnstableDelaySet(n_max, tuple(iv), a, at, table.c)


def _count_below(tau, offset, omega):
    # number of n >= 0 with (offset + 2 pi n)/omega < tau
    x = (omega * tau - offset) / (2 * math.pi)
    return max(0, math.ceil(x)) if x > 0 else 0


def unstable_count(table: HopfPointTable, tau) -> int:
    """Number of characteristic roots in the open right half-plane at ``tau``.

    Uses ``2 (#{tau1n < tau} - #{tau2n < tau})``; meaningful only for
    ``c > 0`` and off the Hopf delays.
    """
    if table.omega is None:
        if table.nonhyperbolic:
            raise InvalidParameterError("root count formula needs c > 0")
        return 0
    th = math.acos(-table.a / table.atilde)
    n1 = _count_below(tau, th, table.omega.omega1)
    n2 = _count_below(tau, 2 * math.pi - th, table.omega.omega2)
    return 2 * (n1 - n2)


@dataclass(frozen=True)
class StabilityVerdict:
    verdict: Verdict
    n_unstable: int | None
    reason: str
    adjacent: tuple = ()


def classify_equilibrium(params: SwingParams, eq: Equilibrium) -> StabilityVerdict:
    """Stability of an equilibrium of the swing equation at ``params.tau``.

    Upper-branch equilibria are saddles for every delay. On the lower branch
    the verdict is delay independent when ``atilde < a`` and otherwise read
    from the unstable delay set. A delay exactly on a Hopf delay is reported
    as non-hyperbolic, with the verdicts on either side attached.
    """
    if not 0 < params.w <= 1:
        raise InvalidParameterError("equilibria exist only for 0 < w <= 1")
    if eq.degenerate or eq.c == 0.0:
        return StabilityVerdict(Verdict.NON_HYPERBOLIC, None, "zero root at the fold w = 1")
    if eq.kind is Branch.UPPER:
        return StabilityVerdict(Verdict.UNSTABLE, None, "upper branch: delay-independently unstable")
    table = hopf_points(params.a, params.atilde, eq.c)
    if table.delay_independent:
        return StabilityVerdict(Verdict.ASYMPTOTICALLY_STABLE, 0, "atilde < a: delay-independently stable")
    if table.bautin:
        return StabilityVerdict(Verdict.NON_HYPERBOLIC if _on_bautin_delay(eq.c, params.tau)
                                else Verdict.ASYMPTOTICALLY_STABLE, 0, "atilde = a")
    uset = unstable_set(table)
    tau = params.tau
    v = uset.verdict(tau)
    if v is Verdict.NON_HYPERBOLIC:
        eps = 1e-9 * max(1.0, tau)
        left, right = uset.verdict(tau - eps), uset.verdict(tau + eps)
        return StabilityVerdict(v, None, "on a Hopf delay", (left, right))
    return StabilityVerdict(v, unstable_count(table, tau), "delay-dependent switching")


def _on_bautin_delay(c, tau, rel_tol=1e-12):
    om = math.sqrt(c)
    k = (om * tau / math.pi - 1.0) / 2.0
    return abs(k - round(k)) * 2 * math.pi / om <= rel_tol * max(1.0, tau) and round(k) >= 0


class Codim2Kind(enum.Enum):
    HOPF_HOPF = "HopfHopf"
    BAUTIN = "Bautin"
    FOLD_HOPF = "FoldHopf"


@dataclass(frozen=True)
class Codim2Point:
    """A codimension-two point; ``location`` is ``(tau, atilde)`` or ``(tau, w)``."""

    kind: Codim2Kind
    location: tuple
    frequencies: tuple
    indices: tuple = ()
    extra: dict = field(default_factory=dict, compare=False)


def hopf_hopf_points(a, c, atilde_range, tau_window, n_upper=3, m_upper=3, grid=4001):
    """Intersections ``tau1n(atilde) = tau2m(atilde)`` in the ``(tau, atilde)`` plane."""
    lo, hi = max(float(atilde_range[0]), a * (1 + 1e-12)), float(atilde_range[1])
    if not hi > lo or c <= 0:
        return []
    grid_a = np.linspace(lo, hi, grid)

    def t1(at, n):
        return _tau1(n, a, at, hopf_frequencies(a, at, c).omega1)

    def t2(at, m):
        return _tau2(m, a, at, hopf_frequencies(a, at, c).omega2)

    out = []
    for n in range(n_upper + 1):
        for m in range(m_upper + 1):
            f = np.array([t1(x, n) - t2(x, m) for x in grid_a])
            idx = np.where(np.sign(f[:-1]) * np.sign(f[1:]) < 0)[0]
            for i in idx:
                at = brentq(lambda x: t1(x, n) - t2(x, m), grid_a[i], grid_a[i + 1], xtol=1e-15)
                tau = t1(at, n)
                if tau_window[0] <= tau <= tau_window[1]:
                    om = hopf_frequencies(a, at, c)
                    out.append(Codim2Point(Codim2Kind.HOPF_HOPF, (tau, at), (om.omega1, om.omega2), (n, m)))
    return sorted(out, key=lambda p: p.location)


def bautin_delays(w, n_upper=3):
    """Candidate delays on the ``atilde = a`` line, from both competing formulas.

    Returns ``(derived, stated)``: ``pi (2n+1) (1-w^2)^(-1/4)`` follows from
    ``omega = sqrt(c)`` with ``c = sqrt(1-w^2)``; ``pi (2n+1) (1-w^2)^(-1/2)``
    is the alternative with the square root dropped.
    """
    base = 1.0 - w * w
    n = np.arange(n_upper + 1)
    derived = np.pi * (2 * n + 1) * base ** -0.25
    stated = np.pi * (2 * n + 1) * base ** -0.5
    return derived, stated


def codim2_points(a, atilde_range, w, tau_window=(0.0, 50.0), n_upper=3, m_upper=3, grid=4001):
    """Codimension-two points near a damping range for drive ``w``.

    Parameters
    ----------
    a : float
        Instantaneous damping.
    atilde_range : float or (float, float)
        Delayed damping value or interval.
    w : float
        Drive, ``0 < w <= 1``.
    tau_window : (float, float)
        Delays of interest.

    Returns
    -------
    list of Codim2Point
        Hopf-Hopf intersections inside the range (``w < 1``); the Bautin
        line ``atilde = a`` when it lies in the range, with both candidate
        delay formulas and their characteristic residuals in ``extra``;
        fold-Hopf points ``(tau1n, w = 1)`` for ``w = 1`` and a scalar
        ``atilde > a``.
    """
    if np.ndim(atilde_range) == 0:
        rng = (float(atilde_range), float(atilde_range))
    else:
        rng = (float(atilde_range[0]), float(atilde_range[1]))
    if not 0 < w <= 1:
        raise InvalidParameterError("need 0 < w <= 1")
    if rng[1] < rng[0] or tau_window[1] <= tau_window[0]:
        return []
    c = math.sqrt(max(0.0, 1.0 - w * w))
    out = []
    if w < 1 and rng[1] > rng[0]:
        out += hopf_hopf_points(a, c, rng, tau_window, n_upper, m_upper, grid)
    if rng[0] <= a <= rng[1] and c > 0:
        from .spectrum import Quasipolynomial, char_eval

        derived, stated = bautin_delays(w, n_upper)
        om = math.sqrt(c)
        res = [[abs(char_eval(Quasipolynomial(a, a, c, t), 1j * om)) for t in ts]
               for ts in (derived, stated)]
        out.append(Codim2Point(Codim2Kind.BAUTIN, (None, a), (om,), (),
                               {"tau_derived": derived, "tau_stated": stated,
                                "residual_derived": np.array(res[0]),
                                "residual_stated": np.array(res[1])}))
    if w == 1 and rng[0] == rng[1] and rng[0] > a:
        at = rng[0]
        om1 = math.sqrt(at * at - a * a)
        n = 0
        while True:
            tau = _tau1(n, a, at, om1)
            if tau > tau_window[1]:
                break
            if tau >= tau_window[0]:
                out.append(Codim2Point(Codim2Kind.FOLD_HOPF, (tau, 1.0), (om1, 0.0), (n,)))
            n += 1
    return out


@dataclass(frozen=True)
class StabilityChart:
    """Unstable root count on a ``(tau, atilde)`` grid, ``n_u[i, j]`` at ``(taus[j], atildes[i])``."""

    taus: np.ndarray
    atildes: np.ndarray
    n_u: np.ndarray


def stability_chart(a, c, taus, atildes) -> StabilityChart:
    """Root counts of the lower equilibrium over a delay and delayed-damping grid."""
    taus = np.asarray(taus, dtype=float)
    atildes = np.asarray(atildes, dtype=float)
    nu = np.zeros((atildes.size, taus.size), dtype=int)
    for i, at in enumerate(atildes):
        table = hopf_points(a, at, c, n_upper=0)
        if table.omega is None:
            continue
        for j, t in enumerate(taus):
            nu[i, j] = unstable_count(table, t)
    return StabilityChart(taus, atildes, nu)


def hopf_curves(a, c, atildes, tau_max, n_upper=N_UPPER):
    """Hopf delays as curves over ``atilde``.

    Returns
    -------
    dict mapping ``(family, n)`` to an array of ``(atilde, tau)`` rows,
    restricted to ``tau <= tau_max``; curves entirely above are omitted.
    """
    atildes = np.asarray(atildes, dtype=float)
    atildes = atildes[atildes > a]
    curves = {}
    for at in atildes:
        table = hopf_points(a, at, c, n_upper)
        for hp in table.points():
            if hp.tau <= tau_max:
                curves.setdefault((hp.family, hp.n), []).append((at, hp.tau))
    return {k: np.array(v) for k, v in sorted(curves.items())}

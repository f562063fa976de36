"""Bifurcations of cycles along a continued branch.

Floquet multipliers at consecutive branch points are compared through a small
signature: the number of real multipliers beyond -1, of real nontrivial
multipliers beyond +1 and of complex pairs outside the unit circle. A change
marks an interval that is then narrowed by regula falsi in arclength on the
modulus of the critical multiplier. Folds are read off reversals of the delay
direction. Approach to a homoclinic orbit is an indicator only: long period,
steep growth of the period in the delay and passage close to a saddle.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..model import Branch, equilibria
from .branch import ConvergenceError, _orbit_from_vec, _wnorm, _Stepper, ContinuationSettings

log = logging.getLogger(__name__)

HOMOCLINIC_FACTOR = 3.0
SADDLE_DISTANCE = 0.05
PERIOD_SLOPE = 1000.0
_REAL_TOL = 1e-6


class EventKind(enum.Enum):
    FOLD = "Fold"
    PERIOD_DOUBLING = "PeriodDoubling"
    NEIMARK_SACKER = "NeimarkSacker"
    HOMOCLINIC = "HomoclinicApproach"


@dataclass(frozen=True)
class BifurcationEvent:
    """A bifurcation located on a branch.

    ``bracket`` holds the delays of the two branch points around the event
    and ``index`` the position of the first of them. ``evidence`` carries the
    critical multiplier, or period and saddle-distance data for a homoclinic
    approach.
    """

    kind: EventKind
    tau_at: float
    period: float
    bracket: tuple
    index: int
    evidence: dict = field(default_factory=dict)
    orbit: object = field(default=None, repr=False, compare=False)

    @property
    def multiplier(self):
        return self.evidence.get("multiplier")


def _nontrivial(fl):
    return fl.nontrivial


def signature(fl):
    """(real < -1, nontrivial real > +1, complex pairs outside) counts of a spectrum."""
    mu = _nontrivial(fl)
    real = np.abs(mu.imag) <= _REAL_TOL * np.maximum(1.0, np.abs(mu))
    neg = int(np.sum(real & (mu.real < -1.0)))
    pos = int(np.sum(real & (mu.real > 1.0)))
    cplx = int(np.sum(~real & (np.abs(mu) > 1.0) & (mu.imag > 0)))
    return np.array([neg, pos, cplx])


def match_multipliers(mu_a, mu_b):
    """Pair multipliers of neighbouring orbits by minimal total distance."""
    cost = np.abs(mu_a[:, None] - mu_b[None, :])
    ia, ib = linear_sum_assignment(cost)
    return ia, ib, float(cost[ia, ib].max()) if ia.size else 0.0


def _critical(fl, kind):
    mu = _nontrivial(fl)
    if kind is EventKind.PERIOD_DOUBLING:
        j = int(np.argmin(np.abs(mu + 1.0)))
    elif kind is EventKind.NEIMARK_SACKER:
        cand = np.where(mu.imag > _REAL_TOL * np.maximum(1.0, np.abs(mu)))[0]
        if cand.size == 0:
            return complex("nan")
        j = int(cand[np.argmin(np.abs(np.abs(mu[cand]) - 1.0))])
    else:
        j = int(np.argmin(np.abs(mu - 1.0)))
    return complex(mu[j])


def _confirmed(mu, kind, tol=0.1):
    if not np.isfinite(mu):
        return False
    if kind is EventKind.PERIOD_DOUBLING:
        return abs(mu.imag) <= _REAL_TOL * max(1.0, abs(mu)) and abs(mu + 1.0) < tol
    return abs(mu.imag) > _REAL_TOL and abs(abs(mu) - 1.0) < tol


def resonance_order(mu, kmax=4, tol=0.05):
    """Smallest ``k <= kmax`` with ``mu**k`` close to one, else ``None``."""
    phi = math.atan2(mu.imag, mu.real)
    for k in range(1, kmax + 1):
        if abs(np.exp(1j * k * phi) - 1.0) < tol * k:
            return k
    return None


class _Segment:
    """Cycles on the secant between two branch points, solved on demand."""

    def __init__(self, pa, pb, settings):
        self.pa, self.pb = pa, pb
        self.params = pa.orbit.params
        self.mesh = pa.orbit.mesh
        self.XA = pa.orbit.as_vector()
        XB = pb.orbit.remeshed(self.mesh).as_vector()
        self.length = _wnorm(XB - self.XA)
        self.V = (XB - self.XA) / self.length
        self.stepper = _Stepper(self.params, settings)

    def __call__(self, frac):
        if frac <= 0.0:
            return self.pa.orbit, self.pa.floquet
        if frac >= 1.0:
            return self.pb.orbit, self.pb.floquet
        Xp = self.XA + frac * self.length * self.V
        X, _ = self.stepper.solve(self.mesh, self.XA, self.V, Xp)
        orbit = _orbit_from_vec(self.mesh, X, self.params)
        return orbit, self.stepper.floquet(orbit)


def _locate_crossing(seg, kind, tol, maxit=60):
    """Regula falsi (Illinois) on ``|mu_c| - 1`` along the segment."""
    def g(fl):
        mu = _critical(fl, kind)
        return abs(mu) - 1.0, mu

    ga, mua = g(seg.pa.floquet)
    gb, mub = g(seg.pb.floquet)
    ta, tb = seg.pa.tau, seg.pb.tau
    if not (math.isfinite(ga) and math.isfinite(gb)) or ga * gb > 0:
        # no sign change of the critical multiplier: keep the coarse bracket
        return 0.5 * (ta + tb), mub, (min(ta, tb), max(ta, tb)), seg.pb.orbit
    fa, fb = 0.0, 1.0
    wa, wb = ga, gb            # Illinois-weighted values
    best, mu = seg.pb.orbit, mub
    for _ in range(maxit):
        if abs(tb - ta) < tol:
            break
        f = fb - wb * (fb - fa) / (wb - wa)
        lo, hi = min(fa, fb), max(fa, fb)
        f = min(max(f, lo + 0.02 * (hi - lo)), hi - 0.02 * (hi - lo))
        orbit, fl = seg(f)
        gf, muf = g(fl)
        best, mu = orbit, muf
        if gf == 0.0:
            return orbit.tau, mu, (orbit.tau, orbit.tau), orbit
        if gf * gb < 0:
            fa, ga, wa, ta = fb, gb, wb, tb
        else:
            wa *= 0.5
        fb, gb, wb, tb = f, gf, gf, orbit.tau
    tau_at = tb - gb * (tb - ta) / (gb - ga)
    return tau_at, mu, (min(ta, tb), max(ta, tb)), best


def _fold_events(points, tol):
    events = []
    taus = np.array([p.tau for p in points])
    arcs = np.array([p.arclength for p in points])
    d = np.diff(taus)
    for k in range(1, len(d)):
        if d[k - 1] * d[k] < 0 and abs(d[k - 1]) > 0 and abs(d[k]) > 0:
            s3 = arcs[k - 1:k + 2]
            t3 = taus[k - 1:k + 2]
            c = np.polyfit(s3 - s3[1], t3, 2)
            if c[0] != 0.0:
                sv = -c[1] / (2 * c[0])
                tau_at = float(np.polyval(c, sv))
            else:
                tau_at = float(t3[1])
            mu = _critical(points[k].floquet, EventKind.FOLD)
            events.append(BifurcationEvent(
                EventKind.FOLD, tau_at, points[k].period,
                (float(t3.min()), float(t3.max())), k - 1,
                {"multiplier": mu, "tau_reversal": True}, points[k].orbit))
    return events


def detect_events(branch, tol=1e-3, settings=None, keep=()):
    """Fold, period-doubling and Neimark-Sacker points of a branch.

    Parameters
    ----------
    branch : ContinuationBranch
        Points must carry Floquet spectra.
    tol : float
        Target width of the delay bracket for multiplier crossings.
    keep : sequence of BifurcationEvent
        Events found elsewhere (homoclinic indicators) merged into the result.

    Returns
    -------
    list of BifurcationEvent, sorted by position along the branch.
    """
    s = ContinuationSettings() if settings is None else settings
    pts = branch.points
    events = list(keep)
    events += _fold_events(pts, tol)
    for k in range(len(pts) - 1):
        pa, pb = pts[k], pts[k + 1]
        if pa.floquet is None or pb.floquet is None:
            continue
        diff = signature(pb.floquet) - signature(pa.floquet)
        if not diff.any():
            continue
        if diff[1] != 0 and k > 0:
            # real multiplier through +1 without a delay reversal nearby
            near = any(e.kind is EventKind.FOLD and abs(e.index - k) <= 1 for e in events)
            if not near:
                log.info("multiplier through +1 near tau=%.5f without a fold", pa.tau)
        try:
            seg = _Segment(pa, pb, s)
        except (ValueError, ZeroDivisionError):
            continue
        for comp, kind in ((0, EventKind.PERIOD_DOUBLING), (2, EventKind.NEIMARK_SACKER)):
            if diff[comp] == 0:
                continue
            try:
                tau_at, mu, bracket, orbit = _locate_crossing(seg, kind, tol)
            except ConvergenceError as exc:
                log.warning("could not refine %s near tau=%.5f: %s", kind.value, pa.tau, exc)
                tau_at, mu, orbit = 0.5 * (pa.tau + pb.tau), _critical(pb.floquet, kind), pb.orbit
                bracket = (min(pa.tau, pb.tau), max(pa.tau, pb.tau))
            if not _confirmed(mu, kind):
                # e.g. two real multipliers beyond -1 merging into a complex pair
                log.info("%s signature change near tau=%.5f without a unit crossing (mu=%s)",
                         kind.value, tau_at, mu)
                continue
            ev = {"multiplier": mu, "count_change": int(diff[comp])}
            if kind is EventKind.NEIMARK_SACKER:
                res = resonance_order(mu)
                if res is not None:
                    log.info("strong resonance 1:%d near tau=%.5f, not reported", res, tau_at)
                    continue
                ev["angle"] = math.atan2(mu.imag, mu.real)
            events.append(BifurcationEvent(kind, float(tau_at), orbit.period, bracket, k, ev, orbit))
    events.sort(key=lambda e: (e.index, e.tau_at))
    return events


def saddle_distance(orbit, samples=4000):
    """Smallest distance in the plane from the cycle to an upper-branch equilibrium."""
    p = orbit.params
    _, x = orbit.sample(samples)
    lo, hi = x[:, 0].min() + p.y_e, x[:, 0].max() + p.y_e
    eqs = equilibria(p, (lo - 2 * math.pi, hi + 2 * math.pi))
    sad = [e.y_e - p.y_e for e in eqs if e.kind is Branch.UPPER]
    if not sad:
        return math.inf
    d = np.min(np.hypot(x[:, 0][:, None] - np.array(sad)[None, :], x[:, 1][:, None]), axis=0)
    return float(d.min())


def homoclinic_period(params):
    """Default period threshold: a few periods of the fastest Hopf frequency."""
    a, at = params.a, params.atilde
    c = params.c
    d = max(at * at - a * a, 0.0)
    om = 0.5 * math.sqrt(d) + math.sqrt(c + 0.25 * d)
    return HOMOCLINIC_FACTOR * 2 * math.pi / om


def homoclinic_check(branch, period_threshold=None, distance=SADDLE_DISTANCE, slope=PERIOD_SLOPE):
    """Homoclinic-approach indicator for the last point of a growing branch, else ``None``.

    Fires when the period exceeds the threshold, the period grows steeply
    and increasingly fast in the delay, and the cycle passes within
    ``distance`` of a saddle.
    """
    pts = branch.points
    if len(pts) < 3:
        return None
    p0, p1, p2 = pts[-3:]
    T_hom = homoclinic_period(p2.orbit.params) if period_threshold is None else period_threshold
    if p2.period < T_hom or p2.period <= p1.period:
        return None
    dtau = abs(p2.tau - p1.tau)
    rate = (p2.period - p1.period) / max(dtau, 1e-300)
    prev = abs(p1.period - p0.period) / max(abs(p1.tau - p0.tau), 1e-300)
    if rate < slope or rate < prev:
        return None
    dist = saddle_distance(p2.orbit)
    if dist > distance:
        return None
    return BifurcationEvent(
        EventKind.HOMOCLINIC, p2.tau, p2.period,
        (min(p1.tau, p2.tau), max(p1.tau, p2.tau)), len(pts) - 2,
        {"period": p2.period, "period_threshold": T_hom, "dT_dtau": rate, "saddle_distance": dist},
        p2.orbit)

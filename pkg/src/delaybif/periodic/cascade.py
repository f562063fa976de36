"""Follow a period-doubling cascade by repeated branch switching."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from ..model import SwingParams
from .branch import (ContinuationSettings, ConvergenceError, continue_branch, hopf_seed,
                     period_doubling_seed)
from .events import EventKind

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CascadeStep:
    """One period doubling: its delay, the parent period and the emerging period."""

    index: int
    tau: float
    parent_period: float
    period: float
    multiplier: complex


def _default_seed(params: SwingParams, window):
    from ..analytic import hopf_points

    table = hopf_points(params.a, params.atilde, params.c, n_upper=64)
    for hp in table.family(1):
        if window[0] <= hp.tau < window[1]:
            return hp
    raise ValueError(f"no destabilizing Hopf point in the window {window}")


def cascade_scan(params: SwingParams, window, max_doublings=6, seed=None,
                 settings: ContinuationSettings | None = None, tol=1e-8, branches=None):
    """Delays of successive period doublings along a cascade.

    Parameters
    ----------
    params : SwingParams
        System parameters (the delay is ignored).
    window : (float, float)
        Delay interval to search.
    max_doublings : int
        Number of period doublings to follow.
    seed : BranchSeed, PeriodicOrbit or Hopf point, optional
        Start of the first branch. Defaults to the first destabilizing Hopf
        point inside the window, whose cycles are stable at birth.
    tol : float
        Delay tolerance for locating each period doubling.
    branches : list, optional
        Receives every continued branch, for inspection.

    Returns
    -------
    list of CascadeStep
        Possibly shorter than ``max_doublings`` when a branch leaves the
        window without a further doubling or a switch fails.
    """
    if max_doublings <= 0:
        return []
    base = ContinuationSettings() if settings is None else settings
    if seed is None:
        seed = _default_seed(params, window)
    if hasattr(seed, "omega"):
        seed = hopf_seed(params.with_tau(seed.tau), seed)
    out = []
    for k in range(max_doublings):
        s = replace(base, event_tol=tol, stop_on_period_doubling=True,
                    max_intervals=base.max_intervals * 2 ** k)
        br = continue_branch(seed, window, s)
        if branches is not None:
            branches.append(br)
        pds = [e for e in br.events if e.kind is EventKind.PERIOD_DOUBLING
               and e.evidence.get("count_change", 1) > 0]
        if not pds:
            log.info("cascade ends after %d doublings: %s", k, br.stop_reason)
            break
        ev = pds[0]
        parent = ev.orbit
        out.append(CascadeStep(k, float(ev.tau_at), parent.period, 2 * parent.period,
                               complex(ev.multiplier)))
        log.info("doubling %d at tau=%.9f, T=%.6f", k, ev.tau_at, 2 * parent.period)
        try:
            seed = period_doubling_seed(parent)
        except (ConvergenceError, np.linalg.LinAlgError) as exc:
            log.warning("branch switch failed: %s", exc)
            break
    return out


def feigenbaum_ratios(taus):
    """Ratios of successive spacings ``(t[k+1]-t[k]) / (t[k+2]-t[k+1])``."""
    t = np.asarray(taus, dtype=float)
    d = np.diff(t)
    return d[:-1] / d[1:]


def log_fit(taus, tau_inf):
    """Affine fit of ``log(tau_inf - tau_k)`` against ``k``; returns (slope, intercept, r2)."""
    t = np.asarray(taus, dtype=float)
    y = np.log(tau_inf - t)
    k = np.arange(t.size, dtype=float)
    slope, icpt = np.polyfit(k, y, 1)
    res = y - (slope * k + icpt)
    tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(res ** 2) / tot if tot > 0 else math.nan
    return float(slope), float(icpt), float(r2)

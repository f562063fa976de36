"""Characteristic roots of the linearized delayed-damping oscillator.

The characteristic function is

    Delta(lambda) = lambda^2 + a lambda + atilde lambda exp(-lambda tau) + c.

Starting values for its rightmost roots come from a Chebyshev collocation of
the infinitesimal generator of the solution semigroup on ``[-tau, 0]``; each
is polished by Newton's method on ``Delta`` itself.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as la

from .model import InvalidParameterError, SwingParams

log = logging.getLogger(__name__)

N0 = 32
N_MAX = 512
NEWTON_TOL = 1e-12
NEWTON_MAXIT = 50
DEDUP_TOL = 1e-7
DRIFT_TOL = 1e-8
TINY_DELAY = 1e-8


class SimplicityError(ArithmeticError):
    """The root is (numerically) multiple; the crossing speed is undefined."""


@dataclass(frozen=True)
class Quasipolynomial:
    a: float
    atilde: float
    c: float
    tau: float

    @classmethod
    def from_params(cls, params: SwingParams, c=None):
        return cls(params.a, params.atilde, params.c if c is None else c, params.tau)

    def with_tau(self, tau):
        return Quasipolynomial(self.a, self.atilde, self.c, tau)


def char_eval(qp: Quasipolynomial, lam):
    """``Delta(lambda)``; vectorized over ``lam``."""
    lam = np.asarray(lam, dtype=complex)
    val = lam * lam + qp.a * lam + qp.atilde * lam * np.exp(-lam * qp.tau) + qp.c
    return complex(val) if val.ndim == 0 else val


def char_derivative(qp: Quasipolynomial, lam):
    """``dDelta/dlambda = 2 lambda + a + atilde exp(-lambda tau) (1 - lambda tau)``."""
    lam = np.asarray(lam, dtype=complex)
    val = 2 * lam + qp.a + qp.atilde * np.exp(-lam * qp.tau) * (1 - lam * qp.tau)
    return complex(val) if val.ndim == 0 else val


def char_dtau(qp: Quasipolynomial, lam):
    """``dDelta/dtau = -atilde lambda^2 exp(-lambda tau)``."""
    lam = complex(lam)
    return -qp.atilde * lam * lam * np.exp(-lam * qp.tau)


@lru_cache(maxsize=16)
def _cheb(N):
    # Chebyshev points cos(j pi / N) and the differentiation matrix on them.
    x = np.cos(np.pi * np.arange(N + 1) / N)
    cw = np.ones(N + 1)
    cw[0] = cw[-1] = 2.0
    cw *= (-1.0) ** np.arange(N + 1)
    X = x[:, None] - x[None, :]
    D = np.outer(cw, 1.0 / cw) / (X + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def generator_matrix(qp: Quasipolynomial, N):
    """Collocation of the solution-operator generator on ``N + 1`` Chebyshev nodes.

    Unknowns are ``(x1, x2)`` at the nodes ``theta_j = tau (x_j - 1) / 2``;
    node 0 is ``theta = 0``, node ``N`` is ``theta = -tau``.
    """
    _, D = _cheb(N)
    D = D * (2.0 / qp.tau)
    n = N + 1
    A = np.zeros((2 * n, 2 * n))
    A[:n, :n] = D
    A[n:, n:] = D
    # the right-hand side replaces the derivative rows at theta = 0
    A[0, :] = 0.0
    A[0, n] = 1.0
    A[n, :] = 0.0
    A[n, 0] = -qp.c
    A[n, n] = -qp.a
    A[n, 2 * n - 1] -= qp.atilde
    return A


def newton_root(qp: Quasipolynomial, lam0, tol=NEWTON_TOL, maxit=NEWTON_MAXIT):
    """Polish a root of ``Delta``; returns ``None`` without convergence."""
    lam = complex(lam0)
    for _ in range(maxit):
        d = char_derivative(qp, lam)
        if d == 0:
            return None
        step = char_eval(qp, lam) / d
        lam -= step
        if not np.isfinite(lam):
            return None
        if abs(step) <= tol * (1 + abs(lam)):
            return lam
    return None


@dataclass(frozen=True)
class RootSet:
    """Rightmost characteristic roots, stored with ``Im >= 0``.

    ``multiplicity`` is 2 for a conjugate pair and 1 for a real root, so
    ``n_u`` counts roots of the full spectrum.
    """

    roots: np.ndarray
    residuals: np.ndarray = field(repr=False)
    multiplicity: np.ndarray = field(repr=False)
    n_u: int
    abscissa: float
    N: int = 0
    partial: bool = False

    def all_roots(self):
        """Roots including conjugates."""
        conj = self.roots[self.multiplicity == 2].conj()
        return np.concatenate([self.roots, conj])


def _polish(qp, starters):
    roots = []
    for s in starters:
        lam = newton_root(qp, s)
        if lam is None:
            continue
        if abs(lam.imag) < DEDUP_TOL:
            lam = complex(lam.real, 0.0)
        lam = complex(lam.real, abs(lam.imag))
        if abs(char_eval(qp, lam)) > 1e-9 * (1 + abs(lam) ** 2):
            continue
        if any(abs(lam - r) < DEDUP_TOL for r in roots):
            continue
        roots.append(lam)
    roots.sort(key=lambda z: (-z.real, z.imag))
    return np.array(roots, dtype=complex)


def _rootset(qp, roots, count, N, partial):
    roots = roots[:count]
    mult = np.where(roots.imag > 0, 2, 1)
    res = np.abs(char_eval(qp, roots)) if roots.size else np.array([])
    n_u = int(np.sum(mult[roots.real > 0])) if roots.size else 0
    absc = float(roots.real.max()) if roots.size else -math.inf
    return RootSet(roots, res, mult, n_u, absc, N, partial)


def approximate_spectrum(qp: Quasipolynomial, count=8, N0=N0, N_max=N_MAX) -> RootSet:
    """The ``count`` rightmost characteristic roots (one per conjugate pair).

    The collocation size doubles from ``N0`` until the polished rightmost
    roots move less than 1e-8 between ``N`` and ``2N`` (or ``N_max`` is hit,
    which flags the result as partial). Starters whose Newton iteration
    fails are dropped with a warning. Below ``TINY_DELAY`` the delay-free
    roots serve as starters.
    """
    if qp.tau < 0:
        raise InvalidParameterError("delay must be non-negative")
    if qp.tau < TINY_DELAY:
        # the remaining roots run off to Re = -inf as tau -> 0; the delay-free
        # roots seed Newton on the true characteristic function
        r = np.roots([1.0, qp.a + qp.atilde, qp.c]).astype(complex)
        roots = _polish(qp, r)
        return _rootset(qp, roots, count, 0, roots.size < min(count, 2))

    prev = None
    N = N0
    while True:
        ev = la.eigvals(generator_matrix(qp, N))
        ev = ev[np.isfinite(ev)]
        ev = ev[ev.imag >= -DEDUP_TOL]
        starters = ev[np.argsort(-ev.real)][: 3 * count + 4]
        roots = _polish(qp, starters)
        dropped = starters.size - roots.size
        top = roots[:count]
        if prev is not None and prev.size == top.size == count:
            drift = np.max(np.abs(prev - top))
            if drift < DRIFT_TOL:
                return _rootset(qp, roots, count, N, False)
        if 2 * N > N_max:
            if dropped:
                warnings.warn(f"{dropped} starters dropped at N={N}", RuntimeWarning, stacklevel=2)
            return _rootset(qp, roots, count, N, top.size < count)
        prev = top
        N *= 2


@dataclass(frozen=True)
class SweepTable:
    taus: np.ndarray
    real_parts: np.ndarray
    n_u: np.ndarray
    abscissa: np.ndarray


def abscissa_sweep(params: SwingParams, taus, k=4, count=8, c=None) -> SweepTable:
    """Real parts of the ``k`` most critical roots and ``n_u`` along a delay grid."""
    taus = np.asarray(taus, dtype=float)
    if np.any(np.diff(taus) < 0):
        raise InvalidParameterError("delay grid must be monotone")
    base = Quasipolynomial.from_params(params, c)
    re = np.full((taus.size, k), np.nan)
    nu = np.zeros(taus.size, dtype=int)
    ab = np.zeros(taus.size)
    for i, t in enumerate(taus):
        rs = approximate_spectrum(base.with_tau(t), count)
        r = rs.roots.real[:k]
        re[i, : r.size] = r
        nu[i] = rs.n_u
        ab[i] = rs.abscissa
    return SweepTable(taus, re, nu, ab)


@dataclass(frozen=True)
class CrossingDirection:
    sign: int
    speed: complex
    fd_sign: int | None = None


def track_root(qp: Quasipolynomial, lam0, tau):
    """Root at delay ``tau`` reached by Newton from ``lam0``."""
    lam = newton_root(qp.with_tau(tau), lam0)
    if lam is None:
        raise ArithmeticError(f"root tracking failed at tau={tau}")
    return lam


def crossing_direction(qp: Quasipolynomial, lam0, tau0=None, fd_step=None) -> CrossingDirection:
    """Sign of ``d Re(lambda)/d tau`` at a simple root by implicit differentiation.

    With ``fd_step`` the root is also tracked to ``tau0 +- fd_step`` and the
    sign of the central difference is returned in ``fd_sign``.
    """
    q = qp if tau0 is None else qp.with_tau(tau0)
    lam0 = complex(lam0)
    d = char_derivative(q, lam0)
    if abs(d) < 1e-10 * (1 + abs(lam0)):
        raise SimplicityError("root is not simple")
    speed = -char_dtau(q, lam0) / d
    sign = int(np.sign(speed.real))
    fd = None
    if fd_step:
        up = track_root(q, lam0, q.tau + fd_step)
        dn = track_root(q, lam0, q.tau - fd_step)
        fd = int(np.sign(up.real - dn.real))
    return CrossingDirection(sign, complex(speed), fd)

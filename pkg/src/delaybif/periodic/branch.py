"""Newton correction, Hopf start-up and pseudo-arclength continuation of cycles."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..model import InvalidParameterError, SwingParams
from .collocation import CollocationSystem, PeriodicOrbit
from .floquet import FloquetSpectrum, critical_eigenfunction, floquet_multipliers
from .mesh import Mesh

log = logging.getLogger(__name__)

DEFAULT_DEGREE = 4
DEFAULT_INTERVALS = 40
MAX_INTERVALS = 320


class ConvergenceError(RuntimeError):
    """Newton iteration for the periodic boundary-value problem failed."""


def _weights(n):
    # Mean-square weight on the profile, unit weight on T and tau.
    w = np.full(n + 2, 1.0 / (n // 2))
    w[n:] = 1.0
    return w


def _wnorm(V):
    return math.sqrt(float(np.dot(_weights(V.size - 2) * V, V)))


def _newton(system: CollocationSystem, X, tangent=None, X_pred=None, tol=1e-10, maxit=12):
    """Solve the collocation equations starting from ``X``.

    Without ``tangent`` the delay is held fixed; with it the pseudo-arclength
    condition ``<W (X - X_pred), tangent> = 0`` closes the system. Returns
    ``(X, steps)`` where ``steps`` lists the sup-norm of every Newton update.
    """
    n = system.n
    X = X.copy()
    W = _weights(n)
    steps = []
    if tangent is None:
        r = system.residual(X, jacobian=False)
        if np.max(np.abs(r)) < 1e-12 * max(1.0, X[n]):
            return X, steps
    for it in range(1, maxit + 1):
        r, J = system.residual(X)
        if tangent is None:
            A = J[:, : n + 1].tocsc()
            rhs = -r
        else:
            row = sp.csr_matrix((W * tangent)[None, :])
            A = sp.vstack([J, row]).tocsc()
            rhs = -np.append(r, np.dot(W * tangent, X - X_pred))
        try:
            dx = spla.spsolve(A, rhs)
        except RuntimeError as exc:
            raise ConvergenceError(f"singular Jacobian: {exc}") from None
        if not np.all(np.isfinite(dx)):
            raise ConvergenceError("singular Jacobian")
        if tangent is None:
            X[: n + 1] += dx
        else:
            X += dx
        size = float(np.max(np.abs(dx)))
        steps.append(size)
        if X[n] <= 0:
            raise ConvergenceError("period became non-positive")
        if size < tol * (1.0 + np.max(np.abs(X))):
            return X, steps
        if it >= 3 and steps[-1] > 0.5 * steps[-2] and steps[-1] > 1e-6:
            raise ConvergenceError("Newton iteration is not contracting")
    raise ConvergenceError(f"no convergence in {maxit} iterations (last step {steps[-1]:.2e})")


def _orbit_from_vec(mesh, X, params, residual=float("nan")):
    n = 2 * mesh.n_nodes
    return PeriodicOrbit(mesh, X[:n].reshape(-1, 2).copy(), float(X[n]),
                         params.with_tau(float(X[n + 1])), residual)


def newton_correct(guess: PeriodicOrbit, params: SwingParams | None = None, tol=1e-10,
                   maxit=12, full_output=False):
    """Correct profile and period of ``guess`` at fixed delay.

    The phase is anchored by integral orthogonality to the guess itself.

    Parameters
    ----------
    guess : PeriodicOrbit
        Starting cycle; its mesh is kept.
    params : SwingParams, optional
        Parameters (including the delay) to solve at; defaults to ``guess.params``.
    full_output : bool
        Also return the list of Newton update sizes. An exact solution
        returns an empty list.

    Raises
    ------
    ConvergenceError
        Singular Jacobian (for instance at a fold in the delay) or no convergence.
    """
    params = guess.params if params is None else params
    if not np.all(np.isfinite(guess.profile)) or not math.isfinite(guess.period):
        raise ConvergenceError("guess is not finite")
    system = CollocationSystem(guess.mesh, params, guess)
    X = guess.as_vector()
    X[-1] = params.tau
    X, steps = _newton(system, X, tol=tol, maxit=maxit)
    orbit = _orbit_from_vec(guess.mesh, X, params, steps[-1] if steps else 0.0)
    return (orbit, steps) if full_output else orbit


def collocation_defect(orbit: PeriodicOrbit) -> float:
    """Sup-norm equation defect at twice the collocation density, off the grid."""
    return CollocationSystem(orbit.mesh, orbit.params).sup_residual(orbit)


def adapt_mesh(orbit: PeriodicOrbit, M=None) -> PeriodicOrbit:
    """Redistribute (and optionally resize) the mesh to equidistribute the error monitor."""
    M = orbit.mesh.M if M is None else M
    return orbit.remeshed(orbit.mesh.with_intervals(orbit.profile, M))


def refine_orbit(orbit: PeriodicOrbit, defect_tol=1e-8, max_intervals=2560) -> PeriodicOrbit:
    """Double and redistribute the mesh until the collocation defect is below ``defect_tol``."""
    cur = newton_correct(adapt_mesh(orbit))
    while collocation_defect(cur) > defect_tol:
        if 2 * cur.mesh.M > max_intervals:
            raise ConvergenceError(f"defect {collocation_defect(cur):.2e} at {cur.mesh.M} intervals")
        cur = newton_correct(adapt_mesh(cur, 2 * cur.mesh.M))
        cur = newton_correct(adapt_mesh(cur))
    return cur


@dataclass(frozen=True)
class BranchSeed:
    """Starting point of a branch: a solution vector and an initial direction.

    ``orbit`` may have zero amplitude (a Hopf point) or be a cycle traversed
    twice (a period-doubling point); ``tangent`` is in the stacked unknowns
    ``[profile, T, tau]`` on ``orbit.mesh``. A seed with ``on_branch`` false
    (the parent cycle at a period doubling) is not stored as a branch point.
    """

    orbit: PeriodicOrbit
    tangent: np.ndarray = field(repr=False)
    origin: tuple = ()
    on_branch: bool = True


@dataclass(frozen=True)
class BranchPoint:
    orbit: PeriodicOrbit
    floquet: FloquetSpectrum | None
    arclength: float
    defect: float = float("nan")

    @property
    def tau(self):
        return self.orbit.tau

    @property
    def period(self):
        return self.orbit.period


@dataclass
class ContinuationBranch:
    """Ordered cycles along a branch, with detected events and the reason it ended."""

    points: list = field(default_factory=list)
    events: list = field(default_factory=list)
    origin: tuple = ()
    stop_reason: str = ""

    @property
    def taus(self):
        return np.array([p.orbit.tau for p in self.points])

    @property
    def periods(self):
        return np.array([p.orbit.period for p in self.points])

    @property
    def extents(self):
        return np.array([p.orbit.extents for p in self.points])

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class ContinuationSettings:
    """Steplength policy and accuracy targets for :func:`continue_branch`.

    Steplengths are measured in the weighted norm: root-mean-square profile
    change plus absolute changes of ``T`` and ``tau``.
    """

    h0: float = 0.02
    h_min: float = 1e-6
    h_max: float = 0.3
    grow: float = 1.5
    remesh_every: int = 5
    defect_tol: float = 1e-6
    max_intervals: int = MAX_INTERVALS
    floquet_count: int = 10
    trivial_tol: float = 1e-3
    max_steps: int = 2000
    max_period: float = math.inf
    detect: bool = True
    event_tol: float = 1e-3
    stop_at_homoclinic: bool = True
    homoclinic_period: float | None = None
    stop_on_period_doubling: bool = False


def hopf_seed(params: SwingParams, hopf, mesh: Mesh | None = None) -> BranchSeed:
    """Zero-amplitude cycle at a Hopf point with the critical mode as tangent.

    ``hopf`` needs ``tau`` and ``omega`` attributes (see
    :class:`delaybif.analytic.HopfPoint`). The mode is ``Re(e^{i w t} q)``
    with ``q = (1, i w)``.
    """
    mesh = Mesh.uniform(DEFAULT_INTERVALS, DEFAULT_DEGREE) if mesh is None else mesh
    om = hopf.omega
    s = mesh.nodes
    mode = np.stack([np.cos(2 * np.pi * s), -om * np.sin(2 * np.pi * s)], axis=1)
    orbit = PeriodicOrbit(mesh, np.zeros_like(mode), 2 * np.pi / om, params.with_tau(hopf.tau), 0.0)
    tangent = np.concatenate([mode.ravel(), [0.0, 0.0]])
    origin = ("hopf", getattr(hopf, "family", None), getattr(hopf, "n", None))
    return BranchSeed(orbit, tangent / _wnorm(tangent), origin)


def period_doubling_seed(orbit: PeriodicOrbit, count=10) -> BranchSeed:
    """Seed for the doubled branch at (or very near) a period-doubling point.

    The cycle is taken twice around; the tangent is the antiperiodic
    eigenfunction ``(phi, -phi)`` of the multiplier nearest -1.
    """
    mu, phi = critical_eigenfunction(orbit, -1.0, count)
    twice = orbit.repeated(2)
    s = twice.mesh.nodes
    half = orbit.mesh.evaluate(phi, (2 * s) % 1.0)
    sign = np.where(s < 0.5, 1.0, -1.0)
    tangent = np.concatenate([(half * sign[:, None]).ravel(), [0.0, 0.0]])
    log.info("period-doubling switch at tau=%.6f, mu=%s", orbit.tau, mu)
    return BranchSeed(twice, tangent / _wnorm(tangent), ("period_doubling", orbit.tau, complex(mu)), False)


def _tangent_at(orbit: PeriodicOrbit, direction=1):
    """Unit tangent of the solution curve at a corrected orbit, oriented in tau."""
    system = CollocationSystem(orbit.mesh, orbit.params, orbit)
    X = orbit.as_vector()
    _, J = system.residual(X)
    n = system.n
    e = sp.csr_matrix(([1.0], ([0], [n + 1])), shape=(1, n + 2))
    A = sp.vstack([J, e]).tocsc()
    rhs = np.zeros(n + 2)
    rhs[-1] = 1.0
    V = spla.spsolve(A, rhs)
    V *= math.copysign(1.0, direction)
    return V / _wnorm(V)


class _Stepper:
    """Predictor-corrector machinery on a mutable current mesh."""

    def __init__(self, params: SwingParams, settings: ContinuationSettings):
        self.params = params
        self.s = settings

    def solve(self, mesh, X_ref, V, X_pred):
        ref = _orbit_from_vec(mesh, X_ref, self.params)
        system = CollocationSystem(mesh, self.params, ref)
        return _newton(system, X_pred, tangent=V, X_pred=X_pred)

    def remesh(self, mesh, X_prev, X_cur, M):
        """Move both vectors to a redistributed mesh and re-solve ``X_cur`` on it.

        The re-solve keeps the arclength hyperplane through ``X_cur`` so it is
        well posed at folds in the delay.
        """
        cur = _orbit_from_vec(mesh, X_cur, self.params)
        new_mesh = mesh.with_intervals(cur.profile, M)
        Xp = _orbit_from_vec(mesh, X_prev, self.params).remeshed(new_mesh).as_vector()
        Xc = cur.remeshed(new_mesh).as_vector()
        V = Xc - Xp
        V /= _wnorm(V)
        Xc, _ = self.solve(new_mesh, Xc, V, Xc)
        return new_mesh, Xp, Xc

    def floquet(self, orbit):
        return floquet_multipliers(orbit, self.s.floquet_count, strict=False)


def continue_branch(start, tau_range, settings: ContinuationSettings | None = None,
                    direction=1, callback=None) -> ContinuationBranch:
    """Pseudo-arclength continuation of cycles in ``(profile, T, tau)``.

    Parameters
    ----------
    start : BranchSeed or PeriodicOrbit
        A seed from :func:`hopf_seed` / :func:`period_doubling_seed`, or a
        corrected orbit (the tangent is then computed and oriented by
        ``direction`` in tau).
    tau_range : (float, float)
        Continuation stops at the first cycle outside this interval.
    settings : ContinuationSettings
        Steplength policy and accuracy targets.
    callback : callable, optional
        Called with every accepted :class:`BranchPoint`.

    Returns
    -------
    ContinuationBranch
        Points carry Floquet spectra; ``events`` holds the bifurcations found
        by :func:`delaybif.periodic.events.detect_events` when
        ``settings.detect`` is set. Failure to converge truncates the branch
        and is reported in ``stop_reason`` rather than raised, as is a
        branch that shrinks back onto the equilibrium at another Hopf point.
    """
    from .events import homoclinic_check, detect_events, signature

    s = ContinuationSettings() if settings is None else settings
    lo, hi = float(tau_range[0]), float(tau_range[1])
    if isinstance(start, PeriodicOrbit):
        seed = BranchSeed(start, _tangent_at(start, direction), ("orbit", start.tau))
    else:
        seed = start
    params = seed.orbit.params
    st = _Stepper(params, s)
    mesh = seed.orbit.mesh
    X0 = seed.orbit.as_vector()
    branch = ContinuationBranch(origin=seed.origin)

    def accept(X, arclength):
        orbit = _orbit_from_vec(mesh, X, params)
        pt = BranchPoint(orbit, st.floquet(orbit), arclength, collocation_defect(orbit))
        branch.points.append(pt)
        if callback is not None:
            callback(pt)
        return pt

    if seed.on_branch or hi <= lo:
        accept(X0, 0.0)
    if hi <= lo:
        branch.stop_reason = "empty tau range"
        return branch

    h = s.h0
    # first step along the seed tangent
    V = seed.tangent / _wnorm(seed.tangent)
    X_prev = X0
    while True:
        try:
            X_cur, _ = st.solve(mesh, X0 + h * V, V, X0 + h * V)
            break
        except ConvergenceError as exc:
            h /= 2
            if h < s.h_min:
                branch.stop_reason = f"first step failed: {exc}"
                return branch
    arc = _wnorm(X_cur - X_prev) if seed.on_branch else 0.0
    pt = accept(X_cur, arc)
    since_remesh = 0
    stop = ""
    peak = 0.0
    for _ in range(s.max_steps):
        if not lo <= pt.tau <= hi:
            stop = "left tau range"
            break
        if pt.period > s.max_period:
            stop = "period limit"
            break
        amp = pt.orbit.amplitude
        peak = max(peak, amp)
        if peak > 0.1 and amp < 0.05 * peak:
            stop = f"returned to the equilibrium near tau={pt.tau:.6f}"
            break
        if (s.stop_on_period_doubling and len(branch.points) >= 2
                and signature(branch.points[-2].floquet)[0] != signature(pt.floquet)[0]):
            stop = "period doubling"
            break
        hom = homoclinic_check(branch, s.homoclinic_period)
        if hom is not None:
            branch.events.append(hom)
            if s.stop_at_homoclinic:
                stop = "homoclinic approach"
                break
        # mesh adaptation
        since_remesh += 1
        try:
            M = mesh.M
            grow = pt.defect > s.defect_tol or (pt.floquet.trivial_error > s.trivial_tol)
            if grow and 2 * M <= s.max_intervals:
                mesh, X_prev, X_cur = st.remesh(mesh, X_prev, X_cur, 2 * M)
                since_remesh = 0
                pt = _replace_last(branch, st, mesh, X_cur, pt.arclength)
                continue
            if since_remesh >= s.remesh_every:
                mesh, X_prev, X_cur = st.remesh(mesh, X_prev, X_cur, M)
                since_remesh = 0
        except ConvergenceError as exc:
            stop = f"remeshing failed: {exc}"
            break
        if pt.floquet.trivial_error > s.trivial_tol:
            stop = f"trivial multiplier off by {pt.floquet.trivial_error:.1e} at {mesh.M} intervals"
            branch.points.pop()
            break
        V = X_cur - X_prev
        V /= _wnorm(V)
        try:
            X_new, steps = st.solve(mesh, X_cur, V, X_cur + h * V)
        except ConvergenceError as exc:
            h /= 2
            if h < s.h_min:
                stop = f"minimum steplength reached: {exc}"
                break
            continue
        arc = pt.arclength + _wnorm(X_new - X_cur)
        X_prev, X_cur = X_cur, X_new
        pt = accept(X_cur, arc)
        if len(steps) <= 3:
            h = min(h * s.grow, s.h_max)
    else:
        stop = "step limit"
    branch.stop_reason = stop
    if s.detect:
        branch.events = detect_events(branch, tol=s.event_tol, keep=branch.events)
    return branch


def _replace_last(branch, st, mesh, X, arclength):
    orbit = _orbit_from_vec(mesh, X, st.params)
    pt = BranchPoint(orbit, st.floquet(orbit), arclength, collocation_defect(orbit))
    branch.points[-1] = pt
    return pt


def orbit_from_hopf(params: SwingParams, hopf, delta=0.05, settings: ContinuationSettings | None = None,
                    mesh: Mesh | None = None) -> PeriodicOrbit:
    """Small cycle at delay ``hopf.tau + delta`` born in a Hopf bifurcation.

    Cycles of the delayed swing equation exist on the larger-delay side of
    every Hopf point, so ``delta`` must be positive. The cycle is reached by
    arclength steps from the zero-amplitude solution along the critical mode
    ``Re(e^{i w t} (1, i w))``, then corrected at the target delay.
    """
    if not delta > 0:
        raise InvalidParameterError("cycles bifurcate to larger delays only; delta must be positive")
    s = ContinuationSettings(h0=min(0.02, delta), h_max=0.1, detect=False) if settings is None else settings
    target = hopf.tau + delta
    br = continue_branch(hopf_seed(params, hopf, mesh), (hopf.tau - 1.0, target),
                         replace(s, detect=False, stop_at_homoclinic=False))
    if len(br.points) < 2 or br.points[-1].tau <= target:
        raise ConvergenceError(f"branch from tau={hopf.tau:.6f} ended before the target: {br.stop_reason}")
    guess = min(br.points[1:], key=lambda p: abs(p.tau - target)).orbit
    return newton_correct(guess, params.with_tau(target))

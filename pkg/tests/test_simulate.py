import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from delaybif.model import REFERENCE, PhysicalParams, to_dimensionless
from delaybif.periodic.branch import newton_correct
from delaybif.simulate import Constant, Section, Segment, StepSizeError, integrate, poincare_section


def _ode_reference(p, x0, t_end):
    # delay-free oracle: the damped pendulum with total damping a + atilde
    ye = p.y_e

    def f(t, x):
        return [x[1], -(p.a + p.atilde) * x[1] - math.sin(x[0] + ye) + p.w]

    return solve_ivp(f, (0, t_end), x0, method="DOP853", rtol=1e-13, atol=1e-14, dense_output=True)


def test_equilibrium_residence():
    tol, t_end = 1e-9, 300.0
    tr = integrate(REFERENCE.with_tau(2.5), Constant((0.0, 0.0)), t_end, tol)
    assert np.max(np.abs(np.asarray(tr.y))) <= 10 * tol * t_end


def test_delay_free_matches_ode():
    p = REFERENCE.with_tau(0.0)
    tr = integrate(p, Constant((0.1, 0.0)), 200.0, 1e-10)
    ref = _ode_reference(p, [0.1, 0.0], 200.0)
    t = np.linspace(0, 200, 2001)
    assert np.max(np.abs(tr(t) - ref.sol(t).T)) < 1e-6
    assert np.max(np.abs(tr(np.array([200.0])))) < 0.1 * np.exp(-0.04375 * 200) * 3


def test_order_of_accuracy():
    p = REFERENCE.with_tau(0.0)
    ref = _ode_reference(p, [0.5, 0.0], 20.0)
    t = np.linspace(0, 20, 201)
    steps, errs = [], []
    for tol in (1e-5, 1e-6, 1e-7, 1e-8, 1e-9):
        tr = integrate(p, Constant((0.5, 0.0)), 20.0, tol)
        steps.append(len(tr.t) - 1)
        errs.append(np.max(np.abs(tr(t) - ref.sol(t).T)))
    order = -np.polyfit(np.log(steps), np.log(errs), 1)[0]
    assert order >= 3.5


def test_breakpoints_at_delay_multiples():
    tau = 1.7
    tr = integrate(REFERENCE.with_tau(tau), Constant((0.3, 0.0)), 8.0, 1e-9)
    for k in range(1, 5):
        assert any(abs(t - k * tau) < 1e-12 for t in tr.t)
    assert set(tr.breakpoints) >= {0.0, tau, 2 * tau}


def test_interpolant_continuity_and_derivative():
    tr = integrate(REFERENCE.with_tau(1.7), Constant((0.3, 0.0)), 10.0, 1e-10)
    for k in range(1, len(tr.t) - 1, 7):
        tk = tr.t[k]
        a, b = tr(np.array([tk - 1e-12, tk + 1e-12]))
        assert np.allclose(a, b, atol=1e-9)
    t = np.linspace(0.5, 9.5, 50)
    h = 1e-5
    dx1 = (tr(t + h)[:, 0] - tr(t - h)[:, 0]) / (2 * h)
    assert np.allclose(dx1, tr(t)[:, 1], atol=1e-6)


def test_query_outside_domain():
    tr = integrate(REFERENCE.with_tau(1.0), Constant((0.1, 0.0)), 5.0)
    with pytest.raises(ValueError):
        tr(np.array([6.0]))
    with pytest.raises(ValueError):
        tr(np.array([-1.5]))


def test_bad_arguments():
    with pytest.raises(ValueError):
        integrate(REFERENCE, Constant((0.1, 0.0)), -1.0)
    with pytest.raises(ValueError):
        integrate(REFERENCE, Constant((0.1, 0.0)), 1.0, tol=1e-2)


def test_step_limit():
    with pytest.raises(StepSizeError):
        integrate(REFERENCE.with_tau(1.0), Constant((0.1, 0.0)), 100.0, 1e-10, max_steps=10)


def test_time_scale_invariance():
    ks = 16.0
    phys = PhysicalParams(0.1, 0.25, ks, 2.0, 0.6)
    dim = to_dimensionless(phys)
    s = math.sqrt(ks)
    # matched data: y' scales with sqrt(ks)
    tp = integrate(phys, Constant((0.2, 0.0)), 10.0, 1e-10)
    td = integrate(dim, Constant((0.2, 0.0)), 10.0 * s, 1e-10)
    that = np.linspace(0, 10, 101)
    xp = tp(that)
    xd = td(that * s)
    assert np.allclose(xp[:, 0], xd[:, 0], atol=1e-7)
    assert np.allclose(xp[:, 1], xd[:, 1] * s, atol=1e-6)


def test_converges_to_stable_cycle(first_branch):
    from delaybif.periodic.events import EventKind

    tau = 2.5
    pt = min(first_branch.points, key=lambda p: abs(p.tau - tau))
    orbit = newton_correct(pt.orbit, REFERENCE.with_tau(tau))
    tr = integrate(REFERENCE.with_tau(tau), Constant((0.01, 0.0)), 1500.0, 1e-9)
    t = np.linspace(1500 - 2 * orbit.period, 1500, 2000)
    late = tr(t)
    _, prof = orbit.sample(2000)
    d = np.hypot(late[:, None, 0] - prof[None, :, 0], late[:, None, 1] - prof[None, :, 1])
    hausdorff = max(d.min(axis=1).max(), d.min(axis=0).max())
    assert hausdorff <= 1e-2


def test_section_constant_trajectory():
    tr = integrate(REFERENCE.with_tau(2.5), Constant((0.0, 0.0)), 50.0)
    assert poincare_section(tr, Section((0.0, 1.0), 0.0, -1)) == []


def test_section_needs_normal():
    with pytest.raises(ValueError):
        Section((0.0, 0.0))


def test_crossing_times_of_periodic_solution(first_branch):
    tau = 2.5
    pt = min(first_branch.points, key=lambda p: abs(p.tau - tau))
    orbit = newton_correct(pt.orbit, REFERENCE.with_tau(tau))
    tr = integrate(REFERENCE.with_tau(tau), Segment.from_orbit(orbit), 5 * orbit.period, 1e-11)
    cr = poincare_section(tr, Section((0.0, 1.0), 0.0, -1))
    dt = np.diff([c.t for c in cr])
    assert len(dt) >= 3
    assert np.allclose(dt, orbit.period, atol=1e-6)
    assert not any(c.ambiguous for c in cr)


class _Cubic:
    """Stand-in trajectory x1 = (t - 1)^3 crossing x1 = 0 with zero speed."""

    tau = 0.0

    def __init__(self):
        self.t = np.linspace(0.0, 2.0, 11)
        self.y = self(self.t)
        self.t_end = 2.0

    def __call__(self, t):
        t = np.atleast_1d(t)
        return np.stack([(t - 1.0) ** 3, 3 * (t - 1.0) ** 2], axis=1)


def test_grazing_flagged():
    cr = poincare_section(_Cubic(), Section((1.0, 0.0), 0.0, 1))
    assert len(cr) == 1
    assert cr[0].t == pytest.approx(1.0, abs=1e-3)
    assert cr[0].ambiguous


def test_cascade_section_clusters(cascade_run):
    # just beyond the accumulation point the attractor is no longer a single cycle
    steps, branches, _ = cascade_run
    orbit = branches[-1].points[-1].orbit
    tau = 12.22
    tr = integrate(REFERENCE.with_tau(tau), Segment.from_orbit(orbit, tau), 3000.0, 1e-7)
    sec = Section((1.0, 0.0), 2.1, -1, ((-np.inf, np.inf), (-np.inf, 0.0)))
    cr = poincare_section(tr, sec, t_min=1500.0)
    x2 = np.sort([c.x[1] for c in cr])
    assert len(cr) > 50
    gaps = np.diff(x2)
    assert np.sum(gaps > 1e-3) + 1 >= 2

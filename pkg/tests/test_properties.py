"""Randomized checks of the structural identities."""

import math

import numpy as np
from hypothesis import given, settings, strategies as st

from delaybif.analytic import hopf_points, unstable_count
from delaybif.lyapunov import (
    beta,
    det_delta_2iw,
    lyapunov_general,
    sign_first_lyapunov,
    _char_matrix,
)
from delaybif.model import (
    Branch,
    PhysicalParams,
    SwingParams,
    equilibria,
    swing_jet,
    lower_equilibrium,
    to_dimensionless,
    to_physical,
)
from delaybif.spectrum import Quasipolynomial, approximate_spectrum, char_eval

damping = st.floats(0.0, 0.5, allow_nan=False)
ratio = st.floats(1.05, 8.0)
coef = st.floats(0.05, 1.0)
index = st.integers(0, 10)


@st.composite
def hopf_inputs(draw):
    a = draw(damping)
    atilde = max(a, 1e-3) * draw(ratio) if a > 0 else draw(st.floats(0.01, 1.0))
    return a, atilde, draw(coef)


@settings(max_examples=300, deadline=None)
@given(hopf_inputs(), index)
def test_defining_identities(p, n):
    a, atilde, c = p
    t = hopf_points(a, atilde, c, n)
    s = math.sqrt(atilde * atilde - a * a)
    for j, om, tau in ((1, t.omega.omega1, t.tau1[n]), (2, t.omega.omega2, t.tau2[n])):
        assert abs(a + atilde * math.cos(om * tau)) <= 1e-12
        sgn = -1 if j == 1 else 1
        assert abs(om * om + sgn * s * om - c) <= 1e-12 * (1 + om * om)
        # sine sign rule
        assert (math.sin(om * tau) > 0) == (j == 1)
        assert abs(char_eval(Quasipolynomial(a, atilde, c, tau), 1j * om)) <= 1e-10 * (1 + om * om)
        # scaled equation crosses at omega * tau
        assert abs((om * tau) - (math.acos(-a / atilde) if j == 1 else 2 * math.pi - math.acos(-a / atilde))
                   - 2 * math.pi * n) <= 1e-9 * (1 + om * tau)


@settings(max_examples=200, deadline=None)
@given(hopf_inputs())
def test_frequencies_vieta(p):
    a, atilde, c = p
    om = hopf_points(a, atilde, c, 0).omega
    assert math.isclose(om.omega1 * om.omega2, c, rel_tol=1e-12)
    assert math.isclose(om.omega1 - om.omega2, math.sqrt(atilde**2 - a**2), rel_tol=1e-12, abs_tol=1e-15)


@settings(max_examples=200, deadline=None)
@given(hopf_inputs())
def test_interleaving_up_to_n_max(p):
    a, atilde, c = p
    t = hopf_points(a, atilde, c, 30)
    merged = []
    for n in range(30):
        merged += [t.tau1[n], t.tau2[n]]
        if t.tau2[n] > t.tau1[n + 1]:
            break
    else:
        merged.append(t.tau1[30])
    seq = merged[:-1] if len(merged) % 2 == 0 else merged
    assert all(x < y for x, y in zip(seq, seq[1:]))


@settings(max_examples=60, deadline=None)
@given(hopf_inputs(), st.floats(0.0, 1.0))
def test_unstable_count_matches_spectrum(p, frac):
    a, atilde, c = p
    t = hopf_points(a, atilde, c, 40)
    tau = frac * min(40.0, t.tau1[-1])
    crit = np.concatenate([t.tau1, t.tau2])
    if np.min(np.abs(crit - tau)) < 1e-3:
        return
    rs = approximate_spectrum(Quasipolynomial(a, atilde, c, tau), count=12)
    assert rs.n_u == unstable_count(t, tau)


@st.composite
def swing(draw):
    a = draw(st.floats(0.0, 0.2))
    atilde = draw(st.floats(a * 1.1 + 1e-3, 0.6))
    w = draw(st.floats(0.05, 0.9))
    return SwingParams(a, atilde, w)


@settings(max_examples=150, deadline=None)
@given(swing(), index, st.sampled_from([1, 2]), st.sampled_from([0.5, 2.0, 10.0]))
def test_lyapunov_sign_matches_oracle(params, n, family, scale):
    jet = swing_jet(params, lower_equilibrium(params))
    t = hopf_points(params.a, params.atilde, jet.h1, n)
    om = t.omega.omega1 if family == 1 else t.omega.omega2
    tau = (t.tau1 if family == 1 else t.tau2)[n]
    rep = sign_first_lyapunov(jet, params.a, params.atilde, om, tau)
    L, info = lyapunov_general(jet, params.a, params.atilde, om, tau, alpha_q=scale)
    if rep.sign == 0:
        return
    assert np.sign(L) == rep.sign
    assert info.residual_p <= 1e-10 and info.residual_q <= 1e-10
    # Re(1/beta) sign per family
    assert beta(om, tau, params.a, jet.h1).sign_re_inverse == (-1 if family == 1 else 1)
    # closed form of det Delta(2 i omega)
    D = np.linalg.det(_char_matrix(2j * om, params.a, params.atilde, jet.h1, tau))
    D0 = det_delta_2iw(om, params.a, params.atilde, jet.h1)
    assert abs(D - D0) <= 1e-10 * abs(D0)
    # simplification identity
    lhs = params.a + params.atilde * np.exp(-1j * om * tau)
    assert abs(lhs - (-1j * om + 1j * jet.h1 / om)) <= 1e-10 * (1 + om + jet.h1 / om)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(0.0, 3.0), st.floats(0.01, 100.0), st.floats(0.0, 50.0),
       st.floats(0.0, 100.0))
def test_scaling_round_trip(a_hat, at_hat, ks, w_hat, tau_hat):
    p = PhysicalParams(a_hat, at_hat, ks, w_hat, tau_hat)
    q = to_physical(to_dimensionless(p), ks)
    for x, y in zip((p.a_hat, p.atilde_hat, p.ks_hat, p.w_hat, p.tau_hat),
                    (q.a_hat, q.atilde_hat, q.ks_hat, q.w_hat, q.tau_hat)):
        assert math.isclose(x, y, rel_tol=1e-14, abs_tol=1e-300)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-6, 1.0))
def test_equilibria_residual_and_branch(w):
    eqs = equilibria(SwingParams(0.025, 0.0625, w))
    assert len(eqs) >= 2
    for e in eqs:
        assert abs(math.sin(e.y_e) - w) <= 1e-12
        if w < 1:
            assert (e.kind is Branch.LOWER) == (e.c > 0)

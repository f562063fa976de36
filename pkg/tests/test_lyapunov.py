import math

import numpy as np
import pytest

from delaybif.analytic import hopf_points, hopf_table
from delaybif.lyapunov import (
    BranchSide,
    Criticality,
    DegeneracyError,
    beta,
    bracket_coefficients,
    classify_all_hopf,
    det_delta_2iw,
    lyapunov_general,
    lyapunov_general_oracle,
    sign_first_lyapunov,
)
from delaybif.model import REFERENCE, InvalidParameterError, NonlinearityJet, SwingParams, lower_equilibrium, swing_jet
from delaybif.spectrum import Quasipolynomial, char_eval

JET = swing_jet(REFERENCE, lower_equilibrium(REFERENCE))
A, AT = REFERENCE.a, REFERENCE.atilde
TABLE = hopf_table(REFERENCE, 10)


def test_beta_signs_per_family():
    p1, p2 = TABLE.family(1)[0], TABLE.family(2)[0]
    assert beta(p1.omega, p1.tau, A, JET.h1).sign_re_inverse == -1
    assert beta(p2.omega, p2.tau, A, JET.h1).sign_re_inverse == 1


def test_beta_boundary():
    b = beta(1.0, 2.0, A, 1.0)
    assert b.re == 0.0 and b.sign_re_inverse == 0


def test_beta_preconditions():
    with pytest.raises(InvalidParameterError):
        beta(0.0, 1.0, A, 1.0)


@pytest.mark.parametrize("family", [1, 2])
def test_det_delta_closed_form(family):
    for hp in TABLE.family(family):
        lam = 2j * hp.omega
        direct = char_eval(Quasipolynomial(A, AT, JET.h1, hp.tau), lam)
        closed = det_delta_2iw(hp.omega, A, AT, JET.h1)
        assert abs(closed - direct) <= 1e-10 * abs(direct)


def test_det_delta_frozen_values():
    # direct evaluation at the first delay of each family in 30-digit arithmetic
    p1, p2 = TABLE.family(1)[0], TABLE.family(2)[0]
    assert det_delta_2iw(p1.omega, A, AT, JET.h1) == pytest.approx(-3.3053096276042181 - 0.03587932033708857j, abs=1e-13)
    assert det_delta_2iw(p2.omega, A, AT, JET.h1) == pytest.approx(-2.6660058222911107 - 0.03387444347054539j, abs=1e-13)


def test_det_delta_equal_damping():
    om = 0.9
    assert det_delta_2iw(om, 0.1, 0.1, om * om) == pytest.approx(complex(-3 * om * om, 2 * om * 2 * 0.1))


def test_first_points_sign():
    r1 = sign_first_lyapunov(JET, A, AT, TABLE.family(1)[0].omega, TABLE.family(1)[0].tau)
    r2 = sign_first_lyapunov(JET, A, AT, TABLE.family(2)[0].omega, TABLE.family(2)[0].tau)
    assert r1.sign == -1 and r1.criticality is Criticality.SUPERCRITICAL
    assert r2.sign == 1 and r2.criticality is Criticality.SUBCRITICAL
    assert r1.bracket_value * 27.136517 == pytest.approx(0.260 - 47.057, abs=2e-3)
    assert r2.bracket_value * 29.003721 == pytest.approx(-0.552 + 108.140, abs=2e-3)


def test_third_point_rational_form():
    hp = TABLE.family(1)[3]
    r = sign_first_lyapunov(JET, A, AT, hp.omega, hp.tau)
    n = 3
    expected = ((0.692 * n + 0.260) - (149.155 * n + 47.057)) / (n * n + 4.691 * n + 27.137)
    assert r.sign == -1
    assert r.bracket_value == pytest.approx(expected, rel=1e-3)


def test_bracket_coefficients():
    # published coefficients are truncated to three decimals, so compare within 1e-3
    f1 = bracket_coefficients(JET, A, AT, 1)
    f2 = bracket_coefficients(JET, A, AT, 2)
    want1 = {"first": [0.692, 0.260], "second": [-149.155, -47.057], "den": [4.691, 27.137]}
    want2 = {"first": [-0.899, -0.552], "second": [157.982, 108.140], "den": [5.429, 29.004]}
    for got, want in ((f1, want1), (f2, want2)):
        for key, vals in want.items():
            assert np.allclose(got[key], vals, rtol=0, atol=1e-3), key


def test_second_summand_dominates():
    # observation only: the det Delta(2 i omega) term is small for these parameters
    for hc in classify_all_hopf(REFERENCE, 10):
        assert abs(hc.report.second_term) > 10 * abs(hc.report.first_term)


def test_quadratic_degeneracy():
    with pytest.raises(DegeneracyError):
        sign_first_lyapunov(NonlinearityJet(1.0, 0.0, -1.0), A, AT, 1.0, 2.0)


def test_preconditions():
    with pytest.raises(InvalidParameterError):
        sign_first_lyapunov(JET, 0.1, 0.05, 1.0, 2.0)
    with pytest.raises(InvalidParameterError):
        sign_first_lyapunov(NonlinearityJet(-1.0, 1.0, 1.0), A, AT, 1.0, 2.0)


def test_oracle_agrees_first_point():
    hp = TABLE.family(1)[0]
    assert np.sign(lyapunov_general_oracle(JET, A, AT, hp.omega, hp.tau)) == -1


def test_oracle_matches_simplified_closed_form():
    for hp in TABLE.points()[:10]:
        L, info = lyapunov_general(JET, A, AT, hp.omega, hp.tau)
        b = beta(hp.omega, hp.tau, A, JET.h1).value
        D = det_delta_2iw(hp.omega, A, AT, JET.h1)
        simplified = (0.5 / b * info.alpha_q**2 * JET.h2**2 * (2 / JET.h1 + 1 / D - JET.h3 / JET.h2**2)).real
        assert L == pytest.approx(simplified, rel=1e-10)
        assert info.alpha_product == pytest.approx(1 / b, rel=1e-12)


def test_null_vector_residuals():
    for hp in TABLE.points():
        _, info = lyapunov_general(JET, A, AT, hp.omega, hp.tau)
        assert info.residual_p <= 1e-10 and info.residual_q <= 1e-10
        assert info.normalization_error <= 1e-10


def test_oracle_scaling():
    hp = TABLE.family(2)[1]
    L1 = lyapunov_general_oracle(JET, A, AT, hp.omega, hp.tau, alpha_q=1.0)
    L2 = lyapunov_general_oracle(JET, A, AT, hp.omega, hp.tau, alpha_q=2.0)
    assert L2 == pytest.approx(4 * L1, rel=1e-12)


def test_oracle_linear_system():
    hp = TABLE.family(1)[0]
    assert lyapunov_general_oracle(NonlinearityJet(JET.h1, 0.0, 0.0), A, AT, hp.omega, hp.tau) == 0.0


def test_oracle_singular_delta0():
    with pytest.raises(DegeneracyError):
        lyapunov_general_oracle(NonlinearityJet(0.0, -1.0, 0.0), A, AT, 1.0, 2.0)


def test_simplification_identity():
    for hp in TABLE.points():
        lhs = A + AT * np.exp(-1j * hp.omega * hp.tau)
        rhs = -1j * hp.omega + 1j * JET.h1 / hp.omega
        assert abs(lhs - rhs) < 1e-10


def test_classify_alternation():
    res = classify_all_hopf(REFERENCE, 5)
    assert len(res) == 12
    crit = [hc.report.criticality for hc in sorted(res, key=lambda h: h.point.tau)]
    assert crit == [Criticality.SUPERCRITICAL, Criticality.SUBCRITICAL] * 6
    assert all(hc.report.branch_side is BranchSide.LARGER_DELAY for hc in res)
    for hc in res:
        want = Criticality.SUPERCRITICAL if hc.point.family == 1 else Criticality.SUBCRITICAL
        assert hc.report.criticality is want


def test_classify_no_candidates():
    assert classify_all_hopf(SwingParams(0.05, 0.02, 0.125), 5) == []


def test_classify_skips_double_hopf():
    c = math.sqrt(1 - 0.125**2)
    at = 0.1829598425422718
    t = hopf_points(0.025, at, c, 3)
    assert abs(t.tau1[3] - t.tau2[2]) < 1e-12 * t.tau1[3]
    res = classify_all_hopf(SwingParams(0.025, at, 0.125), 3)
    keys = {(h.point.family, h.point.n) for h in res}
    assert (1, 3) not in keys and (2, 2) not in keys

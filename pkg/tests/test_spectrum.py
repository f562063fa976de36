import math
import time

import numpy as np
import pytest

from delaybif.analytic import hopf_table, unstable_count
from delaybif.model import REFERENCE, SwingParams
from delaybif.spectrum import (
    Quasipolynomial,
    SimplicityError,
    abscissa_sweep,
    approximate_spectrum,
    char_derivative,
    char_eval,
    crossing_direction,
    generator_matrix,
)

QP = Quasipolynomial.from_params(REFERENCE)
TABLE = hopf_table(REFERENCE, 5)


def test_char_eval_at_hopf_point():
    hp = TABLE.family(1)[0]
    assert abs(char_eval(QP.with_tau(hp.tau), 1j * hp.omega)) <= 1e-10


def test_char_eval_trivial():
    assert char_eval(QP.with_tau(3.0), 0.0) == pytest.approx(REFERENCE.c)
    lam = 0.3 + 0.7j
    q0 = QP.with_tau(0.0)
    assert char_eval(q0, lam) == pytest.approx(lam**2 + (q0.a + q0.atilde) * lam + q0.c)


def test_derivative_finite_difference():
    q = QP.with_tau(2.7)
    lam, h = 0.1 + 1.1j, 1e-6
    fd = (char_eval(q, lam + h) - char_eval(q, lam - h)) / (2 * h)
    assert char_derivative(q, lam) == pytest.approx(fd, rel=1e-8)


def test_rightmost_pair_on_axis():
    hp = TABLE.family(1)[0]
    rs = approximate_spectrum(QP.with_tau(hp.tau))
    assert abs(rs.roots[0] - 1j * hp.omega) < 1e-8
    assert np.all(rs.residuals <= 1e-9 * (1 + np.abs(rs.roots) ** 2))


def test_unstable_count_at_three():
    assert approximate_spectrum(QP.with_tau(3.0)).n_u == 2


def test_delay_free_quadratic():
    rs = approximate_spectrum(QP.with_tau(0.0))
    assert rs.roots[0].real == pytest.approx(-0.04375, abs=1e-14)
    assert len(rs.all_roots()) == 2


def test_conjugate_storage():
    rs = approximate_spectrum(QP.with_tau(5.0))
    assert np.all(rs.roots.imag >= 0)
    allr = rs.all_roots()
    assert np.allclose(np.sort_complex(allr), np.sort_complex(allr.conj()))


def test_mesh_convergence():
    q = QP.with_tau(7.0)
    rs = approximate_spectrum(q)
    assert not rs.partial
    # starters from a twice finer generator polish to the same roots
    ev = np.linalg.eigvals(generator_matrix(q, 2 * rs.N))
    ev = ev[np.argsort(-ev.real)][:6]
    for r in rs.roots[:3]:
        assert np.min(np.abs(ev - r)) < 1e-6 or np.min(np.abs(ev - r.conjugate())) < 1e-6


def test_sweep_crossings_in_hopf_cells():
    taus = np.linspace(0.0, 30.0, 600)
    sw = abscissa_sweep(REFERENCE, taus, k=4)
    s = np.sign(sw.abscissa)
    cells = np.where(s[:-1] * s[1:] < 0)[0]
    hopf = TABLE.tau1.tolist() + TABLE.tau2.tolist()
    for i in cells:
        assert any(taus[i] <= h <= taus[i + 1] for h in hopf)
    assert any(taus[i] <= TABLE.tau1[0] <= taus[i + 1] for i in cells)
    assert any(taus[i] <= TABLE.tau2[0] <= taus[i + 1] for i in cells)


def test_sweep_staircase_larger_damping():
    p = SwingParams(0.025, 0.225, 0.125)
    t = hopf_table(p, 5)
    taus = np.linspace(0.1, 22.0, 220)
    sw = abscissa_sweep(p, taus)
    assert sw.n_u.tolist() == [unstable_count(t, x) for x in taus]
    assert {0, 2, 4} <= set(sw.n_u.tolist())


def test_delay_independent_stability():
    sw = abscissa_sweep(SwingParams(0.05, 0.02, 0.125), np.linspace(0, 40, 41))
    assert np.all(sw.abscissa < 0)


def test_crossing_directions():
    h1, h2 = TABLE.family(1)[0], TABLE.family(2)[0]
    d1 = crossing_direction(QP, 1j * h1.omega, h1.tau, fd_step=1e-4)
    d2 = crossing_direction(QP, 1j * h2.omega, h2.tau, fd_step=1e-4)
    assert (d1.sign, d1.fd_sign) == (1, 1)
    assert (d2.sign, d2.fd_sign) == (-1, -1)


def test_simplicity_violation():
    # lambda^2 + 2 lambda + 1 at tau = 0 with atilde folded into a: double root at -1
    q = Quasipolynomial(1.0, 1.0, 1.0, 0.0)
    with pytest.raises(SimplicityError):
        crossing_direction(q, -1.0)


def test_hopf_roots_all_points():
    t0 = time.perf_counter()
    for hp in TABLE.points():
        rs = approximate_spectrum(QP.with_tau(hp.tau))
        assert np.min(np.abs(rs.roots - 1j * hp.omega)) < 1e-8
    assert time.perf_counter() - t0 < 30

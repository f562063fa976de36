"""Sign of the first Lyapunov coefficient at Hopf points of delayed damping.

For ``y'' + a y' + atilde y'(t - tau) + h(y) = 0`` at a Hopf point ``(omega, tau)``
the coefficient has the sign of

    Re(1 / (beta det Delta(2 i omega))) + Re(1 / beta) (2/h1 - h3/h2^2)

with ``beta = -(omega tau)(omega^2 - h1) + i((omega tau) omega a + h1 + omega^2)``.
An independent evaluation of the general RFDE formula (center-manifold
terms ``h11``, ``h20`` built from numerically computed null vectors) serves
as an oracle.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .analytic import HopfPoint, hopf_points
from .model import InvalidParameterError, NonlinearityJet, SwingParams, lower_equilibrium, swing_jet


class DegeneracyError(ArithmeticError):
    """The formula is singular at these inputs."""


class Criticality(enum.Enum):
    SUPERCRITICAL = "supercritical"
    SUBCRITICAL = "subcritical"
    DEGENERATE = "degenerate"


class BranchSide(enum.Enum):
    LARGER_DELAY = "larger"
    SMALLER_DELAY = "smaller"


@dataclass(frozen=True)
class BetaValue:
    re: float
    im: float
    sign_re_inverse: int

    @property
    def value(self):
        return complex(self.re, self.im)


def beta(omega, tau, a, h1) -> BetaValue:
    """``beta`` and ``sgn Re(1/beta) = -sgn(omega^2 - h1)``; zero is signalled by the sign 0."""
    if not omega > 0 or not tau > 0:
        raise InvalidParameterError("need omega > 0 and tau > 0")
    wt = omega * tau
    re = -wt * (omega * omega - h1)
    im = wt * omega * a + h1 + omega * omega
    if re == 0.0 and im == 0.0:
        raise DegeneracyError("beta vanishes")
    return BetaValue(re, im, int(np.sign(re)))


def det_delta_2iw(omega, a, atilde, h1) -> complex:
    """Closed form of ``det Delta(2 i omega)`` valid at Hopf points."""
    return complex(-3 * omega**2 - (1 + 4 * a / atilde) * (omega**2 - h1),
                   2 * omega * (a - atilde + 2 * a * a / atilde))


@dataclass(frozen=True)
class LyapunovReport:
    """Sign of the first Lyapunov coefficient with its ingredients.

    ``bracket_value`` is the bracket whose sign is the sign of the
    coefficient, split into ``first_term`` (the ``det Delta(2 i omega)`` part)
    and ``second_term`` (the ``2/h1 - h3/h2^2`` part).
    """

    sign: int
    bracket_value: float
    first_term: float
    second_term: float
    beta: complex
    det2iw: complex
    criticality: Criticality
    branch_side: BranchSide


DEGENERACY_TOL = 1e-9


def sign_first_lyapunov(jet: NonlinearityJet, a, atilde, omega, tau) -> LyapunovReport:
    """Closed-form sign of the first Lyapunov coefficient at a Hopf point.

    Raises
    ------
    DegeneracyError
        ``h2 == 0`` (the ``h3/h2^2`` term is undefined) or ``beta == 0``.
    InvalidParameterError
        ``a >= atilde`` or ``h1 <= 0``.
    """
    if not a < atilde:
        raise InvalidParameterError("Hopf points need a < atilde")
    if not jet.h1 > 0:
        raise InvalidParameterError("need h1 > 0")
    if jet.h2 == 0:
        raise DegeneracyError("h2 = 0: the quadratic term vanishes and h3/h2^2 is undefined")
    b = beta(omega, tau, a, jet.h1).value
    D = det_delta_2iw(omega, a, atilde, jet.h1)
    first = (1.0 / (b * D)).real
    second = (1.0 / b).real * (2.0 / jet.h1 - jet.h3 / jet.h2**2)
    val = first + second
    if abs(val) < DEGENERACY_TOL * (1 + abs(first) + abs(second)):
        sign, crit = 0, Criticality.DEGENERATE
    else:
        sign = 1 if val > 0 else -1
        crit = Criticality.SUPERCRITICAL if sign < 0 else Criticality.SUBCRITICAL
    # crossing direction: +1 where omega^2 > h1 (first family), -1 otherwise
    crossing = 1 if omega * omega > jet.h1 else -1
    side = BranchSide.LARGER_DELAY if sign * crossing <= 0 else BranchSide.SMALLER_DELAY
    return LyapunovReport(sign, val, first, second, b, D, crit, side)


@dataclass(frozen=True)
class GeneralLyapunovInputs:
    """Ingredients of the general formula; ``q = alpha_q (1, i omega)`` up to phase."""

    p: np.ndarray
    q: np.ndarray
    alpha_q: float
    alpha_product: complex
    h11_at_0: np.ndarray
    h20_at_0: np.ndarray
    residual_p: float
    residual_q: float
    normalization_error: float


def _char_matrix(lam, a, atilde, h1, tau):
    A0 = np.array([[0.0, 1.0], [-h1, -a]])
    A1 = np.array([[0.0, 0.0], [0.0, -atilde]])
    return lam * np.eye(2) - A0 - A1 * np.exp(-lam * tau)


def _char_matrix_derivative(lam, atilde, tau):
    A1 = np.array([[0.0, 0.0], [0.0, -atilde]])
    return np.eye(2) + tau * A1 * np.exp(-lam * tau)


def lyapunov_general(jet: NonlinearityJet, a, atilde, omega, tau, alpha_q=1.0):
    """First Lyapunov coefficient from the general RFDE formula.

    The state is ``x = (y - y_e, y')`` with the delayed argument in ``x2``;
    the nonlinearity enters the second component only. The null vectors are
    ``q = alpha_q (1, i omega)`` and ``p = alpha_p (i h1, omega)`` with
    ``alpha_p`` fixed by ``p^T Delta'(i omega) q = 1``. The center-manifold
    terms ``h11`` and ``h20`` are obtained from linear solves with
    ``Delta(0)`` and ``Delta(2 i omega)``.

    Returns
    -------
    (float, GeneralLyapunovInputs)
    """
    if jet.h1 == 0:
        raise DegeneracyError("Delta(0) is singular for h1 = 0")
    lam = 1j * omega
    Dm = _char_matrix(lam, a, atilde, jet.h1, tau)
    q = alpha_q * np.array([1.0, lam])
    p = np.array([1j * jet.h1, omega], dtype=complex)
    dD = _char_matrix_derivative(lam, atilde, tau)
    p = p / (p @ dD @ q)
    alpha_p = p[1] / omega

    def B(x, y):
        # second derivative form acting on M(phi) = [phi(0), phi(-tau)]
        return np.array([0.0, -jet.h2 * x[0][0] * y[0][0]], dtype=complex)

    def C(x, y, z):
        return np.array([0.0, -jet.h3 * x[0][0] * y[0][0] * z[0][0]], dtype=complex)

    def Mphi(vec, freq):
        return (vec, vec * np.exp(-freq * tau))

    phi = Mphi(q, lam)
    phib = Mphi(q.conj(), -lam)
    h11 = np.linalg.solve(_char_matrix(0.0, a, atilde, jet.h1, tau), B(phi, phib))
    h20 = np.linalg.solve(_char_matrix(2 * lam, a, atilde, jet.h1, tau), B(phi, phi))
    Mh11 = (h11, h11)
    Mh20 = (h20, h20 * np.exp(-2 * lam * tau))
    bracket = B(phi, Mh11) + 0.5 * B(phib, Mh20) + 0.5 * C(phi, phi, phib)
    L = float((p @ bracket).real / omega)
    scale = np.linalg.norm(Dm)
    info = GeneralLyapunovInputs(
        p, q, float(abs(alpha_q)), complex(alpha_p * alpha_q),
        h11, h20,
        float(np.linalg.norm(p @ Dm) / (scale * np.linalg.norm(p))),
        float(np.linalg.norm(Dm @ q) / (scale * np.linalg.norm(q))),
        float(abs(p @ dD @ q - 1.0)),
    )
    return L, info


def lyapunov_general_oracle(jet: NonlinearityJet, a, atilde, omega, tau, alpha_q=1.0) -> float:
    """Value of the general formula (positive normalization fixed by ``alpha_q``)."""
    return lyapunov_general(jet, a, atilde, omega, tau, alpha_q)[0]


@dataclass(frozen=True)
class HopfClassification:
    point: HopfPoint
    report: LyapunovReport


def classify_all_hopf(params: SwingParams, n_upper=5):
    """Criticality of every Hopf point of the lower equilibrium with ``n <= n_upper``.

    Delays shared by both families (double Hopf points) are left out; the
    closed form does not apply there.
    """
    if not 0 < params.w < 1:
        raise InvalidParameterError("need 0 < w < 1")
    eq = lower_equilibrium(params)
    jet = swing_jet(params, eq)
    table = hopf_points(params.a, params.atilde, jet.h1, n_upper)
    if table.omega is None or not params.a < params.atilde:
        return []
    shared = set()
    for i, t1 in enumerate(table.tau1):
        for j, t2 in enumerate(table.tau2):
            if abs(t1 - t2) <= 1e-12 * t1:
                shared.add((1, i))
                shared.add((2, j))
    out = []
    for hp in table.points():
        if (hp.family, hp.n) in shared:
            continue
        out.append(HopfClassification(hp, sign_first_lyapunov(jet, params.a, params.atilde, hp.omega, hp.tau)))
    return out


def bracket_coefficients(jet: NonlinearityJet, a, atilde, family):
    """Bracket terms as rational functions of the Hopf index ``n``.

    Along one family ``beta`` is affine in ``n``. Dividing numerator and
    denominator by the squared modulus of its slope gives

        first  = (t1 n + t0) / (n^2 + d1 n + d0)
        second = (s1 n + s0) / (n^2 + d1 n + d0)

    Returns ``dict(den=(d1, d0), first=(t1, t0), second=(s1, s0))``.
    """
    from .analytic import hopf_frequencies

    om = hopf_frequencies(a, atilde, jet.h1)
    w = om.omega1 if family == 1 else om.omega2
    th = math.acos(-a / atilde)
    # omega tau = th + 2 pi n (family 1) or 2 pi (n + 1) - th (family 2)
    wt0 = th if family == 1 else 2 * math.pi - th
    wt1 = 2 * math.pi
    u = -(w * w - jet.h1)
    v = w * a
    b0 = complex(u * wt0, v * wt0 + jet.h1 + w * w)
    b1 = complex(u * wt1, v * wt1)
    m = abs(b1) ** 2
    D = det_delta_2iw(w, a, atilde, jet.h1)
    g = 2.0 / jet.h1 - jet.h3 / jet.h2**2
    # Re(1/(beta D)) = Re(conj(beta) conj(D)) / (|beta|^2 |D|^2)
    first = ((b1.conjugate() * D.conjugate()).real / (abs(D) ** 2 * m),
             (b0.conjugate() * D.conjugate()).real / (abs(D) ** 2 * m))
    second = (b1.real * g / m, b0.real * g / m)
    den = (2 * (b0 * b1.conjugate()).real / m, abs(b0) ** 2 / m)
    return {"den": den, "first": first, "second": second}

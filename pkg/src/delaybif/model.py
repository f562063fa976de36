"""Delayed swing equation: parameters, scaling, equilibria and local jets.

The governing equation is

    y'' + a y' + atilde y'(t - tau) + sin(y) = w

in dimensionless form (restoring coefficient fixed to one). The state used
throughout the package is ``x = (y - y_e, y')`` where ``y_e = arcsin(w)``
is the principal lower equilibrium, so the lower equilibrium sits at the
origin.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields

import numpy as np

__all__ = [
    "InvalidParameterError",
    "PhysicalParams",
    "SwingParams",
    "NonlinearityJet",
    "Branch",
    "Equilibrium",
    "Equilibria",
    "to_dimensionless",
    "to_physical",
    "equilibria",
    "lower_equilibrium",
    "swing_jet",
    "wrap_angle",
    "params_from_config",
]


class InvalidParameterError(ValueError):
    """Raised for parameter sets outside the supported domain."""


def _check_finite(obj):
    for f in fields(obj):
        v = getattr(obj, f.name)
        if not math.isfinite(v):
            raise InvalidParameterError(f"{f.name} must be finite, got {v!r}")


@dataclass(frozen=True)
class PhysicalParams:
    """Coefficients of the dimensional equation.

    ``y'' + a_hat y' + atilde_hat y'(t - tau_hat) + ks_hat sin(y) = w_hat``
    """

    a_hat: float
    atilde_hat: float
    ks_hat: float
    w_hat: float
    tau_hat: float = 0.0

    def __post_init__(self):
        _check_finite(self)
        if self.ks_hat <= 0:
            raise InvalidParameterError("ks_hat must be positive")
        if self.a_hat < 0 or self.atilde_hat < 0 or self.tau_hat < 0:
            raise InvalidParameterError("damping coefficients and delay must be non-negative")


@dataclass(frozen=True)
class SwingParams:
    """Dimensionless coefficients ``(a, atilde, w, tau)`` with unit restoring term."""

    a: float
    atilde: float
    w: float
    tau: float = 0.0

    def __post_init__(self):
        _check_finite(self)
        if self.a < 0 or self.atilde < 0:
            raise InvalidParameterError("damping coefficients must be non-negative")
        if self.tau < 0:
            raise InvalidParameterError("tau must be non-negative")

    def with_tau(self, tau: float) -> "SwingParams":
        return SwingParams(self.a, self.atilde, self.w, float(tau))

    @property
    def y_e(self) -> float:
        """Principal lower equilibrium angle ``arcsin(w)``."""
        if not 0 < self.w <= 1:
            raise InvalidParameterError("equilibria exist only for 0 < w <= 1")
        return math.asin(self.w)

    @property
    def c(self) -> float:
        """Linearization coefficient at the lower equilibrium, ``sqrt(1 - w^2)``."""
        return math.sqrt(max(0.0, 1.0 - self.w * self.w))


# Parameters used for the reference figures.
REFERENCE = SwingParams(a=0.025, atilde=0.0625, w=0.125, tau=0.0)


@dataclass(frozen=True)
class NonlinearityJet:
    """First three derivatives of the restoring nonlinearity at an equilibrium."""

    h1: float
    h2: float
    h3: float


class Branch(enum.Enum):
    LOWER = "lower"
    UPPER = "upper"


@dataclass(frozen=True)
class Equilibrium:
    y_e: float
    kind: Branch
    c: float
    degenerate: bool = False


class Equilibria(list):
    """List of equilibria; ``exists`` is False when ``w > 1`` rules them out."""

    def __init__(self, items=(), exists=True):
        super().__init__(items)
        self.exists = exists


def to_dimensionless(p: PhysicalParams) -> SwingParams:
    s = math.sqrt(p.ks_hat)
    return SwingParams(
        a=p.a_hat / s,
        atilde=p.atilde_hat / s,
        w=p.w_hat / p.ks_hat,
        tau=p.tau_hat * s,
    )


def to_physical(params: SwingParams, ks_hat: float) -> PhysicalParams:
    """Inverse of :func:`to_dimensionless` for a chosen restoring coefficient."""
    if not (math.isfinite(ks_hat) and ks_hat > 0):
        raise InvalidParameterError("ks_hat must be positive and finite")
    s = math.sqrt(ks_hat)
    return PhysicalParams(
        a_hat=params.a * s,
        atilde_hat=params.atilde * s,
        ks_hat=ks_hat,
        w_hat=params.w * ks_hat,
        tau_hat=params.tau / s,
    )


def equilibria(params: SwingParams, window=(-math.pi, 3 * math.pi)) -> Equilibria:
    """All solutions of ``sin(y) = w`` inside ``window``, ascending.

    Angles live on the real line: equilibria differing by ``2*pi`` are
    distinct. For ``w == 1`` the two families merge and each point is
    returned once, flagged ``degenerate``.
    """
    lo, hi = map(float, window)
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise InvalidParameterError("window must be a finite interval")
    w = params.w
    if w <= 0:
        raise InvalidParameterError("w <= 0 is outside the supported domain")
    if w > 1:
        return Equilibria([], exists=False)

    base = math.asin(w)
    c = math.sqrt(1.0 - w * w)
    out = []
    if w == 1.0:
        families = [(base, Branch.LOWER, 0.0, True)]
    else:
        families = [(base, Branch.LOWER, c, False), (math.pi - base, Branch.UPPER, -c, False)]
    for y0, kind, cval, degenerate in families:
        k0 = math.ceil((lo - y0) / (2 * math.pi))
        k1 = math.floor((hi - y0) / (2 * math.pi))
        for k in range(k0, k1 + 1):
            out.append(Equilibrium(y0 + 2 * math.pi * k, kind, cval, degenerate))
    out.sort(key=lambda e: e.y_e)
    return Equilibria(out)


def lower_equilibrium(params: SwingParams) -> Equilibrium:
    """The principal lower equilibrium ``arcsin(w)``."""
    return Equilibrium(params.y_e, Branch.LOWER, params.c, params.w == 1.0)


def swing_jet(params: SwingParams, eq: Equilibrium) -> NonlinearityJet:
    """Derivatives of ``h(y) = sin(y) - w`` at ``eq``."""
    # sin(y_e) = w on both branches; branch constants avoid cos(arcsin(w)) rounding.
    return NonlinearityJet(h1=eq.c, h2=-params.w, h3=-eq.c)


def wrap_angle(y):
    """Reduce angles to ``[-pi, pi)``; for plotting on the cylinder only."""
    return (np.asarray(y) + np.pi) % (2 * np.pi) - np.pi


_PHYSICAL_KEYS = {f.name for f in fields(PhysicalParams)}
_SWING_KEYS = {f.name for f in fields(SwingParams)}


def params_from_config(doc: dict) -> SwingParams:
    """Build :class:`SwingParams` from a config mapping.

    Exactly one of the blocks ``"physical"`` (keys of :class:`PhysicalParams`)
    or ``"dimensionless"`` (keys of :class:`SwingParams`) must be present.
    """
    blocks = [k for k in ("physical", "dimensionless") if k in doc]
    if len(blocks) != 1:
        raise InvalidParameterError("exactly one of 'physical' or 'dimensionless' is required")
    block = doc[blocks[0]]
    if not isinstance(block, dict):
        raise InvalidParameterError(f"'{blocks[0]}' must be an object")
    allowed = _PHYSICAL_KEYS if blocks[0] == "physical" else _SWING_KEYS
    unknown = set(block) - allowed
    if unknown:
        raise InvalidParameterError(f"unknown parameter keys: {sorted(unknown)}")
    try:
        values = {k: float(v) for k, v in block.items()}
    except (TypeError, ValueError) as exc:
        raise InvalidParameterError(str(exc)) from None
    if blocks[0] == "physical":
        return to_dimensionless(PhysicalParams(**values))
    return SwingParams(**values)

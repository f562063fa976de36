"""Floquet multipliers from a collocation discretization of the monodromy operator.

The variational equation about a cycle is integrated over one period by
collocation on the cycle's own mesh. Its history lives on ``K = ceil(tau/T)``
back-to-back copies of that mesh, so the time-``T`` map becomes a matrix
acting on nodal values over ``[-K, 0]`` (in units of the period). Padding
the history beyond ``tau/T`` only adds zero multipliers.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .collocation import PeriodicOrbit
from .mesh import gauss_points, lagrange_basis


class FloquetAccuracyError(RuntimeError):
    """The trivial multiplier is too far from one; the mesh is too coarse."""


class Stability(enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"


@dataclass(frozen=True)
class FloquetSpectrum:
    multipliers: np.ndarray
    trivial_index: int
    n_unstable: int

    @property
    def trivial(self) -> complex:
        return complex(self.multipliers[self.trivial_index])

    @property
    def nontrivial(self) -> np.ndarray:
        return np.delete(self.multipliers, self.trivial_index)

    @property
    def stability(self) -> Stability:
        return Stability.STABLE if self.n_unstable == 0 else Stability.UNSTABLE

    @property
    def trivial_error(self) -> float:
        return abs(self.trivial - 1.0)


class Monodromy:
    """Discrete time-``T`` map of the linearization about ``orbit``."""

    def __init__(self, orbit: PeriodicOrbit):
        self.orbit = orbit
        p = orbit.params
        mesh = orbit.mesh
        d, M, Md = mesh.degree, mesh.M, mesh.n_nodes
        T, tau = orbit.period, orbit.tau
        K = max(1, math.ceil(tau / T - 1e-12))
        self.K, self.Md = K, Md
        n_all = (K + 1) * Md + 1           # nodes on [-K, 1]
        self.n_hist = K * Md + 1           # nodes on [-K, 0]

        g, _ = gauss_points(d)
        L, Lp = lagrange_basis(g, d)
        piece = np.repeat(np.arange(M), d)
        c = (mesh.breaks[:-1, None] + mesh.h[:, None] * g[None, :]).ravel()
        idx = K * Md + piece[:, None] * d + np.arange(d + 1)[None, :]
        val = np.tile(L, (M, 1))
        der = np.tile(Lp, (M, 1)) / mesh.h[piece][:, None]
        u1 = orbit(c)[:, 0]
        cosv = np.cos(u1 + p.y_e)

        pos = c - tau / T + K
        k = np.minimum(np.floor(pos).astype(int), K)
        i2, xi = mesh.locate(pos - k)
        dval, _ = lagrange_basis(xi, d)
        didx = k[:, None] * Md + i2[:, None] * d + np.arange(d + 1)[None, :]

        nc = c.size
        dp1 = d + 1
        r1 = np.repeat(2 * np.arange(nc), dp1)
        r2 = r1 + 1
        ci = idx.ravel()
        rows = [r1, r1, r2, r2, r2, np.repeat(2 * np.arange(nc) + 1, dp1)]
        cols = [2 * ci, 2 * ci + 1, 2 * ci + 1, 2 * ci + 1, 2 * ci, 2 * didx.ravel() + 1]
        data = [
            der.ravel(),
            -T * val.ravel(),
            der.ravel(),
            T * p.a * val.ravel(),
            T * np.repeat(cosv, dp1) * val.ravel(),
            T * p.atilde * dval.ravel(),
        ]
        J = sp.csc_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(2 * nc, 2 * n_all),
        )
        nh = 2 * self.n_hist
        self.J_old = J[:, :nh].tocsc()
        self.lu = spla.splu(J[:, nh:].tocsc())
        self.size = nh

    def new_segment(self, z_hist):
        """Nodal values on (0, 1] produced from history values on [-K, 0]."""
        rhs = -(self.J_old @ z_hist)
        return self.lu.solve(rhs)

    def apply(self, z_hist):
        z_new = self.new_segment(z_hist)
        return np.concatenate([z_hist[2 * self.Md:], z_new])

    def matrix(self):
        nh = self.size
        out = np.empty((nh, nh))
        shift = nh - 2 * self.Md
        out[:shift] = 0.0
        out[:shift, 2 * self.Md:] = np.eye(shift)
        out[shift:] = self.lu.solve(-(self.J_old.toarray()))
        return out

    def eigenfunction(self, v):
        """Profile on the cycle's periodic nodes [0, 1) for a history eigenvector ``v``."""
        z_new = self.new_segment(v)
        z = np.concatenate([v[-2:], z_new[:-2]])
        return z.reshape(-1, 2)


_DENSE_LIMIT = 1600


def _eigs(mono: Monodromy, count, vectors=False):
    if mono.size <= _DENSE_LIMIT:
        A = mono.matrix()
        if vectors:
            mu, V = la.eig(A)
        else:
            mu, V = la.eigvals(A), None
        order = np.argsort(-np.abs(mu))[:count]
        return mu[order], (V[:, order] if vectors else None)
    op = spla.LinearOperator((mono.size, mono.size), matvec=mono.apply, dtype=float)
    k = min(count, mono.size - 2)
    rng = np.random.default_rng(0)
    res = spla.eigs(op, k=k, which="LM", v0=rng.standard_normal(mono.size),
                    return_eigenvectors=vectors, tol=1e-12, ncv=max(2 * k + 1, 40))
    if vectors:
        mu, V = res
    else:
        mu, V = res, None
    order = np.argsort(-np.abs(mu))
    return mu[order], (V[:, order] if vectors else None)


def floquet_multipliers(orbit: PeriodicOrbit, count=12, strict=True) -> FloquetSpectrum:
    """Largest-magnitude Floquet multipliers of ``orbit``.

    The multiplier closest to one is taken as the trivial one and excluded
    from the count of unstable multipliers. With ``strict`` a trivial
    multiplier farther than 1e-2 from one raises :class:`FloquetAccuracyError`.
    """
    mono = Monodromy(orbit)
    mu, _ = _eigs(mono, count)
    return _spectrum(mu, strict)


def _spectrum(mu, strict):
    mu = np.asarray(mu, dtype=complex)
    mu = np.where(np.abs(mu.imag) < 1e-13 * np.maximum(1.0, np.abs(mu)), mu.real + 0j, mu)
    triv = int(np.argmin(np.abs(mu - 1.0)))
    err = abs(mu[triv] - 1.0)
    if err > 1e-2:
        msg = f"trivial multiplier off by {err:.2e}; refine the mesh"
        if strict:
            raise FloquetAccuracyError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
    others = np.delete(mu, triv)
    n_unstable = int(np.sum(np.abs(others) > 1.0))
    return FloquetSpectrum(mu, triv, n_unstable)


def critical_eigenfunction(orbit: PeriodicOrbit, target: complex, count=12):
    """Eigenfunction on the cycle's nodes for the multiplier nearest ``target``."""
    mono = Monodromy(orbit)
    mu, V = _eigs(mono, count, vectors=True)
    j = int(np.argmin(np.abs(mu - target)))
    v = V[:, j]
    if abs(target.imag) == 0.0:
        v = v.real if np.linalg.norm(v.real) >= np.linalg.norm(v.imag) else v.imag
    return complex(mu[j]), mono.eigenfunction(np.asarray(v))

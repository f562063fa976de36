"""Collocation equations for periodic solutions of the delayed swing equation.

Time is rescaled to ``s = t / T`` so the profile lives on [0, 1]:

    x1'(s) = T x2(s)
    x2'(s) = T (-a x2(s) - atilde x2(s - tau/T) - sin(x1(s) + y_e) + w)

Periodicity lets the delayed argument wrap modulo one for any ``tau/T``.
Unknowns are stacked as ``X = [profile.ravel(), T, tau]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..model import SwingParams
from .mesh import Mesh, lagrange_basis, gauss_points


@dataclass(frozen=True)
class PeriodicOrbit:
    """A limit cycle on a collocation mesh, in shifted coordinates ``x``."""

    mesh: Mesh = field(repr=False)
    profile: np.ndarray = field(repr=False)
    period: float
    params: SwingParams
    residual: float = float("nan")

    @property
    def tau(self):
        return self.params.tau

    def __call__(self, s, derivative=False):
        return self.mesh.evaluate(self.profile, s, derivative)

    def sample(self, n=400):
        s = np.linspace(0.0, 1.0, n, endpoint=False)
        return s, self(s)

    @property
    def extents(self):
        """(min x1, max x1) over the cycle, sampled densely."""
        _, x = self.sample(max(2000, 8 * self.mesh.n_nodes))
        return float(x[:, 0].min()), float(x[:, 0].max())

    @property
    def amplitude(self):
        lo, hi = self.extents
        return 0.5 * (hi - lo)

    def as_vector(self):
        return np.concatenate([self.profile.ravel(), [self.period, self.params.tau]])

    def shifted(self, ds):
        """Same cycle with its phase origin moved by ``ds`` (in units of the period)."""
        nodes = self.mesh.nodes
        return PeriodicOrbit(self.mesh, self(nodes + ds), self.period, self.params, self.residual)

    def remeshed(self, mesh: Mesh):
        return PeriodicOrbit(mesh, self(mesh.nodes), self.period, self.params, self.residual)

    def repeated(self, k=2):
        """The same cycle traversed ``k`` times, seen as a ``k*T``-periodic solution."""
        b = self.mesh.breaks
        reps = [b[:-1] / k + j / k for j in range(k)]
        mesh = Mesh(np.append(np.concatenate(reps), 1.0), self.mesh.degree)
        return PeriodicOrbit(mesh, self((mesh.nodes * k) % 1.0), k * self.period, self.params, self.residual)


class CollocationSystem:
    """Residual and sparse Jacobian of the periodic boundary-value problem on one mesh."""

    def __init__(self, mesh: Mesh, params: SwingParams, reference: PeriodicOrbit | None = None):
        self.mesh = mesh
        self.params = params
        self.y_e = params.y_e
        d = mesh.degree
        g, gw = gauss_points(d)
        self.L, Lp = lagrange_basis(g, d)
        self.colloc, self.qw = mesh.collocation_points()
        M = mesh.M
        # per collocation point: piece, node indices and derivative weights
        piece = np.repeat(np.arange(M), d)
        self.cidx = mesh.node_index(piece)                    # (Md, d+1)
        self.cval = np.tile(self.L, (M, 1))                   # (Md, d+1)
        self.cder = np.tile(Lp, (M, 1)) / mesh.h[piece][:, None]
        self.n = 2 * mesh.n_nodes
        self.set_reference(reference)

    def set_reference(self, reference):
        """Phase condition: integral orthogonality to the reference profile's derivative."""
        if reference is None:
            self.ref_der = None
            return
        self.ref_der = reference(self.colloc, derivative=True)
        self.ref_val = reference(self.colloc)
        norm = np.sqrt(np.sum(self.qw[:, None] * self.ref_der**2))
        self.phase_scale = 1.0 / max(norm, 1e-300)

    def _eval(self, U, idx, w):
        return np.einsum("nj,njc->nc", w, U[idx])

    def residual(self, X, jacobian=True):
        """Collocation and phase residuals, shape ``(n + 1,)``.

        With ``jacobian`` the sparse ``(n + 1, n + 2)`` derivative with
        respect to ``[profile, T, tau]`` is returned as well.
        """
        p = self.params
        a, at, w = p.a, p.atilde, p.w
        mesh, n = self.mesh, self.n
        U = X[:n].reshape(-1, 2)
        T, tau = X[n], X[n + 1]
        u = self._eval(U, self.cidx, self.cval)
        du = self._eval(U, self.cidx, self.cder)
        sig = (self.colloc - tau / T) % 1.0
        didx, dval = mesh.interpolation(sig)
        _, dder = mesh.interpolation(sig, derivative=True)
        v_del = np.einsum("nj,nj->n", dval, U[didx, 1])
        dv_del = np.einsum("nj,nj->n", dder, U[didx, 1])

        f1 = u[:, 1]
        f2 = -a * u[:, 1] - at * v_del - np.sin(u[:, 0] + self.y_e) + w
        r = np.empty(n + 1)
        r[0:n:2] = du[:, 0] - T * f1
        r[1:n:2] = du[:, 1] - T * f2
        ref_der = self.ref_der
        r[n] = self.phase_scale * np.sum(self.qw[:, None] * (u - self.ref_val) * ref_der)
        if not jacobian:
            return r

        Md = self.cidx.shape[0]
        dp1 = self.cidx.shape[1]
        rows1 = np.repeat(2 * np.arange(Md), dp1)
        rows2 = rows1 + 1
        cols = self.cidx.ravel()
        der = self.cder.ravel()
        val = self.cval.ravel()
        cosv = np.repeat(np.cos(u[:, 0] + self.y_e), dp1)
        rows, cols_, data = [], [], []
        # row 1: dx1/ds - T x2
        rows += [rows1, rows1]
        cols_ += [2 * cols, 2 * cols + 1]
        data += [der, -T * val]
        # row 2: dx2/ds - T f2
        rows += [rows2, rows2, rows2, np.repeat(2 * np.arange(Md) + 1, dp1)]
        cols_ += [2 * cols + 1, 2 * cols + 1, 2 * cols, 2 * didx.ravel() + 1]
        data += [der, T * a * val, T * cosv * val, T * at * dval.ravel()]
        # phase row
        qd = (self.qw[:, None] * ref_der) * self.phase_scale
        rows += [np.full(Md * dp1, n), np.full(Md * dp1, n)]
        cols_ += [2 * cols, 2 * cols + 1]
        data += [np.repeat(qd[:, 0], dp1) * val, np.repeat(qd[:, 1], dp1) * val]
        # T and tau columns
        dT = np.empty(n)
        dT[0:n:2] = -f1
        dT[1:n:2] = -f2 + at * dv_del * tau / T
        dtau = np.zeros(n)
        dtau[1:n:2] = -at * dv_del
        rows += [np.arange(n), np.arange(n)]
        cols_ += [np.full(n, n), np.full(n, n + 1)]
        data += [dT, dtau]
        J = sp.csr_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols_))),
            shape=(n + 1, n + 2),
        )
        return r, J

    def sup_residual(self, orbit: PeriodicOrbit, density=2):
        """Sup-norm of the differential equation defect at points off the collocation grid."""
        p = self.params
        mesh = orbit.mesh
        d = mesh.degree
        local = (np.arange(density * d) + 0.5) / (density * d)
        s = (mesh.breaks[:-1, None] + mesh.h[:, None] * local[None, :]).ravel()
        T, tau = orbit.period, orbit.tau
        u = orbit(s)
        du = orbit(s, derivative=True)
        v_del = orbit((s - tau / T) % 1.0)[:, 1]
        f1 = u[:, 1]
        f2 = -p.a * u[:, 1] - p.atilde * v_del - np.sin(u[:, 0] + self.y_e) + p.w
        # defect of the time-domain equation (divide out the scaling by T)
        res = np.concatenate([du[:, 0] / T - f1, du[:, 1] / T - f2])
        return float(np.max(np.abs(res)))

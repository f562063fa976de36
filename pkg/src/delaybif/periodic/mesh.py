"""Piecewise-polynomial representation on a periodic mesh of [0, 1]."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_points(d: int):
    """Gauss-Legendre points and weights mapped to [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(d)
    return 0.5 * (x + 1.0), 0.5 * w


def lagrange_basis(xi, d: int):
    """Values and first derivatives of the equispaced degree-``d`` Lagrange basis.

    Returns two arrays of shape ``(len(xi), d + 1)``.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    t = np.arange(d + 1) / d
    diff = xi[:, None] - t[None, :]
    val = np.ones((xi.size, d + 1))
    der = np.zeros((xi.size, d + 1))
    for j in range(d + 1):
        others = [m for m in range(d + 1) if m != j]
        denom = np.prod(t[j] - t[others])
        val[:, j] = np.prod(diff[:, others], axis=1) / denom
        acc = np.zeros(xi.size)
        for l in others:
            rest = [m for m in others if m != l]
            acc += np.prod(diff[:, rest], axis=1) if rest else 1.0
        der[:, j] = acc / denom
    return val, der


class Mesh:
    """Breakpoints ``0 = s_0 < ... < s_M = 1`` carrying degree-``d`` pieces.

    Node ``i*d + j`` sits at ``s_i + h_i * j / d``; the node at ``s = 1`` is
    identified with node 0, so a periodic profile has ``M*d`` nodes.
    """

    def __init__(self, breaks, degree=4):
        breaks = np.asarray(breaks, dtype=float)
        if breaks[0] != 0.0 or breaks[-1] != 1.0 or np.any(np.diff(breaks) <= 0):
            raise ValueError("breaks must increase strictly from 0 to 1")
        self.breaks = breaks
        self.degree = degree
        self.h = np.diff(breaks)
        self.M = breaks.size - 1
        self.n_nodes = self.M * degree

    @classmethod
    def uniform(cls, M, degree=4):
        return cls(np.linspace(0.0, 1.0, M + 1), degree)

    @property
    def nodes(self):
        d = self.degree
        local = np.arange(d) / d
        return (self.breaks[:-1, None] + self.h[:, None] * local[None, :]).ravel()

    def locate(self, s):
        """Interval index and local coordinate for points of ``s`` in [0, 1)."""
        s = np.asarray(s, dtype=float) % 1.0
        i = np.searchsorted(self.breaks, s, side="right") - 1
        i = np.clip(i, 0, self.M - 1)
        xi = (s - self.breaks[i]) / self.h[i]
        return i, xi

    def node_index(self, i):
        """Global node indices ``(len(i), d + 1)`` of the pieces ``i``."""
        d = self.degree
        return (np.asarray(i)[:, None] * d + np.arange(d + 1)[None, :]) % self.n_nodes

    def interpolation(self, s, derivative=False):
        """Rows of the (sparse-structured) evaluation operator at ``s``.

        Returns ``(idx, weights)``, both ``(len(s), d + 1)``; the derivative
        variant is with respect to ``s``.
        """
        i, xi = self.locate(s)
        val, der = lagrange_basis(xi, self.degree)
        idx = self.node_index(i)
        if derivative:
            return idx, der / self.h[i][:, None]
        return idx, val

    def evaluate(self, values, s, derivative=False):
        idx, w = self.interpolation(np.atleast_1d(s), derivative)
        return np.einsum("nj,nj...->n...", w, values[idx])

    def collocation_points(self):
        """Gauss points ``(M*d,)`` ordered interval by interval, plus quadrature weights."""
        g, gw = gauss_points(self.degree)
        pts = (self.breaks[:-1, None] + self.h[:, None] * g[None, :]).ravel()
        wts = (self.h[:, None] * gw[None, :]).ravel()
        return pts, wts

    def refined(self, factor=2):
        """Split every interval into ``factor`` equal pieces."""
        sub = np.linspace(0.0, 1.0, factor + 1)[:-1]
        b = (self.breaks[:-1, None] + self.h[:, None] * sub[None, :]).ravel()
        return Mesh(np.append(b, 1.0), self.degree)

    def with_intervals(self, values, M):
        """Redistribute ``M`` intervals so a piecewise error monitor is equidistributed."""
        d = self.degree
        # d-th derivative is constant on each piece; its jumps estimate the (d+1)-th.
        idx = self.node_index(np.arange(self.M))
        t = np.arange(d + 1) / d
        V = np.vander(t, d + 1, increasing=True)
        coef = np.linalg.solve(V, values[idx].reshape(self.M, d + 1, -1).transpose(1, 0, 2).reshape(d + 1, -1))
        top = coef[d].reshape(self.M, -1) * np.prod(np.arange(1, d + 1)) / self.h[:, None] ** d
        nxt = np.roll(top, -1, axis=0)
        prv = np.roll(top, 1, axis=0)
        hn = np.roll(self.h, -1)
        hp = np.roll(self.h, 1)
        jump = np.maximum(
            np.linalg.norm(nxt - top, axis=1) / (0.5 * (self.h + hn)),
            np.linalg.norm(top - prv, axis=1) / (0.5 * (self.h + hp)),
        )
        density = jump ** (1.0 / (d + 1))
        density = np.maximum(density, 1e-3 * density.max() + 1e-12)
        cum = np.concatenate([[0.0], np.cumsum(density * self.h)])
        cum /= cum[-1]
        new = np.interp(np.linspace(0.0, 1.0, M + 1), cum, self.breaks)
        new[0], new[-1] = 0.0, 1.0
        # Keep neighbouring ratios bounded for conditioning.
        h = np.diff(new)
        hmin = 1.0 / (M * 200.0)
        h = np.maximum(h, hmin)
        h /= h.sum()
        new = np.concatenate([[0.0], np.cumsum(h)])
        new[-1] = 1.0
        return Mesh(new, d)

"""Composite Gauss-Legendre panels with cumulative (indefinite) integrals.

A :class:`WeightTable` stores the running integral of a smooth integrand on
a panel mesh. Inside each panel the running integral is known at the
Gauss nodes through the Legendre integration matrix, and it is evaluated at
arbitrary points by barycentric interpolation through the left edge and the
nodes. Tables can be chained: the integrand of one table may evaluate
another table, which is how the nested weights are built.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg


@lru_cache(maxsize=8)
def _panel_rule(m: int):
    """Nodes, weights, integration matrix and barycentric weights on [-1, 1]."""
    xi, w = npleg.leggauss(m)
    V = npleg.legvander(xi, m - 1)
    Q = np.empty_like(V)
    for j in range(m):
        c = np.zeros(m)
        c[j] = 1.0
        ci = npleg.legint(c, lbnd=-1.0)
        Q[:, j] = npleg.legval(xi, ci)
    S = Q @ np.linalg.inv(V)
    pts = np.concatenate(([-1.0], xi))
    diff = pts[:, None] - pts[None, :]
    np.fill_diagonal(diff, 1.0)
    bw = 1.0 / diff.prod(axis=1)
    return xi, w, S, pts, bw / np.abs(bw).max()


@dataclass(frozen=True)
class WeightTable:
    """Running integral of a weight on [a, b].

    Attributes:
        grid: strictly increasing abscissae (panel edges and Gauss nodes).
        values: integrand at ``grid`` (endpoint entries may be limits).
        cumulative: integral of the integrand from ``a`` to each abscissa.
    """

    grid: np.ndarray
    values: np.ndarray
    cumulative: np.ndarray
    edges: np.ndarray
    node_cumulative: np.ndarray
    order: int

    @classmethod
    def build(cls, integrand, a=0.0, b=1.0, n_panels=64, order=16, edge_values=None):
        """Tabulate ``integral_a^x integrand``.

        Args:
            integrand: vectorized callable, evaluated only at interior Gauss
                nodes.
            edge_values: optional callable giving the integrand (or its
                limit) at panel edges, for display in ``values``.
        """
        xi, w, S, _, _ = _panel_rule(order)
        edges = np.linspace(a, b, n_panels + 1)
        h = np.diff(edges)
        nodes = edges[:-1, None] + 0.5 * h[:, None] * (xi[None, :] + 1.0)
        vals = np.asarray(integrand(nodes.ravel()), dtype=float).reshape(nodes.shape)
        if not np.all(np.isfinite(vals)):
            bad = np.argwhere(~np.isfinite(vals))[0]
            raise FloatingPointError(
                f"non-finite integrand at x={nodes[tuple(bad)]:.6g}"
            )
        panel = 0.5 * h * (vals @ w)
        cum = np.concatenate(([0.0], np.cumsum(panel)))
        node_cum = cum[:-1, None] + 0.5 * h[:, None] * (vals @ S.T)
        grid = np.column_stack((edges[:-1], nodes)).ravel()
        grid = np.append(grid, edges[-1])
        cgrid = np.column_stack((cum[:-1], node_cum)).ravel()
        cgrid = np.append(cgrid, cum[-1])
        if edge_values is not None:
            ev = np.asarray(edge_values(edges), dtype=float)
        else:
            ev = np.full(edges.shape, np.nan)
        vgrid = np.column_stack((ev[:-1], vals)).ravel()
        vgrid = np.append(vgrid, ev[-1])
        return cls(grid=grid, values=vgrid, cumulative=cgrid, edges=edges,
                   node_cumulative=node_cum, order=order)

    @property
    def total(self) -> float:
        return float(self.cumulative[-1])

    def __call__(self, x):
        """Running integral at ``x`` (scalar or array)."""
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        edges = self.edges
        if xa.size and (xa.min() < edges[0] - 1e-12 or xa.max() > edges[-1] + 1e-12):
            raise ValueError("evaluation point outside the table range")
        _, _, _, pts, bw = _panel_rule(self.order)
        j = np.clip(np.searchsorted(edges, xa, side="right") - 1, 0, len(edges) - 2)
        a = edges[j]
        h = edges[j + 1] - a
        t = 2.0 * (xa - a) / h - 1.0
        fv = np.column_stack((self.cumulative[::self.order + 1][:-1][j],
                              self.node_cumulative[j]))
        d = t[:, None] - pts[None, :]
        hit = d == 0.0
        d[hit] = 1.0
        c = bw[None, :] / d
        out = (c * fv).sum(axis=1) / c.sum(axis=1)
        rows = hit.any(axis=1)
        if rows.any():
            out[rows] = fv[rows][hit[rows]]
        # right edge exactly
        at_end = xa >= edges[-1]
        out[at_end] = self.cumulative[-1]
        return float(out[0]) if np.ndim(x) == 0 else out.reshape(np.shape(x))

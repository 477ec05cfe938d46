"""Tridiagonal solves.

Time stepping factors each implicit matrix once with LAPACK ``dgttrf``
(partial pivoting) and reuses it for every step through ``dgttrs``. A plain
Thomas elimination is kept as an independent reference.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import lapack

from .errors import SingularSystemError


def thomas_solve(sub, main, sup, rhs):
    """Solve a tridiagonal system by forward elimination and back substitution.

    Row i reads sub[i] x[i-1] + main[i] x[i] + sup[i] x[i+1] = rhs[i];
    ``sub[0]`` and ``sup[-1]`` are ignored.
    """
    n = len(main)
    c = np.empty(n)
    d = np.empty(n)
    piv = main[0]
    if piv == 0:
        raise SingularSystemError("zero pivot in row 0", 0)
    c[0] = sup[0] / piv
    d[0] = rhs[0] / piv
    for i in range(1, n):
        piv = main[i] - sub[i] * c[i - 1]
        if piv == 0:
            raise SingularSystemError(f"zero pivot in row {i}", i)
        c[i] = sup[i] / piv if i < n - 1 else 0.0
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / piv
    x = np.empty(n)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


class TridiagonalLU:
    """LU factors of a tridiagonal matrix for repeated solves."""

    def __init__(self, sub, main, sup):
        dl = np.array(sub[1:], dtype=float)
        d = np.array(main, dtype=float)
        du = np.array(sup[:-1], dtype=float)
        dl, d, du, du2, ipiv, info = lapack.dgttrf(dl, d, du)
        if info > 0:
            raise SingularSystemError(f"singular tridiagonal system: zero pivot at row {info - 1}",
                                      info - 1)
        if info < 0:
            raise ValueError(f"dgttrf: illegal argument {-info}")
        self._f = (dl, d, du, du2, ipiv)

    def solve(self, rhs):
        x, info = lapack.dgttrs(*self._f, np.asarray(rhs, dtype=float))
        if info != 0:
            raise ValueError(f"dgttrs: illegal argument {-info}")
        return x


def solve_tridiagonal(sub, main, sup, rhs):
    """One-off solve via the LAPACK factorization."""
    return TridiagonalLU(sub, main, sup).solve(rhs)

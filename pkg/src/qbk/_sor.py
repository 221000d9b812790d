"""Compiled successive over-relaxation sweep for the capacity solver."""

import numba as nb
import numpy as np


@nb.njit(cache=True, nogil=True)
def sor_solve(u, aE, aW, aN, aS, diag, rhs, mask, omega, tol, max_sweeps, check_every):
    """In-place SOR for  diag*u = aE*u[i+1,j] + aW*u[i-1,j] + aN*u[i,j+1] + aS*u[i,j-1] + rhs
    on nodes where ``mask`` is set. Returns (sweeps, max scaled residual)."""
    nx, ny = u.shape
    res = np.inf
    for sweep in range(1, max_sweeps + 1):
        for i in range(1, nx - 1):
            for j in range(1, ny - 1):
                if mask[i, j]:
                    s = (aE[i, j] * u[i + 1, j] + aW[i, j] * u[i - 1, j]
                         + aN[i, j] * u[i, j + 1] + aS[i, j] * u[i, j - 1] + rhs[i, j])
                    u[i, j] += omega * (s / diag[i, j] - u[i, j])
        if sweep % check_every == 0:
            res = 0.0
            for i in range(1, nx - 1):
                for j in range(1, ny - 1):
                    if mask[i, j]:
                        s = (aE[i, j] * u[i + 1, j] + aW[i, j] * u[i - 1, j]
                             + aN[i, j] * u[i, j + 1] + aS[i, j] * u[i, j - 1] + rhs[i, j])
                        r = abs(s / diag[i, j] - u[i, j])
                        if r > res:
                            res = r
            if res < tol:
                return sweep, res
    return max_sweeps, res

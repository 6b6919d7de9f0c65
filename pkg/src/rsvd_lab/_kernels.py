"""Compiled inner loops.  Importing this module requires numba."""

import math

import numba
import numpy as np


@numba.njit(cache=True)
def jacobi_kernel(w, z, tol, max_sweeps):
    """Cyclic one-sided Jacobi on the rows of each ``w[b]``; rotations mirrored into ``z[b]``.

    Rows whose squared norm is below ``eps^2 ||w[b]||_F^2`` are treated as
    round-off and never rotated.  Returns 0 on convergence, -1 if some
    matrix needed more than ``max_sweeps``.
    """
    nb, n, m = w.shape
    want = z.shape[0] > 0
    eps2 = 2.220446049250313e-16 ** 2
    for b in range(nb):
        norms2 = np.zeros(n)
        for i in range(n):
            acc = 0.0
            for k in range(m):
                acc += w[b, i, k] * w[b, i, k]
            norms2[i] = acc
        # rows below round-off of the whole matrix are left alone
        floor = eps2 * norms2.sum()
        converged = False
        for _ in range(max_sweeps):
            rotated = False
            for p in range(n - 1):
                for q in range(p + 1, n):
                    ap = norms2[p]
                    aq = norms2[q]
                    g = 0.0
                    for k in range(m):
                        g += w[b, p, k] * w[b, q, k]
                    if abs(g) <= tol * math.sqrt(ap * aq) or ap <= floor or aq <= floor:
                        continue
                    rotated = True
                    zeta = (aq - ap) / (2.0 * g)
                    sgn = -1.0 if zeta < 0.0 else 1.0
                    t = sgn / (abs(zeta) + math.hypot(1.0, zeta))
                    c = 1.0 / math.sqrt(1.0 + t * t)
                    s = c * t
                    for k in range(m):
                        x = w[b, p, k]
                        y = w[b, q, k]
                        w[b, p, k] = c * x - s * y
                        w[b, q, k] = s * x + c * y
                    if want:
                        for k in range(n):
                            x = z[b, p, k]
                            y = z[b, q, k]
                            z[b, p, k] = c * x - s * y
                            z[b, q, k] = s * x + c * y
                    norms2[p] = max(ap - t * g, 0.0)
                    norms2[q] = aq + t * g
            for i in range(n):
                acc = 0.0
                for k in range(m):
                    acc += w[b, i, k] * w[b, i, k]
                norms2[i] = acc
            if not rotated:
                converged = True
                break
        if not converged:
            return -1
    return 0

"""
One-norm and condition-number estimation.

Hager's method climbs the convex function ``x -> ||A x||_1`` over the unit
1-norm ball and returns an achieved value, hence a lower bound on
``||A||_1``.  Its weak spot is the starting vector: the all-ones start can
be orthogonal to everything that matters.  The randomized variant starts
from the dominant right singular vector of a cheap rank-1 sketch instead.

Operators are :class:`scipy.sparse.linalg.LinearOperator` instances; dense
arrays are wrapped on entry.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from .densela import _sign, as_matrix, gaussian_matrix
from .exceptions import DimensionError
from .sketch import _basis, _project, power_method

__all__ = [
    "NormEstimate",
    "as_operator",
    "lu_inverse_operator",
    "triangular_inverse_operator",
    "adjoint_mismatch",
    "hager_one_norm",
    "randomized_hager",
    "condition_estimate",
]

DEFAULT_HAGER_ITERS = 5


@dataclass(frozen=True)
class NormEstimate:
    """An achieved ``||A x||_1`` with ``||x||_1 = 1``.

    ``history`` lists ``||y||_1`` after every iteration; it is
    nondecreasing up to round-off.
    """

    value: float
    iterations: int
    matvec_count: int
    start_vector_tag: str
    history: tuple = ()


def as_operator(a):
    """Wrap a dense matrix as a linear operator; operators pass through."""
    if isinstance(a, LinearOperator):
        return a
    return aslinearoperator(as_matrix(a, "a"))


def lu_inverse_operator(a):
    """Operator applying ``A^{-1}`` and ``A^{-T}`` through one LU factorization."""
    a = as_matrix(a, "a")
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"inverse needs a square matrix, got {a.shape}")
    lu = scipy.linalg.lu_factor(a)
    return LinearOperator(
        a.shape,
        matvec=lambda x: scipy.linalg.lu_solve(lu, x),
        rmatvec=lambda y: scipy.linalg.lu_solve(lu, y, trans=1),
        matmat=lambda x: scipy.linalg.lu_solve(lu, x),
        rmatmat=lambda y: scipy.linalg.lu_solve(lu, y, trans=1),
        dtype=np.float64,
    )


def triangular_inverse_operator(t, lower=False):
    """Operator applying ``T^{-1}`` and ``T^{-T}`` by substitution."""
    t = as_matrix(t, "t")
    if t.shape[0] != t.shape[1]:
        raise DimensionError(f"inverse needs a square matrix, got {t.shape}")

    def solve(x, trans):
        return scipy.linalg.solve_triangular(t, x, lower=lower, trans=trans)

    return LinearOperator(
        t.shape,
        matvec=lambda x: solve(x, 0),
        rmatvec=lambda y: solve(y, 1),
        matmat=lambda x: solve(x, 0),
        rmatmat=lambda y: solve(y, 1),
        dtype=np.float64,
    )


def adjoint_mismatch(op, probes=4, seed=0):
    """Largest ``|<Ax, y> - <x, A^T y>| / (||x|| ||y||)`` over random probes."""
    op = as_operator(op)
    m, n = op.shape
    worst = 0.0
    for i in range(probes):
        x = gaussian_matrix(n, 1, seed ^ (2 * i))[:, 0]
        y = gaussian_matrix(m, 1, seed ^ (2 * i + 1))[:, 0]
        d = abs(float(y @ op.matvec(x)) - float(x @ op.rmatvec(y)))
        worst = max(worst, d / (np.linalg.norm(x) * np.linalg.norm(y)))
    return worst


def _hager(op, x, max_iter, tag, extra_matvecs=0, finish=False):
    n = op.shape[1]
    history = []
    best = 0.0
    matvecs = extra_matvecs
    it = 0
    while True:
        it += 1
        y = np.asarray(op.matvec(x), dtype=np.float64).ravel()
        z = np.asarray(op.rmatvec(_sign(y)), dtype=np.float64).ravel()
        matvecs += 2
        gamma = float(np.abs(y).sum())
        history.append(gamma)
        best = max(best, gamma)
        zmax = float(np.max(np.abs(z)))
        if zmax <= float(z @ x):
            break
        j = int(np.argmax(np.abs(z)))  # first index on ties
        if it >= max_iter:
            if finish:
                # one more column is cheap and never hurts: keep the best achieved value
                col = np.asarray(op.matvec(np.eye(n)[:, j]), dtype=np.float64).ravel()
                matvecs += 1
                gamma = float(np.abs(col).sum())
                history.append(gamma)
                best = max(best, gamma)
            break
        x = np.zeros(n)
        x[j] = 1.0
    return NormEstimate(best, it, matvecs, tag, tuple(history))


def hager_one_norm(op, x0=None, max_iter=DEFAULT_HAGER_ITERS):
    """Hager's lower estimate of ``||A||_1``.

    Parameters
    ----------
    op : ndarray or LinearOperator
    x0 : array_like, optional
        Start vector, rescaled to unit 1-norm.  Defaults to ``ones(n) / n``.
    max_iter : int
        Iteration cap; each iteration costs one product with ``A`` and one
        with ``A.T``.

    Returns
    -------
    NormEstimate
    """
    op = as_operator(op)
    n = op.shape[1]
    if max_iter < 1:
        raise ValueError(f"max_iter must be at least 1, got {max_iter}")
    if x0 is None:
        x = np.full(n, 1.0 / n)
        tag = "ones"
    else:
        x = np.asarray(x0, dtype=np.float64).ravel()
        if x.shape != (n,):
            raise DimensionError(f"x0 must have length {n}, got {x.shape}")
        s = np.abs(x).sum()
        if not np.isfinite(s) or s == 0.0:
            raise ValueError("x0 must be finite and nonzero")
        x = x / s
        tag = "unit_ej" if np.count_nonzero(x) == 1 else "ones" if np.all(x == x[0]) else "custom"
    return _hager(op, x, max_iter, tag)


def randomized_hager(op, ell=5, seed=0, hager_iters=2):
    """Hager's method started from a randomized rank-1 approximation.

    ``ell`` Gaussian samples give ``Q``; the top right singular vector
    ``u`` of ``Q.T @ A`` (rescaled to unit 1-norm) starts at most
    ``hager_iters`` Hager iterations.  If the cap stops the climb, the
    column it was about to move to is evaluated as well and the largest
    value seen is returned.
    """
    op = as_operator(op)
    m, n = op.shape
    if ell < 2:
        raise ValueError(f"ell must be at least 2, got {ell}")
    if hager_iters < 1:
        raise ValueError(f"hager_iters must be at least 1, got {hager_iters}")
    ell_eff = min(ell, m, n)
    omega = gaussian_matrix(n, ell_eff, seed)
    basis = _basis(op, omega, 0, 1, strict=False)
    approx = _project(op, basis.q, 1, 2 * ell_eff, basis.collapse_step)
    u = approx.v_hat[:, 0]
    # orient so the start vector points into the positive orthant where possible
    if u.sum() < 0:
        u = -u
    x = u / np.abs(u).sum()
    return _hager(op, x, hager_iters, "randomized", extra_matvecs=approx.matvec_count, finish=True)


@dataclass(frozen=True)
class ConditionEstimate:
    kappa1_est: float
    kappa2_est: float
    norm1: NormEstimate
    inv_norm1: NormEstimate
    norm2: float
    inv_norm2: float


def condition_estimate(op, inv_op, ell=5, seed=0, q=4, hager_iters=2):
    """Estimate ``kappa_1`` and ``kappa_2`` as products of separate norm estimates.

    The 1-norms come from :func:`randomized_hager`, the 2-norms from the
    randomized power method with ``q`` power steps.  ``inv_op`` must apply
    ``A^{-1}`` and ``A^{-T}``, e.g. from :func:`lu_inverse_operator`.
    """
    op = as_operator(op)
    inv_op = as_operator(inv_op)
    if op.shape != inv_op.shape[::-1]:
        raise DimensionError(f"operator shapes {op.shape} and {inv_op.shape} do not match")
    n1 = randomized_hager(op, ell, seed, hager_iters)
    i1 = randomized_hager(inv_op, ell, seed ^ 1, hager_iters)
    n2 = power_method(op, gaussian_matrix(op.shape[1], 1, seed), q).norm_estimate
    i2 = power_method(inv_op, gaussian_matrix(inv_op.shape[1], 1, seed ^ 1), q).norm_estimate
    return ConditionEstimate(n1.value * i1.value, n2 * i2, n1, i1, n2, i2)

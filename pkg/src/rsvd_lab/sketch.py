"""
Randomized low-rank approximation by subspace iteration.

All routines produce a :class:`LowRankApprox`, i.e. the product
``Q @ B_k`` in factored form, where ``Q`` is an orthonormal basis for
``(A A^T)^q A Omega`` and ``B_k`` is the rank-k truncated SVD of
``B = Q^T A``.

The matrix argument may be a dense array or a
:class:`scipy.sparse.linalg.LinearOperator`; the algorithms touch it only
through products with blocks of columns, and the number of such
column-applications is reported as ``matvec_count``.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse.linalg import LinearOperator

from .densela import (
    _complete_columns,
    as_matrix,
    exact_svd,
    gaussian_matrix,
    householder_qr,
    singular_values,
    QrFactors,
)
from .exceptions import DimensionError, RankCollapseError, RowRankError

__all__ = [
    "SketchConfig",
    "LowRankApprox",
    "OmegaSplit",
    "PowerEstimate",
    "stabilized_power_basis",
    "basic_randomized",
    "subspace_iteration",
    "subspace_iteration_path",
    "randomized_subspace_iteration",
    "power_method",
    "randomized_power_method",
    "improved_small_k",
    "split_start_matrix",
]

COLLAPSE_TOL = 1e-14
ROW_RANK_TOL = 1e-13


# ---------------------------------------------------------------------------
# operand helpers


def as_operand(a, name="a"):
    """Pass linear operators through, validate everything else as a dense matrix."""
    if isinstance(a, LinearOperator):
        if len(a.shape) != 2 or min(a.shape) < 1:
            raise DimensionError(f"{name} must be a nonempty 2-D operator, got {a.shape}")
        return a
    return as_matrix(a, name)


def _apply(a, x):
    return np.asarray(a @ x, dtype=np.float64)


def _apply_t(a, y):
    return np.asarray(a.T @ y, dtype=np.float64)


def _transpose(a):
    return a.T


# ---------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class SketchConfig:
    """Parameters of one randomized run.

    Parameters
    ----------
    k : int
        Target rank.
    ell : int
        Number of sample columns, ``k <= ell < min(m, n)``.
    q : int
        Number of power steps (applications of ``A A^T``).
    p : int or None
        Analysis split of the oversampling, ``0 <= p <= ell - k``.  Only the
        bound calculators use it.  ``None`` means
        ``min(ell - k, oversampling_p(delta))``.
    delta : float
        Failure tolerance in (0, 1).
    seed : int
        64-bit seed of the Gaussian start matrix.
    reorth_period : int
        Re-orthogonalize every this many half-steps (1 = after every product).
    """

    k: int
    ell: int
    q: int = 0
    p: int | None = None
    delta: float = 0.05
    seed: int = 0
    reorth_period: int = 1

    def __post_init__(self):
        if not 0 < self.k <= self.ell:
            raise ValueError(f"need 0 < k <= ell, got k={self.k}, ell={self.ell}")
        if self.q < 0:
            raise ValueError(f"q must be nonnegative, got {self.q}")
        if self.p is not None and not 0 <= self.p <= self.ell - self.k:
            raise ValueError(f"p must lie in [0, ell - k] = [0, {self.ell - self.k}], got {self.p}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.reorth_period < 1:
            raise ValueError(f"reorth_period must be positive, got {self.reorth_period}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def p_split(self):
        """The oversampling split actually used by the bounds."""
        if self.p is not None:
            return self.p
        from .bounds import oversampling_p

        return min(self.ell - self.k, oversampling_p(self.delta))

    def check_shape(self, shape):
        n = min(shape)
        if not self.ell < n:
            raise DimensionError(f"ell={self.ell} must be smaller than min(m, n)={n}")


@dataclass(frozen=True)
class OmegaSplit:
    """Top and bottom blocks of ``V^T Omega`` and the norms the bounds consume."""

    omega1: np.ndarray
    omega2: np.ndarray
    omega2_norm: float
    omega1_pinv_norm: float
    full_row_rank: bool

    @property
    def quality(self):
        """``||Omega_2||_2 * ||Omega_1^+||_2``."""
        return self.omega2_norm * self.omega1_pinv_norm


@dataclass(frozen=True)
class LowRankApprox:
    """Factored ``Q @ B_k = (Q @ core_u) @ diag(sigma_hat) @ v_hat.T``.

    When ``transposed`` is set the factors describe ``A.T`` (the sketch ran
    on the taller orientation); :attr:`left` and :attr:`right` always refer
    to the frame of the original ``A``.
    """

    q_basis: np.ndarray
    core_u: np.ndarray
    sigma_hat: np.ndarray
    v_hat: np.ndarray
    matvec_count: int
    basis_sigma: np.ndarray = field(repr=False)
    collapse_step: int | None = None
    transposed: bool = False
    omega_split: OmegaSplit | None = field(default=None, repr=False)

    @property
    def k(self):
        return self.sigma_hat.shape[0]

    @property
    def ell(self):
        return self.q_basis.shape[1]

    @property
    def left(self):
        """Left singular vectors of the approximation in the frame of ``A``."""
        return self.v_hat if self.transposed else self.q_basis @ self.core_u

    @property
    def right(self):
        """Right singular vectors of the approximation in the frame of ``A``."""
        return self.q_basis @ self.core_u if self.transposed else self.v_hat

    def to_dense(self):
        return (self.left * self.sigma_hat) @ self.right.T


@dataclass(frozen=True)
class PowerEstimate:
    norm_estimate: float
    matvec_count: int


# ---------------------------------------------------------------------------
# kernels


def _orthonormalize(y, step):
    """QR of one sketch block; returns ``(q, r, collapsed)``."""
    q, r = householder_qr(y)
    scale = np.linalg.norm(y)
    diag = np.abs(np.diag(r))
    collapsed = scale == 0.0 or bool(np.any(diag < COLLAPSE_TOL * scale))
    return q, r, collapsed


def _basis(a, omega, q, reorth_period, strict):
    m = a.shape[0]
    ell = omega.shape[1]
    if ell > m:
        raise DimensionError(f"cannot build {ell} orthonormal columns in R^{m}")
    collapse = None

    def orth(y, step):
        nonlocal collapse
        qq, rr, bad = _orthonormalize(y, step)
        if bad and collapse is None:
            if strict:
                raise RankCollapseError(f"sketch lost rank at half-step {step}", step=step)
            collapse = step
        return qq, rr

    y = _apply(a, omega)
    cur, r = orth(y, 0)
    last = 2 * q
    for h in range(1, last + 1):
        y = _apply_t(a, cur) if h % 2 else _apply(a, cur)
        if h % reorth_period == 0 or h == last:
            cur, r = orth(y, h)
        else:
            cur = y
    return QrFactors(cur, r, collapse)


def stabilized_power_basis(a, omega, q, reorth_period=1, strict=False):
    """Orthonormal basis of ``(A A^T)^q A Omega`` with periodic re-orthogonalization.

    Every ``reorth_period`` half-steps (and always after the last one) the
    current block is replaced by the Q factor of its Householder QR, so the
    power steps never see a numerically collapsed block.

    Parameters
    ----------
    a : ndarray or LinearOperator, shape (m, n)
    omega : ndarray, shape (n, ell)
    q : int
        Number of ``A A^T`` applications.
    reorth_period : int
    strict : bool
        Raise instead of reporting when a block loses rank.

    Returns
    -------
    QrFactors
        ``q`` has orthonormal columns; ``collapse_step`` is the first half-step
        (0 for ``A @ Omega``) whose R factor had a diagonal entry below
        ``1e-14 * ||Y||_F``, or ``None``.
    """
    a = as_operand(a)
    omega = as_matrix(omega, "omega")
    if omega.shape[0] != a.shape[1]:
        raise DimensionError(f"omega has {omega.shape[0]} rows, a has {a.shape[1]} columns")
    if q < 0:
        raise ValueError(f"q must be nonnegative, got {q}")
    if reorth_period < 1:
        raise ValueError(f"reorth_period must be positive, got {reorth_period}")
    return _basis(a, omega, q, reorth_period, strict)


def _project(a, qb, k, matvecs, collapse, transposed=False):
    bt = _apply_t(a, qb)  # B^T = A^T Q, computed as ell column-applications
    f = exact_svd(bt.T)
    return LowRankApprox(
        q_basis=qb,
        core_u=f.u[:, :k],
        sigma_hat=f.sigma[:k],
        v_hat=f.v[:, :k],
        matvec_count=matvecs,
        basis_sigma=f.sigma,
        collapse_step=collapse,
        transposed=transposed,
    )


def split_start_matrix(v, omega, ell, p):
    """Blocks of ``V^T Omega`` split after row ``ell - p``.

    ``v`` must be the complete ``n x n`` matrix of right singular vectors.
    ``||Omega_1^+||_2`` is the reciprocal of the smallest singular value of
    the wide top block; the block counts as full row rank when that value
    exceeds ``1e-13 * ||V^T Omega||_2``.
    """
    v = as_matrix(v, "v")
    omega = as_matrix(omega, "omega")
    if v.shape[0] != v.shape[1] or v.shape[0] != omega.shape[0]:
        raise DimensionError(f"need square V matching omega rows, got {v.shape}, {omega.shape}")
    split = ell - p
    if not 1 <= split <= min(omega.shape[1], v.shape[0]):
        raise ValueError(f"invalid split ell - p = {split}")
    oh = v.T @ omega
    o1, o2 = oh[:split], oh[split:]
    s1 = singular_values(o1)
    smin = s1[split - 1]
    # measured against the whole of V^T Omega so that a block made of
    # round-off alone is not mistaken for a well-conditioned one
    full = bool(smin > ROW_RANK_TOL * singular_values(oh)[0])
    pinv = float(1.0 / smin) if full else np.inf
    o2n = float(singular_values(o2)[0]) if o2.shape[0] else 0.0
    return OmegaSplit(o1, o2, o2n, pinv, full)


def _full_right_vectors(a):
    f = exact_svd(a)
    v = f.v
    n = v.shape[0]
    if v.shape[1] < n:
        r = v.shape[1]
        v = _complete_columns(np.hstack([v, np.zeros((n, n - r))]), list(range(r, n)))
    return v


def subspace_iteration(a, omega, cfg, *, diagnostics=False, right_vectors=None, strict=False):
    """Subspace iteration from a given start block.

    Parameters
    ----------
    a : ndarray or LinearOperator, shape (m, n)
    omega : ndarray, shape (n, cfg.ell)
    cfg : SketchConfig
        Uses ``k``, ``q``, ``reorth_period`` and, for diagnostics, ``p``.
    diagnostics : bool
        Also split ``V^T Omega`` using the oracle right singular vectors
        (dense ``a`` only).  Passing ``right_vectors`` implies it.
    right_vectors : ndarray, optional
        Precomputed complete ``n x n`` matrix ``V`` for the diagnostics.
    strict : bool
        Raise on rank collapse or on a row-rank deficient ``Omega_1``.

    Returns
    -------
    LowRankApprox
        ``matvec_count`` is ``(2q + 2) * ell``.
    """
    a = as_operand(a)
    omega = as_matrix(omega, "omega")
    m, n = a.shape
    if omega.shape != (n, cfg.ell):
        raise DimensionError(f"omega must be {(n, cfg.ell)}, got {omega.shape}")
    if cfg.k > min(m, n):
        raise DimensionError(f"k={cfg.k} exceeds min(m, n)={min(m, n)}")
    basis = _basis(a, omega, cfg.q, cfg.reorth_period, strict)
    approx = _project(a, basis.q, cfg.k, (2 * cfg.q + 2) * cfg.ell, basis.collapse_step)
    if diagnostics or right_vectors is not None:
        if right_vectors is None:
            if isinstance(a, LinearOperator):
                raise TypeError("diagnostics need a dense matrix or explicit right_vectors")
            right_vectors = _full_right_vectors(a)
        split = split_start_matrix(right_vectors, omega, cfg.ell, cfg.p_split)
        if strict and not split.full_row_rank:
            raise RowRankError("leading block of V^T Omega is row-rank deficient")
        approx = replace(approx, omega_split=split)
    return approx


def subspace_iteration_path(a, omega, k, q_max):
    """Yield the subspace-iteration result for ``q = 0, 1, ..., q_max``.

    The recurrence is run once; the result yielded for each ``q`` is
    bit-identical to ``subspace_iteration`` with that ``q`` and
    ``reorth_period=1``, and carries its ``(2q + 2) * ell`` matvec count.
    """
    a = as_operand(a)
    omega = as_matrix(omega, "omega")
    ell = omega.shape[1]
    collapse = None

    def orth(y, step):
        nonlocal collapse
        qq, _, bad = _orthonormalize(y, step)
        if bad and collapse is None:
            collapse = step
        return qq

    cur = orth(_apply(a, omega), 0)
    for q in range(q_max + 1):
        yield q, _project(a, cur, k, (2 * q + 2) * ell, collapse)
        if q < q_max:
            cur = orth(_apply_t(a, cur), 2 * q + 1)
            cur = orth(_apply(a, cur), 2 * q + 2)


def _oriented(a):
    """Return ``(operand, transposed)`` with rows >= cols."""
    if a.shape[0] < a.shape[1]:
        return _transpose(a), True
    return a, False


def randomized_subspace_iteration(a, cfg, strict=False):
    """Subspace iteration from a fresh Gaussian start block drawn from ``cfg.seed``.

    Wide inputs are handled by sketching ``A.T``; the returned record then
    has ``transposed=True``.
    """
    a = as_operand(a)
    cfg.check_shape(a.shape)
    t, flipped = _oriented(a)
    omega = gaussian_matrix(t.shape[1], cfg.ell, cfg.seed)
    basis = _basis(t, omega, cfg.q, cfg.reorth_period, strict)
    return _project(t, basis.q, cfg.k, (2 * cfg.q + 2) * cfg.ell, basis.collapse_step, flipped)


def basic_randomized(a, k, ell, seed, strict=False):
    """Basic randomized rank-k approximation (one sketch, no power steps).

    Cost is ``ell`` column-applications for ``A @ Omega`` and ``ell`` more
    for ``Q.T @ A``.
    """
    a = as_operand(a)
    n = min(a.shape)
    if not 0 < k < ell < n:
        raise ValueError(f"need 0 < k < ell < min(m, n) = {n}, got k={k}, ell={ell}")
    return randomized_subspace_iteration(a, SketchConfig(k=k, ell=ell, q=0, seed=seed), strict)


def _power(a, omega, q):
    basis = _basis(a, omega, q, 1, strict=True)
    b = _apply_t(a, basis.q).T
    est = float(singular_values(b)[0])
    return PowerEstimate(est, 2 * q + 2)


def power_method(a, omega, q):
    """Power method estimate of ``||A||_2`` from the start vector ``omega``.

    Returns ``||Q^T A||_2`` where ``Q`` spans ``(A A^T)^q A omega``; by
    interlacing the estimate never exceeds ``||A||_2``.

    Raises
    ------
    ValueError
        If ``omega`` is zero.
    RankCollapseError
        If some power step maps the current vector to (numerical) zero.
    """
    a = as_operand(a)
    omega = np.asarray(omega, dtype=np.float64).reshape(-1, 1)
    if omega.shape[0] != a.shape[1]:
        raise DimensionError(f"omega has length {omega.shape[0]}, a has {a.shape[1]} columns")
    if not np.all(np.isfinite(omega)):
        raise ValueError("omega contains NaN or Inf entries")
    if not np.any(omega):
        raise ValueError("start vector must be nonzero")
    if q < 0:
        raise ValueError(f"q must be nonnegative, got {q}")
    return _power(a, omega, q)


def randomized_power_method(a, q, seed):
    """:func:`power_method` from a Gaussian start vector."""
    a = as_operand(a)
    return power_method(a, gaussian_matrix(a.shape[1], 1, seed), q)


def improved_small_k(a, k, ell1, ell2, q, seed, strict=False):
    """Two-stage scheme for small ``k``.

    A basic randomized rank-``ell2`` approximation with ``ell1`` samples
    supplies approximate right singular vectors, which then serve as the
    ``ell2``-column start block of subspace iteration.  The returned
    ``matvec_count`` covers both stages.
    """
    a = as_operand(a)
    if not ell1 > ell2 >= k >= 1:
        raise ValueError(f"need ell1 > ell2 >= k >= 1, got {ell1}, {ell2}, {k}")
    stage1 = basic_randomized(a, ell2, ell1, seed, strict)
    stage2 = subspace_iteration(a, stage1.right, SketchConfig(k=k, ell=ell2, q=q, seed=seed), strict=strict)
    return replace(stage2, matvec_count=stage1.matvec_count + stage2.matvec_count)

"""
Dense real matrix kernels.

Householder QR with a nonnegative-diagonal convention, a one-sided
Jacobi SVD used as the ground-truth oracle, seeded Gaussian matrices,
norms, and the two on-disk matrix formats (CSV and ``RSIM`` binary).

Matrices are plain ``numpy.ndarray`` objects of dtype float64.  Every
public entry point funnels its operands through :func:`as_matrix`, which
enforces the 2-D / nonempty / finite contract.
"""

import math
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import ConvergenceError, DimensionError

try:
    from ._kernels import jacobi_kernel as _jacobi_kernel
except ImportError:  # pragma: no cover - numba missing
    _jacobi_kernel = None

__all__ = [
    "SvdFactors",
    "QrFactors",
    "MatrixNorms",
    "as_matrix",
    "matmul",
    "qr_factor",
    "exact_svd",
    "singular_values",
    "truncated_svd",
    "gaussian_matrix",
    "rng_from_seed",
    "norms",
    "read_matrix",
    "write_matrix",
]

MAGIC = b"RSIM"
_HEADER = struct.Struct("<4sQQ")
JACOBI_MAX_SWEEPS = 100


@dataclass(frozen=True)
class SvdFactors:
    """``A = u @ diag(sigma) @ v.T`` with ``sigma`` nonincreasing."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    @property
    def rank(self):
        return self.sigma.shape[0]

    def to_dense(self):
        return (self.u * self.sigma) @ self.v.T


@dataclass(frozen=True)
class QrFactors:
    """Thin QR factors; ``collapse_step`` flags a numerically rank-deficient input."""

    q: np.ndarray
    r: np.ndarray
    collapse_step: int | None = None


@dataclass(frozen=True)
class MatrixNorms:
    one: float
    two: float
    fro: float
    max: float


def as_matrix(a, name="matrix"):
    """Validate ``a`` as a finite, nonempty 2-D float64 array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must be nonempty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


def matmul(a, b):
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def _sign(x):
    # sign(0) = +1 everywhere in the package
    return np.where(x < 0, -1.0, 1.0)


def householder_qr(y):
    """Unvalidated Householder QR of a tall array; returns ``(q, r)``.

    The diagonal of ``r`` is made nonnegative and its strict lower
    triangle is exactly zero.
    """
    m, n = y.shape
    r = np.array(y, dtype=np.float64, copy=True)
    vs = []
    for j in range(n):
        x = r[j:, j]
        normx = _safe_norm(x)
        if normx == 0.0:
            vs.append(None)
            continue
        v = x.copy()
        v[0] += (1.0 if x[0] >= 0 else -1.0) * normx
        v /= np.max(np.abs(v))
        v /= np.linalg.norm(v)
        block = r[j:, j:]
        block -= 2.0 * np.outer(v, v @ block)
        vs.append(v)
    q = np.zeros((m, n))
    q[:n, :n] = np.eye(n)
    for j in range(n - 1, -1, -1):
        v = vs[j]
        if v is None:
            continue
        block = q[j:, :]
        block -= 2.0 * np.outer(v, v @ block)
    r = np.triu(r[:n, :])
    d = _sign(np.diag(r))
    return q * d, r * d[:, None]


def qr_factor(y):
    """Householder QR ``y = q @ r`` for ``y`` with at least as many rows as columns.

    ``q`` has orthonormal columns and ``r`` is upper triangular with a
    nonnegative diagonal, which makes the factors unique for full-rank
    input.

    Raises
    ------
    DimensionError
        If ``y`` has fewer rows than columns.
    """
    y = as_matrix(y, "y")
    if y.shape[0] < y.shape[1]:
        raise DimensionError(f"qr_factor needs rows >= cols, got {y.shape}")
    scale = _pow2_scale(y)
    q, r = householder_qr(y * scale)
    return QrFactors(q, r / scale)


@lru_cache(maxsize=64)
def _round_robin(n):
    """Tournament schedule covering every column pair once per sweep.

    Each round is a pair of index arrays ``(P, Q)`` with disjoint entries,
    so all rotations of a round can be applied simultaneously.
    """
    players = list(range(n + (n % 2)))
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        ps, qs = [], []
        for i in range(size // 2):
            a, b = players[i], players[size - 1 - i]
            if a < n and b < n:
                ps.append(min(a, b))
                qs.append(max(a, b))
        if ps:
            rounds.append((np.array(ps), np.array(qs)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return tuple(rounds)


def _jacobi_rows_numpy(w, want_vectors):
    """Vectorized round-robin sweeps; used when numba is unavailable."""
    nb, n, m = w.shape
    z = np.broadcast_to(np.eye(n), (nb, n, n)).copy() if want_vectors else None
    if n == 1:
        return w, z
    tol = np.sqrt(m) * np.finfo(np.float64).eps
    floor = (np.finfo(np.float64).eps ** 2 * np.einsum("bnm,bnm->b", w, w))[:, None]
    rounds = _round_robin(n)
    for _ in range(JACOBI_MAX_SWEEPS):
        rotated = False
        for ip, iq in rounds:
            wp = w[:, ip, :]
            wq = w[:, iq, :]
            alpha = np.einsum("brm,brm->br", wp, wp)
            beta = np.einsum("brm,brm->br", wq, wq)
            gamma = np.einsum("brm,brm->br", wp, wq)
            active = (np.abs(gamma) > tol * np.sqrt(alpha * beta)) & (alpha > floor) & (beta > floor)
            if not active.any():
                continue
            rotated = True
            g = np.where(active, gamma, 1.0)
            zeta = (beta - alpha) / (2.0 * g)
            t = _sign(zeta) / (np.abs(zeta) + np.hypot(1.0, zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            c = np.where(active, c, 1.0)[..., None]
            s = np.where(active, s, 0.0)[..., None]
            w[:, ip, :] = c * wp - s * wq
            w[:, iq, :] = s * wp + c * wq
            if z is not None:
                zp = z[:, ip, :]
                zq = z[:, iq, :]
                z[:, ip, :] = c * zp - s * zq
                z[:, iq, :] = s * zp + c * zq
        if not rotated:
            return w, z
    raise ConvergenceError(f"Jacobi SVD did not converge in {JACOBI_MAX_SWEEPS} sweeps")


def _jacobi_rows(w, want_vectors):
    """One-sided Jacobi orthogonalization of the rows of a stack ``w`` (B, n, m).

    Rotates in place and returns ``(w, z)`` where ``w_final = z @ w_initial``
    (``z`` is None unless requested).
    """
    if _jacobi_kernel is None:
        return _jacobi_rows_numpy(w, want_vectors)
    nb, n, m = w.shape
    z = np.broadcast_to(np.eye(n), (nb, n, n)).copy() if want_vectors else np.zeros((0, 0, 0))
    tol = np.sqrt(m) * np.finfo(np.float64).eps
    if _jacobi_kernel(w, z, tol, JACOBI_MAX_SWEEPS) != 0:
        raise ConvergenceError(f"Jacobi SVD did not converge in {JACOBI_MAX_SWEEPS} sweeps")
    return w, (z if want_vectors else None)


def _pow2_scale(a):
    """Power of two that brings ``max|a|`` near 1 (exact, avoids under/overflow of squares)."""
    top = float(np.max(np.abs(a))) if a.size else 0.0
    if top == 0.0:
        return 1.0
    return math.ldexp(1.0, min(1000, -math.frexp(top)[1]))


def singular_values(a):
    """Singular values (nonincreasing) of a matrix or a stack of matrices.

    Accepts shape ``(m, n)`` or ``(batch, m, n)``; the stacked form runs all
    Jacobi sweeps in lockstep, which is what makes Monte-Carlo loops cheap.
    """
    arr = np.asarray(a, dtype=np.float64)
    single = arr.ndim == 2
    if single:
        arr = as_matrix(arr)[None]
    elif arr.ndim != 3:
        raise DimensionError(f"expected 2-D or 3-D input, got shape {arr.shape}")
    elif not np.all(np.isfinite(arr)):
        raise ValueError("input contains NaN or Inf entries")
    m, n = arr.shape[1:]
    scale = np.array([_pow2_scale(x) for x in arr])[:, None, None]
    # rows of w are the columns of the taller orientation
    w = np.ascontiguousarray((np.swapaxes(arr, 1, 2) if m >= n else arr) * scale)
    w, _ = _jacobi_rows(w, want_vectors=False)
    sig = -np.sort(-np.linalg.norm(w, axis=2), axis=1) / scale[:, :, 0]
    return sig[0] if single else sig


def _complete_columns(u, missing):
    """Replace the columns listed in ``missing`` by an orthonormal completion."""
    m = u.shape[0]
    drop = set(missing)
    basis = u[:, [j for j in range(u.shape[1]) if j not in drop]]
    for j in missing:
        resid = np.eye(m) - basis @ basis.T
        resid -= basis @ (basis.T @ resid)
        col = resid[:, int(np.argmax(np.linalg.norm(resid, axis=0)))]
        col = col / np.linalg.norm(col)
        u[:, j] = col
        basis = np.column_stack([basis, col])
    return u


def _safe_norm(x):
    # 2-norm without losing precision to subnormal squares
    top = float(np.max(np.abs(x)))
    if top == 0.0:
        return 0.0
    return top * float(np.linalg.norm(x / top))


def _pivoted_qr(a):
    """Householder QR with greedy column pivoting: ``a[:, perm] = q @ r``."""
    m, n = a.shape
    r = np.array(a, dtype=np.float64, copy=True)
    perm = np.arange(n)
    vs = []
    for j in range(n):
        tail = np.einsum("ij,ij->j", r[j:, j:], r[j:, j:])
        piv = j + int(np.argmax(tail))
        if piv != j:
            r[:, [j, piv]] = r[:, [piv, j]]
            perm[[j, piv]] = perm[[piv, j]]
        x = r[j:, j]
        normx = _safe_norm(x)
        if normx == 0.0:
            vs.append(None)
            continue
        v = x.copy()
        v[0] += (1.0 if x[0] >= 0 else -1.0) * normx
        v /= np.max(np.abs(v))
        v /= np.linalg.norm(v)
        block = r[j:, j:]
        block -= 2.0 * np.outer(v, v @ block)
        vs.append(v)
    q = np.zeros((m, n))
    q[:n, :n] = np.eye(n)
    for j in range(n - 1, -1, -1):
        if vs[j] is not None:
            block = q[j:, :]
            block -= 2.0 * np.outer(vs[j], vs[j] @ block)
    return q, np.triu(r[:n, :]), perm


def _svd_tall(a):
    """Jacobi SVD of a matrix with ``rows >= cols``.

    A pivoted QR first reduces the problem to the square triangular
    factor, whose graded rows make the Jacobi sweeps converge quickly.
    """
    scale = _pow2_scale(a)
    q, r, perm = _pivoted_qr(a * scale)
    w, z = _jacobi_rows(np.ascontiguousarray(r)[None], want_vectors=True)
    w, z = w[0], z[0]
    sig = np.linalg.norm(w, axis=1)
    order = np.argsort(-sig, kind="stable")
    sig = sig[order]
    w = w[order]
    u = q @ z[order].T
    n = a.shape[1]
    vt = np.zeros((n, n))
    missing = []
    # rows at round-off level were not rotated, so their directions are
    # re-orthogonalized against the resolved ones (or replaced)
    floor = np.finfo(np.float64).eps * math.sqrt(float(np.sum(sig * sig)))
    for j, s in enumerate(sig):
        if s == 0.0:
            missing.append(j)
            continue
        x = w[j] / s
        if s <= floor:
            for _ in range(2):
                x = x - vt[:, :j] @ (vt[:, :j].T @ x)
            nx = np.linalg.norm(x)
            if nx < 0.5:
                missing.append(j)
                continue
            x = x / nx
        vt[:, j] = x
    if missing:
        vt = _complete_columns(vt, missing)
    v = np.empty_like(vt)
    v[perm] = vt
    return SvdFactors(u, sig / scale, v)


def exact_svd(a):
    """Full thin SVD by one-sided Jacobi, ``r = min(m, n)`` triplets.

    This is the reference against which every randomized result is
    judged.  Wide inputs are handled by factoring the transpose.

    Raises
    ------
    ConvergenceError
        If the rotations have not settled after 100 sweeps.
    """
    a = as_matrix(a, "a")
    if a.shape[0] >= a.shape[1]:
        return _svd_tall(a)
    f = _svd_tall(a.T)
    return SvdFactors(f.v, f.sigma, f.u)


def truncated_svd(a, k):
    """Leading ``k`` singular triplets of ``a`` (the best rank-k approximation)."""
    a = as_matrix(a, "a")
    r = min(a.shape)
    if not 1 <= k <= r:
        raise ValueError(f"k must lie in [1, {r}], got {k}")
    f = exact_svd(a)
    return SvdFactors(f.u[:, :k], f.sigma[:k], f.v[:, :k])


def rng_from_seed(seed):
    """PCG64 generator for a 64-bit unsigned seed."""
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def gaussian_matrix(rows, cols, seed):
    """``rows x cols`` matrix of i.i.d. standard normals; same seed, same bits."""
    if rows < 1 or cols < 1:
        raise ValueError(f"dimensions must be positive, got ({rows}, {cols})")
    return rng_from_seed(seed).standard_normal((rows, cols))


def norms(a):
    """One-, two-, Frobenius- and max-norm; the two-norm comes from the Jacobi oracle."""
    a = as_matrix(a, "a")
    absa = np.abs(a)
    return MatrixNorms(
        one=float(absa.sum(axis=0).max()),
        two=float(singular_values(a)[0]),
        fro=float(np.sqrt(np.sum(a * a))),
        max=float(absa.max()),
    )


def read_matrix(path):
    """Load a matrix from an ``RSIM`` binary file or a CSV file (sniffed by magic bytes)."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if head[:4] == MAGIC:
            if len(head) < _HEADER.size:
                raise ValueError(f"{path}: truncated RSIM header")
            _, rows, cols = _HEADER.unpack(head)
            payload = fh.read()
            if len(payload) != 8 * rows * cols:
                raise ValueError(
                    f"{path}: expected {8 * rows * cols} payload bytes, found {len(payload)}"
                )
            data = np.frombuffer(payload, dtype="<f8").reshape(rows, cols)
            return as_matrix(data.astype(np.float64), str(path))
    data = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    return as_matrix(data, str(path))


def write_matrix(path, a, fmt=None):
    """Write ``a`` as CSV (``fmt='csv'`` or a ``.csv`` suffix) or as ``RSIM`` binary."""
    a = as_matrix(a, "a")
    if fmt is None:
        fmt = "csv" if str(path).lower().endswith(".csv") else "bin"
    if fmt == "csv":
        np.savetxt(path, a, delimiter=",", fmt="%.17g")
    elif fmt == "bin":
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, a.shape[0], a.shape[1]))
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")

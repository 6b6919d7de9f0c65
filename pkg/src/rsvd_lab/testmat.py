"""
Test-matrix generators.

* log-kernel matrices ``A_ij = log ||x_i - y_j||`` between two planar point
  clouds, either Gaussian or equispaced on two touching circles;
* the adversarial matrix on which Hager's all-ones start fails;
* ``U diag(sigma) V^T`` with Haar factors and a prescribed decay;
* a diagonal matrix whose leading ``k + 1`` singular values coincide.

Every generator is a pure function of its arguments.
"""

from dataclasses import dataclass

import numpy as np

from .densela import householder_qr, rng_from_seed

__all__ = [
    "DecaySpec",
    "DecayMatrix",
    "log_kernel_gaussian",
    "log_kernel_discs",
    "adversarial_hager",
    "decay_spectrum",
    "decay_matrix",
    "haar_orthogonal",
    "identical_leading",
]


def _log_distances(x, y):
    d = x[:, None, :] - y[None, :, :]
    return np.log(np.sqrt(np.einsum("ijk,ijk->ij", d, d)))


def log_kernel_gaussian(n, mu, seed, dim=2):
    """Log-distance kernel between two Gaussian clouds of ``n`` points.

    ``x_i ~ N(0, I)`` and ``y_j ~ N(mu * 1, I)`` in ``dim`` dimensions.  A
    larger ``mu`` separates the clouds and speeds up the singular value
    decay.  Coincident pairs (probability zero) are redrawn.
    """
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    rng = rng_from_seed(seed)
    x = rng.standard_normal((n, dim))
    y = mu + rng.standard_normal((n, dim))
    while True:
        a = _log_distances(x, y)
        bad = ~np.isfinite(a)
        if not bad.any():
            return a
        rows = np.unique(np.nonzero(bad)[0])
        x[rows] = rng.standard_normal((rows.size, dim))


def log_kernel_discs(n, rotation=0.0):
    """Log-distance kernel between points on two circles.

    ``x_i`` sit on the circle of radius ``sqrt(2)`` about ``(-1, -1)``, ``y_j``
    on the circle of radius ``2 sqrt(2)`` about ``(2, 2)``; the circles touch
    at the origin.  The ``y`` angles are offset by half a step so no point
    lands on the tangency point twice.  ``rotation`` turns both clouds about
    the origin, which leaves every distance unchanged.
    """
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    t = 2.0 * np.pi * np.arange(n) / n
    s = t + np.pi / n
    x = np.array([-1.0, -1.0]) + np.sqrt(2.0) * np.column_stack([np.cos(t), np.sin(t)])
    y = np.array([2.0, 2.0]) + 2.0 * np.sqrt(2.0) * np.column_stack([np.cos(s), np.sin(s)])
    if rotation:
        c, sn = np.cos(rotation), np.sin(rotation)
        rot = np.array([[c, -sn], [sn, c]])
        x, y = x @ rot.T, y @ rot.T
    return _log_distances(x, y)


def adversarial_hager(n, rho, seed):
    """Matrix ``[[alpha, b^T], [b, rho E A_hat E]]`` that defeats the all-ones start.

    ``E = I - 11^T/(n-1)`` kills the constant vector, so from ``x = 1/n``
    Hager's method only ever sees the first row and column and stops at
    ``alpha + ||b||_1``.  ``alpha = 1``; ``b`` and ``A_hat`` are uniform on
    (0, 1).  ``E`` is applied by exact centering (subtracting row and column
    means), so ``E 1`` vanishes up to a single rounding.
    """
    if n < 3:
        raise ValueError(f"n must be at least 3, got {n}")
    if not rho >= 0:
        raise ValueError(f"rho must be nonnegative, got {rho}")
    rng = rng_from_seed(seed)
    b = rng.uniform(0.0, 1.0, n - 1)
    ahat = rng.uniform(0.0, 1.0, (n - 1, n - 1))
    block = ahat - ahat.mean(axis=0, keepdims=True)
    block = block - block.mean(axis=1, keepdims=True)
    a = np.empty((n, n))
    a[0, 0] = 1.0
    a[0, 1:] = b
    a[1:, 0] = b
    a[1:, 1:] = rho * block
    return a


@dataclass(frozen=True)
class DecaySpec:
    """Spectrum model.

    ``model`` is ``"exponential"`` (``sigma_j = rate^(j-1)``), ``"power_law"``
    (``sigma_j = j^(-exponent)``) or ``"custom"`` (``values`` given).
    ``m`` defaults to ``n``.
    """

    model: str
    n: int
    rate: float = 0.5
    exponent: float = 1.0
    values: tuple | None = None
    m: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if self.m is not None and self.m < self.n:
            raise ValueError("m must be at least n")
        if self.model == "exponential":
            if not 0.0 < self.rate <= 1.0:
                raise ValueError(f"rate must lie in (0, 1], got {self.rate}")
        elif self.model == "power_law":
            if not self.exponent >= 0.0:
                raise ValueError(f"exponent must be nonnegative, got {self.exponent}")
        elif self.model == "custom":
            if self.values is None or len(self.values) != self.n:
                raise ValueError("custom model needs n values")
            v = np.asarray(self.values, dtype=np.float64)
            if np.any(v <= 0) or np.any(np.diff(v) > 0) or not np.all(np.isfinite(v)):
                raise ValueError("custom values must be positive and nonincreasing")
        else:
            raise ValueError(f"unknown decay model {self.model!r}")


def decay_spectrum(spec):
    j = np.arange(1, spec.n + 1, dtype=np.float64)
    if spec.model == "exponential":
        return spec.rate ** (j - 1)
    if spec.model == "power_law":
        return j ** (-spec.exponent)
    return np.asarray(spec.values, dtype=np.float64)


def haar_orthogonal(n, rng, cols=None):
    """Haar-distributed ``n x cols`` orthonormal matrix (QR of a Gaussian, sign-fixed)."""
    cols = n if cols is None else cols
    q, _ = householder_qr(rng.standard_normal((n, cols)))
    # householder_qr already makes diag(R) >= 0, which is the Haar sign fix
    return q


@dataclass(frozen=True)
class DecayMatrix:
    matrix: np.ndarray
    true_sigma: np.ndarray
    u: np.ndarray
    v: np.ndarray


def decay_matrix(spec, seed):
    """``U diag(sigma) V^T`` with Haar ``U`` (m x n) and ``V`` (n x n).

    The exact spectrum and factors are returned alongside the matrix.
    """
    sigma = decay_spectrum(spec)
    m = spec.m or spec.n
    rng = rng_from_seed(seed)
    u = haar_orthogonal(m, rng, spec.n)
    v = haar_orthogonal(spec.n, rng)
    return DecayMatrix((u * sigma) @ v.T, sigma, u, v)


def identical_leading(n, k, rate=0.5):
    """Diagonal ``n x n`` matrix with ``sigma_1 = ... = sigma_{k+1} = 1``.

    The remaining values decay geometrically, ``rate^(j-k-1)``.  Any
    ``k``-dimensional subspace of the leading ``k + 1`` directions is optimal,
    so the zero matrix is as good as ``A_k`` in the 2-norm.
    """
    if k < 1 or n < k + 1:
        raise ValueError(f"need 1 <= k <= n - 1, got n={n}, k={k}")
    j = np.arange(1, n + 1)
    d = np.where(j <= k + 1, 1.0, rate ** (j - k - 1.0))
    return np.diag(d)

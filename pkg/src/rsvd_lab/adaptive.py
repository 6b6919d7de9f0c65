"""
Adaptive randomized subspace iteration.

The sample count grows in batches until the computed gap proxy

    E = (sigma_{ell-p+1}(B) / sigma_k(B))^(2q+1)

drops below ``sqrt(tau)``.  The batch size comes from a polynomial-decay
model fitted to the current ``E``; it is floored at ``b`` and replaced by
``b`` whenever ``E`` carries no decay information (``E >= 1`` or ``E = 0``).
"""

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .bounds import adaptive_p, oversampling_p
from .densela import QrFactors, as_matrix, exact_svd, rng_from_seed
from .exceptions import DimensionError
from .sketch import LowRankApprox, _apply_t, _basis, as_operand

__all__ = [
    "AdaptiveConfig",
    "AdaptiveRound",
    "AdaptiveTrace",
    "AdaptiveResult",
    "BasisUpdate",
    "adaptive_rsi",
    "incremental_basis_update",
    "next_batch",
]

DROP_TOL = 1e-14


@dataclass(frozen=True)
class AdaptiveConfig:
    """Parameters of the adaptive scheme.

    Parameters
    ----------
    k : int
        Target rank.
    q : int
        Power steps, applied to every batch.
    tau : float
        Accuracy tolerance in (0, 1); the loop stops once ``E <= sqrt(tau)``.
    delta : float
        Failure tolerance in (0, 1); sets ``p = ceil(log10(2 / delta))``.
    b : int
        Smallest batch.
    c : int
        Extra samples in the first sketch, which has ``c + k + p`` columns.
    cmax : int
        Ceiling on the total sample count.
    seed : int
    """

    k: int
    q: int = 1
    tau: float = 1e-6
    delta: float = 0.1
    b: int = 5
    c: int = 0
    cmax: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be positive, got {self.k}")
        if self.q < 0:
            raise ValueError(f"q must be nonnegative, got {self.q}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if self.b < 1:
            raise ValueError(f"b must be at least 1, got {self.b}")
        if self.c < 0:
            raise ValueError(f"c must be nonnegative, got {self.c}")
        if not self.cmax > self.k + oversampling_p(self.delta) + self.c:
            raise ValueError(f"cmax={self.cmax} leaves no room for the first sketch")

    @property
    def p(self):
        return adaptive_p(self.delta)

    @property
    def ell0(self):
        return self.c + self.k + self.p


@dataclass(frozen=True)
class AdaptiveRound:
    ell: int
    delta_ell: int
    error_proxy: float
    matvec_count: int
    dropped: int = 0


@dataclass
class AdaptiveTrace:
    rounds: list = field(default_factory=list)
    status: str = "running"

    @property
    def matvec_count(self):
        return self.rounds[-1].matvec_count if self.rounds else 0

    def to_dict(self):
        return {"status": self.status, "rounds": [asdict(r) for r in self.rounds]}


@dataclass(frozen=True)
class AdaptiveResult:
    approx: LowRankApprox
    trace: AdaptiveTrace


@dataclass(frozen=True)
class BasisUpdate:
    """Enlarged basis plus the number of new columns kept and dropped."""

    q: np.ndarray
    r: np.ndarray
    added: int
    dropped: int


def incremental_basis_update(existing, new_cols):
    """Append ``new_cols`` to an orthonormal basis.

    Each new column is orthogonalized against the current basis twice
    (classical Gram-Schmidt with reorthogonalization) and kept only if its
    remainder is at least ``1e-14`` times the block scale.

    Parameters
    ----------
    existing : QrFactors or ndarray
        Current orthonormal basis (``existing.q``).
    new_cols : ndarray, shape (m, b)

    Returns
    -------
    BasisUpdate
        ``r`` holds the coefficients of ``new_cols`` in the enlarged basis.
    """
    q0 = existing.q if isinstance(existing, QrFactors) else as_matrix(existing, "existing")
    new_cols = as_matrix(new_cols, "new_cols")
    if new_cols.shape[0] != q0.shape[0]:
        raise DimensionError(f"new_cols has {new_cols.shape[0]} rows, basis has {q0.shape[0]}")
    scale = float(np.max(np.linalg.norm(new_cols, axis=0)))
    cols = [q0[:, j] for j in range(q0.shape[1])]
    basis = q0
    dropped = 0
    for j in range(new_cols.shape[1]):
        w = new_cols[:, j].copy()
        for _ in range(2):
            w -= basis @ (basis.T @ w)
        nw = np.linalg.norm(w)
        if scale == 0.0 or nw < DROP_TOL * scale or basis.shape[1] >= basis.shape[0]:
            dropped += 1
            continue
        cols.append(w / nw)
        basis = np.column_stack(cols)
    return BasisUpdate(basis, basis.T @ new_cols, basis.shape[1] - q0.shape[1], dropped)


def _proxy(sig, k, ell, p, q):
    # E from the singular values of the current B
    idx = ell - p + 1
    s = sig[idx - 1] if idx <= sig.size else 0.0
    if s == 0.0:
        return 0.0
    return float((s / sig[k - 1]) ** (2 * q + 1))


def next_batch(e, tau, ell, p, k, b):
    """Batch size from the decay model, floored at ``b``.

    ``max(b, ceil((((ell-p+1)/k)^(log(sqrt(tau)/E) / log E) - 1) (ell-p+1)))``;
    ``E`` outside (0, 1) gives ``b``, overflow gives ``inf``.
    """
    if not 0.0 < e < 1.0:
        return b
    x = ell - p + 1
    expo = math.log(math.sqrt(tau) / e) / math.log(e)
    try:
        grow = ((x / k) ** expo - 1.0) * x
    except OverflowError:
        return math.inf
    if not math.isfinite(grow):
        return math.inf
    return max(b, math.ceil(grow))


def adaptive_rsi(a, cfg):
    """Grow a subspace-iteration sketch until the gap proxy meets ``sqrt(tau)``.

    Parameters
    ----------
    a : ndarray or LinearOperator, shape (m, n) with m >= n
    cfg : AdaptiveConfig

    Returns
    -------
    AdaptiveResult
        ``trace.status`` is ``"converged"`` or ``"ceiling_hit"``; in the
        latter case the approximation from the last accepted basis is still
        returned.
    """
    a = as_operand(a)
    m, n = a.shape
    if m < n:
        raise DimensionError(f"adaptive_rsi expects m >= n, got {a.shape}")
    k, q, p = cfg.k, cfg.q, cfg.p
    ell = cfg.ell0
    if not n > ell:
        raise DimensionError(f"n={n} must exceed the first sketch size c + k + p = {ell}")
    limit = min(cfg.cmax, n)
    rng = rng_from_seed(cfg.seed)
    basis = _basis(a, rng.standard_normal((n, ell)), q, 1, strict=False)
    qb = basis.q
    bt = _apply_t(a, qb)
    matvecs = (2 * q + 2) * ell
    sig = exact_svd(bt.T).sigma
    e = _proxy(sig, k, ell, p, q)
    trace = AdaptiveTrace()
    trace.rounds.append(AdaptiveRound(ell, ell, e, matvecs))
    while e > math.sqrt(cfg.tau):
        step = next_batch(e, cfg.tau, ell, p, k, cfg.b)
        if ell + step > limit:
            trace.status = "ceiling_hit"
            break
        omega = rng.standard_normal((n, step))
        yq = _basis(a, omega, q, 1, strict=False).q
        upd = incremental_basis_update(QrFactors(qb, np.eye(ell)), yq)
        matvecs += (2 * q + 1) * step + upd.added
        if upd.added == 0:
            trace.status = "ceiling_hit"
            break
        new = upd.q[:, ell:]
        bt = np.hstack([bt, _apply_t(a, new)])
        qb = upd.q
        ell = qb.shape[1]
        sig = exact_svd(bt.T).sigma
        e = _proxy(sig, k, ell, p, q)
        trace.rounds.append(AdaptiveRound(ell, step, e, matvecs, upd.dropped))
    else:
        trace.status = "converged"
    f = exact_svd(bt.T)
    approx = LowRankApprox(qb, f.u[:, :k], f.sigma[:k], f.v[:, :k], matvecs, f.sigma, basis.collapse_step)
    return AdaptiveResult(approx, trace)

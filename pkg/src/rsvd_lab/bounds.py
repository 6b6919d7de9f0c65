"""
Closed-form error bounds for randomized subspace iteration.

Everything here is scalar arithmetic on a spectrum ``sigma_1 >= ... >= sigma_n``;
no function in this module ever factors a matrix.  Indices ``j`` and ``k``
are 1-based to match the usual statement of the bounds, and
``sigma_j = 0`` for ``j > n``.

Notation shared by the calculators:

``s = sigma_{ell-p+1}``
    the first singular value outside the part of the spectrum that the
    ``ell - p`` leading sample columns are expected to capture;
``tau_j = s / sigma_j``
    the per-index gap ratio;
``C1, C2, C = C1 * C2``
    the average-case constants;
``C_delta``
    the large-deviation constant for failure probability ``delta``.
"""

import math
from dataclasses import asdict, dataclass, field

import numpy as np

__all__ = [
    "SpectrumView",
    "BoundReport",
    "ErrorBounds",
    "oversampling_p",
    "adaptive_p",
    "hmt_bound",
    "det_sv_lower",
    "det_lowrank_upper",
    "deterministic_bounds",
    "average_constants",
    "avg_sv_lower",
    "avg_lowrank_upper",
    "average_bounds",
    "deviation_constant",
    "deviation_bounds",
    "reverse_ey",
    "hager_constant",
    "hager_ell",
    "hager_constant_check",
    "eta_constant",
    "optimal_ell",
]


# ---------------------------------------------------------------------------
# records


@dataclass(frozen=True)
class SpectrumView:
    """Singular values of an ``m x n`` matrix, nonincreasing."""

    sigma: np.ndarray
    m: int
    n: int

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=np.float64).ravel()
        if s.size == 0:
            raise ValueError("spectrum must be nonempty")
        if not np.all(np.isfinite(s)):
            raise ValueError("spectrum contains NaN or Inf")
        if np.any(s < 0):
            raise ValueError("singular values must be nonnegative")
        if np.any(np.diff(s) > 0):
            raise ValueError("singular values must be nonincreasing")
        if s.size > min(self.m, self.n):
            raise ValueError(f"{s.size} singular values for a {self.m} x {self.n} matrix")
        object.__setattr__(self, "sigma", s)

    @classmethod
    def of(cls, sigma, m=None, n=None):
        """Wrap a bare array; ``m`` and ``n`` default to its length."""
        if isinstance(sigma, SpectrumView):
            return sigma
        s = np.asarray(sigma, dtype=np.float64).ravel()
        return cls(s, m if m is not None else s.size, n if n is not None else s.size)

    def __call__(self, j):
        """``sigma_j`` (1-based), zero past the end."""
        if j < 1:
            raise IndexError(f"singular value index must be >= 1, got {j}")
        return float(self.sigma[j - 1]) if j <= self.sigma.size else 0.0

    def tail(self, k):
        """``sqrt(sum_{j > k} sigma_j^2)``."""
        return float(np.sqrt(np.sum(self.sigma[k:] ** 2)))

    def optimum(self, k):
        """Smallest possible rank-k errors ``(fro, two)``."""
        return ErrorBounds(self.tail(k), self(k + 1))


@dataclass(frozen=True)
class ErrorBounds:
    fro: float
    two: float


@dataclass(frozen=True)
class BoundReport:
    """Per-index singular value floors and error ceilings of one regime."""

    regime: str
    p_branch: str
    sv_lower: np.ndarray
    fro_upper: float | None
    two_upper: float
    constants: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["sv_lower"] = [float(x) for x in self.sv_lower]
        d["constants"] = {k: (list(map(float, v)) if np.ndim(v) else float(v)) for k, v in self.constants.items()}
        d["extra"] = {k: (list(map(float, v)) if np.ndim(v) else v) for k, v in self.extra.items()}
        return d


# ---------------------------------------------------------------------------
# helpers


def _ratio(num, den):
    # 0/0 arises only when the whole tail vanishes; the bounds are continuous there
    if num == 0.0:
        return 0.0
    return num / den


def _branch(p):
    return "p>=2" if p >= 2 else f"p={p}"


def _check_split(spec, k, ell, p):
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if not 0 <= p <= ell - k:
        raise ValueError(f"p must lie in [0, ell - k] = [0, {ell - k}], got p={p}")
    if ell > spec.n:
        raise ValueError(f"ell={ell} exceeds n={spec.n}")


def _ceil_log(x):
    # ceil that forgives round-off just above an integer, e.g. log10(1000) = 2.9999999999999996
    r = round(x)
    return int(r) if abs(x - r) < 1e-12 else math.ceil(x)


# ---------------------------------------------------------------------------
# oversampling rules


def oversampling_p(delta):
    """Oversampling split for failure probability ``delta``.

    ``p = max(0, ceil(log10(2 / delta)) - 1)``.

    Examples
    --------
    >>> oversampling_p(1e-16)
    16
    >>> oversampling_p(0.2)
    0
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return max(0, _ceil_log(math.log10(2.0 / delta)) - 1)


def adaptive_p(delta):
    """Oversampling used by the adaptive scheme, ``ceil(log10(2 / delta))``."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return _ceil_log(math.log10(2.0 / delta))


# ---------------------------------------------------------------------------
# classic baseline


def hmt_bound(spec, k, p):
    """Two-norm error bound of the basic randomized scheme with ``ell = k + p``.

    ``(1 + 17 sqrt(1 + k/p)) sigma_{k+1} + (8 sqrt(k + p) / (p + 1)) sqrt(sum_{j>k} sigma_j^2)``,
    which holds with probability at least ``1 - 6 exp(-p)`` for ``p >= 4``.
    """
    spec = SpectrumView.of(spec)
    if p < 4:
        raise ValueError(f"the bound needs p >= 4, got {p}")
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    a = 1.0 + 17.0 * math.sqrt(1.0 + k / p)
    b = 8.0 * math.sqrt(k + p) / (p + 1)
    return a * spec(k + 1) + b * spec.tail(k)


# ---------------------------------------------------------------------------
# deterministic bounds


def det_sv_lower(spec, j, ell, p, q, omega2_norm, omega1_pinv_norm):
    """Deterministic floor for ``sigma_j(Q B_k)``.

    ``sigma_j / sqrt(1 + w^2 (s / sigma_j)^(4q+2))`` with
    ``w = ||Omega_2||_2 ||Omega_1^+||_2``.
    """
    spec = SpectrumView.of(spec)
    if not 1 <= j <= ell - p:
        raise ValueError(f"need 1 <= j <= ell - p, got j={j}")
    if omega2_norm < 0 or omega1_pinv_norm < 0:
        raise ValueError("norms must be nonnegative")
    sj = spec(j)
    if sj == 0.0:
        return 0.0
    tau = spec(ell - p + 1) / sj
    x = omega2_norm * omega1_pinv_norm * tau ** (2 * q + 1) if tau > 0 else 0.0
    return sj / math.hypot(1.0, x)


def _alpha_gamma(spec, k, ell, p, q):
    s = spec(ell - p + 1)
    g = _ratio(s, spec(k)) ** (2 * q)
    alpha = math.sqrt(k) * s * g
    gamma = _ratio(s, spec(1)) * g
    return alpha, gamma


def det_lowrank_upper(spec, k, ell, p, q, omega2_norm, omega1_pinv_norm, simplified=False):
    """Deterministic ceilings for ``||A - Q B_k||`` in both norms.

    ``sqrt(opt^2 + alpha^2 w^2 / (1 + gamma^2 w^2))`` with
    ``alpha = sqrt(k) s (s / sigma_k)^(2q)`` and
    ``gamma = (s / sigma_1)(s / sigma_k)^(2q)``.  ``simplified=True`` drops
    the denominator (the looser form, only trustworthy for ``p >= 2`` in the
    average-case analysis).
    """
    spec = SpectrumView.of(spec)
    _check_split(spec, k, ell, p)
    alpha, gamma = _alpha_gamma(spec, k, ell, p, q)
    w = omega2_norm * omega1_pinv_norm
    if alpha == 0.0:
        extra = 0.0
    elif math.isinf(w):
        extra = math.inf if simplified or gamma == 0.0 else (alpha / gamma) ** 2
    else:
        aw2 = (alpha * w) ** 2
        extra = aw2 if simplified else aw2 / (1.0 + (gamma * w) ** 2)
    opt = spec.optimum(k)
    return ErrorBounds(math.sqrt(opt.fro**2 + extra), math.sqrt(opt.two**2 + extra))


def deterministic_bounds(spec, k, ell, p, q, omega2_norm, omega1_pinv_norm):
    """Both deterministic bounds for a measured start matrix, as one report."""
    spec = SpectrumView.of(spec)
    _check_split(spec, k, ell, p)
    sv = np.array([det_sv_lower(spec, j, ell, p, q, omega2_norm, omega1_pinv_norm) for j in range(1, k + 1)])
    up = det_lowrank_upper(spec, k, ell, p, q, omega2_norm, omega1_pinv_norm)
    alpha, gamma = _alpha_gamma(spec, k, ell, p, q)
    return BoundReport(
        regime="deterministic",
        p_branch=_branch(p),
        sv_lower=sv,
        fro_upper=up.fro,
        two_upper=up.two,
        constants={"alpha": alpha, "gamma": gamma, "w": omega2_norm * omega1_pinv_norm},
    )


# ---------------------------------------------------------------------------
# average case


def average_constants(n, ell, p):
    """``(C1, C2, C)`` for the expected-value bounds."""
    if not 0 <= p <= ell <= n:
        raise ValueError(f"need 0 <= p <= ell <= n, got p={p}, ell={ell}, n={n}")
    c1 = math.sqrt(n - ell + p) + math.sqrt(ell) + 7.0
    c2 = 4.0 * math.e * math.sqrt(ell) / (p + 1)
    return c1, c2, c1 * c2


def _taus(spec, k, ell, p):
    s = spec(ell - p + 1)
    return np.array([_ratio(s, spec(j)) for j in range(1, k + 1)])


def avg_sv_lower(spec, j, k, ell, p, q):
    """Floor for ``E sigma_j(Q B_k)``; the branch is selected by ``p``."""
    spec = SpectrumView.of(spec)
    _check_split(spec, k, ell, p)
    if not 1 <= j <= k:
        raise ValueError(f"need 1 <= j <= k, got j={j}")
    sj = spec(j)
    if sj == 0.0:
        return 0.0
    _, _, c = average_constants(spec.n, ell, p)
    tau = spec(ell - p + 1) / sj
    if tau == 0.0:
        return sj
    if p >= 2:
        return sj / math.hypot(1.0, c * tau ** (2 * q + 1))
    if p == 1:
        x = tau ** (4 * q + 2)
        if x == 0.0:
            return sj
        # log sqrt(C^2 + 1/x), arranged to survive tiny x
        lg = 0.5 * (-math.log(x) + math.log1p(c * c * x))
        return sj / (1.0 + c * c * x * lg)
    return sj / (1.0 + c * tau ** (2 * q + 1))


def _avg_upper_one(base, s, tau_k, k, c, q, p, lead, sigma1):
    # base is delta_hat (Frobenius) or sigma_{k+1} (two-norm)
    if s == 0.0:
        return base
    if p >= 2:
        return math.sqrt(base**2 + k * c * c * s * s * tau_k ** (4 * q))
    if base == 0.0:
        return base
    if p == 1:
        t = k * c * c * s * s * tau_k ** (4 * q)
        # log sqrt(C^2 + (1/k)(base/s)^2 tau_k^(-4q)) in log space
        ly = 2.0 * math.log(base / s) - 4 * q * math.log(tau_k) - math.log(k)
        lg = 0.5 * np.logaddexp(2.0 * math.log(c), ly)
        return base + t / base * lg
    return base + lead * c * s * tau_k ** (2 * q) * math.log1p(k * (sigma1 / base) ** 2)


def avg_lowrank_upper(spec, k, ell, p, q):
    """Ceilings for ``E ||A - Q B_k||`` in the Frobenius and two norms."""
    spec = SpectrumView.of(spec)
    _check_split(spec, k, ell, p)
    _, _, c = average_constants(spec.n, ell, p)
    s = spec(ell - p + 1)
    tau_k = _ratio(s, spec(k))
    opt = spec.optimum(k)
    fro = _avg_upper_one(opt.fro, s, tau_k, k, c, q, p, math.sqrt(spec.n), spec(1))
    two = _avg_upper_one(opt.two, s, tau_k, k, c, q, p, math.sqrt(k + 1), spec(1))
    return ErrorBounds(float(fro), float(two))


def average_bounds(spec, k, ell, p, q):
    spec = SpectrumView.of(spec)
    _check_split(spec, k, ell, p)
    c1, c2, c = average_constants(spec.n, ell, p)
    sv = np.array([avg_sv_lower(spec, j, k, ell, p, q) for j in range(1, k + 1)])
    up = avg_lowrank_upper(spec, k, ell, p, q)
    return BoundReport(
        regime="average",
        p_branch=_branch(p),
        sv_lower=sv,
        fro_upper=up.fro,
        two_upper=up.two,
        constants={"C1": c1, "C2": c2, "C": c, "tau": _taus(spec, k, ell, p)},
    )


# ---------------------------------------------------------------------------
# large deviation


def deviation_constant(n, ell, p, delta):
    """``C_delta = (e sqrt(ell)/(p+1)) (2/delta)^(1/(p+1)) (sqrt(n-ell+p) + sqrt(ell) + sqrt(2 log(2/delta)))``.

    ``delta`` may range over (0, 2) so that the limit ``delta -> 2`` can be
    evaluated; only ``delta < 1`` carries a probabilistic meaning.
    """
    if not 0.0 < delta < 2.0:
        raise ValueError(f"delta must lie in (0, 2), got {delta}")
    if not 0 <= p <= ell <= n:
        raise ValueError(f"need 0 <= p <= ell <= n, got p={p}, ell={ell}, n={n}")
    r = 2.0 / delta
    lead = math.e * math.sqrt(ell) / (p + 1) * r ** (1.0 / (p + 1))
    return lead * (math.sqrt(n - ell + p) + math.sqrt(ell) + math.sqrt(2.0 * math.log(r)))


def deviation_bounds(spec, k, ell, p, q, delta):
    """Bounds holding except with probability ``delta``.

    ``extra`` carries the power-free pair
    ``sigma_j / sqrt(1 + C_delta^2)`` and ``sigma_{k+1} sqrt(1 + k C_delta^2)``.
    """
    spec = SpectrumView.of(spec)
    _check_split(spec, k, ell, p)
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    cd = deviation_constant(spec.n, ell, p, delta)
    s = spec(ell - p + 1)
    taus = _taus(spec, k, ell, p)
    sig = np.array([spec(j) for j in range(1, k + 1)])
    sv = np.array([0.0 if x == 0.0 else x / math.hypot(1.0, cd * t ** (2 * q + 1)) for x, t in zip(sig, taus)])
    tau_k = _ratio(s, spec(k))
    add = k * (cd * s * tau_k ** (2 * q)) ** 2
    opt = spec.optimum(k)
    return BoundReport(
        regime="deviation",
        p_branch=_branch(p),
        sv_lower=sv,
        fro_upper=math.sqrt(opt.fro**2 + add),
        two_upper=math.sqrt(opt.two**2 + add),
        constants={"C_delta": cd, "tau": taus},
        extra={
            "sv_floor": sig / math.hypot(1.0, cd),
            "two_upper_q_free": opt.two * math.sqrt(1.0 + k * cd * cd),
        },
    )


# ---------------------------------------------------------------------------
# certificates


def reverse_ey(eta, spec, k):
    """Two-norm and singular-value certificates from a Frobenius excess ``eta``.

    ``eta^2 = ||A - B||_F^2 - sum_{j>k} sigma_j^2`` for a rank-k ``B``.
    Returns a dict with ``two_upper = sqrt(eta^2 + sigma_{k+1}^2)``,
    ``sv_dev_upper = eta`` and the looser ``two_upper_simple = sigma_{k+1} + eta``.
    """
    spec = SpectrumView.of(spec)
    if not eta >= 0:
        raise ValueError(f"eta must be nonnegative, got {eta}")
    s = spec(k + 1)
    return {
        "two_upper": math.hypot(eta, s),
        "sv_dev_upper": float(eta),
        "two_upper_simple": s + eta,
    }


def hager_constant(n, ell, delta):
    """``(e / sqrt(ell)) (2/delta)^(1/ell) (sqrt(n) + sqrt(ell) + sqrt(2 log(2/delta)))``."""
    if ell < 2:
        raise ValueError(f"ell must be at least 2, got {ell}")
    if not 0.0 < delta < 2.0:
        raise ValueError(f"delta must lie in (0, 2), got {delta}")
    r = 2.0 / delta
    return math.e / math.sqrt(ell) * r ** (1.0 / ell) * (math.sqrt(n) + math.sqrt(ell) + math.sqrt(2.0 * math.log(r)))


def hager_ell(delta):
    """Sample count ``ceil(log2(2 / delta))`` for the randomized 1-norm estimator."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return max(2, _ceil_log(math.log2(2.0 / delta)))


def hager_constant_check(n, delta):
    """Evaluate the constant at the recommended ``ell`` and its simple ceiling.

    Returns ``(ell, C_hat, ceiling, C_hat < ceiling)`` with
    ``ceiling = 2 e (sqrt(n / ell) + 3)``.
    """
    ell = hager_ell(delta)
    c = hager_constant(n, ell, delta)
    ceiling = 2.0 * math.e * (math.sqrt(n / ell) + 3.0)
    return ell, c, ceiling, c < ceiling


# ---------------------------------------------------------------------------
# sample size


def _bisect(f, lo, hi, tol):
    flo = f(lo)
    for _ in range(400):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0) and fm != 0:
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def eta_constant():
    """The root of ``1 + 1/x = log x`` (about 3.5911)."""
    return _bisect(lambda x: 1.0 + 1.0 / x - math.log(x), 2.0, 10.0, 1e-15)


@dataclass(frozen=True)
class OptimalEll:
    ell_opt: float
    ell_int: int
    bracket: tuple


def optimal_ell(k, p, T_model=None):
    """Sample count minimizing the power-step cost under polynomial decay.

    Solves ``g(ell) = ell / (ell - p + 1) + log(k / (ell - p + 1)) = 0`` by
    bisection on the bracket ``e k <= ell - p + 1 <= eta (p - 1 + k)``.
    ``T_model`` (the decay exponent) cancels from the stationarity condition
    and is accepted only for the record.

    Raises
    ------
    ValueError
        If ``g`` does not change sign on the bracket.
    """
    if k < 1 or p < 0:
        raise ValueError(f"need k >= 1 and p >= 0, got k={k}, p={p}")

    def g(x):  # x = ell - p + 1
        return (x + p - 1) / x + math.log(k / x)

    lo, hi = math.e * k, eta_constant() * (p - 1 + k)
    if not hi > 0:
        raise ValueError(f"empty bracket [{lo:.6g}, {hi:.6g}] for k={k}, p={p}")
    glo, ghi = g(lo), g(hi)
    if abs(glo) <= 1e-12:
        x = lo
    elif abs(ghi) <= 1e-12:
        x = hi
    elif lo < hi and glo > 0 > ghi:
        x = _bisect(g, lo, hi, 1e-12)
    else:
        raise ValueError(
            f"g has no sign change on [{lo:.6g}, {hi:.6g}] for k={k}, p={p} "
            f"(g = {glo:.3g}, {ghi:.3g})"
        )
    ell = x + p - 1
    return OptimalEll(ell, math.ceil(ell - 1e-12), (lo + p - 1, hi + p - 1))

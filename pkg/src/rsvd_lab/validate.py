"""
Checks of sketch outputs against the exact SVD and Monte-Carlo checks of
the random-matrix inequalities the bounds rest on.

Deterministic claims are evaluated per run with a slack of ``1e-10``
relative to ``sigma_1(A)``.  Probabilistic claims are only ever recorded as
Bernoulli outcomes; acceptance for them means an empirical rate within
three binomial standard errors of the bound.
"""

import hashlib
import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, field

import numpy as np

from . import bounds as bd
from .densela import as_matrix, exact_svd, gaussian_matrix, singular_values
from .sketch import LowRankApprox, SketchConfig, _full_right_vectors, split_start_matrix

__all__ = [
    "RankRevealReport",
    "Claim",
    "AuditReport",
    "oracle_svd",
    "oracle_spectrum",
    "check_rank_revealing",
    "invariant_claims",
    "bound_audit",
    "tail_bound_mc",
    "expectation_mc",
    "concentration_mc",
    "binomial_se",
]

SLACK = 1e-10

_CACHE = OrderedDict()
_CACHE_SIZE = 32


def _key(a):
    h = hashlib.sha1(np.ascontiguousarray(a).tobytes())
    h.update(repr(a.shape).encode())
    return h.hexdigest()


def oracle_svd(a):
    """Exact SVD, memoized on the matrix contents."""
    a = as_matrix(a, "a")
    key = _key(a)
    if key in _CACHE:
        _CACHE.move_to_end(key)
        return _CACHE[key]
    f = exact_svd(a)
    _CACHE[key] = f
    if len(_CACHE) > _CACHE_SIZE:
        _CACHE.popitem(last=False)
    return f


def oracle_spectrum(a):
    a = as_matrix(a, "a")
    return bd.SpectrumView(oracle_svd(a).sigma, *a.shape)


def binomial_se(p, trials):
    return math.sqrt(p * (1.0 - p) / trials)


# ---------------------------------------------------------------------------
# rank revealing


@dataclass(frozen=True)
class RankRevealReport:
    passed: bool
    worst_sv_ratio: float
    norm_ratio: float
    c1: float
    c2: float
    rank_ok: bool = True


def _dense(b, shape):
    if isinstance(b, LowRankApprox):
        return b.to_dense(), b.sigma_hat
    b = as_matrix(b, "b")
    if b.shape != shape:
        raise ValueError(f"b has shape {b.shape}, a has {shape}")
    return b, singular_values(b)


def check_rank_revealing(a, b, k, c1, c2, *, a_spectrum=None):
    """Check that ``b`` is a rank-revealing rank-``k`` approximation of ``a``.

    Conditions: ``sigma_j(B) >= sigma_j(A) / c2`` for ``j <= k`` and
    ``||A - B||_2 <= c1 sigma_{k+1}(A)``.

    Parameters
    ----------
    a : ndarray
        The matrix (needed for ``||A - B||_2``).
    b : LowRankApprox or ndarray
    k : int
    c1, c2 : float
        Both at least 1.
    a_spectrum : SpectrumView, optional
        Oracle singular values of ``a``; computed when omitted.
    """
    a = as_matrix(a, "a")
    if not 0 < k < min(a.shape):
        raise ValueError(f"need 0 < k < min(m, n), got k={k}")
    if c1 < 1 or c2 < 1:
        raise ValueError("c1 and c2 must be at least 1")
    spec = a_spectrum if a_spectrum is not None else oracle_spectrum(a)
    bd_, bsig = _dense(b, a.shape)
    bsig = np.concatenate([bsig, np.zeros(max(0, k - bsig.size))])
    ratios = []
    for j in range(1, k + 1):
        sj = spec(j)
        ratios.append(math.inf if sj == 0.0 else bsig[j - 1] * c2 / sj)
    worst = float(min(ratios))
    err = float(singular_values(a - bd_)[0])
    s = spec(k + 1)
    if s > 0.0:
        norm_ratio = err / (c1 * s)
    else:
        norm_ratio = 0.0 if err <= SLACK * max(spec(1), 1e-300) else math.inf
    rank_ok = int(np.sum(bsig > 1e-12 * max(bsig.max(initial=0.0), 1e-300))) <= k
    passed = worst >= 1.0 - SLACK and norm_ratio <= 1.0 + SLACK and rank_ok
    return RankRevealReport(bool(passed), worst, float(norm_ratio), float(c1), float(c2), bool(rank_ok))


# ---------------------------------------------------------------------------
# per-run audit


@dataclass(frozen=True)
class Claim:
    """One inequality ``lhs <= rhs`` (``kind='upper'``) or ``lhs >= rhs`` (``'lower'``).

    ``holds`` is ``None`` when the inputs to the claim are unavailable.
    ``margin`` is ``rhs - lhs`` for upper claims and ``lhs - rhs`` for lower
    ones, so a negative margin beyond the slack is a violation.
    """

    name: str
    family: str
    kind: str
    lhs: float
    rhs: float
    holds: bool | None
    margin: float
    deterministic: bool = True


def _claim(name, family, kind, lhs, rhs, tol, deterministic=True):
    if lhs is None or rhs is None or (isinstance(rhs, float) and math.isnan(rhs)):
        return Claim(name, family, kind, float("nan"), float("nan"), None, float("nan"), deterministic)
    margin = (rhs - lhs) if kind == "upper" else (lhs - rhs)
    return Claim(name, family, kind, float(lhs), float(rhs), bool(margin >= -tol), float(margin), deterministic)


@dataclass
class AuditReport:
    claims: list = field(default_factory=list)

    @property
    def deterministic_violations(self):
        return [c for c in self.claims if c.deterministic and c.holds is False]

    def probabilistic(self, prefix):
        """Claims whose name starts with ``prefix`` (Bernoulli outcomes)."""
        return [c for c in self.claims if not c.deterministic and c.name.startswith(prefix)]

    def by_name(self, name):
        return [c for c in self.claims if c.name == name]

    def to_dict(self):
        return {"claims": [asdict(c) for c in self.claims]}


def _errors(a, approx):
    resid = a - approx.to_dense()
    return float(np.sqrt(np.sum(resid * resid))), float(singular_values(resid)[0])


def _oriented(a, approx):
    return a.T if approx.transposed else a


def invariant_claims(a, approx, spectrum=None, rng_seed=0, restricted_trials=0):
    """Claims that hold for every run regardless of the start block.

    Covers singular value interlacing, the optimal-truncation chain, the
    two certificates derived from the Frobenius excess, the
    Hoffman-Wielandt inequality and (optionally) restricted optimality of
    ``B_k`` against random rank-k competitors.
    """
    a = as_matrix(a, "a")
    spec = spectrum if spectrum is not None else oracle_spectrum(a)
    tol = SLACK * max(spec(1), 1e-300)
    k = approx.k
    fro, two = _errors(a, approx)
    out = []
    for j in range(1, k + 1):
        out.append(_claim(f"interlacing[{j}]", "interlacing", "upper", approx.sigma_hat[j - 1], spec(j), tol))
    opt = spec.optimum(k)
    out.append(_claim("optimal_fro", "optimality", "lower", fro, opt.fro, tol))
    out.append(_claim("optimal_two", "optimality", "lower", two, opt.two, tol))

    ta = _oriented(a, approx)
    qb = approx.q_basis
    proj = ta - qb @ (qb.T @ ta)
    proj_fro = float(np.sqrt(np.sum(proj * proj)))
    out.append(_claim("truncation_dominance_fro", "truncation", "upper", proj_fro, fro, tol))
    out.append(_claim("truncation_dominance_two", "truncation", "upper", float(singular_values(proj)[0]), two, tol))
    f = oracle_svd(a)
    ak_t = (f.u[:, :k] * f.sigma[:k]) @ f.v[:, :k].T
    ak_t = ak_t.T if approx.transposed else ak_t
    chain = ta - qb @ (qb.T @ ak_t)
    out.append(_claim("chain_upper", "chain", "upper", fro, float(np.sqrt(np.sum(chain * chain))), tol))

    eta = math.sqrt(max(0.0, fro * fro - opt.fro**2))
    rey = bd.reverse_ey(eta, spec, k)
    out.append(_claim("reverse_ey_two", "reverse_ey", "upper", two, rey["two_upper"], tol))
    dev = math.sqrt(sum((spec(j) - approx.sigma_hat[j - 1]) ** 2 for j in range(1, k + 1)))
    out.append(_claim("reverse_ey_sv", "reverse_ey", "upper", dev, rey["sv_dev_upper"], tol))
    hw = math.sqrt(dev * dev + opt.fro**2)
    out.append(_claim("hoffman_wielandt", "hoffman_wielandt", "upper", hw, fro, tol))

    if restricted_trials:
        best = math.inf
        rng = np.random.Generator(np.random.PCG64(rng_seed))
        for _ in range(restricted_trials):
            g = rng.standard_normal((qb.shape[1], k)) @ rng.standard_normal((k, ta.shape[1]))
            r = ta - qb @ g
            best = min(best, float(np.sqrt(np.sum(r * r))))
        out.append(_claim("restricted_optimality", "restricted", "upper", fro, best, tol))
    return out


def bound_audit(
    a,
    approx,
    cfg,
    *,
    omega=None,
    right_vectors=None,
    spectrum=None,
    p_values=None,
    invariants=True,
):
    """Evaluate every applicable bound for one sketch run.

    Parameters
    ----------
    a : ndarray
        The matrix the sketch was computed from.
    approx : LowRankApprox
    cfg : SketchConfig
        Supplies ``k``, ``ell``, ``q``, ``delta`` and the default ``p``.
    omega : ndarray, optional
        The start block.  With it, the deterministic bounds are evaluated
        for every ``p`` in ``p_values``; without it only
        ``approx.omega_split`` (if present) is used.
    right_vectors : ndarray, optional
        Complete ``V`` of ``a`` (``n x n``); computed from the oracle when
        needed and omitted.
    spectrum : SpectrumView, optional
        Oracle spectrum of ``a``.
    p_values : iterable of int, optional
        Defaults to ``[cfg.p_split]``.
    invariants : bool
        Include :func:`invariant_claims`.

    Returns
    -------
    AuditReport
        Deterministic rows are ``Claim.holds is None`` when the split of
        ``V^T Omega`` is unavailable or row-rank deficient.
    """
    a = as_matrix(a, "a")
    spec = spectrum if spectrum is not None else oracle_spectrum(a)
    tol = SLACK * max(spec(1), 1e-300)
    k, ell, q = cfg.k, cfg.ell, cfg.q
    fro, two = _errors(a, approx)
    report = AuditReport()
    if invariants:
        report.claims.extend(invariant_claims(a, approx, spec))

    ps = list(p_values) if p_values is not None else [cfg.p_split]
    for p in ps:
        split = None
        if omega is not None:
            if right_vectors is None:
                right_vectors = _full_right_vectors(_oriented(a, approx))
            split = split_start_matrix(right_vectors, omega, ell, p)
        elif approx.omega_split is not None and p == cfg.p_split:
            split = approx.omega_split
        usable = split is not None and split.full_row_rank
        tag = f"p={p}"
        for j in range(1, k + 1):
            rhs = bd.det_sv_lower(spec, j, ell, p, q, split.omega2_norm, split.omega1_pinv_norm) if usable else None
            report.claims.append(_claim(f"det_sv[{j}]|{tag}", "det_sv", "lower", approx.sigma_hat[j - 1], rhs, tol))
        up = bd.det_lowrank_upper(spec, k, ell, p, q, split.omega2_norm, split.omega1_pinv_norm) if usable else None
        report.claims.append(_claim(f"det_fro|{tag}", "det_error", "upper", fro, up.fro if up else None, tol))
        report.claims.append(_claim(f"det_two|{tag}", "det_error", "upper", two, up.two if up else None, tol))

    p = cfg.p_split
    dev = bd.deviation_bounds(spec, k, ell, p, q, cfg.delta)
    for j in range(1, k + 1):
        report.claims.append(
            _claim(f"dev_sv[{j}]", "deviation", "lower", approx.sigma_hat[j - 1], dev.sv_lower[j - 1], tol, False)
        )
        report.claims.append(
            _claim(f"cor_sv[{j}]", "rank_reveal", "lower", approx.sigma_hat[j - 1], dev.extra["sv_floor"][j - 1], tol, False)
        )
    report.claims.append(_claim("dev_fro", "deviation", "upper", fro, dev.fro_upper, tol, False))
    report.claims.append(_claim("dev_two", "deviation", "upper", two, dev.two_upper, tol, False))
    report.claims.append(_claim("cor_two", "rank_reveal", "upper", two, dev.extra["two_upper_q_free"], tol, False))
    if q == 0 and ell - k >= 4:
        proj = _oriented(a, approx)
        proj = proj - approx.q_basis @ (approx.q_basis.T @ proj)
        lhs = float(singular_values(proj)[0])
        report.claims.append(_claim("hmt_two", "hmt", "upper", lhs, bd.hmt_bound(spec, k, ell - k), tol, False))
    return report


def deviation_violation(report):
    """True when any of the three large-deviation inequalities failed."""
    rows = [c for c in report.claims if c.name.startswith("dev_")]
    return any(c.holds is False for c in rows)


# ---------------------------------------------------------------------------
# Monte Carlo


def _trial_matrices(rows, cols, trials, seed):
    # per-trial seeds make the result independent of batching and scheduling
    return np.stack([gaussian_matrix(rows, cols, seed ^ t) for t in range(trials)])


def tail_bound_mc(ell, p, t_grid, trials, seed):
    """Tail of ``||G^+||_2`` for ``(ell - p) x ell`` Gaussian ``G``.

    Bound: ``P(||G^+||_2 >= e t sqrt(ell) / (p + 1)) <= t^-(p+1)``.

    Returns
    -------
    list of dict
        One row per ``t``: threshold, empirical rate, bound, binomial SE
        at the bound, and whether ``empirical <= bound + 3 SE``.  Every row
        also reports whether all trials had full row rank.
    """
    if ell - p < 2:
        raise ValueError(f"need ell - p >= 2, got ell={ell}, p={p}")
    if trials < 100:
        raise ValueError(f"need at least 100 trials, got {trials}")
    g = _trial_matrices(ell - p, ell, trials, seed)
    s = singular_values(g)
    smin = s[:, -1]
    full = bool(np.all(smin > 1e-13 * s[:, 0]))
    pinv = 1.0 / smin
    rows = []
    for t in t_grid:
        if t < 1:
            raise ValueError(f"t must be at least 1, got {t}")
        thr = math.e * t * math.sqrt(ell) / (p + 1)
        emp = float(np.mean(pinv >= thr))
        bound = float(t ** (-(p + 1)))
        se = binomial_se(min(bound, 1.0), trials)
        rows.append(
            {"t": float(t), "threshold": thr, "empirical": emp, "bound": bound, "se": se,
             "passed": emp <= bound + 3 * se, "full_row_rank": full}
        )
    return rows


def expectation_mc(shape, s, t, trials, seed):
    """Sample mean of ``||S G T||_2`` against ``||S||_2 ||T||_F + ||S||_F ||T||_2``."""
    m, n = shape
    s = as_matrix(s, "s")
    t = as_matrix(t, "t")
    if s.shape[1] != m or t.shape[0] != n:
        raise ValueError(f"S {s.shape} and T {t.shape} do not fit G {shape}")
    g = _trial_matrices(m, n, trials, seed)
    prod = s @ g @ t
    vals = singular_values(prod)[:, 0]
    s2 = singular_values(s)[0]
    t2 = singular_values(t)[0]
    bound = s2 * np.linalg.norm(t) + np.linalg.norm(s) * t2
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return {"mean_norm": mean, "bound": float(bound), "se": se, "passed": mean <= bound + 3 * se}


def concentration_mc(shape, trials, u_grid, seed):
    """Exceedance of ``||G||_2`` above its sample mean plus ``u`` against ``exp(-u^2 / 2)``."""
    if trials < 1000:
        raise ValueError(f"need at least 1000 trials, got {trials}")
    m, n = shape
    vals = singular_values(_trial_matrices(m, n, trials, seed))[:, 0]
    mu = float(vals.mean())
    rows = []
    for u in u_grid:
        emp = float(np.mean(vals >= mu + u))
        bound = math.exp(-u * u / 2.0)
        se = binomial_se(bound, trials)
        rows.append(
            {"u": float(u), "empirical": emp, "bound": bound, "se": se, "passed": emp <= bound + 3 * se,
             "mean": mu, "mean_ceiling": math.sqrt(m) + math.sqrt(n)}
        )
    return rows

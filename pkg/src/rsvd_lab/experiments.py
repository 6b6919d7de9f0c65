"""
Desk-scale experiment drivers.

Each driver returns a JSON-ready ``dict`` with ``params``, per-run
``runs`` and an ``aggregate`` block, plus optional CSV ``rows``.  All of
them are deterministic functions of their arguments.
"""

import math

import numpy as np

from . import bounds as bd
from .densela import gaussian_matrix, singular_values
from .normest import hager_one_norm, randomized_hager
from .sketch import SketchConfig, basic_randomized, subspace_iteration, subspace_iteration_path
from .testmat import (
    DecaySpec,
    adversarial_hager,
    decay_matrix,
    identical_leading,
    log_kernel_discs,
    log_kernel_gaussian,
)
from .validate import (
    binomial_se,
    bound_audit,
    check_rank_revealing,
    concentration_mc,
    invariant_claims,
    oracle_spectrum,
    tail_bound_mc,
)

__all__ = [
    "power_compare",
    "matvec_table",
    "hager_adversarial",
    "tail_mc",
    "deviation_mc",
    "deterministic_audit",
    "rank_revealing_mc",
    "EXPERIMENTS",
]


def _first_hit(path, target, tol, offset=0):
    """First iterate of ``path`` whose leading singular value is within ``tol``."""
    curve = []
    for q, ap in path:
        err = abs(ap.sigma_hat[0] - target) / target
        curve.append((q, ap.matvec_count + offset, err))
        if err <= tol:
            return q, ap.matvec_count + offset, curve
    return None, None, curve


def power_compare(n=500, mu=1.0, seeds=20, matrix_seed=0, tol=1e-8, ell1=5, ell2=1, q_max=2000):
    """Randomized power method against the two-stage small-k scheme.

    Both estimate ``sigma_1`` of a Gaussian log-kernel matrix; a run has
    converged once ``|sigma_hat - sigma_1| / sigma_1 <= tol``.  Matvec
    counts include the first stage of the two-stage scheme; ``power_steps``
    counts only the ``A A^T`` applications after the start vector is fixed.
    """
    a = log_kernel_gaussian(n, mu, matrix_seed)
    sig = singular_values(a)
    s1 = float(sig[0])
    runs, rows = [], []
    for seed in range(seeds):
        q_pm, mv_pm, c_pm = _first_hit(subspace_iteration_path(a, gaussian_matrix(n, 1, seed), 1, q_max), s1, tol)
        st = basic_randomized(a, ell2, ell1, seed)
        q_sk, mv_sk, c_sk = _first_hit(
            subspace_iteration_path(a, st.right, 1, q_max), s1, tol, offset=st.matvec_count
        )
        runs.append(
            {"seed": seed, "power_matvecs": mv_pm, "power_steps": q_pm,
             "small_k_matvecs": mv_sk, "small_k_steps": q_sk, "small_k_stage1_matvecs": st.matvec_count}
        )
        rows += [("power", seed, q, mv, e) for q, mv, e in c_pm]
        rows += [("small_k", seed, q, mv, e) for q, mv, e in c_sk]

    def med(key):
        vals = [r[key] for r in runs if r[key] is not None]
        return float(np.median(vals)) if len(vals) == len(runs) else None

    return {
        "params": {"n": n, "mu": mu, "seeds": seeds, "matrix_seed": matrix_seed, "tol": tol,
                   "ell1": ell1, "ell2": ell2, "q_max": q_max},
        "runs": runs,
        "aggregate": {
            "sigma1": s1,
            "sigma2_over_sigma1": float(sig[1] / sig[0]),
            "median_power_matvecs": med("power_matvecs"),
            "median_small_k_matvecs": med("small_k_matvecs"),
            "median_power_steps": med("power_steps"),
            "median_small_k_steps": med("small_k_steps"),
        },
        "csv_header": ["method", "seed", "q", "matvecs", "rel_sigma1_error"],
        "rows": rows,
    }


def _sv_error(ap, sig, k):
    return float(np.max(np.abs(sig[:k] - ap.sigma_hat)) / sig[0])


def _min_ell(a, omega_full, sig, k, q, tol):
    """Smallest ``ell`` whose sketch meets ``tol`` (nested start blocks, bisection)."""
    cache = {}

    def err(ell):
        if ell not in cache:
            cfg = SketchConfig(k=k, ell=ell, q=q)
            cache[ell] = _sv_error(subspace_iteration(a, omega_full[:, :ell], cfg), sig, k)
        return cache[ell]

    lo, hi = k, omega_full.shape[1]
    if err(hi) > tol:
        return None, cache
    while lo < hi:
        mid = (lo + hi) // 2
        if err(mid) <= tol:
            hi = mid
        else:
            lo = mid + 1
    return lo, cache


def matvec_table(n=500, k=50, tols=(1e-6, 1e-8, 1e-10), qs=(0, 2, 4), seed=0, ell_max=None):
    """Matvecs needed by subspace iteration to reach each tolerance on the disc kernel.

    The error of a run is ``max_{j<=k} |sigma_j - sigma_hat_j| / sigma_1``.
    For every ``(tol, q)`` the smallest sufficient ``ell`` is found by
    bisection over nested Gaussian start blocks (the captured subspaces
    are nested, so the error is monotone in ``ell``).  ``total`` counts
    ``(2q + 2) ell`` column-applications; ``blocks x ell`` lists the
    ``(2q + 1)`` range-finder products separately.
    """
    a = log_kernel_discs(n)
    sig = singular_values(a)
    ell_max = ell_max or min(n - 1, 4 * k)
    omega = gaussian_matrix(n, ell_max, seed)
    table, rows = [], []
    for tol in tols:
        for q in qs:
            ell, cache = _min_ell(a, omega, sig, k, q, tol)
            entry = {
                "tol": tol, "q": q, "ell": ell,
                "total": None if ell is None else (2 * q + 2) * ell,
                "blocks": 2 * q + 1,
                "paper_style": None if ell is None else (str(ell) if q == 0 else f"{2 * q + 1}x{ell}"),
            }
            table.append(entry)
            rows += [(tol, q, e, (2 * q + 2) * e, v) for e, v in sorted(cache.items())]
    strict = {}
    for tol in tols:
        tot = {e["q"]: e["total"] for e in table if e["tol"] == tol}
        others = [v for q, v in tot.items() if q != min(qs)]
        base = tot[min(qs)]
        strict[str(tol)] = base is not None and all(v is None or base < v for v in others)
    return {
        "params": {"n": n, "k": k, "tols": list(tols), "qs": list(qs), "seed": seed, "ell_max": ell_max},
        "runs": table,
        "aggregate": {"q0_strictly_cheapest": strict, "sigma_k1_over_sigma1": float(sig[k] / sig[0])},
        "csv_header": ["tol", "q", "ell", "matvecs", "sv_error"],
        "rows": rows,
    }


def hager_adversarial(n=100, rho=1e10, ell=5, seeds=20, hager_iters=2):
    """Plain versus randomized Hager on the adversarial matrix, one matrix per seed."""
    runs = []
    for seed in range(seeds):
        a = adversarial_hager(n, rho, seed)
        true = float(np.abs(a).sum(axis=0).max())
        plain = hager_one_norm(a)
        rnd = randomized_hager(a, ell, seed, hager_iters)
        runs.append(
            {"seed": seed, "true": true, "plain": plain.value, "randomized": rnd.value,
             "plain_ratio": plain.value / true, "randomized_ratio": rnd.value / true,
             "plain_iterations": plain.iterations, "randomized_matvecs": rnd.matvec_count}
        )
    c_hat = bd.hager_constant(n, ell, 0.05) if ell >= 2 else math.nan
    return {
        "params": {"n": n, "rho": rho, "ell": ell, "seeds": seeds, "hager_iters": hager_iters},
        "runs": runs,
        "aggregate": {
            "max_plain_ratio": max(r["plain_ratio"] for r in runs),
            "min_randomized_ratio": min(r["randomized_ratio"] for r in runs),
            "median_randomized_ratio": float(np.median([r["randomized_ratio"] for r in runs])),
            "guaranteed_floor_ratio_delta_0.05": 1.0 / (math.sqrt(n) * math.hypot(1.0, c_hat)),
        },
    }


def tail_mc(ell=20, ps=(0, 1, 4), ts=(1.5, 2.0, 4.0), shape=(60, 40), us=(1.0, 2.0, 3.0), trials=10_000, seed=0):
    """Pseudo-inverse tail and norm concentration of Gaussian matrices."""
    tail = {str(p): tail_bound_mc(ell, p, ts, trials, seed) for p in ps}
    conc = concentration_mc(shape, trials, us, seed)
    ok = all(r["passed"] and r["full_row_rank"] for rs in tail.values() for r in rs) and all(r["passed"] for r in conc)
    return {
        "params": {"ell": ell, "ps": list(ps), "ts": list(ts), "shape": list(shape), "us": list(us),
                   "trials": trials, "seed": seed},
        "runs": {"tail": tail, "concentration": conc},
        "aggregate": {"all_within_3se": ok},
    }


def _decay_audit_run(dm, spec, cfg, omega, p_values, invariants=True):
    ap = subspace_iteration(dm.matrix, omega, cfg)
    return ap, bound_audit(
        dm.matrix, ap, cfg, omega=omega if p_values else None, right_vectors=dm.v,
        spectrum=spec, p_values=p_values, invariants=invariants,
    )


def deviation_mc(n=64, k=4, ell=12, p=4, q=1, delta=0.1, rate=0.5, seeds=500, matrix_seed=0):
    """Empirical violation rate of the large-deviation bounds on an exponential spectrum."""
    dm = decay_matrix(DecaySpec("exponential", n, rate=rate), matrix_seed)
    spec = bd.SpectrumView(dm.true_sigma, n, n)
    cfg0 = SketchConfig(k=k, ell=ell, q=q, p=p, delta=delta)
    runs = []
    det_viol = 0
    for seed in range(seeds):
        cfg = SketchConfig(k=k, ell=ell, q=q, p=p, delta=delta, seed=seed)
        _, rep = _decay_audit_run(dm, spec, cfg, gaussian_matrix(n, ell, seed), None)
        fails = {name: any(c.holds is False for c in rep.claims if c.name.startswith(name))
                 for name in ("dev_sv", "dev_fro", "dev_two")}
        det_viol += len(rep.deterministic_violations)
        runs.append({"seed": seed, **fails, "any": any(fails.values())})
    rate_any = float(np.mean([r["any"] for r in runs]))
    ceiling = delta + 3 * binomial_se(delta, seeds)
    return {
        "params": {"n": n, "k": k, "ell": ell, "p": p, "q": q, "delta": delta, "rate": rate,
                   "seeds": seeds, "matrix_seed": matrix_seed, "C_delta": bd.deviation_constant(n, ell, p, delta)},
        "runs": runs,
        "aggregate": {
            "violation_rate": rate_any,
            "violation_rate_sv": float(np.mean([r["dev_sv"] for r in runs])),
            "violation_rate_fro": float(np.mean([r["dev_fro"] for r in runs])),
            "violation_rate_two": float(np.mean([r["dev_two"] for r in runs])),
            "ceiling": ceiling,
            "passed": rate_any <= ceiling,
            "invariant_violations": det_viol,
        },
        "config": cfg0.__dict__,
    }


AUDIT_SPECS = (
    DecaySpec("exponential", 64, rate=0.5),
    DecaySpec("exponential", 64, rate=0.8),
    DecaySpec("power_law", 64, exponent=1.0),
    DecaySpec("power_law", 64, exponent=2.0),
)


def deterministic_audit(triples=100, n=64, k=4, ell=12, qs=(0, 1, 3), p_values=(0, 1, 2, 4)):
    """Deterministic bounds with measured start-block norms over many runs.

    Triple ``i`` uses spectrum model ``i mod 4`` (matrix seed ``i // 4``),
    ``q = qs[i mod len(qs)]`` and sketch seed ``1000 + i``.
    """
    runs = []
    for i in range(triples):
        base = AUDIT_SPECS[i % len(AUDIT_SPECS)]
        dm = decay_matrix(DecaySpec(base.model, n, base.rate, base.exponent), i // len(AUDIT_SPECS))
        spec = bd.SpectrumView(dm.true_sigma, n, n)
        q = qs[i % len(qs)]
        cfg = SketchConfig(k=k, ell=ell, q=q, seed=1000 + i)
        _, rep = _decay_audit_run(dm, spec, cfg, gaussian_matrix(n, ell, cfg.seed), list(p_values))
        det = [c for c in rep.claims if c.family in ("det_sv", "det_error")]
        inv = [c for c in rep.claims if c.family in ("reverse_ey", "hoffman_wielandt")]
        runs.append({
            "triple": i, "model": base.model, "q": q, "seed": cfg.seed,
            "bound_violations": sum(c.holds is False for c in det),
            "bound_unavailable": sum(c.holds is None for c in det),
            "bound_checks": len(det),
            "invariant_violations": sum(c.holds is False for c in inv),
            "other_violations": len(rep.deterministic_violations) - sum(c.holds is False for c in det + inv),
            "min_margin": float(min(c.margin / spec(1) for c in det if c.holds is not None)),
        })
    return {
        "params": {"triples": triples, "n": n, "k": k, "ell": ell, "qs": list(qs), "p_values": list(p_values)},
        "runs": runs,
        "aggregate": {
            "bound_violations": sum(r["bound_violations"] for r in runs),
            "bound_unavailable": sum(r["bound_unavailable"] for r in runs),
            "bound_checks": sum(r["bound_checks"] for r in runs),
            "invariant_violations": sum(r["invariant_violations"] for r in runs),
            "other_violations": sum(r["other_violations"] for r in runs),
        },
    }


def rank_revealing_mc(n=64, k=5, ell=10, q=0, delta=0.05, seeds=200):
    """Rank-revealing check with the power-free large-deviation constants.

    ``c2 = sqrt(1 + C_delta^2)`` and ``c1 = sqrt(1 + k C_delta^2)`` with
    ``p = min(ell - k, oversampling_p(delta))``.
    """
    a = identical_leading(n, k)
    spec = oracle_spectrum(a)
    cfg0 = SketchConfig(k=k, ell=ell, q=q, delta=delta)
    p = cfg0.p_split
    cd = bd.deviation_constant(n, ell, p, delta)
    c2, c1 = math.hypot(1.0, cd), math.sqrt(1.0 + k * cd * cd)
    runs = []
    inv_viol = 0
    for seed in range(seeds):
        cfg = SketchConfig(k=k, ell=ell, q=q, delta=delta, seed=seed)
        ap = subspace_iteration(a, gaussian_matrix(n, ell, seed), cfg)
        rep = check_rank_revealing(a, ap, k, c1, c2, a_spectrum=spec)
        inv = [c for c in invariant_claims(a, ap, spec) if c.family in ("reverse_ey", "hoffman_wielandt")]
        inv_viol += sum(c.holds is False for c in inv)
        runs.append({"seed": seed, "passed": rep.passed, "worst_sv_ratio": rep.worst_sv_ratio,
                     "norm_ratio": rep.norm_ratio})
    rate = float(np.mean([r["passed"] for r in runs]))
    floor = 0.95 - 3 * binomial_se(0.95, seeds)
    return {
        "params": {"n": n, "k": k, "ell": ell, "q": q, "p": p, "delta": delta, "seeds": seeds,
                   "C_delta": cd, "c1": c1, "c2": c2},
        "runs": runs,
        "aggregate": {"pass_rate": rate, "floor": floor, "passed": rate >= floor,
                      "invariant_violations": inv_viol},
    }


EXPERIMENTS = {
    "power-compare": power_compare,
    "matvec-table": matvec_table,
    "hager-adversarial": hager_adversarial,
    "tail-mc": tail_mc,
    "deviation-mc": deviation_mc,
    "deterministic-audit": deterministic_audit,
    "rank-revealing": rank_revealing_mc,
}

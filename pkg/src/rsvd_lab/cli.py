"""
Command-line interface.

    rsvd-lab gen KIND --n N --out FILE
    rsvd-lab sketch --in FILE --algo rsi --k K --ell L [--q Q] [--audit]
    rsvd-lab bounds (--spectrum FILE | --gen MODEL --n N) --k K --ell L
    rsvd-lab estimate-norm --in FILE (--one | --two | --cond)
    rsvd-lab experiment NAME [--n N] [--seeds S] [--csv FILE]

Every command prints (or writes with ``--report``) a JSON report with
``schema_version`` "1".  Wall-clock times live under ``timing`` and are the
only nondeterministic part; ``--no-timing`` drops them.
"""

import argparse
import csv
import inspect
import json
import math
import sys
import time
from dataclasses import replace

import numpy as np

from . import bounds as bd
from . import experiments as ex
from .adaptive import AdaptiveConfig, adaptive_rsi
from .densela import as_matrix, gaussian_matrix, read_matrix, singular_values, write_matrix
from .normest import condition_estimate, hager_one_norm, lu_inverse_operator, randomized_hager
from .sketch import (
    SketchConfig,
    basic_randomized,
    improved_small_k,
    randomized_power_method,
    subspace_iteration,
)
from .testmat import (
    DecaySpec,
    adversarial_hager,
    decay_matrix,
    decay_spectrum,
    identical_leading,
    log_kernel_discs,
    log_kernel_gaussian,
)
from .validate import bound_audit

SCHEMA_VERSION = "1"


class CliError(Exception):
    pass


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def _emit(args, command, params, results, aggregate=None, t0=None):
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "params": params,
        "results": results,
        "aggregate": aggregate or {},
    }
    if not args.no_timing and t0 is not None:
        report["timing"] = {"wall_seconds": time.perf_counter() - t0}
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _read(path):
    try:
        return read_matrix(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except ValueError as exc:
        raise CliError(f"malformed matrix file {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# gen


def _generate(args):
    kind = args.kind
    n = args.n
    if kind == "identity":
        return np.eye(n)
    if kind == "diag":
        if not args.values:
            raise CliError("diag needs --values")
        return np.diag(np.array(args.values, dtype=np.float64))
    if kind == "log-gaussian":
        return log_kernel_gaussian(n, args.mu, args.seed)
    if kind == "discs":
        return log_kernel_discs(n)
    if kind == "adversarial":
        return adversarial_hager(n, args.rho, args.seed)
    if kind == "decay":
        return decay_matrix(DecaySpec(args.model, n, rate=args.rate, exponent=args.exponent), args.seed).matrix
    if kind == "identical-leading":
        return identical_leading(n, args.k)
    raise CliError(f"unknown matrix kind {kind!r}")


def cmd_gen(args):
    t0 = time.perf_counter()
    a = _generate(args)
    write_matrix(args.out, a, args.format)
    params = {k: v for k, v in vars(args).items() if k not in ("func", "report", "no_timing", "command")}
    _emit(args, "gen", params, {"shape": list(a.shape), "path": args.out}, t0=t0)
    return 0


# ---------------------------------------------------------------------------
# sketch


def _run_sketch(a, args):
    """Run the chosen algorithm; returns ``(approx, omega_or_None, extra)``."""
    k, ell, q, seed = args.k, args.ell, args.q, args.seed
    if args.algo == "rsi":
        cfg = SketchConfig(k=k, ell=ell, q=q, seed=seed, delta=args.delta, reorth_period=args.reorth_period)
        cfg.check_shape(a.shape)
        t = a if a.shape[0] >= a.shape[1] else a.T
        omega = gaussian_matrix(t.shape[1], ell, seed)
        ap = subspace_iteration(t, omega, cfg)
        if t is not a:
            ap = replace(ap, transposed=True)
        return ap, omega, cfg, {}
    if args.algo == "basic":
        ap = basic_randomized(a, k, ell, seed)
        t = a if a.shape[0] >= a.shape[1] else a.T
        return ap, gaussian_matrix(t.shape[1], ell, seed), SketchConfig(k=k, ell=ell, q=0, seed=seed, delta=args.delta), {}
    if args.algo == "small-k":
        ell2 = args.ell2 if args.ell2 is not None else k
        ap = improved_small_k(a, k, ell, ell2, q, seed)
        return ap, None, SketchConfig(k=k, ell=ell2, q=q, seed=seed, delta=args.delta), {}
    cfg = AdaptiveConfig(k=k, q=q, tau=args.tau, delta=args.delta, b=args.b, c=args.c, cmax=args.cmax, seed=seed)
    wide = a.shape[0] < a.shape[1]
    res = adaptive_rsi(a.T if wide else a, cfg)
    ap = replace(res.approx, transposed=True) if wide else res.approx
    scfg = SketchConfig(k=k, ell=ap.ell, q=q, seed=seed, delta=args.delta)
    return ap, None, scfg, {"trace": res.trace.to_dict()}


def cmd_sketch(args):
    t0 = time.perf_counter()
    a = _read(args.input)
    ap, omega, cfg, extra = _run_sketch(a, args)
    resid = a - ap.to_dense()
    fro = float(np.sqrt(np.sum(resid * resid)))
    two = float(singular_values(resid)[0])
    results = {
        "sigma_hat": ap.sigma_hat,
        "matvec_count": ap.matvec_count,
        "ell": ap.ell,
        "errors": {"two": two, "fro": fro},
        "collapse_step": ap.collapse_step,
        **extra,
    }
    code = 0
    if args.audit:
        p_values = [cfg.p_split]
        oriented = a.T if ap.transposed else a
        rep = bound_audit(oriented if omega is not None else a, _unflip(ap) if omega is not None else ap, cfg,
                          omega=omega, p_values=p_values)
        results["audit"] = rep.to_dict()
        viol = rep.deterministic_violations
        results["deterministic_violations"] = [c.name for c in viol]
        if viol:
            code = 3
    if args.out:
        write_matrix(f"{args.out}.left.bin", ap.left)
        write_matrix(f"{args.out}.sigma.bin", ap.sigma_hat[None, :])
        write_matrix(f"{args.out}.right.bin", ap.right)
        results["factors"] = [f"{args.out}.{part}.bin" for part in ("left", "sigma", "right")]
    params = {"input": args.input, "algo": args.algo, "k": args.k, "ell": args.ell, "q": args.q,
              "seed": args.seed, "delta": args.delta}
    _emit(args, "sketch", params, results, t0=t0)
    return code


def _unflip(ap):
    # the audit works in the orientation the sketch actually ran in
    return replace(ap, transposed=False) if ap.transposed else ap


# ---------------------------------------------------------------------------
# bounds


def _load_spectrum(args):
    if args.spectrum:
        try:
            s = np.loadtxt(args.spectrum, delimiter=",", ndmin=1, dtype=np.float64).ravel()
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot read spectrum {args.spectrum}: {exc}") from exc
    elif args.gen:
        n = args.n
        if args.gen == "flat":
            s = np.ones(n)
        else:
            s = decay_spectrum(DecaySpec(args.gen, n, rate=args.rate, exponent=args.exponent))
    else:
        raise CliError("need --spectrum or --gen")
    n = s.size
    try:
        return bd.SpectrumView(s, args.m or n, n)
    except ValueError as exc:
        raise CliError(f"malformed spectrum: {exc}") from exc


def cmd_bounds(args):
    t0 = time.perf_counter()
    spec = _load_spectrum(args)
    k, ell, q, delta = args.k, args.ell, args.q, args.delta
    p = args.p if args.p is not None else min(ell - k, bd.oversampling_p(delta))
    results = {"p": p, "oversampling_p": bd.oversampling_p(delta), "optimum": vars(spec.optimum(k))}
    try:
        results["average"] = bd.average_bounds(spec, k, ell, p, q).to_dict()
        results["deviation"] = bd.deviation_bounds(spec, k, ell, p, q, delta).to_dict()
        if ell - k >= 4:
            results["hmt"] = bd.hmt_bound(spec, k, ell - k)
        if args.w is not None:
            results["deterministic"] = bd.deterministic_bounds(spec, k, ell, p, q, args.w, 1.0).to_dict()
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    params = {"k": k, "ell": ell, "p": p, "q": q, "delta": delta, "n": spec.n, "m": spec.m}
    _emit(args, "bounds", params, results, t0=t0)
    return 0


# ---------------------------------------------------------------------------
# estimate-norm


def cmd_estimate_norm(args):
    t0 = time.perf_counter()
    a = _read(args.input)
    results = {}
    if args.one:
        rnd = randomized_hager(a, args.ell, args.seed, args.hager_iters)
        plain = hager_one_norm(a)
        results["one"] = {"randomized": rnd.value, "plain": plain.value,
                          "randomized_matvecs": rnd.matvec_count, "plain_iterations": plain.iterations}
        if args.exact:
            true = float(np.abs(a).sum(axis=0).max())
            results["one"].update(true=true, randomized_ratio=rnd.value / true, plain_ratio=plain.value / true)
    if args.two:
        est = randomized_power_method(a, args.q, args.seed)
        results["two"] = {"estimate": est.norm_estimate, "matvec_count": est.matvec_count}
        if args.exact:
            true = float(singular_values(a)[0])
            results["two"].update(true=true, rel_error=abs(est.norm_estimate - true) / true)
    if args.cond:
        if a.shape[0] != a.shape[1]:
            raise CliError("condition estimation needs a square matrix")
        c = condition_estimate(a, lu_inverse_operator(a), args.ell, args.seed, args.q, args.hager_iters)
        results["cond"] = {"kappa1_est": c.kappa1_est, "kappa2_est": c.kappa2_est}
    if not results:
        raise CliError("choose at least one of --one, --two, --cond")
    params = {"input": args.input, "ell": args.ell, "q": args.q, "seed": args.seed, "hager_iters": args.hager_iters}
    _emit(args, "estimate-norm", params, results, t0=t0)
    return 0


# ---------------------------------------------------------------------------
# experiment

_EXPERIMENT_FLAGS = ("n", "mu", "seeds", "k", "rho", "ell", "trials", "seed", "tols", "qs", "delta", "q", "p", "triples")


def cmd_experiment(args):
    t0 = time.perf_counter()
    fn = ex.EXPERIMENTS[args.name]
    accepted = inspect.signature(fn).parameters
    kwargs = {}
    for flag in _EXPERIMENT_FLAGS:
        val = getattr(args, flag, None)
        if val is None:
            continue
        if flag not in accepted:
            raise CliError(f"experiment {args.name} does not take --{flag}")
        kwargs[flag] = tuple(val) if isinstance(val, list) else val
    out = fn(**kwargs)
    rows = out.pop("rows", None)
    header = out.pop("csv_header", None)
    if args.csv and rows is not None:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    _emit(args, f"experiment {args.name}", out["params"], out["runs"], out["aggregate"], t0=t0)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(prog="rsvd-lab", description=__doc__.split("\n\n")[0].strip())
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--report", help="write the JSON report here instead of stdout")
    common.add_argument("--no-timing", action="store_true", help="omit wall-clock times from the report")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a test matrix")
    g.add_argument("kind", choices=["identity", "diag", "log-gaussian", "discs", "adversarial", "decay",
                                    "identical-leading"])
    g.add_argument("--n", type=int, default=100)
    g.add_argument("--mu", type=float, default=1.0)
    g.add_argument("--rho", type=float, default=1e10)
    g.add_argument("--model", choices=["exponential", "power_law"], default="exponential")
    g.add_argument("--rate", type=float, default=0.5)
    g.add_argument("--exponent", type=float, default=2.0)
    g.add_argument("--k", type=int, default=5)
    g.add_argument("--values", type=float, nargs="+")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--format", choices=["csv", "bin"], help="default: by file suffix")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("sketch", parents=[common], help="low-rank approximation of a matrix file")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--algo", choices=["basic", "rsi", "small-k", "adaptive"], default="rsi")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--ell", type=int, help="sample count (ell1 for small-k); default k + 5")
    s.add_argument("--ell2", type=int, help="second-stage sample count for small-k (default k)")
    s.add_argument("--q", type=int, default=0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--delta", type=float, default=0.05)
    s.add_argument("--reorth-period", type=int, default=1)
    s.add_argument("--tau", type=float, default=1e-6)
    s.add_argument("--b", type=int, default=5)
    s.add_argument("--c", type=int, default=0)
    s.add_argument("--cmax", type=int, default=200)
    s.add_argument("--audit", action="store_true", help="check every bound against the exact SVD")
    s.add_argument("--out", help="prefix for the factor files")
    s.set_defaults(func=cmd_sketch)

    b = sub.add_parser("bounds", parents=[common], help="evaluate the error bounds for a spectrum")
    src = b.add_mutually_exclusive_group(required=True)
    src.add_argument("--spectrum", help="CSV file of singular values")
    src.add_argument("--gen", choices=["exponential", "power_law", "flat"])
    b.add_argument("--n", type=int, default=100)
    b.add_argument("--m", type=int)
    b.add_argument("--rate", type=float, default=0.5)
    b.add_argument("--exponent", type=float, default=2.0)
    b.add_argument("--k", type=int, required=True)
    b.add_argument("--ell", type=int, required=True)
    b.add_argument("--p", type=int)
    b.add_argument("--q", type=int, default=0)
    b.add_argument("--delta", type=float, default=0.05)
    b.add_argument("--w", type=float, help="start-block quality factor for the deterministic bounds")
    b.set_defaults(func=cmd_bounds)

    e = sub.add_parser("estimate-norm", parents=[common], help="1-norm, 2-norm or condition estimates")
    e.add_argument("--in", dest="input", required=True)
    e.add_argument("--one", action="store_true")
    e.add_argument("--two", action="store_true")
    e.add_argument("--cond", action="store_true")
    e.add_argument("--exact", action="store_true", help="also report exact norms and ratios")
    e.add_argument("--ell", type=int, default=5)
    e.add_argument("--q", type=int, default=4)
    e.add_argument("--hager-iters", type=int, default=2)
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_estimate_norm)

    x = sub.add_parser("experiment", parents=[common], help="run a desk-scale experiment")
    x.add_argument("name", choices=sorted(ex.EXPERIMENTS))
    x.add_argument("--n", type=int)
    x.add_argument("--mu", type=float)
    x.add_argument("--seeds", type=int)
    x.add_argument("--k", type=int)
    x.add_argument("--rho", type=float)
    x.add_argument("--ell", type=int)
    x.add_argument("--trials", type=int)
    x.add_argument("--triples", type=int)
    x.add_argument("--seed", type=int)
    x.add_argument("--delta", type=float)
    x.add_argument("--q", type=int)
    x.add_argument("--p", type=int)
    x.add_argument("--tols", type=float, nargs="+")
    x.add_argument("--qs", type=int, nargs="+")
    x.add_argument("--csv", help="write per-iteration rows here")
    x.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "command", None) == "sketch" and args.ell is None:
        args.ell = args.k + 5
    try:
        return args.func(args)
    except CliError as exc:
        print(f"rsvd-lab: error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"rsvd-lab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Command-line front end: ``subdrift <command> --config PATH [--workers N] [--out PATH] [--format json|csv]``.

Exit status is 0 when the run PASSes, 2 on FAIL or INCONCLUSIVE and 1 on
configuration or tool errors.
"""
import argparse
import datetime as dt
import hashlib
import logging
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import config as cf
from .domproc.experiments import (drift_sharpness, pathwise_experiment, prop42_experiment, y_tail_check,
                                  y_u_consistency)
from .domproc.process import DominatingProcess, alpha_beta
from .drift import (FAIL, INCONCLUSIVE, PASS, DoubleControl, OneStepGeometric, PhiSubgeometric, Subsampled,
                    nested_from_rate, verify_double_control, verify_nested_family, verify_onestep,
                    verify_subsampled, wnorm_difference_diagnostic)
from .errors import DomainError, SubdriftError
from .moments import accessible_set_experiment, bound_sweep, estimate_R_moment
from .planner import classify_tame, construct_tame_from_phi
from .report import build_report, write_outputs

log = logging.getLogger("subdrift")

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


class Context:
    def __init__(self, base_dir: Path, workers: int):
        self.base_dir = base_dir
        self.workers = workers
        self.inputs = {}

    def kernel(self, kcfg):
        if isinstance(kcfg, cf.FiniteCfg):
            path = cf.resolve(kcfg.matrix, self.base_dir)
            try:
                self.inputs[kcfg.matrix] = hashlib.sha256(path.read_bytes()).hexdigest()
            except OSError as exc:
                raise cf.ConfigError(f"kernel.matrix: cannot read {path}: {exc}") from None
        return cf.build_kernel(kcfg, self.base_dir)


def _state(x):
    if isinstance(x, tuple):
        return list(x)
    return x


def _raw_states(values) -> list:
    out = []
    for v in values:
        if isinstance(v, list):
            out.append(tuple(v))
        elif isinstance(v, float) and v.is_integer():
            out.append(int(v))
        else:
            out.append(v)
    return out


def _labelled(kernel, x):
    if isinstance(x, str):
        return cf.build_states([x], kernel)[0]
    return int(x)


# --------------------------------------------------------------------------
# commands; each returns (verdict, results, csv rows)


def cmd_verify_drift(cfg: cf.VerifyDriftConfig, ctx: Context):
    kernel = ctx.kernel(cfg.kernel)
    d = cfg.drift
    extra = {}
    if d.calibration:
        if not isinstance(cfg.kernel, cf.ZooKernelCfg):
            raise cf.ConfigError("drift.calibration: only zoo kernels ship a calibration")
        cal = cfg.kernel.calibration()
        extra["calibration"] = cal.to_dict()
        spec = cal.phi_spec() if d.variant == "phi-subgeometric" else cal.double_control_spec()
        V, C = cal.V, cal.C
    else:
        C = d.C.build()
        V = d.V.build() if d.V is not None else (d.W.build() if d.W is not None else None)
        if d.variant == "one-step-geometric":
            spec = OneStepGeometric(d.V.build(), d.beta, d.b, C)
        elif d.variant == "phi-subgeometric":
            spec = PhiSubgeometric(d.V.build(), d.phi.build(), d.b, C)
        elif d.variant == "double-control":
            spec = DoubleControl(d.V.build(), d.W.build(), d.b, C)
        elif d.variant == "subsampled":
            spec = Subsampled(d.W.build(), d.n.build(), d.beta, d.b, C)
        else:
            spec = nested_from_rate(d.R.build(), d.W.build(), d.n.build(), d.b, C)
    grid = cf.grid_states(cfg.grid, kernel, V, C)
    common = dict(mode=d.mode, replicates=d.replicates, mc_budget=d.mc_budget, master_seed=cfg.master_seed,
                  workers=ctx.workers, z=d.z)
    if d.variant in ("one-step-geometric", "phi-subgeometric"):
        cert = verify_onestep(kernel, spec, grid, **common)
    elif d.variant == "double-control":
        cert = verify_double_control(kernel, spec, grid, **common)
    elif d.variant == "subsampled":
        cert = verify_subsampled(kernel, spec, grid, step_budget=d.step_budget, **common)
    else:
        cert = verify_nested_family(kernel, spec, grid, d.k_range, **common)
    rows = []
    for i, x in enumerate(cert.grid):
        row = {"state": _state(x)}
        for track, m in cert.margins.items():
            row[f"margin[{track}]"] = m[i]
            row[f"se[{track}]"] = cert.std_errors[track][i]
        rows.append(row)
    return cert.verdict, {"certificate": cert.to_dict(), **extra}, rows


def _plan_rows(plan, states):
    rows = []
    for x in states:
        rows.append({"state": _state(x), "n": plan.n(x), "W": float(np.asarray(plan.W(x))),
                     "in_C": bool(x in plan.C) if plan.C is not None else None})
    return rows


def cmd_plan_subsample(cfg: cf.PlanSubsampleConfig, ctx: Context):
    plan = cfg.plan.build()
    results = {"plan": plan.to_dict(), "plan_config": cfg.plan.model_dump(exclude_none=True)}
    verdict = PASS
    if cfg.kernel is not None:
        kernel = ctx.kernel(cfg.kernel)
        states = cf.grid_states(cfg.grid, kernel, plan.W, plan.C)
    else:
        states = _raw_states(cfg.grid.values(plan.W, plan.C))
    rows = _plan_rows(plan, states)
    results["schedule"] = rows
    if cfg.verify is not None:
        if cfg.kernel is None:
            raise cf.ConfigError("verify: needs a kernel")
        v = cfg.verify
        spec = Subsampled(plan.W, plan.n_fn, plan.beta_prime, plan.b, plan.C)
        cert = verify_subsampled(kernel, spec, states, mode=v.mode, replicates=v.replicates, mc_budget=v.mc_budget,
                                 master_seed=cfg.master_seed, workers=ctx.workers, z=v.z, step_budget=v.step_budget)
        results["certificate"] = cert.to_dict()
        verdict = cert.verdict
        for row, m in zip(rows, cert.margins["W"] if "W" in cert.margins else next(iter(cert.margins.values()))):
            row["margin"] = m
    return verdict, results, rows


def cmd_classify_tame(cfg: cf.ClassifyTameConfig, ctx: Context):
    plan = cfg.plan.build()
    states = _raw_states(cfg.grid.values(plan.W, plan.C))
    v = classify_tame(plan, cfg.delta, states)
    rows = [{"state": _state(x), "n": plan.n(x), "W_pow_delta_minus_n": float(w)} for x, w in zip(states, v.witnesses)]
    return (PASS if v.is_tame else FAIL), {"plan": plan.to_dict(), "tameness": v.to_dict()}, rows


def cmd_construct_tame(cfg: cf.ConstructTameConfig, ctx: Context):
    V = cfg.V.build() if cfg.V is not None else None
    grid = None
    if cfg.grid is not None:
        grid = _raw_states(cfg.grid.values(V))
    plan, v = construct_tame_from_phi(cfg.alpha, V, grid, cfg.c0)
    rows = [{"state": _state(x), "n": plan.n(x), "W_pow_delta_minus_n": float(w)} for x, w in zip(v.grid, v.witnesses)]
    return (PASS if v.is_tame else FAIL), {"plan": plan.to_dict(), "tameness": v.to_dict()}, rows


def _x0(kernel, x0):
    if isinstance(kernel, DominatingProcess):
        if not isinstance(x0, list) or len(x0) != 2:
            raise cf.ConfigError("x0: dominating-process states are [z, m]")
        return (float(x0[0]), int(x0[1]))
    return cf.build_states([x0], kernel)[0]


def cmd_estimate_moment(cfg: cf.EstimateMomentConfig, ctx: Context):
    kernel = ctx.kernel(cfg.kernel)
    x0 = _x0(kernel, cfg.x0)
    est = estimate_R_moment(kernel, x0, cfg.C.build(), cfg.R.build(), cfg.replicates, cfg.cap, cfg.master_seed,
                            ctx.workers, cfg.kind)
    row = {"state": _state(x0), "truncated_mean": est.truncated.mean, "truncated_se": est.truncated.std_error,
           "lower_bound": est.lower_bound, "censored_fraction": est.censored_fraction, "cap": est.cap}
    return (INCONCLUSIVE if est.flagged else PASS), {"estimate": est.to_dict(), "x0": _state(x0)}, [row]


def cmd_bound_sweep(cfg: cf.BoundSweepConfig, ctx: Context):
    kernel = ctx.kernel(cfg.kernel)
    plan = cfg.plan.build()
    R = cfg.R.build()
    grid = cf.grid_states(cfg.grid, kernel, plan.W, plan.C)
    adm = cf.grid_states(cfg.admissibility_grid, kernel, plan.W, plan.C) if cfg.admissibility_grid else None
    args = dict(cap=cfg.cap, master_seed=cfg.master_seed, workers=ctx.workers, tol=cfg.tol, case=cfg.case,
                admissibility_grid=adm)
    if cfg.accessible is not None:
        rep = accessible_set_experiment(kernel, plan, R, cfg.accessible.build(), grid, cfg.replicates, **args)
    else:
        rep = bound_sweep(kernel, plan, R, grid, cfg.replicates, **args)
    return rep.verdict, {"plan": plan.to_dict(), "R": R.to_dict(), "report": rep.to_dict()}, rep.table()


def _alpha_beta_table(betas):
    rows, finite = [], []
    for b in betas:
        try:
            a = alpha_beta(b)
            rows.append({"beta": b, "alpha_beta": a, "error": None})
            finite.append((b, a))
        except DomainError as exc:
            rows.append({"beta": b, "alpha_beta": None, "error": str(exc)})
    finite.sort()
    monotone = all(a1 > a2 for (_, a1), (_, a2) in zip(finite, finite[1:]))
    return rows, monotone


def cmd_domproc_experiment(cfg: cf.DomprocExperimentConfig, ctx: Context):
    e = cfg.experiment
    seed = cfg.master_seed
    params = cfg.kernel.params() if e.name != "alpha-beta" else None
    if e.name == "alpha-beta":
        rows, monotone = _alpha_beta_table(e.betas)
        return (PASS if monotone else FAIL), {"experiment": e.name, "rows": rows, "monotone_decreasing": monotone}, rows
    if e.name == "moment-scaling":
        rep = prop42_experiment(e.case, params, e.alpha, e.eta, e.z, e.replicates, e.cap, seed, ctx.workers, e.tol,
                                e.slope_tol)
        return rep.verdict, {"experiment": e.name, "report": rep.to_dict()}, rep.table()
    if e.name == "drift-sharpness":
        r = drift_sharpness(params, e.alpha, e.z, e.replicates, seed, ctx.workers, e.n_sigma)
        rows = [{"z": z, "estimate": m, "std_error": s, "target": t, "quadrature": q, "zscore": zz}
                for z, m, s, t, q, zz in zip(r.z, r.estimates, r.std_errors, r.targets, r.quadrature, r.zscores)]
        return r.verdict, {"experiment": e.name, **r.to_dict()}, rows
    if e.name == "y-tail":
        r = y_tail_check(params, e.u, e.samples, seed, e.points, e.span, ctx.workers, e.n_sigma)
        rows = [{"u": row["u"], "v": v, "expected": p, "empirical": q, "zscore": z}
                for row in r["rows"] for v, p, q, z in zip(row["v"], row["expected"], row["empirical"], row["zscores"])]
        return r["verdict"], {"experiment": e.name, **r}, rows
    if e.name == "y-u-consistency":
        r = y_u_consistency(params, e.y0, e.horizon, e.samples, seed, e.level)
        return r["verdict"], {"experiment": e.name, **r}, [r]
    r = pathwise_experiment(params, e.alpha, e.w_coef, e.R.model_dump(exclude_none=True), e.z0, e.replicates, seed,
                            ctx.workers)
    return r["verdict"], {"experiment": e.name, **r}, [r]


def cmd_wnorm(cfg: cf.WNormConfig, ctx: Context):
    kernel = ctx.kernel(cfg.kernel)
    results = {}
    verdicts = []
    if cfg.calibration:
        if not isinstance(cfg.kernel, cf.ZooKernelCfg):
            raise cf.ConfigError("calibration: only zoo kernels ship a calibration")
        cal = cfg.kernel.calibration()
        V, W, b, C = cal.V, cal.W(), cal.b, cal.C
        results["calibration"] = cal.to_dict()
    else:
        V, W = cfg.V.build(), cfg.W.build()
        b, C = cfg.b, cfg.C.build() if cfg.C is not None else None
    P = kernel.P if hasattr(kernel, "P") else kernel.to_matrix()
    size = P.shape[0]
    if b is not None and C is not None:
        cert = verify_double_control(kernel, DoubleControl(V, W, b, C), list(range(size)), mode="exact")
        results["double_control"] = cert.to_dict()
        verdicts.append(cert.verdict)
    if cfg.pairs is None:
        pairs = [(0, j) for j in range(1, size)]
    else:
        pairs = [(_labelled(kernel, a), _labelled(kernel, c)) for a, c in cfg.pairs]
    x0 = 0 if cfg.x0 is None else _labelled(kernel, cfg.x0)
    diag = wnorm_difference_diagnostic(kernel, W, V, cfg.n_max, pairs, x0)
    results["diagnostic"] = diag.to_dict(cfg.stride)
    verdicts.append(diag.verdict)
    verdict = FAIL if FAIL in verdicts else (INCONCLUSIVE if INCONCLUSIVE in verdicts else PASS)
    rows = [{"x": a, "x_prime": c, "first_half_max": f, "last_half_max": l}
            for (a, c), f, l in zip(diag.pairs, diag.first_half_max, diag.last_half_max)]
    return verdict, results, rows


COMMANDS = {
    "verify-drift": cmd_verify_drift,
    "plan-subsample": cmd_plan_subsample,
    "classify-tame": cmd_classify_tame,
    "construct-tame": cmd_construct_tame,
    "estimate-moment": cmd_estimate_moment,
    "bound-sweep": cmd_bound_sweep,
    "domproc-experiment": cmd_domproc_experiment,
    "wnorm-diagnostic": cmd_wnorm,
}

HELP = {
    "verify-drift": "check a drift inequality on a grid of states",
    "plan-subsample": "build a subsampling schedule (optionally verify it)",
    "classify-tame": "test a plan for tameness",
    "construct-tame": "build a tame plan from a polynomial drift exponent",
    "estimate-moment": "Monte Carlo E_x[R(tau_C)] with censoring",
    "bound-sweep": "moment estimates scaled by W + b 1_C across a grid",
    "domproc-experiment": "experiments on the dominating process",
    "wnorm-diagnostic": "finite-state W-norm coupling diagnostic",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="subdrift", description="Drift certification and subsampling experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name, help=HELP[name])
        s.add_argument("--config", required=True, type=Path, help="YAML config (or a previous JSON report)")
        s.add_argument("--workers", type=int, default=1, help="worker threads; results do not depend on it")
        s.add_argument("--out", help="output path (default: config 'out', else stdout)")
        s.add_argument("--format", choices=("json", "csv"), default="json")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def _base_dir(path: Path) -> Path:
    """Directory that relative input paths resolve against (the original one when re-running a report)."""
    try:
        doc = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError):
        doc = None
    if isinstance(doc, dict) and "results" in doc and isinstance(doc.get("runtime"), dict):
        recorded = doc["runtime"].get("config_dir")
        if recorded:
            return Path(recorded)
    return path.resolve().parent


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        print("error: --workers must be >= 1", file=stderr)
        return EXIT_ERROR
    try:
        cfg, doc = cf.load_config(args.config, args.command)
    except cf.ConfigError as exc:
        print(f"config error in {args.config}:\n{exc}", file=stderr)
        return EXIT_ERROR
    base = _base_dir(args.config)
    ctx = Context(base, args.workers)
    out = args.out or cfg.out
    started = dt.datetime.now(dt.timezone.utc)
    t0 = time.perf_counter()
    error = None
    try:
        verdict, results, rows = COMMANDS[args.command](cfg, ctx)
    except (SubdriftError, ValueError, cf.ConfigError) as exc:
        kind = type(exc).__name__
        error = {"type": kind, "message": str(exc)}
        verdict, results, rows = ("OUT_OF_SCOPE" if kind == "ScopeError" else "ERROR"), {}, []
        print(f"error: {kind}: {exc}", file=stderr)
    wall = time.perf_counter() - t0
    report = build_report(args.command, doc, verdict, results, inputs=ctx.inputs, started=started,
                          wall_seconds=wall, workers=args.workers, config_dir=str(base), error=error)
    try:
        written = write_outputs(report, rows, out, args.format, stdout)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=stderr)
        return EXIT_ERROR
    for p in written:
        log.info("wrote %s", p)
    print(f"{args.command}: {verdict} ({wall:.2f} s)", file=stderr)
    if error is not None:
        return EXIT_ERROR
    return EXIT_PASS if verdict == PASS else EXIT_FAIL


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()

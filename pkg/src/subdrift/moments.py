"""Modulated return-time moments ``E_x[R(tau_C)]`` and their scaling against ``W``."""
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .chain.engine import Estimate, map_batches, map_replicates, summarize
from .chain.sets import SetPredicate
from .chain.simulate import stopping_time
from .errors import ContractError, ScopeError
from .rates import RateFn, check_case_i, check_case_ii
from .rng import RngStream, stream_key

CENSOR_FLAG = 0.05
MAX_CAP = 10_000_000
LOG_R_CEILING = math.log(1e300)
DEFAULT_TOL = 0.2


def default_cap(R: RateFn) -> int:
    """``min(10**7, R^{-1}(1e300))`` so that ``R(cap)`` stays representable."""
    t = float(R.inverse_log(LOG_R_CEILING))
    return int(max(1, min(MAX_CAP, math.floor(t) if math.isfinite(t) else MAX_CAP)))


@dataclass(frozen=True)
class MomentEstimate:
    """Truncated mean of ``R(tau)`` over uncensored paths and the censor-inflated lower bound.

    ``lower_bound = (1 - f) * truncated.mean + f * R(cap)`` with ``f`` the
    censored fraction; it is a lower bound for ``E[R(tau)]`` (up to Monte Carlo
    error) because a censored path has ``tau > cap``.
    """

    truncated: Estimate
    lower_bound: float
    lower_bound_se: float
    censored_fraction: float
    cap: int
    flagged: bool
    warnings: tuple = ()

    def to_dict(self) -> dict:
        return {"truncated": self.truncated.to_dict(), "lower_bound": self.lower_bound,
                "lower_bound_se": self.lower_bound_se, "censored_fraction": self.censored_fraction,
                "cap": self.cap, "flagged": self.flagged, "warnings": list(self.warnings)}


def stopping_times(kernel, x0, target: SetPredicate, kind: str, cap: int, replicates: int,
                   master_seed: int, workers: int = 1) -> np.ndarray:
    """Stopping times (-1 = censored) from the kernel's batched path or the generic simulator."""
    if kernel.hitting_batch(x0, target, kind, 1, np.zeros(1, dtype=np.uint64)) is not None:
        return map_batches(lambda keys: kernel.hitting_batch(x0, target, kind, cap, keys),
                           replicates, master_seed, workers).astype(np.int64)

    def one(rng):
        rec = stopping_time(kernel, x0, target, kind, cap, rng)
        return -1 if rec.censored else rec.value

    return np.asarray(map_replicates(one, replicates, master_seed, workers), dtype=np.int64)


def moment_from_times(times, R: RateFn, cap: int) -> MomentEstimate:
    times = np.asarray(times)
    if times.size < 2:
        raise ContractError("need at least two replicates")
    ok = times >= 0
    frac = float(1.0 - ok.mean())
    vals = np.asarray(R(times[ok].astype(float)), dtype=float) if ok.any() else np.empty(0)
    trunc = summarize(vals, int((~ok).sum()))
    r_cap = float(R(float(cap)))
    full = np.where(ok, 0.0, r_cap)
    full[ok] = vals
    lb = summarize(full)
    notes = []
    flagged = frac > CENSOR_FLAG
    if flagged:
        notes.append(f"censored fraction {frac:.3g} exceeds {CENSOR_FLAG}")
    if R.family == "geometric" and trunc.replicates and math.isfinite(trunc.mean) and trunc.mean > 0:
        if trunc.std_error / trunc.mean > 0.25:
            notes.append("geometric moment has a large relative standard error; the rate may sit close to "
                         "the boundary of integrability")
    return MomentEstimate(trunc, lb.mean, lb.std_error, frac, int(cap), flagged, tuple(notes))


def estimate_R_moment(kernel, x0, C: SetPredicate, R: RateFn, replicates: int, cap: int | None = None,
                      master_seed: int = 0, workers: int = 1, kind: str = "return") -> MomentEstimate:
    """Monte Carlo ``E_{x0}[R(tau_C)]`` with explicit censoring at ``cap``."""
    cap = default_cap(R) if cap is None else int(cap)
    if cap < 1:
        raise ContractError("cap must be >= 1")
    if float(R.log_R(float(cap))) > LOG_R_CEILING:
        raise ContractError(f"R(cap) overflows for cap={cap}; use a cap <= {default_cap(R)}")
    times = stopping_times(kernel, x0, C, kind, cap, replicates, master_seed, workers)
    est = moment_from_times(times, R, cap)
    for msg in est.warnings:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return est


# --------------------------------------------------------------------------
# bound sweeps


@dataclass
class MomentReport:
    """Per-state moment estimates scaled by ``W + b 1_C``."""

    grid: list
    estimates: list
    bound_ratio: np.ndarray
    sizes: np.ndarray
    slope: float
    inner_max: float
    outer_max: float
    verdict: str
    tol: float
    admissibility: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    @property
    def constant_estimate(self) -> float:
        """Empirical stand-in for the existential constant: max ratio over the inner half."""
        return self.inner_max

    @property
    def censored_fraction(self) -> list:
        return [e.censored_fraction for e in self.estimates]

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "tol": self.tol,
                "grid": [_plain(x) for x in self.grid],
                "censored_fraction": self.censored_fraction,
                "estimates": [e.to_dict() for e in self.estimates],
                "bound_ratio": [float(v) for v in self.bound_ratio],
                "sizes": [float(s) for s in self.sizes],
                "slope": self.slope, "inner_max": self.inner_max, "outer_max": self.outer_max,
                "admissibility": self.admissibility, "notes": self.notes}

    def table(self) -> list:
        """Rows for CSV output."""
        return [{"state": _plain(x), "size": float(s), "truncated_mean": e.truncated.mean,
                 "truncated_se": e.truncated.std_error, "lower_bound": e.lower_bound,
                 "censored_fraction": e.censored_fraction, "bound_ratio": float(r)}
                for x, s, e, r in zip(self.grid, self.sizes, self.estimates, self.bound_ratio)]


def _plain(x):
    if isinstance(x, (tuple, list, np.ndarray)):
        return [_plain(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def state_size(x) -> float:
    """Size coordinate for scaling fits: ``z`` for ``(z, m)`` states, ``x + 1`` on the lattice."""
    if isinstance(x, (tuple, list)):
        return float(x[0])
    return float(x) + 1.0


def loglog_slope(sizes, values) -> float:
    s = np.log(np.asarray(sizes, dtype=float))
    v = np.asarray(values, dtype=float)
    good = np.isfinite(v) & (v > 0)
    if good.sum() < 2 or np.ptp(s[good]) == 0:
        return math.nan
    return float(np.polyfit(s[good], np.log(v[good]), 1)[0])


def stabilization_verdict(ratios, tol: float) -> tuple[str, float, float]:
    """PASS when the outer-half max ratio is at most ``(1 + tol)`` times the inner-half max."""
    r = np.asarray(ratios, dtype=float)
    if r.size < 2:
        raise ContractError("need at least two grid states")
    half = r.size // 2
    inner, outer = float(np.max(r[:half])), float(np.max(r[half:]))
    if not (math.isfinite(inner) and math.isfinite(outer)):
        return "FAIL", inner, outer
    return ("PASS" if outer <= inner * (1.0 + tol) else "FAIL"), inner, outer


def check_admissibility(R: RateFn, plan, grid, case: str = "auto") -> dict:
    """Run the case (i) and/or (ii) checks for ``(R, plan.n_fn, plan.W, plan.beta_prime)``."""
    out = {}
    if case in ("auto", "i"):
        out["i"] = check_case_i(R, plan.n_fn, plan.W, grid)
    if case in ("auto", "ii") and R.differentiable:
        out["ii"] = check_case_ii(R, plan.n_fn, plan.W, plan.beta_prime, grid)
    if case not in ("auto", "i", "ii"):
        raise ContractError(f"case must be 'auto', 'i' or 'ii', got {case!r}")
    return out


def _sweep(kernel, plan, R, target, x_grid, replicates, cap, master_seed, workers, tol, case, size_fn,
           admissibility_grid=None):
    x_grid = list(x_grid)
    if len(x_grid) < 2:
        raise ContractError("need at least two grid states")
    checks = check_admissibility(R, plan, admissibility_grid if admissibility_grid is not None else x_grid, case)
    passed = [k for k, rep in checks.items() if rep.passed]
    if not passed:
        detail = {k: {"violations": len(rep.violations), "shape": rep.shape} for k, rep in checks.items()}
        raise ScopeError(f"(R, n, W, beta) passes neither admissibility case on the grid: {detail}")
    cap = default_cap(R) if cap is None else int(cap)
    b = plan.b or 0.0
    estimates, ratios = [], []
    for i, x in enumerate(x_grid):
        times = stopping_times(kernel, x, target, "return", cap, replicates, stream_key(master_seed, i), workers)
        est = moment_from_times(times, R, cap)
        estimates.append(est)
        in_c = plan.C is not None and x in plan.C
        denom = float(plan.W(x)) + (b if in_c else 0.0)
        ratios.append(est.lower_bound / denom)
    sizes = np.array([size_fn(x) for x in x_grid])
    verdict, inner, outer = stabilization_verdict(ratios, tol)
    slope = loglog_slope(sizes, [e.lower_bound for e in estimates])
    notes = {"cap": cap, "replicates": replicates, "admissible_cases": passed,
             "flagged_states": [_plain(x) for x, e in zip(x_grid, estimates) if e.flagged]}
    return MomentReport(x_grid, estimates, np.asarray(ratios), sizes, slope, inner, outer, verdict, tol,
                        {k: rep.to_dict() for k, rep in checks.items()}, notes)


def bound_sweep(kernel, plan, R: RateFn, x_grid, replicates: int, cap: int | None = None, master_seed: int = 0,
                workers: int = 1, tol: float = DEFAULT_TOL, case: str = "auto", size_fn=state_size,
                admissibility_grid=None) -> MomentReport:
    """Estimate ``E_x[R(tau_C)] / (W(x) + b 1_C(x))`` over ``x_grid`` (sorted by size).

    Refuses to run unless ``(R, n, W, beta')`` passes one of the admissibility
    checks (on ``admissibility_grid``, default ``x_grid``).
    """
    if plan.C is None:
        raise ContractError("the plan has no small set")
    return _sweep(kernel, plan, R, plan.C, x_grid, replicates, cap, master_seed, workers, tol, case, size_fn,
                  admissibility_grid)


def accessible_set_experiment(kernel, plan, R: RateFn, D: SetPredicate, x_grid, replicates: int,
                              cap: int | None = None, master_seed: int = 0, workers: int = 1,
                              tol: float = DEFAULT_TOL, case: str = "auto", size_fn=state_size,
                              admissibility_grid=None) -> MomentReport:
    """As :func:`bound_sweep` with the return time to an accessible set ``D`` (subgeometric ``R`` only)."""
    if not R.subgeometric:
        raise ScopeError(f"{R.family} rate is not subgeometric; the accessible-set bound needs a subgeometric R")
    return _sweep(kernel, plan, R, D, x_grid, replicates, cap, master_seed, workers, tol, case, size_fn,
                  admissibility_grid)


# --------------------------------------------------------------------------
# pathwise subadditivity chain


@dataclass(frozen=True)
class PathwiseRecord:
    tau_C: int
    tau_bar: int
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1.0 + 1e-12)


def pathwise_case_i(kernel, x0, n_fn, W, R: RateFn, C: SetPredicate, rng: RngStream,
                    max_epochs: int = 1_000_000) -> PathwiseRecord | None:
    """One path: ``R(tau_C)`` against ``sum_{k < bar tau_C} W(Phi_{tau^k})``.

    ``tau_C`` is the one-step return time and ``bar tau_C`` the first epoch
    ``k >= 1`` whose start ``Phi_{tau^k}`` is in ``C``.  Returns ``None`` if
    ``bar tau_C`` exceeds ``max_epochs``.
    """
    x = x0
    t = 0
    tau_c = None
    acc = 0.0
    for k in range(1, max_epochs + 1):
        acc += float(W(x))
        for _ in range(int(n_fn(x))):
            x = kernel.sample(x, rng)
            t += 1
            if tau_c is None and x in C:
                tau_c = t
        if x in C:
            return PathwiseRecord(tau_c, k, float(R(float(tau_c))), acc)
    return None


def pathwise_check(kernel, x0, n_fn, W, R: RateFn, C: SetPredicate, replicates: int, master_seed: int,
                   workers: int = 1, max_epochs: int = 1_000_000) -> dict:
    recs = map_replicates(lambda rng: pathwise_case_i(kernel, x0, n_fn, W, R, C, rng, max_epochs),
                          replicates, master_seed, workers)
    done = [r for r in recs if r is not None]
    bad = [r for r in done if not r.holds]
    return {"paths": len(recs), "completed": len(done), "violations": len(bad),
            "max_lhs_over_rhs": max((r.lhs / r.rhs for r in done), default=math.nan)}

"""Subsampling plans, scale functions from return-time moments, and tameness."""
import math
from dataclasses import dataclass, field

import numpy as np

from .chain.engine import map_batches, map_replicates, summarize
from .chain.sets import LevelSet, SetPredicate
from .chain.simulate import stopping_time
from .errors import ContractError, ScopeError
from .rates import RateSeq, catalog_pair_from_phi, gen_inverse, safe_ceil
from .rng import stream_key
from .scales import Scale

CENSOR_LIMIT = 0.01


# --------------------------------------------------------------------------
# plans


@dataclass
class SubsamplePlan:
    """Subsampling schedule ``n``, scale ``W`` and the drift constants they come with.

    The plan claims ``P^{n(x)} W <= beta_prime W + b 1_C`` with ``beta < beta_prime``;
    for rate-derived plans ``C = {W <= b / (beta_prime - beta)}``.
    """

    n_fn: object
    W: Scale
    beta: float
    beta_prime: float
    b: float | None
    C: SetPredicate | None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.beta < self.beta_prime < 1.0:
            raise ContractError(f"need 0 < beta < beta_prime < 1, got {self.beta!r}, {self.beta_prime!r}")
        if self.b is not None and not (math.isfinite(self.b) and self.b >= 0):
            raise ContractError(f"b must be finite and >= 0, got {self.b!r}")

    def n(self, x) -> int:
        return int(self.n_fn(x))

    def to_dict(self) -> dict:
        return {"beta": self.beta, "beta_prime": self.beta_prime, "b": self.b,
                "W": self.W.spec, "C": self.C.to_dict() if self.C is not None else None,
                "provenance": self.provenance}


def _small_set(W: Scale, b: float, beta: float, beta_prime: float) -> LevelSet:
    return LevelSet(W, b / (beta_prime - beta))


def plan_from_rate(r: RateSeq, V: Scale, W: Scale, C_const: float, beta: float, beta_prime: float,
                   b: float) -> SubsamplePlan:
    """``n(x) = r^{-1}((C_const / beta) V(x) / W(x))`` (floored at 1) and ``C = {W <= b/(beta'-beta)}``."""
    if not C_const > 0:
        raise ContractError(f"C_const must be positive, got {C_const!r}")
    if not 0.0 < beta < beta_prime < 1.0:
        raise ContractError(f"need 0 < beta < beta_prime < 1, got {beta!r}, {beta_prime!r}")
    scale = C_const / beta

    def n_fn(x):
        lv, lw = float(V.log(x)), float(W.log(x))
        if lv < -1e-12 or lw < -1e-12:
            raise ContractError(f"scale functions must be >= 1, got V={math.exp(lv)!r}, W={math.exp(lw)!r} at {x!r}")
        target = scale * math.exp(lv - lw)
        # absorb relative rounding of the ratio so exact integer targets are not pushed up
        target *= 1.0 - 1e-12
        return max(1, gen_inverse(r, target))

    return SubsamplePlan(n_fn, W, beta, beta_prime, b, _small_set(W, b, beta, beta_prime),
                         {"kind": "rate", "r": _rate_desc(r), "V": V.spec, "C_const": C_const})


def _rate_desc(r):
    try:
        return r.to_dict()
    except ContractError:
        return {"family": "custom"}


def plan_from_catalog(phi_family: str, V: Scale, alpha: float, c_prime: float, beta: float,
                      beta_prime: float, b: float) -> SubsamplePlan:
    """Plan from a catalog ``(n, W)`` pair attached to ``phi`` (log-power, poly or near-linear)."""
    pair = catalog_pair_from_phi(phi_family, V, alpha, c_prime)
    W = pair.W
    W.spec = {"catalog": phi_family, "alpha": alpha, "V": V.spec}
    return SubsamplePlan(pair.n_fn, W, beta, beta_prime, b, _small_set(W, b, beta, beta_prime),
                         {"kind": "catalog", "phi": phi_family, "alpha": alpha, "c_prime": c_prime,
                          "V": V.spec})


# --------------------------------------------------------------------------
# scale functions from return-time moments


class TabulatedScale(Scale):
    """Scale known on a sorted grid of scalar states, interpolated linearly in ``log``.

    Queries outside ``[grid[0], grid[-1]]`` raise :class:`ContractError`.
    """

    def __init__(self, grid, values, std_errors=None, name="tabulated"):
        xs = np.asarray(grid, dtype=float)
        vals = np.asarray(values, dtype=float)
        order = np.argsort(xs)
        self.xs, self.values = xs[order], vals[order]
        self.std_errors = None if std_errors is None else np.asarray(std_errors, dtype=float)[order]
        logs = np.log(self.values)
        lo, hi = self.xs[0], self.xs[-1]

        def log_fn(x):
            x = np.asarray(x, dtype=float)
            if np.any((x < lo) | (x > hi)):
                raise ContractError(f"tabulated scale queried outside its grid [{lo:g}, {hi:g}]")
            return np.interp(x, self.xs, logs)

        super().__init__(log_fn=log_fn, name=name,
                         spec={"family": "tabulated", "grid": self.xs.tolist(), "values": self.values.tolist()})


@dataclass
class MomentScales:
    V: TabulatedScale
    W: TabulatedScale
    censored_fraction: list
    unreliable: list
    replicates: int

    def to_dict(self) -> dict:
        return {"grid": self.V.xs.tolist(), "V": self.V.values.tolist(), "V_se": self.V.std_errors.tolist(),
                "W": self.W.values.tolist(), "W_se": self.W.std_errors.tolist(),
                "censored_fraction": self.censored_fraction, "unreliable": self.unreliable,
                "replicates": self.replicates}


def _hitting_times(kernel, x, C, kind, cap, replicates, seed, workers):
    probe = kernel.hitting_batch(x, C, kind, cap, np.zeros(1, dtype=np.uint64))
    if probe is not None:
        return map_batches(lambda keys: kernel.hitting_batch(x, C, kind, cap, keys), replicates, seed, workers)

    def one(rng):
        rec = stopping_time(kernel, x, C, kind, cap, rng)
        return -1 if rec.censored else rec.value

    return np.asarray(map_replicates(one, replicates, seed, workers), dtype=np.int64)


def scales_from_return_moments(kernel, C: SetPredicate, r: RateSeq, grid, mc_budget: int = 10_000,
                               master_seed: int = 0, cap: int = 1_000_000, workers: int = 1) -> MomentScales:
    """Monte Carlo ``V(x) = E_x[sum_{k=0}^{sigma_C} r(k)]`` and ``W(x) = E_x[r(sigma_C)]`` on ``grid``.

    ``sigma_C`` is the hitting time (zero on ``C``).  Censored paths are dropped
    from the means and counted; a state with more than 1% censoring is listed
    as unreliable.
    """
    grid = sorted(grid)
    if mc_budget < 2:
        raise ContractError("mc_budget must be >= 2")
    ks = np.arange(cap + 1, dtype=float)
    r_vals = np.asarray(r(ks), dtype=float)
    r_cum = np.cumsum(r_vals)
    v_mean, v_se, w_mean, w_se, cens, bad = [], [], [], [], [], []
    for i, x in enumerate(grid):
        t = _hitting_times(kernel, x, C, "hitting", cap, mc_budget, stream_key(master_seed, i), workers)
        ok = t >= 0
        frac = float(1.0 - ok.mean())
        ev = summarize(r_cum[t[ok]])
        ew = summarize(r_vals[t[ok]])
        v_mean.append(ev.mean)
        v_se.append(ev.std_error)
        w_mean.append(ew.mean)
        w_se.append(ew.std_error)
        cens.append(frac)
        if frac > CENSOR_LIMIT:
            bad.append(x)
    return MomentScales(TabulatedScale(grid, v_mean, v_se, "V_hat"), TabulatedScale(grid, w_mean, w_se, "W_hat"),
                        cens, bad, mc_budget)


def _killed(kernel, C: SetPredicate):
    P = kernel.P if hasattr(kernel, "P") else kernel.to_matrix()
    in_c = C.mask(np.arange(P.shape[0]))
    return P, in_c


def expected_sum_to_hit(kernel, C: SetPredicate, f) -> np.ndarray:
    """``F(x) = E_x[sum_{k=0}^{sigma_C} f(Phi_k)]`` on a finite kernel by a linear solve."""
    P, in_c = _killed(kernel, C)
    fv = np.asarray(f(np.arange(P.shape[0])), dtype=float)
    out = fv.copy()
    off = ~in_c
    if off.any():
        Q = P[np.ix_(off, off)]
        rhs = fv[off] + P[np.ix_(off, in_c)] @ fv[in_c]
        out[off] = np.linalg.solve(np.eye(Q.shape[0]) - Q, rhs)
    return out


def exact_return_moment_scales(kernel, C: SetPredicate, r: RateSeq, tail_tol: float = 1e-15,
                               max_terms: int = 10_000_000) -> tuple[np.ndarray, np.ndarray]:
    """Exact ``(V, W)`` of the return-moment construction on a finite kernel.

    Sums ``V = sum_k r(k) P(sigma_C >= k)`` and ``W = sum_k r(k) P(sigma_C = k)``
    using the sub-stochastic kernel killed on ``C``, until the survival mass
    times the current rate drops below ``tail_tol``.
    """
    P, in_c = _killed(kernel, C)
    if not in_c.any():
        raise ContractError("C is empty on this kernel")
    Q = P.copy()
    Q[:, in_c] = 0.0
    Q[in_c, :] = 0.0
    size = P.shape[0]
    surv = (~in_c).astype(float)  # P_x(sigma_C > k), k = 0
    V = np.full(size, float(r(0)))
    W = np.where(in_c, float(r(0)), 0.0)
    for k in range(1, max_terms):
        rk = float(r(k))
        nxt = Q @ surv
        V += rk * surv
        W += rk * (surv - nxt)
        surv = nxt
        if surv.max() * max(rk, 1.0) * k < tail_tol:
            return V, W
    raise ContractError("return-moment series did not converge")


def exact_quadratic_rate_scales(kernel, C: SetPredicate) -> tuple[np.ndarray, np.ndarray]:
    """``(V, W)`` for ``r(k) = k + 1`` from the first two moments of ``sigma_C``.

    ``m1 = E sigma``, ``m2 = E sigma^2`` solve ``m1 = 1 + Q m1`` and
    ``m2 = 1 + 2 Q m1 + Q m2`` off ``C``; then
    ``V = E[(sigma+1)(sigma+2)/2]`` and ``W = E[sigma] + 1``.
    """
    P, in_c = _killed(kernel, C)
    off = ~in_c
    size = P.shape[0]
    m1, m2 = np.zeros(size), np.zeros(size)
    if off.any():
        Q = P[np.ix_(off, off)]
        A = np.eye(Q.shape[0]) - Q
        one = np.ones(Q.shape[0])
        m1[off] = np.linalg.solve(A, one)
        m2[off] = np.linalg.solve(A, one + 2.0 * Q @ m1[off])
    return (m2 + 3.0 * m1 + 2.0) / 2.0, m1 + 1.0


# --------------------------------------------------------------------------
# tameness


@dataclass
class TameVerdict:
    is_tame: bool
    delta: float
    beta: float
    grid: list
    witnesses: np.ndarray
    condition2_margin: float
    violations: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"is_tame": self.is_tame, "delta": self.delta, "beta": self.beta,
                "condition2_margin": self.condition2_margin,
                "grid": [float(x) if not isinstance(x, tuple) else list(x) for x in self.grid],
                "witnesses": [float(w) for w in self.witnesses],
                "violations": [float(x) if not isinstance(x, tuple) else list(x) for x in self.violations]}


def tame_condition2_margin(delta: float, beta: float) -> float:
    """``ln(1 - delta) / delta - ln(beta)``; positive when condition (ii) holds."""
    return math.log1p(-delta) / delta - math.log(beta)


def classify_tame(plan: SubsamplePlan, delta: float, grid) -> TameVerdict:
    """Check ``n <= W**delta`` on ``grid`` and ``ln beta < ln(1-delta)/delta`` for the plan's drift constant."""
    if not 0.0 < delta < 1.0:
        raise ContractError(f"delta must lie in (0, 1), got {delta!r}")
    grid = list(grid)
    n = np.array([float(plan.n_fn(x)) for x in grid])
    wd = np.exp(delta * np.array([float(plan.W.log(x)) for x in grid]))
    margins = wd - n
    ok = margins >= -1e-9 * np.maximum(1.0, wd)
    cond2 = tame_condition2_margin(delta, plan.beta_prime)
    violations = [x for x, good in zip(grid, ok) if not good]
    return TameVerdict(bool(ok.all() and cond2 > 0), delta, plan.beta_prime, grid, margins, cond2, violations)


def identity_scale() -> Scale:
    """``V(v) = v`` on states that are themselves scale values ``v >= 1``."""
    return Scale(log_fn=lambda v: np.log(np.asarray(v, dtype=float)), name="v", spec={"family": "identity"})


def construct_tame_from_phi(alpha: float, V: Scale | None = None, grid=None, c0: float = 1.0):
    """Tame plan for a chain with ``PV <= V - c V**(1-alpha) + b 1_C`` and ``alpha < 1/2``.

    ``delta`` is the midpoint of ``(alpha/(1-alpha), 1)``, the drift constant is
    half its bound ``(1-delta)**(1/delta)``, ``n = ceil(c_beta V**alpha)`` with
    ``c_beta = c0 / beta`` and ``W = c_W V**(1-alpha)``.  The factor
    ``c_W = (c_beta + 1)**(1/delta)`` makes ``n <= W**delta`` hold on all of
    ``{V >= 1}``; scaling ``W`` by a constant leaves the drift inequality intact.
    Returns ``(plan, verdict)``.
    """
    if not 0.0 < alpha < 1.0:
        raise ContractError(f"alpha must lie in (0, 1), got {alpha!r}")
    if alpha >= 0.5:
        raise ScopeError(f"alpha = {alpha!r} >= 1/2: the polynomial tameness construction covers alpha < 1/2 only")
    V = V or identity_scale()
    if grid is None:
        grid = list(np.geomspace(1.0, 1e12, 97))
    lo = alpha / (1.0 - alpha)
    delta = 0.5 * (lo + 1.0)
    beta_prime = 0.5 * (1.0 - delta) ** (1.0 / delta)
    beta_inner = 0.5 * beta_prime
    c_beta = c0 / beta_prime
    log_cw = math.log(c_beta + 1.0) / delta

    def n_fn(x):
        return int(max(1.0, safe_ceil(c_beta * math.exp(alpha * float(V.log(x))))))

    W = Scale(log_fn=lambda x: log_cw + (1.0 - alpha) * V.log(x), name=f"c_W V^{1 - alpha:g}",
              spec={"family": "tame-W", "alpha": alpha, "log_coef": log_cw, "V": V.spec})
    plan = SubsamplePlan(n_fn, W, beta_inner, beta_prime, None, None,
                         {"kind": "tame", "alpha": alpha, "delta": delta, "c0": c0, "c_beta": c_beta,
                          "c_W": math.exp(log_cw), "V": V.spec})
    verdict = classify_tame(plan, delta, grid)
    return plan, verdict

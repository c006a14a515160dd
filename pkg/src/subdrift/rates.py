"""Rate sequences, moment rate functions and the admissibility checks that
tie a subsampled drift ``(n, W, beta)`` to a return-time moment ``E_x[R(tau_C)]``.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapabilityError, ContractError
from .scales import Scale

CEIL_SLACK = 1e-12


def safe_ceil(v):
    """Ceiling that ignores relative rounding noise below ``CEIL_SLACK``."""
    v = np.asarray(v, dtype=float)
    out = np.ceil(v - CEIL_SLACK * np.maximum(1.0, np.abs(v)))
    return out[()] if out.ndim == 0 else out


# --------------------------------------------------------------------------
# discrete rate sequences r : N -> (0, inf)


class RateSeq:
    """Non-decreasing rate sequence ``k -> r(k)``.

    ``in_lambda`` is the family-level certificate that the sequence belongs to
    the subgeometric class; it is metadata, never inferred from evaluations.
    """

    def __init__(self, family: str, fn, params: dict | None = None, unbounded: bool = True,
                 in_lambda: bool = False):
        self.family = family
        self._fn = fn
        self.params = params or {}
        self.unbounded = unbounded
        self.in_lambda = in_lambda

    def __call__(self, k):
        out = np.asarray(self._fn(np.asarray(k, dtype=float)), dtype=float)
        return out[()] if out.ndim == 0 else out

    def to_dict(self):
        if self.family == "custom":
            raise ContractError("custom rate sequences are not serializable")
        return {"family": self.family, **self.params}

    def __repr__(self):
        return f"RateSeq({self.family}, {self.params})"


def rate_seq(family: str, **params) -> RateSeq:
    if family == "linear":
        scale, offset = params.get("scale", 1.0), params.get("offset", 0.0)
        if scale <= 0:
            raise ContractError("linear rate needs scale > 0")
        return RateSeq("linear", lambda k: scale * k + offset, {"scale": scale, "offset": offset},
                       in_lambda=True)
    if family == "polynomial":
        p, shift = params["p"], params.get("shift", 1.0)
        if p <= 0:
            raise ContractError("polynomial rate needs p > 0")
        return RateSeq("polynomial", lambda k: (k + shift) ** p, {"p": p, "shift": shift}, in_lambda=True)
    if family == "log-power":
        a = params["alpha"]
        if a <= 0:
            raise ContractError("log-power rate needs alpha > 0")
        return RateSeq("log-power", lambda k: (1.0 + np.log1p(k)) ** a, {"alpha": a}, in_lambda=True)
    if family == "constant":
        c = params.get("value", 1.0)
        if c <= 0:
            raise ContractError("constant rate must be positive")
        return RateSeq("constant", lambda k: np.full(np.shape(k), c), {"value": c}, unbounded=False)
    if family == "custom":
        return RateSeq("custom", params["fn"], {}, unbounded=params.get("unbounded", True))
    raise ContractError(f"unknown rate sequence family {family!r}")


def gen_inverse(r: RateSeq, t: float) -> int:
    """``inf{k in N : r(k) >= t}``."""
    if t <= 0 or r(0) >= t:
        return 0
    hi = 1
    while r(hi) < t:
        hi *= 2
        if hi > 2 ** 62:
            raise ContractError(f"rate {r!r} never reaches {t!r}")
    lo = hi // 2  # r(lo) < t <= r(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if r(mid) >= t:
            hi = mid
        else:
            lo = mid
    return hi


# --------------------------------------------------------------------------
# continuous rate functions R : (0, inf) -> (0, inf)


class RateFn:
    """Strictly increasing rate ``R`` with inverse and derivative, all in log space.

    ``shape_from`` is the point above which the family is known to be convex
    with log-concave derivative (``inf`` when it never is).
    """

    def __init__(self, family, params, log_R, inv_log, log_dR=None, subgeometric=False,
                 subadditive=False, shape_from=math.inf):
        self.family = family
        self.params = params
        self._log_R = log_R
        self._inv_log = inv_log
        self._log_dR = log_dR
        self.subgeometric = subgeometric
        self.subadditive = subadditive
        self.shape_from = shape_from

    @property
    def differentiable(self) -> bool:
        return self._log_dR is not None

    def log_R(self, t):
        with np.errstate(divide="ignore", invalid="ignore"):
            return _out(self._log_R(np.asarray(t, dtype=float)))

    def __call__(self, t):
        with np.errstate(over="ignore"):
            return _out(np.exp(self.log_R(t)))

    def inverse_log(self, log_s):
        """``R^{-1}(exp(log_s))``."""
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return _out(self._inv_log(np.asarray(log_s, dtype=float)))

    def inverse(self, s):
        with np.errstate(divide="ignore"):
            return self.inverse_log(np.log(np.asarray(s, dtype=float)))

    def log_derivative(self, t):
        if self._log_dR is None:
            raise CapabilityError(f"{self.family} rate has no derivative metadata")
        with np.errstate(divide="ignore", invalid="ignore"):
            return _out(self._log_dR(np.asarray(t, dtype=float)))

    def derivative(self, t):
        return _out(np.exp(self.log_derivative(t)))

    def to_dict(self):
        return {"family": self.family, **self.params}

    def __repr__(self):
        return f"RateFn({self.family}, {self.params})"


def _out(a):
    a = np.asarray(a, dtype=float)
    return a[()] if a.ndim == 0 else a


def make_R(family: str, **params) -> RateFn:
    """Build a rate function from a named family.

    * ``geometric(kappa)``: ``R(t) = kappa**t``;
    * ``polynomial(alpha)``: ``R(t) = t**((1-alpha)/alpha)``; ``power(exponent)`` is the
      same family parametrized by the exponent;
    * ``subgeometric(c, alpha)``: ``R(t) = exp(c t**(1/(1+alpha))) - 1``;
    * ``logarithmic(alpha)``: ``R(t) = (1 + ln t)**alpha`` for ``t >= 1`` and ``t**alpha``
      below, which keeps ``R`` positive, increasing and C^1 on ``(0, inf)``.
    """
    if family == "geometric":
        kappa = params["kappa"]
        if not kappa > 1:
            raise ContractError(f"geometric rate needs kappa > 1, got {kappa!r}")
        lk = math.log(kappa)
        return RateFn("geometric", {"kappa": kappa},
                      log_R=lambda t: t * lk,
                      inv_log=lambda ls: ls / lk,
                      log_dR=lambda t: math.log(lk) + t * lk,
                      shape_from=0.0)
    if family in ("polynomial", "power"):
        if family == "polynomial":
            a = params["alpha"]
            if not 0 < a < 1:
                raise ContractError(
                    f"polynomial rate needs alpha in (0, 1) (alpha = 1 gives a constant R), got {a!r}")
            p = (1.0 - a) / a
        else:
            p = params["exponent"]
            if not p > 0:
                raise ContractError(f"power rate needs exponent > 0, got {p!r}")
        lp = math.log(p)
        return RateFn(family, dict(params),
                      log_R=lambda t: p * np.log(t),
                      inv_log=lambda ls: np.exp(ls / p),
                      log_dR=lambda t: lp + (p - 1.0) * np.log(t),
                      subgeometric=True, subadditive=p <= 1.0,
                      shape_from=0.0 if p >= 1.0 else math.inf)
    if family == "subgeometric":
        c, a = params["c"], params["alpha"]
        if not (c > 0 and a > 0):
            raise ContractError("subgeometric rate needs c > 0 and alpha > 0")
        q = 1.0 / (1.0 + a)

        def log_R(t):
            e = c * t ** q
            return e + np.log(-np.expm1(-e))

        return RateFn("subgeometric", {"c": c, "alpha": a},
                      log_R=log_R,
                      inv_log=lambda ls: (np.logaddexp(0.0, ls) / c) ** (1.0 + a),
                      log_dR=lambda t: math.log(c * q) + (q - 1.0) * np.log(t) + c * t ** q,
                      subgeometric=True,
                      shape_from=(1.0 / (c * q)) ** (1.0 / q))
    if family == "logarithmic":
        a = params["alpha"]
        if not a > 0:
            raise ContractError("logarithmic rate needs alpha > 0")
        la = math.log(a)

        def log_R(t):
            return np.where(t >= 1.0, a * np.log1p(np.log(np.maximum(t, 1.0))), a * np.log(t))

        def inv_log(ls):
            y = ls / a
            return np.where(ls >= 0.0, np.exp(np.expm1(np.maximum(y, 0.0))), np.exp(np.minimum(y, 0.0)))

        def log_dR(t):
            big = la - np.log(t) + (a - 1.0) * np.log1p(np.log(np.maximum(t, 1.0)))
            return np.where(t >= 1.0, big, la + (a - 1.0) * np.log(t))

        return RateFn("logarithmic", {"alpha": a}, log_R, inv_log, log_dR,
                      subgeometric=True, subadditive=a <= 1.0)
    raise ContractError(f"unknown rate family {family!r}")


def rate_from_dict(d: dict) -> RateFn:
    d = dict(d)
    return make_R(d.pop("family"), **d)


# --------------------------------------------------------------------------
# admissibility checks


@dataclass
class CheckReport:
    """Outcome of an admissibility check on a state grid.

    ``margins`` has one entry per grid state (positive = satisfied); ``shape``
    maps each functional-shape condition to its verdict on the ``t``-grid.
    """

    case: str
    passed: bool
    grid: list
    margins: np.ndarray
    ok: np.ndarray
    shape: dict = field(default_factory=dict)
    t_range: tuple = (math.nan, math.nan)

    @property
    def violations(self) -> list:
        return [x for x, ok in zip(self.grid, self.ok) if not ok]

    def to_dict(self):
        return {"case": self.case, "passed": self.passed, "t_range": list(self.t_range),
                "shape": self.shape, "grid": [_jsonable(x) for x in self.grid],
                "margins": [float(m) for m in self.margins],
                "violations": [_jsonable(x) for x in self.violations]}


def _jsonable(x):
    if isinstance(x, tuple):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    return x


def _eval_n(n_fn, grid):
    return np.array([float(n_fn(x)) for x in grid])


def _eval_logW(W, grid):
    return np.array([float(W.log(x)) if isinstance(W, Scale) else math.log(W(x)) for x in grid])


def _t_grid(t_min, t_max, points):
    t_min = max(t_min, 1e-12)
    t_max = max(t_max, 10.0 * t_min)
    return np.geomspace(t_min, t_max, points)


CASE_I_T_MAX = 1e12


def check_case_i(R: RateFn, n_fn, W, grid, t_min: float = 1.0, t_max: float | None = None,
                 points: int = 256, tol: float = 1e-8) -> CheckReport:
    """``R(n(x)) <= W(x)`` on ``grid`` and ``t -> R(t)/t`` non-increasing on ``[t_min, t_max]``.

    The shape condition is what makes ``R`` subadditive along a whole return
    path, so ``t_max`` defaults to ``max(n, CASE_I_T_MAX)`` rather than the
    largest ``n`` on the grid.
    """
    grid = list(grid)
    if not grid:
        raise ContractError("grid must be nonempty")
    n = _eval_n(n_fn, grid)
    log_w = _eval_logW(W, grid)
    log_rn = R.log_R(n)
    log_margin = log_w - log_rn
    ok = log_margin >= -tol
    with np.errstate(over="ignore", invalid="ignore"):
        margins = np.exp(log_w) - np.exp(log_rn)
    if t_max is None:
        t_max = float(max(n.max(), CASE_I_T_MAX, 10.0 * t_min))
    t = _t_grid(t_min, t_max, points)
    g = R.log_R(t) - np.log(t)
    dg = np.diff(g)
    nonincreasing = bool(np.all(dg <= tol * np.maximum(1.0, np.abs(g[:-1]))))
    return CheckReport("i", bool(ok.all() and nonincreasing), grid, margins, ok,
                       {"R(t)/t non-increasing": nonincreasing}, (float(t[0]), float(t[-1])))


def check_case_ii(R: RateFn, n_fn, W, beta: float, grid, t_min: float | None = None,
                  t_max: float | None = None, points: int = 256, tol: float = 1e-8) -> CheckReport:
    """``R^{-1}(W) - R^{-1}(beta W) >= n`` on ``grid``; ``R`` convex with log-concave ``R'``.

    Convexity and log-concavity are tested by monotone first and second
    differences of ``log R'`` on a log-spaced ``t``-grid starting at ``t_min``
    (default: the family's ``shape_from`` point, or 1).
    """
    if not 0.0 < beta < 1.0:
        raise ContractError(f"beta must lie in (0, 1), got {beta!r}")
    if not R.differentiable:
        raise CapabilityError(f"{R.family} rate has no derivative metadata")
    grid = list(grid)
    if not grid:
        raise ContractError("grid must be nonempty")
    n = _eval_n(n_fn, grid)
    log_w = _eval_logW(W, grid)
    hw = R.inverse_log(log_w)
    hbw = R.inverse_log(log_w + math.log(beta))
    margins = hw - hbw - n
    ok = margins >= -tol * np.maximum(1.0, np.abs(hw))
    if t_min is None:
        t_min = R.shape_from if math.isfinite(R.shape_from) and R.shape_from > 0 else 1.0
    if t_max is None:
        t_max = float(max(np.max(hw), n.max(), 10.0 * t_min))
    t = _t_grid(t_min, t_max, points)
    ld = R.log_derivative(t)
    d1 = np.diff(ld)
    convex = bool(np.all(d1 >= -tol * np.maximum(1.0, np.abs(ld[:-1]))))
    slopes = d1 / np.diff(t)
    logconcave = bool(np.all(np.diff(slopes) <= tol * np.maximum(1.0, np.abs(slopes[:-1]))))
    return CheckReport("ii", bool(ok.all() and convex and logconcave), grid, margins, ok,
                       {"R convex": convex, "R' log-concave": logconcave}, (float(t[0]), float(t[-1])))


# --------------------------------------------------------------------------
# catalog of (n, W) pairs for subgeometric one-step drifts


@dataclass
class CatalogPair:
    """Subsampling schedule and scale attached to a one-step drift ``PV <= V - phi(V) + b 1_C``."""

    family: str
    alpha: float
    c_prime: float
    n_real: Scale
    W: Scale

    def n_fn(self, x) -> int:
        return int(max(1.0, safe_ceil(self.n_real(x))))


def catalog_pair_from_phi(phi_family: str, V: Scale, alpha: float, c_prime: float = 1.0) -> CatalogPair:
    """``(n, W)`` for ``phi`` log-power, polynomial (``t^{1-alpha}``) or near-linear (``t [ln t]^{-alpha}``)."""
    if c_prime <= 0:
        raise ContractError("c_prime must be positive")
    lc = math.log(c_prime)
    if phi_family == "log-power":
        if alpha <= 0:
            raise ContractError("log-power family needs alpha > 0")
        log_w = lambda x: alpha * np.log1p(V.log(x))  # noqa: E731
        n = Scale(log_fn=lambda x: lc + V.log(x) - log_w(x), name="c' V/[1+ln V]^a")
        W = Scale(log_fn=log_w, name="[1+ln V]^a")
    elif phi_family == "poly":
        if not 0 < alpha < 1:
            raise ContractError("poly family needs alpha in (0, 1)")
        n = Scale(log_fn=lambda x: lc + alpha * V.log(x), name="c' V^a")
        W = Scale(log_fn=lambda x: (1.0 - alpha) * V.log(x), name="V^(1-a)")
    elif phi_family == "near-linear":
        if alpha <= 0:
            raise ContractError("near-linear family needs alpha > 0")
        n = Scale(log_fn=lambda x: lc + alpha * np.log(V.log(x)), name="c' [ln V]^a")
        W = Scale(log_fn=lambda x: V.log(x) - alpha * np.log(V.log(x)), name="V [ln V]^-a")
    else:
        raise ContractError(f"unknown phi family {phi_family!r}")
    return CatalogPair(phi_family, alpha, c_prime, n, W)

"""Drift-inequality certificates on finite state grids.

Each verifier evaluates a margin ``rhs(x) - E_x[...]`` (positive = satisfied)
at every grid state.  Kernels that know their law exactly are checked in
``exact`` mode; others by Monte Carlo (``mc``), where a state passes only
when its whole confidence interval is positive and fails only when it is
wholly negative.  Straddling intervals are escalated (x10 replicates) until
``mc_budget`` and otherwise reported as INCONCLUSIVE.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .chain.engine import DEFAULT_Z, map_batches, map_replicates, summarize
from .chain.sets import SetPredicate
from .errors import CapabilityError, ContractError
from .rates import RateFn, RateSeq
from .rng import RngStream, stream_key
from .scales import Scale

PASS, FAIL, INCONCLUSIVE = "PASS", "FAIL", "INCONCLUSIVE"
EXACT_REL_TOL = 1e-9
VARIANCE_FLAG = 10.0
POINTS_PER_DECADE = 32


# --------------------------------------------------------------------------
# drift specifications


def _check_beta(beta):
    if not 0.0 < beta < 1.0:
        raise ContractError(f"beta must lie in (0, 1), got {beta!r}")


def _check_b(b):
    if not (math.isfinite(b) and b >= 0):
        raise ContractError(f"b must be finite and >= 0, got {b!r}")


@dataclass
class OneStepGeometric:
    """``PV <= beta V + b 1_C``."""

    V: Scale
    beta: float
    b: float
    C: SetPredicate
    variant = "one-step-geometric"

    def __post_init__(self):
        _check_beta(self.beta)
        _check_b(self.b)


@dataclass
class PhiSubgeometric:
    """``PV <= V - phi(V) + b 1_C`` with ``phi`` increasing, concave and bounded below on ``[1, inf)``."""

    V: Scale
    phi: object
    b: float
    C: SetPredicate
    variant = "phi-subgeometric"

    def __post_init__(self):
        _check_b(self.b)


@dataclass
class DoubleControl:
    """``PV <= V - W + b 1_C`` together with ``PW <= W + b 1_C``."""

    V: Scale
    W: Scale
    b: float
    C: SetPredicate
    variant = "double-control"

    def __post_init__(self):
        _check_b(self.b)


@dataclass
class Subsampled:
    """``E_x[W(Phi_{n(x)})] <= beta W(x) + b 1_C(x)``."""

    W: Scale
    n_fn: object
    beta: float
    b: float
    C: SetPredicate
    variant = "subsampled"

    def __post_init__(self):
        _check_beta(self.beta)
        _check_b(self.b)


@dataclass
class Nested:
    """Family ``E_x[V_{k+n}(Phi_n)] + E_x[sum_{j<n} r(k+j) f(Phi_j)] <= V_k(x) + S_k(x) 1_C(x)``.

    ``V_k(k)`` returns a callable on states, ``S_k(k, x)`` a number, ``r`` is
    a rate sequence and ``f`` a scale (or any positive callable on states).
    """

    V_k: object
    S_k: object
    r: object
    f: object
    n_fn: object
    C: SetPredicate
    variant = "nested"


def nested_from_rate(R: RateFn, W: Scale, n_fn, b: float, C: SetPredicate) -> Nested:
    """Family ``V_k = H_k o W`` with ``H_k(t) = R(R^{-1}(t) + k) - R(k)``, ``r = R'``, ``f = 1``.

    The constant on ``C`` is ``S_k(x) = H_m(b) - H_m(0+)`` with ``m = k + n(x)``.
    ``H_m`` is concave, so ``H_m(s + t) <= H_m(s) + H_m(t) - H_m(0+)``; the
    correction matters when ``R(0) > 0`` (geometric ``R``, where ``H_m(b) < 0``
    for ``b < 1``).  This is the family a convex ``R`` with log-concave
    derivative and ``R^{-1}(W) - R^{-1}(beta W) >= n`` produces from a
    subsampled drift with constants ``(beta, b)``.
    """
    _check_b(b)
    floor = float(R.inverse(1e-300))

    def H(k, t):
        return float(R(float(R.inverse(t)) + k) - R(k))

    def V_k(k):
        return lambda x: H(k, float(W(x)))

    def S_k(k, x):
        m = k + int(n_fn(x))
        return float(R(float(R.inverse(b)) + m) - R(floor + m)) if b > 0 else 0.0

    r = RateSeq("custom", lambda k: R.derivative(np.maximum(k, 1e-300)))
    return Nested(V_k, S_k, r, lambda x: 1.0, n_fn, C)


# --------------------------------------------------------------------------
# certificates


@dataclass
class DriftCertificate:
    """Per-state margins (positive = satisfied) for one or more inequality tracks."""

    variant: str
    mode: str
    grid: list
    margins: dict
    std_errors: dict
    verdict: str
    fail_states: list = field(default_factory=list)
    inconclusive_states: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def min_margin(self, track: str | None = None) -> float:
        tracks = [track] if track else list(self.margins)
        return float(min(np.min(self.margins[t]) for t in tracks))

    def to_dict(self) -> dict:
        return {
            "variant": self.variant, "mode": self.mode, "verdict": self.verdict,
            "grid": [_plain(x) for x in self.grid],
            "margins": {k: [float(v) for v in m] for k, m in self.margins.items()},
            "std_errors": {k: [float(v) for v in m] for k, m in self.std_errors.items()},
            "fail_states": [_plain(x) for x in self.fail_states],
            "inconclusive_states": [_plain(x) for x in self.inconclusive_states],
            "notes": self.notes,
        }


def _plain(x):
    if isinstance(x, (tuple, list, np.ndarray)):
        return [_plain(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def _state_verdict(margin, se, mode, z):
    if mode == "exact":
        return PASS if margin >= 0 else FAIL
    if not math.isfinite(margin):
        return INCONCLUSIVE
    if margin - z * se > 0:
        return PASS
    if margin + z * se < 0:
        return FAIL
    return INCONCLUSIVE


def _assemble(variant, mode, grid, tracks, ses, per_state, notes):
    fail = [x for x, v in zip(grid, per_state) if v == FAIL]
    inc = [x for x, v in zip(grid, per_state) if v == INCONCLUSIVE]
    verdict = FAIL if fail else (INCONCLUSIVE if inc else PASS)
    return DriftCertificate(variant, mode, list(grid), {k: np.asarray(v, float) for k, v in tracks.items()},
                            {k: np.asarray(v, float) for k, v in ses.items()}, verdict, fail, inc, notes)


# --------------------------------------------------------------------------
# expectation back ends


class _Evaluator:
    """Computes ``E_x[g(Phi_n)]`` exactly when possible, else by Monte Carlo."""

    def __init__(self, kernel, mode, replicates, mc_budget, master_seed, workers, z, step_budget):
        if mode not in ("auto", "exact", "mc"):
            raise ContractError(f"mode must be 'auto', 'exact' or 'mc', got {mode!r}")
        if mode == "exact" and not kernel.exact_expectation:
            raise CapabilityError(f"{type(kernel).__name__} has no exact expectation")
        if mode == "auto":
            mode = "exact" if kernel.exact_expectation else "mc"
        if mode == "mc" and master_seed is None:
            raise ContractError("Monte Carlo verification needs a master_seed")
        self.kernel = kernel
        self.mode = mode
        self.replicates = int(replicates)
        self.mc_budget = int(max(mc_budget, replicates))
        self.master_seed = master_seed
        self.workers = workers
        self.z = z
        self.step_budget = step_budget

    def exact(self, g, x, n):
        return float(self.kernel.expect(g, x, n))

    def mc_values(self, batch_fn, index, replicates):
        seed = stream_key(self.master_seed, index)
        return map_batches(batch_fn, replicates, seed, self.workers)

    def endpoint_batch(self, g, x, n):
        kernel = self.kernel

        def batch(keys):
            states = kernel.advance_batch(x, n, keys)
            return np.asarray(g(states), dtype=float).reshape(len(keys))

        return batch

    def mc_margin(self, rhs, batch_fn, index):
        """Escalating Monte Carlo margin ``rhs - mean``; returns ``(margin, se, verdict, reps, flag)``."""
        reps = self.replicates
        while True:
            est = summarize(self.mc_values(batch_fn, index, reps))
            margin = rhs - est.mean
            verdict = _state_verdict(margin, est.std_error, "mc", self.z)
            if verdict != INCONCLUSIVE or reps * 10 > self.mc_budget:
                break
            reps *= 10
        flag = bool(est.mean != 0 and est.std_error / abs(est.mean) > VARIANCE_FLAG)
        if flag and verdict == PASS:
            verdict = INCONCLUSIVE
        return margin, est.std_error, verdict, reps, flag


def _as_fn(f):
    return f if callable(f) else (lambda x: f)


def _eval(scale, x) -> float:
    return float(np.asarray(scale(x if not isinstance(x, list) else tuple(x))))


def _validate_grid(kernel, grid):
    grid = list(grid)
    if not grid:
        raise ContractError("grid must be nonempty")
    if kernel.space is not None:
        bad = [x for x in grid if x not in kernel.space]
        if bad:
            raise ContractError(f"grid states outside the state space: {bad[:5]}")
    return grid


def _check_scales(grid, C, *scales):
    for s in scales:
        vals = np.array([_eval(s, x) for x in grid])
        if np.any(vals < 1.0 - 1e-12):
            raise ContractError(f"scale {getattr(s, 'name', s)!r} takes values below 1 on the grid")
        in_c = [v for x, v in zip(grid, vals) if x in C]
        if in_c and not np.all(np.isfinite(in_c)):
            raise ContractError("scale is not bounded on the small set")


def _rhs_tol(rhs):
    return EXACT_REL_TOL * max(1.0, abs(rhs))


# --------------------------------------------------------------------------
# verifiers


def verify_onestep(kernel, spec, grid, mode: str = "auto", replicates: int = 10_000,
                   mc_budget: int = 1_000_000, master_seed: int | None = None, workers: int = 1,
                   z: float = DEFAULT_Z) -> DriftCertificate:
    """One-step geometric or phi-subgeometric drift on ``grid``."""
    if not isinstance(spec, (OneStepGeometric, PhiSubgeometric)):
        raise ContractError("verify_onestep takes a one-step-geometric or phi-subgeometric spec")
    grid = _validate_grid(kernel, grid)
    _check_scales(grid, spec.C, spec.V)
    notes = {}
    if isinstance(spec, PhiSubgeometric):
        notes["phi_shape"] = _check_phi(spec.phi, [_eval(spec.V, x) for x in grid])
        if not all(notes["phi_shape"].values()):
            raise ContractError(f"phi fails its shape requirements: {notes['phi_shape']}")
    ev = _Evaluator(kernel, mode, replicates, mc_budget, master_seed, workers, z, None)

    def rhs(x):
        v = _eval(spec.V, x)
        base = spec.beta * v if isinstance(spec, OneStepGeometric) else v - float(spec.phi(v))
        return base + (spec.b if x in spec.C else 0.0)

    margins, ses, per_state = _single_track(ev, grid, rhs, spec.V, lambda x: 1, notes)
    return _assemble(spec.variant, ev.mode, grid, {"drift": margins}, {"drift": ses}, per_state, notes)


def _single_track(ev, grid, rhs_fn, g, n_fn, notes):
    margins, ses, per_state, reps, flags = [], [], [], [], []
    for i, x in enumerate(grid):
        n = int(n_fn(x))
        rhs = rhs_fn(x)
        if ev.mode == "exact":
            m = rhs - ev.exact(g, x, n)
            margins.append(m)
            ses.append(0.0)
            per_state.append(PASS if m >= -_rhs_tol(rhs) else FAIL)
            continue
        if ev.step_budget is not None and n > ev.step_budget:
            margins.append(math.nan)
            ses.append(math.nan)
            per_state.append(INCONCLUSIVE)
            notes.setdefault("over_step_budget", []).append({"state": _plain(x), "n": n})
            continue
        m, se, v, r, flag = ev.mc_margin(rhs, ev.endpoint_batch(g, x, n), i)
        margins.append(m)
        ses.append(se)
        per_state.append(v)
        reps.append(r)
        flags.append(flag)
    if ev.mode == "mc":
        notes["replicates_used"] = reps
        notes["variance_flagged"] = [_plain(x) for x, f in zip(grid, flags) if f] if flags else []
    return margins, ses, per_state


def _check_phi(phi, v_values) -> dict:
    t = np.unique(np.concatenate([np.geomspace(1.0, max(10.0, max(v_values)), 200), np.asarray(v_values)]))
    y = np.array([float(phi(s)) for s in t])
    dy = np.diff(y)
    slopes = dy / np.diff(t)
    tol = 1e-9 * np.maximum(1.0, np.abs(slopes[:-1]))
    return {"increasing": bool(np.all(dy >= -1e-12 * np.maximum(1.0, np.abs(y[:-1])))),
            "concave": bool(np.all(np.diff(slopes) <= tol)),
            "inf positive": bool(y.min() > 0)}


def verify_double_control(kernel, spec: DoubleControl, grid, mode: str = "auto", replicates: int = 10_000,
                          mc_budget: int = 1_000_000, master_seed: int | None = None, workers: int = 1,
                          z: float = DEFAULT_Z) -> DriftCertificate:
    """Both ``PV <= V - W + b 1_C`` (track ``V``) and ``PW <= W + b 1_C`` (track ``W``)."""
    if not isinstance(spec, DoubleControl):
        raise ContractError("verify_double_control takes a double-control spec")
    grid = _validate_grid(kernel, grid)
    _check_scales(grid, spec.C, spec.V, spec.W)
    ev = _Evaluator(kernel, mode, replicates, mc_budget, master_seed, workers, z, None)
    notes = {}

    def bump(x):
        return spec.b if x in spec.C else 0.0

    mv, sv, pv = _single_track(ev, grid, lambda x: _eval(spec.V, x) - _eval(spec.W, x) + bump(x),
                               spec.V, lambda x: 1, notes)
    ev2 = _Evaluator(kernel, ev.mode, replicates, mc_budget,
                     None if master_seed is None else stream_key(master_seed, len(grid) + 1), workers, z, None)
    mw, sw, pw = _single_track(ev2, grid, lambda x: _eval(spec.W, x) + bump(x), spec.W, lambda x: 1, {})
    per_state = [_worst(a, b) for a, b in zip(pv, pw)]
    return _assemble(spec.variant, ev.mode, grid, {"V": mv, "W": mw}, {"V": sv, "W": sw}, per_state, notes)


def _worst(*verdicts):
    if FAIL in verdicts:
        return FAIL
    if INCONCLUSIVE in verdicts:
        return INCONCLUSIVE
    return PASS


def verify_subsampled(kernel, spec: Subsampled, grid, mode: str = "auto", replicates: int = 10_000,
                      mc_budget: int = 1_000_000, master_seed: int | None = None, workers: int = 1,
                      z: float = DEFAULT_Z, step_budget: int = 10_000_000) -> DriftCertificate:
    """``E_x[W(Phi_{n(x)})] <= beta W(x) + b 1_C(x)`` on ``grid``."""
    if not isinstance(spec, Subsampled):
        raise ContractError("verify_subsampled takes a subsampled spec")
    grid = _validate_grid(kernel, grid)
    _check_scales(grid, spec.C, spec.W)
    for x in grid:
        n = spec.n_fn(x)
        if int(n) != n or n < 1:
            raise ContractError(f"n must be a positive integer, got n({x!r}) = {n!r}")
    ev = _Evaluator(kernel, mode, replicates, mc_budget, master_seed, workers, z, step_budget)
    notes = {}

    def rhs(x):
        return spec.beta * _eval(spec.W, x) + (spec.b if x in spec.C else 0.0)

    margins, ses, per_state = _single_track(ev, grid, rhs, spec.W, spec.n_fn, notes)
    return _assemble(spec.variant, ev.mode, grid, {"drift": margins}, {"drift": ses}, per_state, notes)


def verify_nested_family(kernel, spec: Nested, grid, k_range, mode: str = "auto", replicates: int = 10_000,
                         mc_budget: int = 1_000_000, master_seed: int | None = None, workers: int = 1,
                         z: float = DEFAULT_Z) -> DriftCertificate:
    """Every member ``k`` of a nested drift family; one margin track per ``k``."""
    if not isinstance(spec, Nested):
        raise ContractError("verify_nested_family takes a nested spec")
    grid = _validate_grid(kernel, grid)
    ks = list(k_range)
    if not ks:
        raise ContractError("k_range must be nonempty")
    ev = _Evaluator(kernel, mode, replicates, mc_budget, master_seed, workers, z, None)
    f = _as_fn(spec.f)
    tracks, ses, verdicts = {}, {}, [[] for _ in grid]
    notes = {}
    for ki, k in enumerate(ks):
        vk = spec.V_k(k)
        margins, errs = [], []
        for i, x in enumerate(grid):
            n = int(spec.n_fn(x))
            if n < 1:
                raise ContractError(f"n must be a positive integer, got n({x!r}) = {n!r}")
            rhs = float(vk(x)) + (float(spec.S_k(k, x)) if x in spec.C else 0.0)
            weights = [float(spec.r(k + j)) for j in range(n)]
            vkn = spec.V_k(k + n)
            if ev.mode == "exact":
                total = ev.exact(lambda s: _vec(vkn, s), x, n)
                total += sum(w * ev.exact(lambda s: _vec(f, s), x, j) for j, w in enumerate(weights))
                m = rhs - total
                margins.append(m)
                errs.append(0.0)
                verdicts[i].append(PASS if m >= -_rhs_tol(rhs) else FAIL)
                continue
            kern = kernel

            def sampler(rng, x=x, n=n, weights=weights, vkn=vkn):
                s, acc = x, 0.0
                for j in range(n):
                    acc += weights[j] * float(f(s))
                    s = kern.sample(s, rng)
                return acc + float(vkn(s))

            def batch(keys, sampler=sampler):
                return np.array([sampler(RngStream(int(key))) for key in keys])

            m, se, v, _, _ = ev.mc_margin(rhs, batch, ki * len(grid) + i)
            margins.append(m)
            errs.append(se)
            verdicts[i].append(v)
        tracks[f"k={k}"] = margins
        ses[f"k={k}"] = errs
    notes["k_range"] = ks
    per_state = [_worst(*v) for v in verdicts]
    return _assemble(spec.variant, ev.mode, grid, tracks, ses, per_state, notes)


def _vec(fn, states):
    """Apply a scalar state function to a batch of states (int array or (N, 2) array)."""
    arr = np.asarray(states)
    if arr.ndim == 0:
        return np.asarray(float(fn(arr.item())))
    if arr.ndim == 1 and arr.dtype.kind in "iu":
        return np.array([float(fn(int(s))) for s in arr])
    if arr.ndim == 1:
        return np.asarray(float(fn(tuple(arr))))
    return np.array([float(fn(tuple(s))) for s in arr])


# --------------------------------------------------------------------------
# grids


def default_grid(V: Scale, lo: int, hi: int, C: SetPredicate | None = None,
                 points_per_decade: int = POINTS_PER_DECADE, c_points: int = 64) -> list:
    """Integer states in ``[lo, hi]`` log-spaced in ``V`` plus a dense sample of ``C``.

    For each level ``10**(j / points_per_decade)`` between ``V(lo)`` and ``V(hi)``
    the smallest state reaching it is kept (``V`` is assumed non-decreasing).
    """
    if hi < lo:
        raise ContractError("need lo <= hi")
    if hi - lo <= 2_000_000:
        xs = np.arange(lo, hi + 1)
    else:
        xs = np.unique(np.concatenate([np.arange(lo, lo + 1000),
                                       np.round(np.geomspace(max(lo, 1), hi, 2_000_000)).astype(np.int64)]))
    lv = np.log10(np.asarray(V(xs), dtype=float))
    levels = np.arange(math.floor(lv[0] * points_per_decade), math.ceil(lv[-1] * points_per_decade) + 1)
    idx = np.searchsorted(lv, levels / points_per_decade - 1e-12, side="left")
    idx = idx[idx < xs.size]
    chosen = set(int(v) for v in xs[idx])
    chosen.update((int(lo), int(hi)))
    if C is not None:
        in_c = xs[C.mask(xs)]
        if in_c.size:
            take = np.unique(np.linspace(0, in_c.size - 1, min(c_points, in_c.size)).round().astype(int))
            chosen.update(int(v) for v in in_c[take])
    return sorted(chosen)


# --------------------------------------------------------------------------
# finite-state W-norm diagnostics


@dataclass
class WNormDiagnostic:
    """Ratios ``n ||P^n(x,.) - P^n(x',.)||_W / (V(x) + V(x'))`` for ``n = 1..n_max``."""

    pairs: list
    ratios: np.ndarray
    first_half_max: list
    last_half_max: list
    verdict: str
    sup_PkW: dict | None = None

    def to_dict(self, stride: int | None = None) -> dict:
        n_max = self.ratios.shape[0]
        stride = stride or max(1, n_max // 1000)
        rows = list(range(0, n_max, stride))
        if rows[-1] != n_max - 1:
            rows.append(n_max - 1)
        return {"verdict": self.verdict, "pairs": [_plain(p) for p in self.pairs],
                "first_half_max": self.first_half_max, "last_half_max": self.last_half_max,
                "sup_PkW": self.sup_PkW,
                "table": {"n": [r + 1 for r in rows],
                          "ratios": [[float(v) for v in self.ratios[r]] for r in rows]}}


def wnorm_difference_diagnostic(kernel, W, V, n_max: int, pairs, x0: int | None = None,
                                rel_tol: float = 1e-9) -> WNormDiagnostic:
    """Finite-kernel coupling diagnostic.

    PASS when, for every pair, the maximum ratio over ``n in (n_max/2, n_max]``
    does not exceed the maximum over ``n <= n_max/2`` (up to ``rel_tol``), so
    the running maximum has stopped growing.  With ``x0`` the running
    ``sup_{k<=n} P^k W(x0)`` is also reported and a growth trend flagged.
    """
    if not getattr(kernel, "finite_matrix", False):
        raise CapabilityError("the W-norm diagnostic needs a finite transition matrix")
    if n_max < 2:
        raise ContractError("n_max must be >= 2")
    P = kernel.P if hasattr(kernel, "P") else kernel.to_matrix()
    size = P.shape[0]
    states = np.arange(size)
    w = np.asarray(W(states), dtype=float)
    v = np.asarray(V(states), dtype=float)
    pairs = [(int(a), int(b)) for a, b in pairs]
    if not pairs:
        raise ContractError("need at least one pair")
    left = np.zeros((len(pairs), size))
    right = np.zeros((len(pairs), size))
    for i, (a, b) in enumerate(pairs):
        left[i, a] = 1.0
        right[i, b] = 1.0
    denom = np.array([v[a] + v[b] for a, b in pairs])
    ratios = np.empty((n_max, len(pairs)))
    for n in range(1, n_max + 1):
        left = left @ P
        right = right @ P
        ratios[n - 1] = n * (np.abs(left - right) @ w) / denom
    half = n_max // 2
    first = ratios[:half].max(axis=0)
    last = ratios[half:].max(axis=0)
    ok = last <= first * (1.0 + rel_tol) + 1e-300
    sup = None
    if x0 is not None:
        sup = _sup_PkW(P, w, int(x0), n_max, rel_tol)
    verdict = PASS if ok.all() else FAIL
    return WNormDiagnostic(pairs, ratios, [float(a) for a in first], [float(a) for a in last], verdict, sup)


def _sup_PkW(P, w, x0, n_max, rel_tol) -> dict:
    row = np.zeros(P.shape[0])
    row[x0] = 1.0
    vals = np.empty(n_max + 1)
    vals[0] = w[x0]
    for k in range(1, n_max + 1):
        row = row @ P
        vals[k] = row @ w
    half = n_max // 2
    first, last = float(vals[:half + 1].max()), float(vals[half + 1:].max())
    return {"x0": x0, "running_sup": float(vals.max()), "first_half_sup": first, "last_half_sup": last,
            "growing": bool(last > first * (1.0 + rel_tol))}


def running_sup_PkW(kernel, W, x0, n_max: int, replicates: int = 10_000, master_seed: int = 0,
                    workers: int = 1) -> dict:
    """Monte Carlo running ``sup_{k <= n_max} P^k W(x0)`` for kernels without a finite matrix."""
    if n_max < 2:
        raise ContractError("n_max must be >= 2")

    def path_values(rng):
        s = x0
        out = [float(W(s))]
        for _ in range(n_max):
            s = kernel.sample(s, rng)
            out.append(float(W(s)))
        return out

    vals = np.asarray(map_replicates(path_values, replicates, master_seed, workers)).mean(axis=0)
    half = n_max // 2
    first, last = float(vals[:half + 1].max()), float(vals[half + 1:].max())
    return {"x0": _plain(x0), "running_sup": float(vals.max()), "first_half_sup": first,
            "last_half_sup": last, "growing": bool(last > first * 1.05)}

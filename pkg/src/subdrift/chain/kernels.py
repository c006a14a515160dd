"""Transition kernels.

A kernel samples one transition from a :class:`~subdrift.rng.RngStream`.  Kernels
that know their transition law exactly also implement :meth:`Kernel.expect`.
Batched fast paths (``advance_batch``, ``hitting_batch``) take one uint64
stream key per replicate and must consume each stream exactly as repeated
calls to :meth:`Kernel.sample` would, so fast and generic paths agree.
"""
from bisect import bisect_right

import numpy as np

from ..errors import CapabilityError, ContractError
from ..rng import RngStream
from . import _fast
from .sets import Interval


class IntegerRange:
    """Integers ``lo..hi`` (``hi=None`` for unbounded)."""

    def __init__(self, lo: int = 0, hi: int | None = None):
        self.lo = lo
        self.hi = hi

    def __contains__(self, x) -> bool:
        if isinstance(x, (bool, np.bool_)) or not isinstance(x, (int, np.integer)):
            return False
        return x >= self.lo and (self.hi is None or x <= self.hi)

    def __repr__(self):
        return f"IntegerRange({self.lo}, {self.hi})"


class Kernel:
    """Base transition kernel."""

    space = None
    exact_expectation = False
    finite_matrix = False

    def sample(self, x, rng: RngStream):
        raise NotImplementedError

    def expect(self, f, x, steps: int = 1) -> float:
        """``E_x[f(Phi_steps)]`` computed exactly."""
        raise CapabilityError(f"{type(self).__name__} has no exact expectation")

    def advance_batch(self, x0, steps: int, keys: np.ndarray):
        """States after ``steps`` transitions from ``x0``, one per stream key."""
        out = []
        for key in keys:
            rng = RngStream(int(key))
            x = x0
            for _ in range(steps):
                x = self.sample(x, rng)
            out.append(x)
        return np.asarray(out)

    def hitting_batch(self, x0, target, kind: str, cap: int, keys: np.ndarray):
        """Vectorized stopping times (-1 = censored), or ``None`` if unsupported."""
        return None


class IdentityKernel(Kernel):
    exact_expectation = True

    def __init__(self, space=None):
        self.space = space if space is not None else IntegerRange(0, None)

    def sample(self, x, rng):
        return x

    def expect(self, f, x, steps=1):
        return float(f(x))


class FiniteKernel(Kernel):
    """Row-stochastic matrix over states ``0..n-1`` (with optional labels)."""

    exact_expectation = True
    finite_matrix = True

    def __init__(self, matrix, labels=None):
        P = np.array(matrix, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ContractError(f"transition matrix must be square, got shape {P.shape}")
        if not np.all(np.isfinite(P)) or np.any(P < 0):
            raise ContractError("transition matrix entries must be finite and non-negative")
        dev = np.abs(P.sum(axis=1) - 1.0)
        if np.any(dev > 1e-12):
            raise ContractError(f"row {int(np.argmax(dev))} sums to {P.sum(axis=1)[np.argmax(dev)]!r}, not 1")
        self.P = P
        self.n = P.shape[0]
        self.labels = list(labels) if labels is not None else [str(i) for i in range(self.n)]
        self.space = IntegerRange(0, self.n - 1)
        cum = np.cumsum(P, axis=1)
        cum /= cum[:, -1:]
        cum[:, -1] = 1.0
        self._cum = cum
        self._cum_rows = [list(row) for row in cum]

    def sample(self, x, rng):
        return min(bisect_right(self._cum_rows[x], rng.uniform()), self.n - 1)

    def expect(self, f, x, steps=1):
        from .matrix import matrix_power_distribution

        dist = matrix_power_distribution(self, x, steps)
        return float(dist @ np.asarray(f(np.arange(self.n)), dtype=float))

    def advance_batch(self, x0, steps, keys):
        x = np.full(len(keys), x0, dtype=np.int64)
        for j in range(steps):
            u = _uniform_batch(keys, j)
            x = np.minimum((self._cum[x] <= u[:, None]).sum(axis=1), self.n - 1)
        return x


def _uniform_batch(keys, j):
    from ..rng import uniform_np

    return uniform_np(keys, np.full(len(keys), j, dtype=np.uint64))


class BirthDeathChain(Kernel):
    """Nearest-neighbour walk on ``{0, 1, ..., upper}`` reflected at the ends.

    From ``x`` the chain holds with probability ``lazy``; otherwise it steps up
    with probability ``p(x) = clip(a - d/(x+1), p_min, p_max)`` and down with
    ``1 - p(x)``.  A down-step at 0 (or an up-step at ``upper``) holds.  With
    ``a = 1/2`` and ``d > 0`` this is the classical polynomially ergodic example.
    """

    exact_expectation = True

    def __init__(self, a: float = 0.5, d: float = 0.0, p_min: float = 0.0, p_max: float = 1.0,
                 lazy: float = 0.0, upper: int | None = None):
        if not 0.0 <= p_min <= p_max <= 1.0:
            raise ContractError("need 0 <= p_min <= p_max <= 1")
        if not 0.0 <= lazy < 1.0:
            raise ContractError("lazy must lie in [0, 1)")
        self.a, self.d, self.p_min, self.p_max, self.lazy = float(a), float(d), float(p_min), float(p_max), float(lazy)
        self.upper = upper
        self.space = IntegerRange(0, upper)
        self.finite_matrix = upper is not None

    @property
    def params(self) -> dict:
        return {"a": self.a, "d": self.d, "p_min": self.p_min, "p_max": self.p_max,
                "lazy": self.lazy, "upper": self.upper}

    def p_up(self, x):
        return np.clip(self.a - self.d / (np.asarray(x, dtype=float) + 1.0), self.p_min, self.p_max)

    def sample(self, x, rng):
        u = rng.uniform()
        if u < self.lazy:
            return x
        p = min(max(self.a - self.d / (x + 1.0), self.p_min), self.p_max)
        if u < self.lazy + (1.0 - self.lazy) * p:
            return x if self.upper is not None and x >= self.upper else x + 1
        return x - 1 if x > 0 else 0

    def step_probs(self, x):
        """``(P(x, x-1), P(x, x), P(x, x+1))`` with boundary holds folded into the middle."""
        x = np.asarray(x)
        p = self.p_up(x)
        up = (1.0 - self.lazy) * p
        down = (1.0 - self.lazy) * (1.0 - p)
        hold = np.full(x.shape, self.lazy, dtype=float)
        at_top = (x >= self.upper) if self.upper is not None else np.zeros(x.shape, dtype=bool)
        hold = hold + np.where(at_top, up, 0.0) + np.where(x == 0, down, 0.0)
        up = np.where(at_top, 0.0, up)
        down = np.where(x == 0, 0.0, down)
        return down, hold, up

    def expect(self, f, x, steps=1):
        lo = max(0, x - steps)
        hi = x + steps if self.upper is None else min(self.upper, x + steps)
        states = np.arange(lo, hi + 1)
        down, hold, up = self.step_probs(states)
        dist = np.zeros(len(states))
        dist[x - lo] = 1.0
        for _ in range(steps):
            new = dist * hold
            new[:-1] += dist[1:] * down[1:]
            new[1:] += dist[:-1] * up[:-1]
            dist = new
        return float(dist @ np.asarray(f(states), dtype=float))

    def to_matrix(self) -> np.ndarray:
        if self.upper is None:
            raise CapabilityError("unbounded birth-death chain has no finite matrix")
        states = np.arange(self.upper + 1)
        down, hold, up = self.step_probs(states)
        P = np.diag(hold)
        P[states[1:], states[1:] - 1] = down[1:]
        P[states[:-1], states[:-1] + 1] = up[:-1]
        return P

    def _fast_args(self):
        upper = -1 if self.upper is None else int(self.upper)
        return self.a, self.d, self.p_min, self.p_max, self.lazy, upper

    def advance_batch(self, x0, steps, keys):
        return _fast.bd_advance(int(x0), int(steps), np.asarray(keys, dtype=np.uint64), *self._fast_args())

    def hitting_batch(self, x0, target, kind, cap, keys):
        if not isinstance(target, Interval) or target.coord is not None:
            return None
        return _fast.bd_hitting(int(x0), target.lo, target.hi, kind == "return", int(cap),
                                np.asarray(keys, dtype=np.uint64), *self._fast_args())


class FunctionKernel(Kernel):
    """Kernel from a user sampler ``sample_fn(x, rng)`` and optional exact ``expect_fn``."""

    def __init__(self, sample_fn, space, expect_fn=None):
        self._sample = sample_fn
        self.space = space
        self._expect = expect_fn
        self.exact_expectation = expect_fn is not None

    def sample(self, x, rng):
        return self._sample(x, rng)

    def expect(self, f, x, steps=1):
        if self._expect is None:
            return super().expect(f, x, steps)
        return float(self._expect(f, x, steps))

"""The dominating process ``D = (Z, M)`` built from a D/M/1 workload.

``U`` is the workload of a D/M/1 queue sampled just before arrivals (arrivals
every ``ln(1/beta)``, Exp(1) service), ``Y = kappa * exp(U)``, and ``D`` slows
``Y`` down: ``Z`` holds for ``M`` steps, with ``M`` counting down from
``n*(Z)`` after each jump.
"""
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate

from ..chain.kernels import Kernel
from ..chain.sets import Interval
from ..errors import CapabilityError, ContractError, DomainError
from ..rng import RngStream, uniform_np
from . import _fast

NSTAR_CODES = {"constant": _fast.NSTAR_CONSTANT, "power": _fast.NSTAR_POWER,
               "log-power": _fast.NSTAR_LOG_POWER}
INV_E = math.exp(-1.0)
# beyond lo * e^700 the tail mass e^-700 is negligible and floats overflow
MAX_LOG_SPAN = 700.0


@dataclass(frozen=True)
class DomParams:
    """``beta in (0, 1/e)``, ``kappa >= 1`` and the countdown family ``n*``.

    ``nstar`` is ``"power"`` (``ceil(z**gamma)``), ``"log-power"``
    (``max(1, ceil((ln z)**gamma))``) or ``"constant"`` (``const``).
    """

    beta: float
    kappa: float = 1.0
    nstar: str = "power"
    gamma: float = 0.0
    const: int = 1

    def __post_init__(self):
        if not 0.0 < self.beta < INV_E:
            raise DomainError(f"beta must lie in (0, 1/e), got {self.beta!r}")
        if not self.kappa >= 1.0:
            raise ContractError(f"kappa must be >= 1, got {self.kappa!r}")
        if self.nstar not in NSTAR_CODES:
            raise ContractError(f"unknown n* family {self.nstar!r}")
        if self.gamma < 0:
            raise ContractError("gamma must be >= 0")
        if self.nstar == "constant" and self.const < 1:
            raise ContractError("constant n* must be >= 1")

    @property
    def code(self) -> int:
        return NSTAR_CODES[self.nstar]

    @property
    def fast_args(self) -> tuple:
        return self.beta, self.kappa, self.code, self.gamma, self.const

    def n_star(self, z) -> int:
        return _fast.nstar_value(z, self.code, self.gamma, self.const)

    @property
    def small_set(self) -> Interval:
        """``C = {(z, m) : kappa <= z <= kappa/beta}``."""
        return Interval(self.kappa, self.kappa / self.beta, coord=0)

    def to_dict(self) -> dict:
        return asdict(self)


def step_U(u: float, beta: float, rng: RngStream) -> float:
    """One Lindley step ``max(u + E - ln(1/beta), 0)`` with ``E ~ Exp(1)``."""
    if u < 0:
        raise ContractError("workload must be >= 0")
    return max(u + rng.exponential() - math.log(1.0 / beta), 0.0)


def step_Y(y: float, params: DomParams, rng: RngStream) -> float:
    """Exact draw of ``Y_1`` given ``Y_0 = y``: ``P[Y_1 > v] = beta y / v`` for ``v >= max(beta y, kappa)``.

    ``max(kappa, beta y / U)`` is Pareto(1) with scale ``beta y`` when
    ``beta y >= kappa``; otherwise it has an atom of mass ``1 - beta y/kappa`` at
    ``kappa`` and the same Pareto tail above it.
    """
    if y < params.kappa:
        raise ContractError(f"y must be >= kappa = {params.kappa}, got {y!r}")
    return max(params.kappa, params.beta * y / rng.uniform())


class DomSpace:
    def __init__(self, params: DomParams):
        self.params = params

    def __contains__(self, s) -> bool:
        try:
            z, m = s
        except (TypeError, ValueError):
            return False
        return (z >= self.params.kappa and float(m).is_integer()
                and 1 <= m <= self.params.n_star(z))

    def __repr__(self):
        return f"DomSpace({self.params})"


class DominatingProcess(Kernel):
    """Markov kernel of ``D``; states are tuples ``(z, m)``."""

    exact_expectation = True

    def __init__(self, params: DomParams):
        self.params = params
        self.space = DomSpace(params)

    def sample(self, s, rng):
        z, m = s
        if m >= 2:
            return (z, m - 1)
        z = step_Y(z, self.params, rng)
        return (z, self.params.n_star(z))

    @staticmethod
    def n_fn(s) -> int:
        """Steps until the next jump of ``Z``: subsampling at ``n(z, m) = m`` observes every jump."""
        return int(s[1])

    def expect(self, f, s, steps=1):
        """Exact ``E[f(D_steps) | D_0 = s]`` for ``steps <= m`` (at most one jump)."""
        z, m = s
        if steps < m:
            return float(f((z, m - steps)))
        if steps > m:
            raise CapabilityError("exact expectation covers at most one jump of Z")
        return self.jump_expectation(lambda y: f((y, self.params.n_star(y))), z)

    def jump_expectation(self, g, z: float) -> float:
        """``E[g(Y_1) | Y_0 = z]`` by quadrature over the tail ``beta z / v``."""
        beta, kappa = self.params.beta, self.params.kappa
        bz = beta * z
        lo = max(bz, kappa)
        atom = max(0.0, 1.0 - bz / kappa)
        # v = lo * e^s turns the Pareto density into bz/lo * e^{-s} ds on [0, inf)
        def integrand(s):
            if s > MAX_LOG_SPAN:
                return 0.0
            return float(g(lo * math.exp(s))) * math.exp(-s)

        val, _ = integrate.quad(integrand, 0.0, math.inf, epsabs=0.0, epsrel=1e-12, limit=400)
        return (bz / lo) * val + atom * float(g(kappa))

    def advance_batch(self, s0, steps, keys):
        z, m = s0
        return _fast.advance(z, m, steps, keys, *self.params.fast_args)

    def hitting_batch(self, s0, target, kind, cap, keys):
        if not isinstance(target, Interval) or target.coord != 0:
            return None
        tau, _ = self.return_times(s0, target, kind, cap, keys)
        return tau

    def return_times(self, s0, target: Interval, kind: str, cap: int, keys):
        """``(tau, jumps)``: stopping times (-1 = censored) and number of jumps of ``Z`` used."""
        z, m = s0
        return _fast.return_times(z, m, target.lo, target.hi, kind == "return", cap, keys,
                                  *self.params.fast_args)


def alpha_beta(beta: float, tol: float = 1e-12) -> float:
    """Root in (0, 1) of ``ln(1 - a) = a ln(beta)`` by bisection.

    Works with ``g(a) = ln(1-a)/a - ln(beta)``, which decreases from
    ``-1 - ln(beta) > 0`` at ``a = 0`` to ``-inf`` at ``a = 1``.
    """
    if not 0.0 < beta < INV_E:
        raise DomainError(
            f"beta must lie in (0, 1/e); for beta >= 1/e, ln(1-a)/a < -1 <= ln(beta) has no root in (0,1), got {beta!r}")
    lb = math.log(beta)

    def g(a):
        return math.log1p(-a) / a - lb

    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def drift_constants(alpha: float, params: DomParams) -> tuple[float, float]:
    """``(beta', b')`` with ``P^m V <= beta' V + b' 1_C`` for ``V(z, m) = z**alpha``."""
    ab = alpha_beta(params.beta)
    if not 0.0 < alpha < ab:
        raise DomainError(f"alpha must lie in (0, alpha_beta = {ab:.12g}) so that beta' < 1, got {alpha!r}")
    ba = params.beta ** alpha
    return ba / (1.0 - alpha), (1.0 - ba) / (1.0 - alpha) * params.kappa ** alpha


def u_paths(u0: float, beta: float, horizon: int, keys) -> np.ndarray:
    """Workload paths, one row per stream key; ``E_j = -ln(draw j)``."""
    keys = np.asarray(keys, dtype=np.uint64)
    out = np.empty((keys.size, horizon + 1))
    out[:, 0] = u0
    shift = math.log(1.0 / beta)
    for j in range(horizon):
        e = -np.log(uniform_np(keys, np.full(keys.size, j, dtype=np.uint64)))
        out[:, j + 1] = np.maximum(out[:, j] + e - shift, 0.0)
    return out


def y_paths(y0: float, params: DomParams, horizon: int, keys) -> np.ndarray:
    """Paths of ``Y`` using :func:`step_Y`'s construction, one row per stream key."""
    keys = np.asarray(keys, dtype=np.uint64)
    out = np.empty((keys.size, horizon + 1))
    out[:, 0] = y0
    for j in range(horizon):
        u = uniform_np(keys, np.full(keys.size, j, dtype=np.uint64))
        out[:, j + 1] = np.maximum(params.kappa, params.beta * out[:, j] / u)
    return out


def y_steps(y: float, params: DomParams, keys) -> np.ndarray:
    """One-step draws of ``Y_1`` from ``Y_0 = y``, one per stream key."""
    return y_paths(y, params, 1, keys)[:, 1]

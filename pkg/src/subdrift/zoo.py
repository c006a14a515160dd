"""Reference chains with calibrated drift constants.

The birth-death "zoo" chain steps up with probability ``1/2 - d/(x+1)``
(clipped to ``[0, 1]``) and is polynomially ergodic for ``d > 0``.  With
``V = (x+1)**s`` the one-step drift is ``-(2ds - s(s-1)/2) (x+1)**(s-2)`` to
leading order, so ``phi(t) = c t**(1 - 2/s)`` works for ``c`` below that
constant.  The small set and ``b`` are found by the exact verifier:
``C = {0..x0}`` where ``x0`` is the last state with a negative margin and
``b`` is the largest deficit on ``C``.
"""
from dataclasses import dataclass

import numpy as np

from .chain.kernels import BirthDeathChain, FiniteKernel
from .chain.sets import Interval
from .drift import DoubleControl, PhiSubgeometric
from .errors import ContractError
from .scales import power


@dataclass(frozen=True)
class ZooCalibration:
    s: float
    d: float
    c: float
    lazy: float
    upper: int | None
    x0: int
    b: float
    checked_to: int

    @property
    def C(self) -> Interval:
        return Interval(0, self.x0)

    def kernel(self) -> BirthDeathChain:
        return zoo_chain(self.d, self.lazy, self.upper)

    @property
    def V(self):
        return power(self.s)

    def phi(self, t):
        return self.c * np.asarray(t, dtype=float) ** (1.0 - 2.0 / self.s)

    def phi_spec(self) -> PhiSubgeometric:
        return PhiSubgeometric(self.V, self.phi, self.b, self.C)

    def W(self):
        """``phi o V = c (x+1)**(s-2)``."""
        return power(self.s - 2.0, coef=self.c)

    def double_control_spec(self) -> DoubleControl:
        return DoubleControl(self.V, self.W(), self.b, self.C)

    def to_dict(self) -> dict:
        return {"s": self.s, "d": self.d, "c": self.c, "lazy": self.lazy, "upper": self.upper,
                "x0": self.x0, "b": self.b, "checked_to": self.checked_to}


def zoo_chain(d: float, lazy: float = 0.0, upper: int | None = None) -> BirthDeathChain:
    return BirthDeathChain(a=0.5, d=d, p_min=0.0, p_max=1.0, lazy=lazy, upper=upper)


def _deficits(kernel, V, W, states):
    """Exact ``max(PV - V + W, PW - W)`` per state (positive = needs ``b``)."""
    down, hold, up = kernel.step_probs(states)
    v, w = V(states), W(states)
    vu, vd = V(states + 1), V(np.maximum(states - 1, 0))
    wu, wd = W(states + 1), W(np.maximum(states - 1, 0))
    pv = down * vd + hold * v + up * vu
    pw = down * wd + hold * w + up * wu
    return np.maximum(pv - v + w, pw - w)


def calibrate_zoo(s: float, d: float, c: float, lazy: float = 0.0, upper: int | None = None,
                  x_max: int = 10_000) -> ZooCalibration:
    """Smallest ``C = {0..x0}`` and ``b`` making both double-control inequalities exact on ``0..x_max``.

    ``W = c (x+1)**(s-2)`` so the first inequality is the ``phi``-drift with
    ``phi(t) = c t**(1-2/s)``.
    """
    if s <= 2:
        raise ContractError("need s > 2")
    top = x_max if upper is None else min(x_max, upper)
    states = np.arange(top + 1)
    kernel = zoo_chain(d, lazy, upper)
    deficit = _deficits(kernel, power(s), power(s - 2.0, coef=c), states)
    bad = np.nonzero(deficit > 0)[0]
    if bad.size and bad[-1] >= top - 1 and upper is None:
        raise ContractError(f"drift still fails near x_max={x_max}; lower c or raise d")
    x0 = int(bad[-1]) if bad.size else 0
    b = float(deficit[: x0 + 1].max(initial=0.0))
    # leave relative headroom so rounding in later evaluations cannot flip a zero margin
    b = b * (1.0 + 1e-9) + 1e-12 if b > 0 else 0.0
    return ZooCalibration(float(s), float(d), float(c), float(lazy), upper, x0, b, top)


# inputs of the shipped calibrations; C and b are recomputed by calibrate_zoo
ZOO_S8 = dict(s=8.0, d=2.0, c=2.0)
ZOO_S4 = dict(s=4.0, d=1.0, c=1.0)
LAZY_BD50 = dict(s=4.0, d=1.0, c=1.0, lazy=0.5, upper=49)


def shipped(name: str) -> ZooCalibration:
    table = {"zoo-s8": ZOO_S8, "zoo-s4": ZOO_S4, "lazy-bd50": LAZY_BD50}
    if name not in table:
        raise ContractError(f"unknown zoo calibration {name!r}; choose from {sorted(table)}")
    return calibrate_zoo(**table[name])


def swap_chain() -> FiniteKernel:
    """Deterministic 2-cycle."""
    return FiniteKernel([[0.0, 1.0], [1.0, 0.0]], labels=["0", "1"])

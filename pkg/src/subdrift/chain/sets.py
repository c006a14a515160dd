"""Set predicates used as targets of stopping times and drift small sets."""
import math

import numpy as np

from ..errors import ContractError


class SetPredicate:
    def __contains__(self, x) -> bool:
        return bool(self.mask(np.asarray([x] if not isinstance(x, tuple) else [x]))[0])

    def mask(self, states) -> np.ndarray:
        """Vectorized membership over a batch of states."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise ContractError(f"{type(self).__name__} is not serializable")


class Interval(SetPredicate):
    """``{x : lo <= x[coord] <= hi}``; ``coord=None`` for scalar states."""

    def __init__(self, lo: float = -math.inf, hi: float = math.inf, coord: int | None = None):
        if lo > hi:
            raise ContractError(f"empty interval [{lo}, {hi}]")
        self.lo = float(lo)
        self.hi = float(hi)
        self.coord = coord

    def mask(self, states):
        s = np.asarray(states, dtype=float)
        v = s if self.coord is None else s[..., self.coord]
        return (v >= self.lo) & (v <= self.hi)

    def to_dict(self):
        return {"type": "interval", "lo": self.lo, "hi": self.hi, "coord": self.coord}

    def __repr__(self):
        c = "" if self.coord is None else f", coord={self.coord}"
        return f"Interval({self.lo:g}, {self.hi:g}{c})"


class FiniteSet(SetPredicate):
    def __init__(self, members):
        self.members = frozenset(int(m) for m in members)
        self._arr = np.array(sorted(self.members), dtype=np.int64)

    def mask(self, states):
        return np.isin(np.asarray(states, dtype=np.int64), self._arr)

    def to_dict(self):
        return {"type": "finite", "members": sorted(self.members)}

    def __repr__(self):
        return f"FiniteSet({sorted(self.members)})"


class LevelSet(SetPredicate):
    """``{x : scale(x) <= level}``."""

    def __init__(self, scale, level: float):
        self.scale = scale
        self.level = float(level)

    def mask(self, states):
        s = states if isinstance(states, np.ndarray) else np.asarray(states)
        return np.asarray(self.scale(s)) <= self.level

    def to_dict(self):
        if self.scale.spec is None:
            raise ContractError("level set over an unserializable scale")
        return {"type": "level", "scale": self.scale.spec, "level": self.level}

    def __repr__(self):
        return f"LevelSet({self.scale.name} <= {self.level:g})"


class Union(SetPredicate):
    def __init__(self, *parts: SetPredicate):
        self.parts = parts

    def mask(self, states):
        out = self.parts[0].mask(states)
        for p in self.parts[1:]:
            out = out | p.mask(states)
        return out

    def to_dict(self):
        return {"type": "union", "parts": [p.to_dict() for p in self.parts]}


class Everything(SetPredicate):
    def mask(self, states):
        return np.ones(np.shape(np.asarray(states))[:1], dtype=bool)

    def to_dict(self):
        return {"type": "everything"}


def from_dict(d: dict) -> SetPredicate:
    from ..scales import from_spec

    kind = d.get("type")
    if kind == "interval":
        return Interval(d.get("lo", -math.inf), d.get("hi", math.inf), d.get("coord"))
    if kind == "finite":
        return FiniteSet(d["members"])
    if kind == "level":
        return LevelSet(from_spec(d["scale"]), d["level"])
    if kind == "union":
        return Union(*(from_dict(p) for p in d["parts"]))
    if kind == "everything":
        return Everything()
    raise ContractError(f"unknown set type {kind!r}")

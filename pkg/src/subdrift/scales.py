"""Scale (Lyapunov) functions ``X -> [1, inf)``.

A :class:`Scale` is evaluated through its logarithm whenever one is available,
so functions like ``(x+1)**8`` or ``exp(x)`` do not overflow in intermediate
steps.  Evaluation is vectorized: integer-lattice states come in as int arrays,
dominating-process states ``(z, m)`` as arrays whose last axis has length 2.
"""
import math

import numpy as np

from .errors import ContractError


def _as_states(x):
    if isinstance(x, tuple):
        return np.asarray(x, dtype=float)
    return np.asarray(x)


class Scale:
    """A positive function on the state space with an optional log evaluator."""

    def __init__(self, fn=None, log_fn=None, name: str = "scale", spec: dict | None = None):
        if fn is None and log_fn is None:
            raise ContractError("Scale needs fn or log_fn")
        self._fn = fn
        self._log_fn = log_fn
        self.name = name
        self.spec = spec

    def __call__(self, x):
        x = _as_states(x)
        if self._log_fn is not None:
            out = np.exp(self._log_fn(x))
        else:
            out = np.asarray(self._fn(x), dtype=float)
        return out[()] if out.ndim == 0 else out

    def log(self, x):
        x = _as_states(x)
        if self._log_fn is not None:
            out = np.asarray(self._log_fn(x), dtype=float)
        else:
            out = np.log(np.asarray(self._fn(x), dtype=float))
        return out[()] if out.ndim == 0 else out

    def __pow__(self, a: float) -> "Scale":
        spec = {"op": "pow", "base": self.spec, "exponent": a} if self.spec else None
        return Scale(log_fn=lambda x: a * self.log(x), name=f"({self.name})^{a:g}", spec=spec)

    def __mul__(self, c: float) -> "Scale":
        if c <= 0:
            raise ContractError("scale multiplier must be positive")
        lc = math.log(c)
        spec = {"op": "mul", "base": self.spec, "factor": c} if self.spec else None
        return Scale(log_fn=lambda x: lc + self.log(x), name=f"{c:g}*{self.name}", spec=spec)

    __rmul__ = __mul__

    def __repr__(self):
        return f"Scale({self.name})"


def power(p: float, shift: float = 1.0, coef: float = 1.0) -> Scale:
    """``coef * (x + shift)**p`` on the integer lattice."""
    lc = math.log(coef)
    return Scale(log_fn=lambda x: lc + p * np.log(x + shift),
                 name=f"{coef:g}*(x+{shift:g})^{p:g}",
                 spec={"family": "power", "exponent": p, "shift": shift, "coef": coef})


def exponential(rate: float, coef: float = 1.0) -> Scale:
    """``coef * exp(rate * x)``."""
    lc = math.log(coef)
    return Scale(log_fn=lambda x: lc + rate * np.asarray(x, dtype=float),
                 name=f"{coef:g}*exp({rate:g}x)",
                 spec={"family": "exponential", "rate": rate, "coef": coef})


def constant(c: float = 1.0, pair: bool = False) -> Scale:
    """Constant scale; ``pair=True`` for dominating-process states ``(z, m)``."""
    lc = math.log(c)
    if pair:
        log_fn = lambda x: np.full(x.shape[:-1], lc)  # noqa: E731
    else:
        log_fn = lambda x: np.full(x.shape, lc)  # noqa: E731
    return Scale(log_fn=log_fn, name=f"{c:g}", spec={"family": "constant", "value": c, "pair": pair})


def dom_power(alpha: float, coef: float = 1.0) -> Scale:
    """``coef * z**alpha`` on dominating-process states ``(z, m)``."""
    lc = math.log(coef)
    scale = Scale(log_fn=lambda s: lc + alpha * np.log(s[..., 0]),
                  name=f"{coef:g}*z^{alpha:g}",
                  spec={"family": "dom_power", "alpha": alpha, "coef": coef})
    scale.dom_alpha = alpha
    scale.dom_coef = coef
    return scale


def table(values) -> Scale:
    """Scale given by a table indexed by finite state index."""
    vals = np.asarray(values, dtype=float)
    if np.any(vals < 1.0):
        raise ContractError("tabulated scale values must be >= 1")
    logs = np.log(vals)
    return Scale(log_fn=lambda x: logs[np.asarray(x, dtype=np.int64)], name="table",
                 spec={"family": "table", "values": vals.tolist()})


def from_spec(spec: dict) -> Scale:
    """Rebuild a scale from the dictionary produced by ``Scale.spec``."""
    if "op" in spec:
        base = from_spec(spec["base"])
        return base ** spec["exponent"] if spec["op"] == "pow" else base * spec["factor"]
    family = spec.get("family")
    args = {k: v for k, v in spec.items() if k != "family"}
    builders = {"power": lambda exponent, shift=1.0, coef=1.0: power(exponent, shift, coef), "exponential": lambda rate, coef=1.0: exponential(rate, coef),
                "constant": lambda value=1.0, pair=False: constant(value, pair), "dom_power": dom_power,
                "table": table}
    if family not in builders:
        raise ContractError(f"unknown scale family {family!r}")
    return builders[family](**args)

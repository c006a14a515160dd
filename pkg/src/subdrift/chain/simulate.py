"""Path simulation and stopping times."""
from dataclasses import dataclass, field

from ..errors import ContractError, StateSpaceError
from ..rng import RngStream

RETURN = "return"
HITTING = "hitting"
SUBSAMPLED_RETURN = "subsampled_return"


@dataclass
class Trajectory:
    states: list
    seed: int | None = None

    @property
    def length(self) -> int:
        return len(self.states) - 1


@dataclass(frozen=True)
class StoppingRecord:
    """A stopping time, or ``value=None`` when the path was censored at ``cap``.

    For subsampled returns ``value`` is the number of subsampling epochs and
    ``steps`` the number of chain transitions elapsed.
    """

    kind: str
    value: int | None
    cap: int
    steps: int | None = None

    @property
    def censored(self) -> bool:
        return self.value is None

    def __str__(self):
        return f"CENSORED({self.cap})" if self.censored else str(self.value)


def _checked(kernel, x):
    if kernel.space is not None and x not in kernel.space:
        raise StateSpaceError(x, kernel.space)
    return x


def simulate_path(kernel, x0, horizon: int, rng: RngStream) -> Trajectory:
    if horizon < 0:
        raise ContractError("horizon must be >= 0")
    x = _checked(kernel, x0)
    states = [x]
    for _ in range(horizon):
        x = _checked(kernel, kernel.sample(x, rng))
        states.append(x)
    return Trajectory(states, getattr(rng, "key", None))


def stopping_time(kernel, x0, target, kind: str, cap: int, rng: RngStream) -> StoppingRecord:
    """First ``n >= 1`` (``kind='return'``) or ``n >= 0`` (``'hitting'``) with the chain in ``target``."""
    if cap < 1:
        raise ContractError("cap must be >= 1")
    if kind not in (RETURN, HITTING):
        raise ContractError(f"kind must be 'return' or 'hitting', got {kind!r}")
    x = _checked(kernel, x0)
    if kind == HITTING and x in target:
        return StoppingRecord(kind, 0, cap)
    for n in range(1, cap + 1):
        x = _checked(kernel, kernel.sample(x, rng))
        if x in target:
            return StoppingRecord(kind, n, cap)
    return StoppingRecord(kind, None, cap)


def _epoch_length(n_fn, x) -> int:
    n = n_fn(x)
    if int(n) != n or n < 1:
        raise ContractError(f"subsampling rate must be a positive integer, got n({x!r}) = {n!r}")
    return int(n)


def subsampled_iterates(kernel, x0, n_fn, k_max: int, rng: RngStream) -> list:
    """``[(tau^k, Phi_{tau^k}) for k = 0..k_max]`` with ``tau^{k+1} = tau^k + n(Phi_{tau^k})``."""
    if k_max < 1:
        raise ContractError("k_max must be >= 1")
    x = _checked(kernel, x0)
    t = 0
    out = [(0, x)]
    for _ in range(k_max):
        for _ in range(_epoch_length(n_fn, x)):
            x = _checked(kernel, kernel.sample(x, rng))
            t += 1
        out.append((t, x))
    return out


@dataclass
class SubsampledPath:
    """Skeleton of one subsampled excursion: epoch start times and states."""

    record: StoppingRecord
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)


def subsampled_return_time(kernel, x0, n_fn, target, cap: int, rng: RngStream,
                           keep_skeleton: bool = False):
    """``inf{k >= 1 : Phi_{tau^k} in target}`` along the subsampled skeleton.

    ``cap`` bounds the number of epochs.  Returns a :class:`StoppingRecord`
    (with ``steps = tau^{value}``), or a :class:`SubsampledPath` when
    ``keep_skeleton`` is set.
    """
    if cap < 1:
        raise ContractError("cap must be >= 1")
    x = _checked(kernel, x0)
    t = 0
    times, states = [0], [x]
    for k in range(1, cap + 1):
        for _ in range(_epoch_length(n_fn, x)):
            x = _checked(kernel, kernel.sample(x, rng))
            t += 1
        if keep_skeleton:
            times.append(t)
            states.append(x)
        if x in target:
            rec = StoppingRecord(SUBSAMPLED_RETURN, k, cap, t)
            break
    else:
        rec = StoppingRecord(SUBSAMPLED_RETURN, None, cap, t)
    return SubsampledPath(rec, times, states) if keep_skeleton else rec

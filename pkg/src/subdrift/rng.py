"""Counter-based random streams.

Every replicate ``i`` of an experiment owns the stream keyed by
``stream_key(master_seed, i)``; draw ``j`` of that stream is a pure function of
``(key, j)``.  Nothing is shared between replicates, so results do not depend on
how replicates are spread over workers.

The draw function is the SplitMix64 output mix applied to ``key + (j+1)*phi``.
Three implementations produce bit-identical uniforms:

* :class:`RngStream` -- scalar, pure Python, used by generic kernels;
* :func:`uniform_np` -- vectorized numpy, used by the fallback backend;
* :func:`uniform_nb` -- scalar, compiled with numba for the hot loops.
"""
import math

import numpy as np

from ._accel import njit
from .errors import ContractError

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
INDEX_MULT = 0xD1B54A32D192ED03
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
INV_2_52 = 2.0 ** -52


def _mix_py(z: int) -> int:
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def check_seed(master_seed) -> int:
    seed = int(master_seed)
    if seed != master_seed or not 0 <= seed <= MASK64:
        raise ContractError(f"master_seed must be an integer in [0, 2**64), got {master_seed!r}")
    return seed


def stream_key(master_seed: int, index: int) -> int:
    """Key of replicate ``index`` under ``master_seed``."""
    seed = check_seed(master_seed)
    return _mix_py((_mix_py(seed) + (index + 1) * INDEX_MULT) & MASK64)


def stream_keys(master_seed: int, n: int, start: int = 0) -> np.ndarray:
    """Keys of replicates ``start .. start+n-1`` as a uint64 array."""
    seed = check_seed(master_seed)
    base = np.array([_mix_py(seed)], dtype=np.uint64)
    idx = np.arange(start + 1, start + n + 1, dtype=np.uint64)
    return _mix_np(base + idx * np.uint64(INDEX_MULT))


def _to_unit(bits):
    return ((bits >> 12) + 0.5) * INV_2_52


class RngStream:
    """Scalar view of one counter-based stream.

    Uniforms lie in ``[2**-53, 1 - 2**-53]``, so ``log`` and division are safe.
    """

    __slots__ = ("key", "counter")

    def __init__(self, key: int, counter: int = 0):
        self.key = int(key) & MASK64
        self.counter = int(counter)

    @classmethod
    def for_replicate(cls, master_seed: int, index: int) -> "RngStream":
        return cls(stream_key(master_seed, index))

    def uniform(self) -> float:
        self.counter += 1
        bits = _mix_py((self.key + self.counter * GOLDEN) & MASK64)
        return ((bits >> 12) + 0.5) * INV_2_52

    def exponential(self) -> float:
        return -math.log(self.uniform())

    def uniforms(self, n: int) -> np.ndarray:
        out = uniform_np(np.full(n, self.key, dtype=np.uint64),
                         np.arange(self.counter, self.counter + n, dtype=np.uint64))
        self.counter += n
        return out

    def __repr__(self):
        return f"RngStream(key={self.key:#018x}, counter={self.counter})"


def _mix_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


def uniform_np(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Draw number ``counters`` (0-based) from each stream in ``keys``."""
    keys = np.asarray(keys, dtype=np.uint64)
    counters = np.asarray(counters, dtype=np.uint64)
    bits = _mix_np(keys + (counters + np.uint64(1)) * np.uint64(GOLDEN))
    return _to_unit(bits).astype(np.float64)


_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U12 = np.uint64(12)
_U1 = np.uint64(1)
_MIX1 = np.uint64(MIX1)
_MIX2 = np.uint64(MIX2)
_GOLDEN = np.uint64(GOLDEN)


@njit
def uniform_nb(key, counter):
    """Scalar twin of :func:`uniform_np`; ``key`` and ``counter`` are uint64."""
    z = key + (counter + _U1) * _GOLDEN
    z = (z ^ (z >> _U30)) * _MIX1
    z = (z ^ (z >> _U27)) * _MIX2
    z = z ^ (z >> _U31)
    return (np.float64(z >> _U12) + 0.5) * INV_2_52

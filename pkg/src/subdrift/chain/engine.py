"""Reproducible parallel Monte Carlo.

Replicate ``i`` always runs on the stream keyed by ``(master_seed, i)`` and
results are gathered in replicate order before any reduction, so every output
is independent of the number of workers.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ContractError
from ..rng import RngStream, check_seed, stream_keys

DEFAULT_Z = 3.0
CHUNK = 4096


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float
    replicates: int
    censored_count: int = 0
    nonfinite_count: int = 0

    def ci(self, z: float = DEFAULT_Z) -> tuple[float, float]:
        return self.mean - z * self.std_error, self.mean + z * self.std_error

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(values, censored_count: int = 0) -> Estimate:
    """Mean and standard error of the finite entries of ``values``."""
    v = np.asarray(values, dtype=float)
    finite = np.isfinite(v)
    good = v[finite]
    if good.size == 0:
        return Estimate(float("nan"), float("nan"), int(v.size), censored_count, int((~finite).sum()))
    mean = float(good.mean())
    se = float(good.std(ddof=1) / np.sqrt(good.size)) if good.size > 1 else 0.0
    return Estimate(mean, se, int(v.size), censored_count, int((~finite).sum()))


def _chunks(n: int, size: int = CHUNK):
    return [(s, min(n, s + size)) for s in range(0, n, size)]


def _run(tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda t: t(), tasks))


def map_replicates(fn, replicates: int, master_seed: int, workers: int = 1) -> list:
    """``[fn(RngStream for replicate i) for i in range(replicates)]``."""
    check_seed(master_seed)

    def chunk(lo, hi):
        keys = stream_keys(master_seed, hi - lo, lo)
        return lambda: [fn(RngStream(int(k))) for k in keys]

    parts = _run([chunk(lo, hi) for lo, hi in _chunks(replicates)], workers)
    return [v for part in parts for v in part]


def map_batches(batch_fn, replicates: int, master_seed: int, workers: int = 1) -> np.ndarray:
    """Concatenate ``batch_fn(keys)`` over replicate chunks in replicate order."""
    check_seed(master_seed)

    def chunk(lo, hi):
        keys = stream_keys(master_seed, hi - lo, lo)
        return lambda: np.asarray(batch_fn(keys))

    parts = _run([chunk(lo, hi) for lo, hi in _chunks(replicates)], workers)
    return np.concatenate(parts) if parts else np.empty(0)


def mc_expectation(sampler, replicates: int, master_seed: int, workers: int = 1) -> Estimate:
    """Monte Carlo mean of ``sampler(rng)``; non-finite draws are excluded and counted."""
    if replicates < 2:
        raise ContractError("replicates must be >= 2")
    values = map_replicates(lambda rng: float(sampler(rng)), replicates, master_seed, workers)
    return summarize(values)

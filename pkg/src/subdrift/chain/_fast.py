"""Hot loops for the birth-death chain: numba kernels and numpy twins."""
import numpy as np

from .._accel import backend, njit
from ..rng import uniform_nb, uniform_np


@njit
def _bd_step_nb(x, u, a, d, p_min, p_max, lazy, upper):
    if u < lazy:
        return x
    p = min(max(a - d / (x + 1.0), p_min), p_max)
    if u < lazy + (1.0 - lazy) * p:
        if upper >= 0 and x >= upper:
            return x
        return x + 1
    if x > 0:
        return x - 1
    return 0


@njit
def _bd_advance_nb(x0, steps, keys, a, d, p_min, p_max, lazy, upper):
    out = np.empty(keys.shape[0], dtype=np.int64)
    for i in range(keys.shape[0]):
        x = x0
        for j in range(steps):
            x = _bd_step_nb(x, uniform_nb(keys[i], np.uint64(j)), a, d, p_min, p_max, lazy, upper)
        out[i] = x
    return out


@njit
def _bd_hitting_nb(x0, lo, hi, is_return, cap, keys, a, d, p_min, p_max, lazy, upper):
    out = np.full(keys.shape[0], -1, dtype=np.int64)
    for i in range(keys.shape[0]):
        x = x0
        if not is_return and lo <= x <= hi:
            out[i] = 0
            continue
        for t in range(cap):
            x = _bd_step_nb(x, uniform_nb(keys[i], np.uint64(t)), a, d, p_min, p_max, lazy, upper)
            if lo <= x <= hi:
                out[i] = t + 1
                break
    return out


def _bd_step_np(x, u, a, d, p_min, p_max, lazy, upper):
    p = np.clip(a - d / (x + 1.0), p_min, p_max)
    up = u < lazy + (1.0 - lazy) * p
    if upper >= 0:
        up_to = np.where(x >= upper, x, x + 1)
    else:
        up_to = x + 1
    moved = np.where(up, up_to, np.maximum(x - 1, 0))
    return np.where(u < lazy, x, moved)


def _bd_advance_np(x0, steps, keys, a, d, p_min, p_max, lazy, upper):
    x = np.full(keys.shape[0], x0, dtype=np.int64)
    for j in range(steps):
        u = uniform_np(keys, np.full(keys.shape[0], j, dtype=np.uint64))
        x = _bd_step_np(x, u, a, d, p_min, p_max, lazy, upper)
    return x


def _bd_hitting_np(x0, lo, hi, is_return, cap, keys, a, d, p_min, p_max, lazy, upper):
    n = keys.shape[0]
    out = np.full(n, -1, dtype=np.int64)
    if not is_return and lo <= x0 <= hi:
        out[:] = 0
        return out
    idx = np.arange(n)
    x = np.full(n, x0, dtype=np.int64)
    for t in range(cap):
        if idx.size == 0:
            break
        u = uniform_np(keys[idx], np.full(idx.size, t, dtype=np.uint64))
        x = _bd_step_np(x, u, a, d, p_min, p_max, lazy, upper)
        hit = (x >= lo) & (x <= hi)
        out[idx[hit]] = t + 1
        idx, x = idx[~hit], x[~hit]
    return out


def bd_advance(x0, steps, keys, a, d, p_min, p_max, lazy, upper):
    fn = _bd_advance_nb if backend() == "numba" else _bd_advance_np
    return fn(x0, steps, keys, a, d, p_min, p_max, lazy, upper)


def bd_hitting(x0, lo, hi, is_return, cap, keys, a, d, p_min, p_max, lazy, upper):
    fn = _bd_hitting_nb if backend() == "numba" else _bd_hitting_np
    return fn(x0, float(lo), float(hi), bool(is_return), cap, keys, a, d, p_min, p_max, lazy, upper)

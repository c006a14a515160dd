"""Hot loops for the dominating process ``D = (Z, M)``.

``Z`` only moves when the countdown ``M`` reaches 1; a jump draws one uniform
``u`` and sets ``Z' = max(kappa, beta Z / u)``, ``M' = n*(Z')``.  Replicate
``i`` uses draw ``j`` of stream ``keys[i]`` for its ``j``-th jump.

n* family codes: 0 constant, 1 power ``ceil(z**gamma)``, 2 log-power
``ceil((ln z)**gamma)``; both ceilings are floored at 1.
"""
import math

import numpy as np

from .._accel import backend, njit
from ..rates import CEIL_SLACK
from ..rng import uniform_nb, uniform_np

NSTAR_CONSTANT, NSTAR_POWER, NSTAR_LOG_POWER = 0, 1, 2


@njit
def _nstar_nb(z, code, gamma, const):
    if code == NSTAR_CONSTANT:
        return const
    if code == NSTAR_POWER:
        v = z ** gamma
    else:
        v = math.log(z) ** gamma if z > 1.0 else 0.0
    c = math.ceil(v - CEIL_SLACK * max(1.0, abs(v)))
    return max(1, np.int64(c))


def _nstar_np(z, code, gamma, const):
    z = np.asarray(z, dtype=float)
    if code == NSTAR_CONSTANT:
        return np.full(z.shape, const, dtype=np.int64)
    if code == NSTAR_POWER:
        v = z ** gamma
    else:
        v = np.where(z > 1.0, np.log(np.maximum(z, 1.0)) ** gamma, 0.0)
    c = np.ceil(v - CEIL_SLACK * np.maximum(1.0, np.abs(v)))
    return np.maximum(1, c.astype(np.int64))


@njit
def _return_nb(z0, m0, lo, hi, is_return, cap, keys, beta, kappa, code, gamma, const):
    n = keys.shape[0]
    tau = np.full(n, -1, dtype=np.int64)
    jumps = np.zeros(n, dtype=np.int64)
    for i in range(n):
        z = z0
        m = m0
        if not is_return and lo <= z <= hi:
            tau[i] = 0
            continue
        t = 0
        k = 0
        while True:
            if m >= 2:
                if lo <= z <= hi:
                    if t + 1 <= cap:
                        tau[i] = t + 1
                    break
                t += m - 1
                m = 1
            t += 1
            if t > cap:
                break
            u = uniform_nb(keys[i], np.uint64(k))
            k += 1
            z = max(kappa, beta * z / u)
            m = _nstar_nb(z, code, gamma, const)
            if lo <= z <= hi:
                tau[i] = t
                break
        jumps[i] = k
    return tau, jumps


def _return_np(z0, m0, lo, hi, is_return, cap, keys, beta, kappa, code, gamma, const):
    n = keys.shape[0]
    tau = np.full(n, -1, dtype=np.int64)
    jumps = np.zeros(n, dtype=np.int64)
    if not is_return and lo <= z0 <= hi:
        tau[:] = 0
        return tau, jumps
    if m0 >= 2 and lo <= z0 <= hi:
        if cap >= 1:
            tau[:] = 1
        return tau, jumps
    idx = np.arange(n)
    z = np.full(n, float(z0))
    t = np.full(n, m0 - 1, dtype=np.int64)
    k = 0
    while idx.size:
        t = t + 1
        alive = t <= cap
        idx, z, t = idx[alive], z[alive], t[alive]
        if idx.size == 0:
            break
        u = uniform_np(keys[idx], np.full(idx.size, k, dtype=np.uint64))
        k += 1
        jumps[idx] = k
        z = np.maximum(kappa, beta * z / u)
        m = _nstar_np(z, code, gamma, const)
        hit = (z >= lo) & (z <= hi)
        tau[idx[hit]] = t[hit]
        keep = ~hit
        idx, z, t, m = idx[keep], z[keep], t[keep], m[keep]
        t = t + (m - 1)
    return tau, jumps


@njit
def _advance_nb(z0, m0, steps, keys, beta, kappa, code, gamma, const):
    n = keys.shape[0]
    out = np.empty((n, 2))
    for i in range(n):
        z = z0
        m = m0
        k = 0
        for _ in range(steps):
            if m >= 2:
                m -= 1
            else:
                u = uniform_nb(keys[i], np.uint64(k))
                k += 1
                z = max(kappa, beta * z / u)
                m = _nstar_nb(z, code, gamma, const)
        out[i, 0] = z
        out[i, 1] = m
    return out


def _advance_np(z0, m0, steps, keys, beta, kappa, code, gamma, const):
    n = keys.shape[0]
    z = np.full(n, float(z0))
    m = np.full(n, m0, dtype=np.int64)
    k = np.zeros(n, dtype=np.uint64)
    for _ in range(steps):
        jump = m < 2
        m = np.where(jump, m, m - 1)
        if jump.any():
            u = uniform_np(keys[jump], k[jump])
            k[jump] += np.uint64(1)
            z[jump] = np.maximum(kappa, beta * z[jump] / u)
            m[jump] = _nstar_np(z[jump], code, gamma, const)
    return np.column_stack([z, m.astype(float)])


def nstar_value(z, code, gamma, const):
    return int(_nstar_nb(float(z), code, gamma, const)) if backend() == "numba" else int(
        _nstar_np(z, code, gamma, const))


def return_times(z0, m0, lo, hi, is_return, cap, keys, beta, kappa, code, gamma, const):
    fn = _return_nb if backend() == "numba" else _return_np
    return fn(float(z0), int(m0), float(lo), float(hi), bool(is_return), int(cap),
              np.asarray(keys, dtype=np.uint64), float(beta), float(kappa), int(code), float(gamma), int(const))


def advance(z0, m0, steps, keys, beta, kappa, code, gamma, const):
    fn = _advance_nb if backend() == "numba" else _advance_np
    return fn(float(z0), int(m0), int(steps), np.asarray(keys, dtype=np.uint64), float(beta),
              float(kappa), int(code), float(gamma), int(const))

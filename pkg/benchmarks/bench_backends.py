"""Numba vs numpy backends on the hot simulation kernels.

    python benchmarks/bench_backends.py [--replicates N] [--repeat K]

Each kernel runs once per backend to warm up (numba compiles on first call),
then ``--repeat`` timed runs; the best time is reported together with a check
that both backends return identical arrays.
"""
import argparse
import os
import time

import numpy as np

from subdrift.chain import BirthDeathChain
from subdrift.chain.sets import Interval
from subdrift.domproc import DominatingProcess, DomParams
from subdrift.rng import stream_keys


def cases(replicates: int):
    keys = stream_keys(12345, replicates)
    bd = BirthDeathChain(a=0.5, d=1.0)
    dom = DominatingProcess(DomParams(0.1, 1.0, "power", 0.2))
    C = dom.params.small_set
    return {
        "bd_hitting (zoo walk, x0=20, cap=1e5)": lambda: bd.hitting_batch(20, Interval(0, 0), "return", 100_000, keys),
        "bd_advance (1000 steps)": lambda: bd.advance_batch(20, 1000, keys),
        "domproc return times (z=1e3)": lambda: dom.return_times((1e3, 1), C, "return", 10**6, keys)[0],
        "domproc advance (200 steps)": lambda: dom.advance_batch((1e3, 4), 200, keys)[:, 0],
    }


def timed(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, np.asarray(out)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--replicates", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"{'kernel':42s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}  equal")
    for name, fn in cases(args.replicates).items():
        res = {}
        for be in ("numba", "numpy"):
            os.environ["SUBDRIFT_BACKEND"] = be
            fn()
            res[be] = timed(fn, args.repeat)
        os.environ.pop("SUBDRIFT_BACKEND", None)
        (tn, an), (tp, ap_) = res["numba"], res["numpy"]
        print(f"{name:42s} {tn:10.4f} {tp:10.4f} {tp / tn:8.1f}x  {np.array_equal(an, ap_)}")


if __name__ == "__main__":
    main()

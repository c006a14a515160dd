
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from subdrift.chain import (BirthDeathChain, Everything, FiniteKernel, FiniteSet, FunctionKernel, IdentityKernel,
                            IntegerRange, Interval, LevelSet, Union, map_batches, map_replicates,
                            matrix_power_distribution, mc_expectation, simulate_path, stationary_vector,
                            stopping_time, subsampled_iterates, subsampled_return_time, summarize)
from subdrift.chain.sets import from_dict
from subdrift.domproc import DominatingProcess, DomParams, y_paths
from subdrift.errors import CapabilityError, ContractError, StateSpaceError
from subdrift.rng import RngStream, stream_key, stream_keys, uniform_nb, uniform_np
from subdrift.scales import power

SWAP = [[0.0, 1.0], [1.0, 0.0]]
LAZY3 = [[0.5, 0.5, 0.0], [0.25, 0.5, 0.25], [0.0, 0.5, 0.5]]


# ---------------------------------------------------------------- rng


@given(st.integers(0, 2**64 - 1), st.integers(0, 10_000))
def test_three_rng_implementations_agree_bitwise(key, j):
    s = RngStream(key, j)
    a = s.uniform()
    b = float(uniform_np(np.array([key], dtype=np.uint64), np.array([j], dtype=np.uint64))[0])
    c = float(uniform_nb(np.uint64(key), np.uint64(j)))
    assert a == b == c
    assert 0.0 < a < 1.0


def test_stream_keys_match_scalar_keys():
    keys = stream_keys(42, 10, start=5)
    assert [int(k) for k in keys] == [stream_key(42, i) for i in range(5, 15)]


def test_uniforms_look_uniform():
    u = RngStream(stream_key(1, 0)).uniforms(200_000)
    assert stats.kstest(u, "uniform").pvalue > 1e-3


def test_negative_seed_rejected():
    with pytest.raises(ContractError):
        stream_key(-1, 0)


# ---------------------------------------------------------------- engine


def test_constant_sampler_has_zero_error():
    est = mc_expectation(lambda rng: 2.5, 100, master_seed=3)
    assert est.mean == 2.5 and est.std_error == 0.0


def test_exponential_sampler_mean():
    est = mc_expectation(lambda rng: rng.exponential(), 200_000, master_seed=5, workers=4)
    assert abs(est.mean - 1.0) <= 4 * est.std_error


def test_nonfinite_draws_counted_not_averaged():
    est = summarize([1.0, np.inf, 3.0, np.nan])
    assert est.mean == 2.0 and est.nonfinite_count == 2 and est.replicates == 4


def test_replicates_must_be_at_least_two():
    with pytest.raises(ContractError):
        mc_expectation(lambda rng: 1.0, 1, master_seed=0)


@pytest.mark.parametrize("workers", [1, 2, 7])
def test_results_independent_of_worker_count(workers):
    base = map_replicates(lambda rng: rng.uniform(), 10_000, 11, workers=1)
    assert map_replicates(lambda rng: rng.uniform(), 10_000, 11, workers=workers) == base
    b1 = map_batches(lambda keys: uniform_np(keys, np.zeros(len(keys), dtype=np.uint64)), 9000, 11, 1)
    bw = map_batches(lambda keys: uniform_np(keys, np.zeros(len(keys), dtype=np.uint64)), 9000, 11, workers)
    assert np.array_equal(b1, bw)
    assert np.array_equal(b1, np.array(base[:9000]))


def test_estimate_ci():
    lo, hi = summarize([0.0, 2.0]).ci(2.0)
    assert lo == pytest.approx(1 - 2.0) and hi == pytest.approx(1 + 2.0)


# ---------------------------------------------------------------- kernels and sets


def test_finite_kernel_validation():
    with pytest.raises(ContractError):
        FiniteKernel([[0.5, 0.4], [0.0, 1.0]])
    with pytest.raises(ContractError):
        FiniteKernel([[1.0, 0.0]])
    with pytest.raises(ContractError):
        FiniteKernel([[1.5, -0.5], [0.0, 1.0]])


def test_finite_expectation_is_row_times_f():
    k = FiniteKernel(LAZY3)
    f = lambda x: np.asarray(x, dtype=float) ** 2 + 1  # noqa: E731
    assert k.expect(f, 1) == pytest.approx(0.25 * 1 + 0.5 * 2 + 0.25 * 5)


def test_birth_death_matrix_matches_step_probs():
    bd = BirthDeathChain(a=0.5, d=1.0, lazy=0.3, upper=20)
    P = bd.to_matrix()
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-12)
    for x in (0, 5, 20):
        f = lambda s: np.asarray(s, dtype=float) ** 3  # noqa: E731
        assert bd.expect(f, x, 7) == pytest.approx(matrix_power_distribution(bd, x, 7) @ f(np.arange(21)))


def test_unbounded_birth_death_has_no_matrix():
    with pytest.raises(CapabilityError):
        BirthDeathChain(d=1.0).to_matrix()


def test_set_predicates_and_roundtrip():
    sets = [Interval(0, 3), FiniteSet([1, 5]), LevelSet(power(2.0), 10.0), Union(Interval(0, 0), FiniteSet([9])),
            Everything()]
    for s in sets:
        again = from_dict(s.to_dict())
        xs = np.arange(12)
        assert np.array_equal(s.mask(xs), again.mask(xs))
    assert 2 in LevelSet(power(2.0), 10.0) and 3 not in LevelSet(power(2.0), 10.0)


def test_interval_on_pair_coordinate():
    C = Interval(1.0, 10.0, coord=0)
    assert (5.0, 3) in C and (11.0, 1) not in C


# ---------------------------------------------------------------- simulation


def test_identity_path():
    assert simulate_path(IdentityKernel(), 5, 3, RngStream(1)).states == [5, 5, 5, 5]


def test_swap_path():
    assert simulate_path(FiniteKernel(SWAP), 0, 2, RngStream(1)).states == [0, 1, 0]


def test_dom_countdown_step():
    d = DominatingProcess(DomParams(0.1, 1.0, "power", 0.5))
    tr = simulate_path(d, (16.0, 3), 1, RngStream(2))
    assert tr.states[1] == (16.0, 2)


def test_out_of_space_state_reported():
    bad = FunctionKernel(lambda x, rng: -1, IntegerRange(0, None))
    with pytest.raises(StateSpaceError, match="-1"):
        simulate_path(bad, 0, 2, RngStream(0))


def test_stopping_time_examples():
    rng = RngStream(3)
    assert stopping_time(IdentityKernel(), 4, FiniteSet([4]), "hitting", 10, rng).value == 0
    rec = stopping_time(IdentityKernel(), 4, FiniteSet([0]), "return", 100, rng)
    assert rec.censored and rec.cap == 100 and str(rec) == "CENSORED(100)"
    assert stopping_time(FiniteKernel(SWAP), 0, FiniteSet([0]), "return", 10, rng).value == 2


@given(st.integers(0, 2**32), st.integers(1, 60), st.integers(1, 60))
def test_raising_cap_never_changes_uncensored_times(seed, cap1, extra):
    bd = BirthDeathChain(a=0.5, d=0.5)
    r1 = stopping_time(bd, 3, Interval(0, 0), "return", cap1, RngStream(seed))
    r2 = stopping_time(bd, 3, Interval(0, 0), "return", cap1 + extra, RngStream(seed))
    if not r1.censored:
        assert r2.value == r1.value


def test_batch_hitting_matches_scalar(each_backend):
    bd = BirthDeathChain(a=0.5, d=1.0)
    keys = stream_keys(9, 300)
    batch = bd.hitting_batch(6, Interval(0, 1), "return", 5000, keys)
    scalar = [stopping_time(bd, 6, Interval(0, 1), "return", 5000, RngStream(int(k))) for k in keys]
    assert [(-1 if r.censored else r.value) for r in scalar] == list(batch)


def test_batch_advance_matches_scalar(each_backend):
    bd = BirthDeathChain(a=0.5, d=1.0, lazy=0.2, upper=30)
    keys = stream_keys(4, 200)
    batch = bd.advance_batch(10, 25, keys)
    scalar = [simulate_path(bd, 10, 25, RngStream(int(k))).states[-1] for k in keys]
    assert list(batch) == scalar


def test_subsampled_iterates_examples():
    bd = BirthDeathChain(a=0.5, d=1.0)
    raw = simulate_path(bd, 5, 4, RngStream(8)).states
    it = subsampled_iterates(bd, 5, lambda x: 1, 4, RngStream(8))
    assert [t for t, _ in it] == [0, 1, 2, 3, 4] and [x for _, x in it] == raw
    assert [t for t, _ in subsampled_iterates(bd, 5, lambda x: 3, 2, RngStream(8))] == [0, 3, 6]
    with pytest.raises(ContractError):
        subsampled_iterates(bd, 5, lambda x: 0, 2, RngStream(8))


@given(st.integers(0, 2**32))
def test_subsampled_times_telescope(seed):
    bd = BirthDeathChain(a=0.5, d=1.0)
    n_fn = lambda x: 1 + x // 3  # noqa: E731
    it = subsampled_iterates(bd, 7, n_fn, 6, RngStream(seed))
    for (t0, x0), (t1, _) in zip(it, it[1:]):
        assert t1 - t0 == n_fn(x0)


def test_subsampled_return_reduces_to_plain_return():
    bd = BirthDeathChain(a=0.5, d=1.0)
    for seed in range(20):
        a = subsampled_return_time(bd, 4, lambda x: 1, Interval(0, 0), 10_000, RngStream(seed))
        b = stopping_time(bd, 4, Interval(0, 0), "return", 10_000, RngStream(seed))
        assert a.value == b.value == a.steps


def test_subsampled_return_in_one_epoch():
    rec = subsampled_return_time(FiniteKernel(SWAP), 0, lambda x: 2, FiniteSet([0]), 5, RngStream(0))
    assert rec.value == 1 and rec.steps == 2


def test_dom_jump_times_are_the_subsampled_times():
    p = DomParams(0.1, 1.0, "power", 0.5)
    d = DominatingProcess(p)
    for seed in range(10):
        path = simulate_path(d, (50.0, 1), 200, RngStream(seed)).states
        jumps = [0] + [t for t in range(1, len(path)) if path[t - 1][1] == 1]
        it = subsampled_iterates(d, (50.0, 1), DominatingProcess.n_fn, 5, RngStream(seed))
        times = [t for t, _ in it]
        assert times == jumps[: len(times)]
        # countdown: m drops by one until 1, then resets to n*(z)
        for (z0, m0), (z1, m1) in zip(path, path[1:]):
            assert (z1, m1) == (z0, m0 - 1) if m0 > 1 else m1 == p.n_star(z1)


def test_dom_subsampled_return_matches_y_return():
    p = DomParams(0.1, 1.0, "power", 0.3)
    d = DominatingProcess(p)
    C = p.small_set
    n = 4000
    bars = [subsampled_return_time(d, (200.0, 1), DominatingProcess.n_fn, C, 10**5, RngStream(stream_key(1, i))).value
            for i in range(n)]
    keys = stream_keys(2, n)
    ys = y_paths(200.0, p, 60, keys)
    in_c = (ys[:, 1:] >= p.kappa) & (ys[:, 1:] <= p.kappa / p.beta)
    direct = np.where(in_c.any(axis=1), in_c.argmax(axis=1) + 1, 10**6)
    assert stats.ks_2samp(bars, direct).pvalue > 1e-3


# ---------------------------------------------------------------- matrix


def test_matrix_power_examples():
    k = FiniteKernel(LAZY3)
    assert np.array_equal(matrix_power_distribution(k, 1, 0), [0, 1, 0])
    assert np.array_equal(matrix_power_distribution(FiniteKernel(SWAP), 0, 2), [1, 0])
    pi = stationary_vector(k)
    w, v = np.linalg.eig(np.array(LAZY3).T)
    oracle = np.real(v[:, np.argmax(np.real(w))])
    oracle /= oracle.sum()
    assert np.allclose(pi, oracle) and np.allclose(pi, [0.25, 0.5, 0.25])
    row = matrix_power_distribution(k, 0, 50)
    assert np.allclose(row, pi, atol=1e-8) and abs(row.sum() - 1) < 1e-10


def test_matrix_power_needs_finite_kernel():
    with pytest.raises(CapabilityError):
        matrix_power_distribution(IdentityKernel(), 0, 2)


def test_empirical_law_matches_matrix_power():
    k = FiniteKernel(LAZY3)
    ends = k.advance_batch(0, 5, stream_keys(77, 100_000))
    counts = np.bincount(ends, minlength=3)
    expected = matrix_power_distribution(k, 0, 5) * ends.size
    assert stats.chisquare(counts, expected).pvalue > 1e-3

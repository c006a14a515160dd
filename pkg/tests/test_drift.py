import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from subdrift.chain import BirthDeathChain, Everything, FiniteKernel, FiniteSet, IdentityKernel, Interval
from subdrift.domproc import DominatingProcess, DomParams, drift_constants
from subdrift.drift import (DoubleControl, Nested, OneStepGeometric, Subsampled, default_grid, nested_from_rate,
                            verify_double_control, verify_nested_family, verify_onestep, verify_subsampled,
                            wnorm_difference_diagnostic)
from subdrift.errors import CapabilityError, ContractError
from subdrift.rates import make_R
from subdrift.scales import constant, dom_power, exponential, power, table
from subdrift.zoo import calibrate_zoo, shipped, swap_chain

GEO_CHAIN = BirthDeathChain(a=0.2)
GEO_W = exponential(math.log(1.1))


@pytest.mark.parametrize("name", ["zoo-s8", "zoo-s4", "lazy-bd50"])
def test_shipped_calibrations_pass_exactly(name):
    cal = shipped(name)
    kernel = cal.kernel()
    hi = cal.checked_to
    grid = default_grid(cal.V, 0, hi, cal.C)
    dc = verify_double_control(kernel, cal.double_control_spec(), grid, mode="exact")
    assert dc.verdict == "PASS", dc.fail_states[:5]
    phi = verify_onestep(kernel, cal.phi_spec(), grid, mode="exact")
    assert phi.verdict == "PASS"
    # the phi-drift and the first double-control track are the same inequality
    assert np.allclose(phi.margins["drift"], dc.margins["V"], rtol=1e-9, atol=1e-9)


def test_calibration_is_tight():
    cal = shipped("zoo-s4")
    grid = list(range(cal.x0 + 1))
    smaller = DoubleControl(cal.V, cal.W(), cal.b * 0.999, cal.C)
    assert verify_double_control(cal.kernel(), smaller, grid, mode="exact").verdict == "FAIL"
    with pytest.raises(ContractError):
        calibrate_zoo(s=2.0, d=1.0, c=1.0)


def test_identity_geometric_fails_everywhere_off_C():
    spec = OneStepGeometric(power(1.0), 0.5, 0.0, Interval(0, 0))
    cert = verify_onestep(IdentityKernel(), spec, range(0, 20))
    assert cert.verdict == "FAIL"
    assert cert.fail_states == list(range(0, 20))
    assert cert.margins["drift"][3] == pytest.approx(-0.5 * 4)


def test_swap_with_trivial_scale_passes_at_zero_margin():
    beta = 0.3
    spec = OneStepGeometric(constant(1.0), beta, 1 - beta, Everything())
    cert = verify_onestep(swap_chain(), spec, [0, 1])
    assert cert.passed
    assert np.allclose(cert.margins["drift"], 0.0, atol=1e-12)


def test_double_control_unit_W_second_track_zero():
    cal = shipped("zoo-s4")
    spec = DoubleControl(cal.V, constant(1.0), cal.b, cal.C)
    grid = list(range(0, 200, 7))
    cert = verify_double_control(cal.kernel(), spec, grid, mode="exact")
    off_c = [i for i, x in enumerate(grid) if x not in cal.C]
    assert np.allclose(cert.margins["W"][off_c], 0.0, atol=1e-12)


def test_double_control_W_equal_V_fails():
    cal = shipped("zoo-s4")
    spec = DoubleControl(cal.V, cal.V, cal.b, cal.C)
    cert = verify_double_control(cal.kernel(), spec, list(range(0, 60)), mode="exact")
    assert cert.verdict == "FAIL"
    assert all(x > cal.x0 or x in cert.fail_states for x in cert.fail_states)


def _dom(nstar="power", gamma=0.2, const=1):
    return DominatingProcess(DomParams(0.1, 1.0, nstar, gamma, const))


def _dom_grid(dom, zs):
    return [(float(z), dom.params.n_star(float(z))) for z in zs]


def test_subsampled_dominating_process_exact_margins():
    alpha = 0.3
    dom = _dom()
    bp, b = drift_constants(alpha, dom.params)
    W = dom_power(alpha)
    C = dom.params.small_set
    zs = np.geomspace(1.0, 1e8, 33)
    grid = _dom_grid(dom, zs)
    claimed = 0.8
    cert = verify_subsampled(dom, Subsampled(W, dom.n_fn, claimed, b, C), grid, mode="exact")
    assert cert.passed
    for (z, _), m in zip(grid, cert.margins["drift"]):
        if z > 10.0:
            assert m == pytest.approx((claimed - bp) * z ** alpha, rel=1e-8)
    # at beta' itself the off-C margin vanishes and the top of C is tight
    tight = verify_subsampled(dom, Subsampled(W, dom.n_fn, bp, b, C), grid, mode="exact")
    assert tight.passed
    margins = tight.margins["drift"]
    scale = np.array([z ** alpha for z, _ in grid])
    assert np.max(np.abs(margins[zs > 10.0]) / scale[zs > 10.0]) < 1e-8
    top = verify_subsampled(dom, Subsampled(W, dom.n_fn, bp, b, C), [(10.0, dom.params.n_star(10.0))],
                            mode="exact")
    assert top.margins["drift"][0] == pytest.approx(b, rel=1e-8)


def test_subsampled_with_unit_schedule_matches_onestep():
    C = Interval(0, 0)
    grid = list(range(0, 40))
    one = verify_onestep(GEO_CHAIN, OneStepGeometric(GEO_W, 0.95, 0.07, C), grid)
    sub = verify_subsampled(GEO_CHAIN, Subsampled(GEO_W, lambda x: 1, 0.95, 0.07, C), grid)
    assert one.passed and sub.passed
    assert np.allclose(one.margins["drift"], sub.margins["drift"], rtol=1e-12)


def test_subsampled_rejects_bad_schedule():
    with pytest.raises(ContractError):
        verify_subsampled(GEO_CHAIN, Subsampled(GEO_W, lambda x: 0, 0.9, 0.1, Interval(0, 0)), [1])
    with pytest.raises(ContractError):
        verify_subsampled(GEO_CHAIN, Subsampled(GEO_W, lambda x: 1.5, 0.9, 0.1, Interval(0, 0)), [1])
    with pytest.raises(ContractError):
        Subsampled(GEO_W, lambda x: 1, 1.0, 0.1, Interval(0, 0))


def test_nested_family_from_geometric_rate_on_dominating_process():
    alpha = 0.3
    dom = _dom("constant", 0.0, 1)
    bp, b = drift_constants(alpha, dom.params)
    R = make_R("geometric", kappa=1.0 / bp)
    spec = nested_from_rate(R, dom_power(alpha), dom.n_fn, b, dom.params.small_set)
    grid = _dom_grid(dom, [1.0, 3.0, 10.0, 1e2, 1e4, 1e6])
    cert = verify_nested_family(dom, spec, grid, range(0, 6), mode="exact")
    assert cert.passed, cert.to_dict()
    assert set(cert.margins) == {f"k={k}" for k in range(6)}


def test_nested_family_fails_with_inflated_rate():
    alpha = 0.3
    dom = _dom("constant", 0.0, 1)
    bp, b = drift_constants(alpha, dom.params)
    good = nested_from_rate(make_R("geometric", kappa=1.0 / bp), dom_power(alpha), dom.n_fn, b,
                            dom.params.small_set)
    bad = Nested(good.V_k, good.S_k, lambda k: 1e3 * float(good.r(k)), good.f, good.n_fn, good.C)
    cert = verify_nested_family(dom, bad, _dom_grid(dom, [1e3]), [0], mode="exact")
    assert cert.verdict == "FAIL"


def test_nested_unit_schedule_on_finite_chain():
    # V_k = (k + 1) V with f = 0 and a generous constant on C
    P = [[0.5, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.5]]
    kernel = FiniteKernel(P)
    V = table([1.0, 2.0, 4.0])

    def V_k(k):
        return lambda x: (k + 1) * float(V(x))

    spec = Nested(V_k, lambda k, x: 10.0 * (k + 2), lambda k: 1.0, lambda x: 0.0, lambda x: 1, Everything())
    cert = verify_nested_family(kernel, spec, [0, 1, 2], range(4), mode="exact")
    assert cert.passed
    with pytest.raises(ContractError):
        verify_nested_family(kernel, spec, [0, 1, 2], [], mode="exact")


def test_monte_carlo_agrees_with_exact():
    C = Interval(0, 5)
    spec = Subsampled(GEO_W, lambda x: 5, 0.8, 1.0, C)
    grid = [0, 3, 10, 25]
    exact = verify_subsampled(GEO_CHAIN, spec, grid, mode="exact")
    mc = verify_subsampled(GEO_CHAIN, spec, grid, mode="mc", replicates=100_000, master_seed=7)
    diff = np.abs(mc.margins["drift"] - exact.margins["drift"])
    assert np.all(diff <= 4 * mc.std_errors["drift"] + 1e-12)
    assert exact.verdict == mc.verdict == "PASS"


def test_monte_carlo_straddle_is_inconclusive():
    kernel = FiniteKernel([[0.5, 0.5], [0.5, 0.5]])
    spec = OneStepGeometric(table([1.0, 3.0]), 0.5, 1.5, FiniteSet([0]))
    exact = verify_onestep(kernel, spec, [0], mode="exact")
    assert exact.verdict == "PASS" and exact.margins["drift"][0] == pytest.approx(0.0)
    mc = verify_onestep(kernel, spec, [0], mode="mc", replicates=1000, mc_budget=10_000, master_seed=3)
    assert mc.verdict == "INCONCLUSIVE"
    assert mc.notes["replicates_used"] == [10_000]


def test_mc_needs_seed_and_exact_needs_capability():
    spec = OneStepGeometric(power(1.0), 0.5, 1.0, Interval(0, 0))
    with pytest.raises(ContractError):
        verify_onestep(GEO_CHAIN, spec, [1], mode="mc")
    from subdrift.chain import FunctionKernel, IntegerRange

    fk = FunctionKernel(lambda x, rng: x, IntegerRange())
    with pytest.raises(CapabilityError):
        verify_onestep(fk, spec, [1], mode="exact")


def test_jensen_closure_square_root():
    C = Interval(0, 0)
    beta, b = 0.95, 0.07
    grid = list(range(0, 60))
    base = verify_onestep(GEO_CHAIN, OneStepGeometric(GEO_W, beta, b, C), grid)
    root = verify_onestep(GEO_CHAIN, OneStepGeometric(GEO_W ** 0.5, beta ** 0.5, b ** 0.5, C), grid)
    assert base.passed and root.passed


@given(st.floats(0.0, 1.0), st.integers(0, 5))
def test_monotone_in_b_and_small_set(extra_b, extra_c):
    grid = list(range(0, 30))
    base_spec = OneStepGeometric(GEO_W, 0.95, 0.07, Interval(0, 0))
    bigger = OneStepGeometric(GEO_W, 0.95, 0.07 + extra_b, Interval(0, extra_c))
    a = verify_onestep(GEO_CHAIN, base_spec, grid)
    c = verify_onestep(GEO_CHAIN, bigger, grid)
    assert np.all(c.margins["drift"] >= a.margins["drift"] - 1e-12)
    assert c.passed


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_grid_and_scale_contracts():
    spec = OneStepGeometric(power(1.0), 0.5, 1.0, Interval(0, 0))
    with pytest.raises(ContractError):
        verify_onestep(GEO_CHAIN, spec, [])
    with pytest.raises(ContractError):
        verify_onestep(swap_chain(), spec, [0, 5])
    below_one = OneStepGeometric(power(1.0, shift=0.0), 0.5, 1.0, Interval(0, 0))
    with pytest.raises(ContractError):
        verify_onestep(GEO_CHAIN, below_one, [0, 1])


def test_default_grid_covers_levels_and_small_set():
    V = power(2.0)
    grid = default_grid(V, 0, 10_000, Interval(0, 50), points_per_decade=4)
    assert grid[0] == 0 and grid[-1] == 10_000
    assert set(range(0, 51)) <= set(grid)
    levels = np.log10(V(np.array(grid)))
    assert np.max(np.diff(levels[levels > np.log10(V(50))])) <= 0.25 + 0.1


# ---------------------------------------------------------------- W-norm diagnostic


def test_wnorm_identical_pair_is_zero():
    cal = shipped("lazy-bd50")
    kernel = cal.kernel()
    diag = wnorm_difference_diagnostic(kernel, cal.W(), cal.V, 50, [(3, 3)])
    assert np.all(diag.ratios == 0.0)


def test_wnorm_swap_fails_and_lazy_passes():
    W = constant(1.0)
    swap = wnorm_difference_diagnostic(swap_chain(), W, W, 1000, [(0, 1)])
    assert swap.verdict == "FAIL"
    assert swap.first_half_max == [500.0] and swap.last_half_max == [1000.0]
    cal = shipped("lazy-bd50")
    lazy = wnorm_difference_diagnostic(cal.kernel(), cal.W(), cal.V, 10_000, [(0, 49), (0, 10)], x0=0)
    assert lazy.verdict == "PASS"
    assert lazy.sup_PkW["growing"] is False


def test_wnorm_needs_finite_matrix():
    with pytest.raises(CapabilityError):
        wnorm_difference_diagnostic(GEO_CHAIN, GEO_W, GEO_W, 10, [(0, 1)])

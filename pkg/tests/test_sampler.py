import math

import numpy as np
import pytest

from conftest import C_MATRIX, chi_square_ok, perm_weights
from deepperm.bounds import BoundKind, bound, deep_bound, hl_row_scale, partition_bound
from deepperm.errors import NestingFailure
from deepperm.exact import permanent_bruteforce
from deepperm.matrix import InstanceSpec, generate
from deepperm.sampler import (
    SamplerConfig,
    SamplerState,
    Strategy,
    TrialRunner,
    acceptance_rate_estimate,
    adapart_pick_column,
    block_rng,
    hl_column_bounds,
    sample_trial,
    ss_all_bounds,
)


def binomial_ok(accepts, trials, p):
    p = min(max(p, 0.0), 1.0)
    sd = math.sqrt(trials * p * (1 - p))
    return abs(accepts - trials * p) <= 3 * sd + 1e-9


def accepted_counts(a, cfg, trials, seed=0):
    runner = TrialRunner(a, cfg)
    counts = {}
    total = 0
    for blk in runner.blocks(seed, 4096, threads=1):
        for row in blk.perms[blk.accepted]:
            key = tuple(int(x) for x in row)
            counts[key] = counts.get(key, 0) + 1
        total += len(blk.accepted)
        if total >= trials:
            break
    return counts, total


def test_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(kind="ss", strategy=Strategy.STATIC)
    with pytest.raises(ValueError):
        SamplerConfig(kind="mb")
    with pytest.raises(ValueError):
        SamplerConfig(kind="hl", depth=-1)
    assert SamplerConfig(kind="ss").strategy is Strategy.ADAPART
    assert SamplerConfig(kind="hl", depth=8).name == "HL-8"
    assert SamplerConfig(kind="ss", depth=3).name == "AdaPart-3"


def test_runner_rejects_mismatched_bound():
    db = deep_bound(np.eye(3), 1, "hl")
    with pytest.raises(ValueError):
        TrialRunner(np.eye(3), SamplerConfig(kind="hl", depth=0), db)


def test_one_by_one_always_accepts():
    for kind in ("hl", "ss"):
        out = sample_trial([[3.5]], deep_bound([[3.5]], 0, kind), SamplerConfig(kind=kind),
                           np.random.default_rng(0))
        assert out.accepted and out.permutation == (0,)


@pytest.mark.parametrize("kind", ["hl", "ss"])
@pytest.mark.parametrize("depth", [0, 2, 3])
def test_identity_always_accepts(kind, depth):
    acc, trials, _ = acceptance_rate_estimate(np.eye(3), SamplerConfig(kind=kind, depth=depth), 500)
    assert acc == trials == 500


def test_two_by_two_hl():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    cfg = SamplerConfig(kind="hl")
    counts, total = accepted_counts(a, cfg, 100_000)
    accepts = sum(counts.values())
    assert binomial_ok(accepts, total, 10.0 / bound(a, "hl").value)
    # identity weight 4, swap weight 6
    ok, stat, _ = chi_square_ok([counts.get((0, 1), 0), counts.get((1, 0), 0)], [0.4, 0.6], accepts)
    assert ok, stat


def test_zero_permanent_never_accepts():
    a = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [1.0, 1.0, 0.0]])
    for kind in ("hl", "ss"):
        acc, trials, _ = acceptance_rate_estimate(a, SamplerConfig(kind=kind), 1000)
        assert acc == 0 and trials == 1000


@pytest.mark.parametrize("kind,depth", [("hl", 0), ("hl", 1), ("hl", 2), ("ss", 0), ("ss", 1), ("ss", 2)])
def test_exact_distribution_small(kind, depth):
    a = np.random.default_rng(17).random((4, 4)) * 2.0
    weights = perm_weights(a)
    per = sum(weights.values())
    keys = sorted(weights)
    counts, total = accepted_counts(a, SamplerConfig(kind=kind, depth=depth), 120_000, seed=depth)
    accepts = sum(counts.values())
    ok, stat, df = chi_square_ok([counts.get(k, 0) for k in keys], [weights[k] / per for k in keys], accepts)
    assert ok, (stat, df)
    u = deep_bound(a, depth, kind).value.value
    assert binomial_ok(accepts, total, per / u)


def test_accepted_permutations_have_positive_weight():
    a = generate(InstanceSpec("Bernoulli", n=7, p=0.5, seed=3))
    for kind in ("hl", "ss"):
        runner = TrialRunner(a, SamplerConfig(kind=kind, depth=2))
        blk = runner.run(block_rng(0, 0).random((5000, runner.width)))
        for row in blk.perms[blk.accepted]:
            assert sorted(row) == list(range(7))
            assert all(a[i, row[i]] > 0 for i in range(7))


@pytest.mark.parametrize("kind", ["hl", "ss"])
def test_acceptance_nondecreasing_in_depth(kind):
    a = np.random.default_rng(8).random((6, 6))
    per = permanent_bruteforce(a)
    rates = []
    trials = 40_000
    for d in (0, 1, 2, 6):
        acc, _, _ = acceptance_rate_estimate(a, SamplerConfig(kind=kind, depth=d), trials, seed=d)
        p = per / deep_bound(a, d, kind).value.value
        assert binomial_ok(acc, trials, p)
        rates.append((acc, p))
    for (a0, p0), (a1, p1) in zip(rates, rates[1:]):
        slack = 3 * math.sqrt(trials * (p0 * (1 - p0) + p1 * (1 - p1)))
        assert a1 >= a0 - slack


def test_results_independent_of_threads():
    a = np.random.default_rng(1).random((7, 7))
    cfg = SamplerConfig(kind="hl", depth=2, seed=4)
    one = acceptance_rate_estimate(a, cfg, 20_000, threads=1, block_size=1000)
    two = acceptance_rate_estimate(a, cfg, 20_000, threads=3, block_size=1000)
    assert one == two


def _root_scaled(a):
    s = hl_row_scale(a)
    return a / s[:, None], float(np.log(s).sum())


def _random_state_walk(a, kind, rng, steps):
    state = SamplerState(a, kind)
    yield state
    for _ in range(steps):
        rows, cols = state.free_rows, state.free_cols
        if len(rows) == 0:
            return
        state.fix(int(rng.choice(rows)), int(rng.choice(cols)))
        yield state


@pytest.mark.parametrize("seed", range(10))
def test_hl_column_bounds_match_naive(seed):
    rng = np.random.default_rng(seed)
    a = rng.random((8, 8)) * (2.5 if seed % 2 else 1.0)
    if seed == 3:
        a[4] = 0
    scaled, log_s = _root_scaled(a)
    for state in _random_state_walk(a, "hl", rng, 8):
        # cached row sums agree with a fresh computation
        fr, fc = state.free_rows, state.free_cols
        np.testing.assert_allclose(state.row_sums[fr], scaled[np.ix_(fr, fc)].sum(axis=1), rtol=1e-9, atol=1e-12)
        for j in fc:
            got = hl_column_bounds(state, int(j))
            for i in range(8):
                if i in fr:
                    want = math.exp(log_s) * partition_bound(scaled, state.fixed + [(i, int(j))], "hl").value
                else:
                    want = 0.0
                assert got[i] == pytest.approx(want, rel=1e-12, abs=1e-300)


def test_hl_column_bounds_identity():
    st = SamplerState(np.eye(2), "hl")
    np.testing.assert_allclose(hl_column_bounds(st, 0), [1.0, 0.0], rtol=1e-15)


@pytest.mark.parametrize("seed", range(10))
def test_ss_all_bounds_match_naive(seed):
    rng = np.random.default_rng(100 + seed)
    a = rng.random((8, 8)) * 3.0
    if seed % 3 == 0:
        a[rng.random((8, 8)) < 0.3] = 0
    for state in _random_state_walk(a, "ss", rng, 8):
        fr, fc = state.free_rows, state.free_cols
        for i in fr:
            vals = a[i, state.sorted_columns(int(i))]
            assert np.all(np.diff(vals) <= 0)
        got = ss_all_bounds(state)
        for i in range(8):
            for j in range(8):
                if i in fr and j in fc:
                    want = partition_bound(a, state.fixed + [(i, j)], "ss").value
                else:
                    want = 0.0
                assert got[i, j] == pytest.approx(want, rel=1e-12, abs=1e-300)


def test_ss_all_bounds_identity():
    st = SamplerState(np.eye(4), "ss")
    np.testing.assert_allclose(ss_all_bounds(st), np.eye(4), rtol=1e-15)


def test_ss_column_sums_on_c():
    sums = ss_all_bounds(SamplerState(C_MATRIX, "ss")).sum(axis=0)
    np.testing.assert_allclose(sums, (48 ** (1 / 3) + 36 ** (1 / 3)) * math.sqrt(2), rtol=1e-12)


def test_adapart_refines_on_c():
    st = SamplerState(C_MATRIX, "ss")
    part = adapart_pick_column(st)
    assert part.refinements >= 1
    u = bound(C_MATRIX, "ss").value
    total = 0.0
    for pairs, prob in part.leaves:
        assert prob == pytest.approx(partition_bound(C_MATRIX, pairs, "ss").value / u, rel=1e-12)
        total += prob
    assert total <= 1 + 1e-12
    assert part.reject_probability >= 0


def test_adapart_nesting_failure_without_refinement():
    with pytest.raises(NestingFailure):
        adapart_pick_column(SamplerState(C_MATRIX, "ss"), max_refinements=0)


def test_adapart_sampler_exact_on_c():
    weights = perm_weights(C_MATRIX)
    keys = [k for k in sorted(weights) if weights[k] > 0]
    counts, total = accepted_counts(C_MATRIX, SamplerConfig(kind="ss"), 60_000)
    accepts = sum(counts.values())
    ok, stat, _ = chi_square_ok([counts.get(k, 0) for k in keys], [1 / len(keys)] * len(keys), accepts)
    assert ok, stat
    assert binomial_ok(accepts, total, 8 / bound(C_MATRIX, "ss").value)


def test_adapart_identity_tie_break():
    assert adapart_pick_column(SamplerState(np.eye(5), "ss")).column == 0


@pytest.mark.parametrize("seed", range(3))
def test_adapart_picks_argmin_column(seed):
    a = generate(InstanceSpec("BlockDiagonal", n=12, seed=seed))
    st = SamplerState(a, "ss")
    sums = ss_all_bounds(st).sum(axis=0)
    part = adapart_pick_column(st)
    assert part.column == int(np.argmin(sums))
    assert sums[part.column] <= sums.min() * (1 + 1e-12)


def _accepted_cost(kind, n):
    rng = np.random.default_rng(n)
    a = np.eye(n) + 0.01 * rng.random((n, n))
    runner = TrialRunner(a, SamplerConfig(kind=kind))
    blk = runner.run(block_rng(0, 0).random((400, runner.width)))
    return blk.costs[blk.accepted].mean()


@pytest.mark.parametrize("kind,power", [("hl", 2), ("ss", 3)])
def test_trial_cost_growth(kind, power):
    ns = np.array([10, 20, 40])
    costs = np.array([_accepted_cost(kind, n) for n in ns])
    slope = np.polyfit(np.log(ns), np.log(costs), 1)[0]
    assert abs(slope - power) <= 0.3, slope

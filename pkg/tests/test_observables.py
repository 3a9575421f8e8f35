import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from oilwater.errors import SupportViolation
from oilwater.lattice import Configuration, fire_pair, run_to_fixation
from oilwater.observables import (
    PairTrajectory,
    classify_increment,
    empirical_drift_check,
    final_imbalance,
    fixated_outside,
    height_and_base,
    laplacian_identity_check,
    lazy_walk_stats,
    net_flux_check,
    pair_count,
    record_firing,
    returns_total,
    run_identities,
    trajectory_identities,
)
from oilwater.scaling import closed_form_w
from oilwater.stacks import StackSource

from oracles import n1_oracle

seeds = st.integers(0, (1 << 64) - 1)
POLICIES = ("leftmost", "rightmost", "uniform-random-legal", "sweep-parallel")


def tracked_replay(n, seed):
    """Leftmost replay that recomputes every observable from whole configurations."""
    src = StackSource(seed)
    c = Configuration.initial(n)
    odo = {}
    N = [0, 0, 0, 0]
    ret = {}
    series = [pair_count(c)]
    while True:
        legal = [x for x in c.oil if c.pairs(x)]
        if not legal:
            break
        x = min(legal)
        l, r = c.imbalance(x - 1), c.imbalance(x + 1)
        fire_pair(c, x, odo, src)
        series.append(pair_count(c))
        if l * r < 0:
            N[0] += 1
        elif l * r > 0:
            N[3] += 1
        elif l == r == 0:
            N[2] += 1
        else:
            N[1] += 1
        for y, g in ((x - 1, l), (x + 1, r)):
            if g == 0:
                ret[y] = ret.get(y, 0) + 1
    return series, N, ret


def test_pair_count_examples():
    assert pair_count(Configuration.initial(5)) == 5
    assert pair_count(Configuration(1, {0: 3, 2: 4}, {0: 5})) == 3
    assert pair_count(run_to_fixation(30, 1, 2).final_config) == 0


def test_classify_increment_examples():
    assert classify_increment(-3, 2) == 1
    assert classify_increment(0, 0) == 3
    assert classify_increment(2, 7) == 4
    assert classify_increment(0, -4) == 2
    assert classify_increment(5, 0) == 2
    assert classify_increment(-1, -1) == 4


def test_record_firing_support():
    t = PairTrajectory(3)
    record_firing(t, 0, 2, 1, 0)
    assert t.N == [0, 0, 0, 1]
    with pytest.raises(SupportViolation):
        record_firing(t, 0, 0, 0, 1)
    with pytest.raises(SupportViolation):
        record_firing(t, 0, 2, 1, -1)
    with pytest.raises(SupportViolation):
        record_firing(t, 0, 0, 4, 1)


def test_record_firing_returns():
    t = PairTrajectory(2)
    record_firing(t, 5, 0, 3, -1)
    assert t.returns_by_site == {4: 1} and t.N[1] == 1
    record_firing(t, 5, 0, 0, 0)
    assert t.returns_by_site == {4: 2, 6: 1}
    assert returns_total(t) == t.returns_total == 3 == t.N[1] + 2 * t.N[2]


def test_no_returns_without_empty_neighbours():
    t = PairTrajectory(1)
    for _ in range(5):
        record_firing(t, 0, 1, 2, 0)
    assert returns_total(t) == 0
    assert empirical_drift_check(t).drift_sum == 0


@settings(max_examples=40)
@given(seeds, st.integers(0, 50))
def test_kernel_trajectory_matches_replay(seed, n):
    run = run_to_fixation(n, 1, seed, "leftmost")
    traj = run.observables
    series, N, ret = tracked_replay(n, seed)
    assert traj.N == N
    assert traj.returns_by_site == ret
    assert list(traj.series) == series
    assert traj.returns_total == N[1] + 2 * N[2] == sum(ret.values())
    assert traj.tau == run.tau


@settings(max_examples=60)
@given(seeds, st.integers(0, 200), st.sampled_from(POLICIES))
def test_trajectory_identities(seed, n, policy):
    traj = run_to_fixation(n, 1, seed, policy).observables
    assert traj.policy == policy
    assert trajectory_identities(traj).ok
    assert empirical_drift_check(traj).ok


@given(seeds)
def test_n1_returns_are_twice_tau(seed):
    run = run_to_fixation(1, 1, seed)
    traj = run.observables
    assert traj.N == [0, 0, run.tau, 0]
    assert returns_total(traj) == 2 * run.tau


def test_drift_martingale_is_centred():
    n = 20
    m = np.array([float(empirical_drift_check(run_to_fixation(n, 1, s).observables).martingale) for s in range(1000)])
    # sum Z minus its compensator equals -n + Returns/4
    assert abs(m.mean()) < 3 * m.std(ddof=1) / math.sqrt(len(m))


@settings(max_examples=40)
@given(seeds, st.integers(0, 300), st.sampled_from(POLICIES + ("batched",)))
def test_identities_hold(seed, n, policy):
    if policy == "batched":
        run = run_to_fixation(n, 1, seed, engine="batched")
    else:
        run = run_to_fixation(n, 1, seed, policy)
    for rep in run_identities(run):
        assert rep.ok, (rep.name, rep.violations[:3])


@settings(max_examples=15)
@given(seeds, st.integers(0, 300))
def test_identities_hold_d2(seed, n):
    run = run_to_fixation(n, 2, seed, engine="batched")
    for rep in run_identities(run):
        assert rep.ok, (rep.name, rep.violations[:3])


@settings(max_examples=15)
@given(seeds, st.integers(1, 60))
def test_identities_hold_merged(seed, n):
    run = run_to_fixation(n, 1, seed, mode="merged")
    for rep in run_identities(run):
        assert rep.ok, (rep.name, rep.violations[:3])


def test_identities_n1_every_site():
    for seed in range(50):
        rep = laplacian_identity_check(run_to_fixation(1, 1, seed))
        assert rep.ok and rep.checked > 0


def test_reconstruction_matches_readout():
    for seed in range(20):
        prof = final_imbalance(run_to_fixation(100, 1, seed, engine="batched"))
        assert prof.reconstruction_ok and prof.total() == 0


def test_reconstruction_detects_the_fault():
    bad = 0
    for seed in range(20):
        prof = final_imbalance(run_to_fixation(30, 1, seed, fault=True))
        bad += not prof.reconstruction_ok
    assert bad > 0


def test_n1_final_profile():
    for seed in range(30):
        run = run_to_fixation(1, 1, seed)
        prof = final_imbalance(run)
        occupied = [x for x, v in zip(range(run.lo[0], run.lo[0] + len(prof.g)), prof.g) if v]
        assert len(occupied) == 2 and occupied[1] - occupied[0] == 2
        assert prof.at(occupied[0]) == -prof.at(occupied[1])
        assert prof.site_type(occupied[0] + 1) == "0"


def test_flux_edges_beyond_support():
    run = run_to_fixation(50, 1, 4)
    rep = net_flux_check(run)
    assert rep.ok
    edge = run.lo[0] + len(run.u) + 3
    assert run.flux.d_right(edge) == run.flux.d_left(edge) == 0


def test_flux_expectation_at_origin():
    # u(0) and D_{0,1} agree only in mean
    diffs = []
    for seed in range(1000):
        st_ = net_flux_check(run_to_fixation(1000, 1, seed, engine="batched")).statistical
        diffs.append(st_["D01"] - st_["u0"])
    d = np.array(diffs, dtype=float)
    assert d.std() > 0
    assert abs(d.mean()) < 3 * d.std(ddof=1) / math.sqrt(len(d))


@settings(max_examples=30)
@given(seeds, st.integers(0, 200))
def test_fixated_outside_properties(seed, n):
    run = run_to_fixation(n, 1, seed, engine="batched")
    values = [fixated_outside(run, r) for r in np.linspace(0, 60, 121)]
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert values[0] <= 2 * n
    edge = max(abs(run.lo[0]), abs(run.lo[0] + len(run.u) - 1))
    assert fixated_outside(run, edge) == 0


def test_fixated_outside_n1():
    # F(0) = 1 exactly when the pair separates at +-1; otherwise both particles are off the origin
    f = np.array([fixated_outside(run_to_fixation(1, 1, s), 0) for s in range(20000)])
    assert set(f) == {1, 2}
    _, sep, _ = n1_oracle(40)
    p = float(sep[1] + sep[-1])
    assert abs(np.mean(f == 1) - p) < 4 * math.sqrt(p * (1 - p) / len(f))


def test_height_and_base_small():
    assert height_and_base(run_to_fixation(0, 1, 0)) == (0, [])
    for seed in range(30):
        run = run_to_fixation(1, 1, seed)
        h, base = height_and_base(run)
        assert sum(run.odometer.at(x) for x in base) == run.tau
        assert base == list(range(base[0], base[-1] + 1))
        # independent replay of the pair's walk
        src = StackSource(seed)
        c, odo = Configuration.initial(1), {}
        while True:
            legal = [x for x in c.oil if c.pairs(x)]
            if not legal:
                break
            fire_pair(c, legal[0], odo, src)
        assert h == max(odo.values())


@pytest.mark.slow
def test_height_at_large_n():
    n = 360000
    w0 = float(closed_form_w(0.0))
    ok = 0
    for seed in range(5):
        h, _ = height_and_base(run_to_fixation(n, 1, seed, engine="batched"))
        ok += 0.5 * w0 <= h / n ** (4 / 3) <= 2 * w0
    assert ok >= 4.5


def test_lazy_walk_t0():
    s = lazy_walk_stats(0, 10)
    assert s.max_abs == 0 and s.abs_mean == 0
    assert (s.zeros == 1).all()


def test_lazy_walk_exact_mean():
    # R_t + t is Binomial(2t, 1/2)
    t, trials = 100, 50000
    s = lazy_walk_stats(t, trials, seed=2)
    k = np.arange(2 * t + 1)
    pmf = stats.binom.pmf(k, 2 * t, 0.5)
    mean = float((np.abs(k - t) * pmf).sum())
    var = float(((k - t) ** 2 * pmf).sum()) - mean**2
    assert abs(s.abs_mean - mean) < 4 * math.sqrt(var / trials)
    assert (s.peak >= s.end - 1).all()


def test_lazy_walk_large_t():
    t = 10**4
    s = lazy_walk_stats(t, 20000, seed=1)
    assert abs(s.abs_mean / math.sqrt(t) - 1 / math.sqrt(math.pi)) < 0.01
    assert s.zero_frequency() >= 0.5


def test_lazy_walk_validation():
    with pytest.raises(ValueError):
        lazy_walk_stats(-1, 10)
    with pytest.raises(ValueError):
        lazy_walk_stats(10, 0)


def test_trajectory_from_scratch():
    t = PairTrajectory(2)
    assert t.p_initial == 2 and t.tau == 0
    record_firing(t, 0, 0, 0, -1)
    record_firing(t, 1, 0, -1, -1)
    rep = trajectory_identities(t)
    assert rep.ok
    assert empirical_drift_check(t).drift_sum == Fraction(-3, 4)

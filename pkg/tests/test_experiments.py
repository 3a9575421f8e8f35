import json
import math

import numpy as np
import pytest

from oilwater.errors import BudgetExhausted, EngineAnomaly
from oilwater.experiments import (
    SweepPlan,
    SweepResult,
    compare_profile,
    fit_exponent,
    fit_statistic,
    ks_critical,
    merged_equivalence,
    profile_compare,
    rightmost_particle_stats,
    run_sweep,
    variance_probe,
)
from oilwater.io import read_csv
from oilwater.lattice import run_to_fixation
from oilwater.scaling import closed_form_w

from oracles import n1_oracle


def test_n1_sweep_mean_tau():
    res = run_sweep(SweepPlan((1,), seeds=10**4), workers=1)
    assert abs(res.column("tau").mean() - 2) < 0.05
    assert res.aggregates[1]["tau"]["median"] in (1.0, 2.0)


def test_n0_sweep_is_all_zero():
    res = run_sweep(SweepPlan((0,), seeds=5), workers=1)
    for stat in res.aggregates[0].values():
        assert all(v == 0 for v in stat.values())


def test_sweep_is_deterministic():
    plan = SweepPlan((10, 50, 200), seeds=4, base_seed=3)
    a = run_sweep(plan, workers=1)
    b = run_sweep(plan, workers=1)
    assert a.aggregates == b.aggregates
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_time"} for r in rows]  # noqa: E731
    assert strip(a.rows) == strip(b.rows)


def test_sweep_with_workers_matches_serial():
    plan = SweepPlan((20, 100), seeds=3)
    a = run_sweep(plan, workers=1)
    b = run_sweep(plan, workers=2)
    assert a.aggregates == b.aggregates


def test_seed_schedule_extends():
    small = SweepPlan((10, 20), seeds=3)
    big = SweepPlan((10, 20, 40), seeds=5)
    assert all(small.seed_for(n, r) == big.seed_for(n, r) for n in (10, 20) for r in range(3))


@pytest.mark.parametrize("kw", [dict(n_grid=(5, 5)), dict(n_grid=(9, 3)), dict(n_grid=()), dict(n_grid=(1,), seeds=0), dict(n_grid=(-1, 2))])
def test_plan_validation(kw):
    with pytest.raises(ValueError):
        SweepPlan(**kw)


def test_anomaly_names_the_run():
    plan = SweepPlan((50,), seeds=1, engine="exact", budget=10)
    with pytest.raises(BudgetExhausted) as info:
        run_sweep(plan, workers=1)
    assert "n=50" in str(info.value) and f"seed={plan.seed_for(50, 0)}" in str(info.value)
    assert isinstance(info.value, EngineAnomaly)
    assert info.value.record.tau == 10


def test_fit_exponent_exact_power_law():
    n = [10, 100, 1000, 10**4]
    fit = fit_exponent([(x, 3 * x ** (4 / 3)) for x in n])
    assert abs(fit.slope - 4 / 3) < 1e-12
    assert abs(fit.intercept - math.log(3)) < 1e-10
    assert fit.residual < 1e-12
    assert np.allclose(fit.predict(n), [3 * x ** (4 / 3) for x in n])


def test_fit_exponent_needs_three_points():
    with pytest.raises(ValueError):
        fit_exponent([(1, 1), (2, 2)])
    with pytest.raises(ValueError):
        fit_exponent([(1, 1), (2, 0), (3, 1)])


def test_fit_statistic_on_sweep():
    res = run_sweep(SweepPlan((100, 400, 1600, 6400), seeds=3), workers=1)
    fit = fit_statistic(res, "height")
    assert 1.0 < fit.slope < 1.7
    assert len(fit.spread) == 4 and all(a <= b for a, b in fit.spread)


def test_profile_compare_synthetic_is_exact():
    n = 50000
    scale = n ** (1 / 3)
    xs = np.arange(-200, 201)
    u = n ** (4 / 3) * closed_form_w(xs / scale)
    rep = compare_profile(n, xs, u)
    assert rep.sup_error < 1e-12 and rep.relative_error < 1e-12
    assert rep.sites > 0


def test_profile_compare_flags_a_bad_profile():
    n = 50000
    xs = np.arange(-200, 201)
    u = 1.2 * n ** (4 / 3) * closed_form_w(xs / n ** (1 / 3))
    assert compare_profile(n, xs, u).relative_error == pytest.approx(0.2, abs=1e-9)


def test_profile_error_shrinks_with_n():
    med = []
    for n in (40000, 360000):
        errs = [profile_compare(run_to_fixation(n, 1, s, engine="batched")).relative_error for s in range(5)]
        med.append(np.median(errs))
    assert med[1] < med[0]


def test_profile_compare_needs_d1():
    with pytest.raises(ValueError):
        profile_compare(run_to_fixation(10, 2, 0, engine="batched"))


def _fake(rows, grid, dim=1):
    return SweepResult(SweepPlan(grid, seeds=max(1, len(rows) // len(grid)), dimension=dim), rows)


def test_variance_of_constant_is_zero():
    rows = [{"n": n, "u0": 7, "u_bulk": 3} for n in (10, 20, 40) for _ in range(4)]
    rep = variance_probe(_fake(rows, (10, 20, 40)))
    assert all(v == {"std_origin": 0.0, "std_bulk": 0.0} for v in rep.per_n.values())
    assert rep.slope_origin is None
    assert rep.reference == pytest.approx(7 / 6)


def test_variance_probe_reports_slope():
    res = run_sweep(SweepPlan((1000, 4000, 16000), seeds=6), workers=1)
    rep = variance_probe(res)
    assert rep.slope_origin is not None and math.isfinite(rep.slope_origin.slope)
    lo, hi = rep.slope_origin.ci()
    assert lo < hi


def test_rightmost_n1_matches_enumeration():
    res = run_sweep(SweepPlan((1,), seeds=20000), workers=1)
    # the rightmost particle sits one step right of the separation site
    _, sep, _ = n1_oracle(40)
    r = res.column("rightmost")
    for y in (-1, 0, 1):
        p = float(sep[y])
        assert abs(np.mean(r == y + 1) - p) < 4 * math.sqrt(p * (1 - p) / len(r))


def test_rightmost_stats_on_sweep():
    res = run_sweep(SweepPlan((100, 1000, 10000), seeds=5), workers=1)
    rep = rightmost_particle_stats(res)
    assert not rep.base_violations
    assert set(rep.per_n) == {100, 1000, 10000}
    assert all(0 < s["median"] < 2 * rep.reference for s in rep.per_n.values())


def test_merged_equivalence_small():
    rep = merged_equivalence(n=15, samples=3000)
    assert rep.critical == pytest.approx(ks_critical(3000, 3000))
    assert rep.ok, rep.statistic


def test_export_round_trip(tmp_path):
    res = run_sweep(SweepPlan((10, 30), seeds=2), workers=1)
    res.to_csv(tmp_path / "s.csv", {"command": "sweep"})
    manifest, header, rows = read_csv(tmp_path / "s.csv")
    assert manifest == {"command": "sweep"}
    assert header[:3] == ["n", "rep", "seed"]
    assert [int(r[header.index("tau")]) for r in rows] == [r["tau"] for r in res.rows]
    res.to_json(tmp_path / "s.json", {"extra": 1})
    doc = json.loads((tmp_path / "s.json").read_text())
    assert doc["extra"] == 1 and set(doc["aggregates"]) == {"10", "30"}

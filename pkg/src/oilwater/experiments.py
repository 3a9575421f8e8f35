"""Seed sweeps over n, exponent fits and comparisons with the scaling limit."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import prf
from .errors import EngineAnomaly
from .io import write_csv
from .lattice import LatticeField, RunRecord, run_to_fixation
from .observables import fixated_outside, height_and_base, rightmost_particle, support_radius
from .scaling import SUPPORT_RADIUS, ScalingProfile, closed_form_w

STATISTICS = ("height", "radius", "tau", "F")


@dataclass(frozen=True)
class SweepPlan:
    n_grid: tuple
    seeds: int = 10
    dimension: int = 1
    policy: str = "leftmost"
    engine: str = "batched"
    sampler: str = "stack"
    mode: str = "plain"
    base_seed: int = 0
    f_eps: float = 0.3  # F is measured at radius n^(1/3 + f_eps)
    keep_records: bool = False
    budget: Optional[int] = None

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        object.__setattr__(self, "n_grid", grid)
        if not grid:
            raise ValueError("empty n grid")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("n_grid must be strictly increasing")
        if grid[0] < 0:
            raise ValueError("n must be >= 0")
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")

    def seed_for(self, n: int, rep: int) -> int:
        return prf.derive_seed(self.base_seed, n, rep)


def _row(plan: SweepPlan, n: int, rep: int, run: RunRecord) -> dict:
    height, _ = height_and_base(run)
    row = {
        "n": n,
        "rep": rep,
        "seed": run.seed,
        "tau": run.tau,
        "height": height,
        "radius": support_radius(run),
        "F": fixated_outside(run, n ** (1 / 3 + plan.f_eps)) if n else 0,
        "u0": LatticeField(run.lo, run.u).at((0,) * run.dimension),
        "wall_time": run.wall_time,
    }
    if run.dimension == 1:
        r = int(math.floor(n ** (1 / 3))) if n else 0
        fired = np.nonzero(run.u)[0]
        row["u_bulk"] = LatticeField(run.lo, run.u).at(r)
        row["base_lo"] = int(run.lo[0] + fired.min()) if len(fired) else 0
        row["base_hi"] = int(run.lo[0] + fired.max()) if len(fired) else 0
        row["rightmost"] = rightmost_particle(run)
    return row


def _one(plan: SweepPlan, n: int, rep: int):
    seed = plan.seed_for(n, rep)
    try:
        run = run_to_fixation(
            n, plan.dimension, seed, plan.policy, plan.engine,
            sampler=plan.sampler, mode=plan.mode, track=False, budget=plan.budget,
        )
    except EngineAnomaly as exc:
        raise type(exc)(f"n={n} seed={seed}: {exc}", exc.record) from exc
    return _row(plan, n, rep, run), (run if plan.keep_records else None)


def worker_count() -> int:
    env = os.environ.get("OILWATER_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _summary(values) -> dict:
    a = np.asarray(values, dtype=float)
    q25, med, q75 = np.percentile(a, [25, 50, 75])
    return {"median": float(med), "q25": float(q25), "q75": float(q75), "mean": float(a.mean())}


@dataclass
class SweepResult:
    plan: SweepPlan
    rows: list
    records: list = field(default_factory=list, repr=False)

    def column(self, name: str, n: Optional[int] = None) -> np.ndarray:
        return np.array([r[name] for r in self.rows if n is None or r["n"] == n], dtype=float)

    @property
    def aggregates(self) -> dict:
        return {n: {s: _summary(self.column(s, n)) for s in STATISTICS} for n in self.plan.n_grid}

    def medians(self, name: str) -> list:
        return [(n, self.aggregates[n][name]["median"]) for n in self.plan.n_grid]

    def summary(self) -> dict:
        return {
            "plan": asdict(self.plan),
            "prf": prf.PRF_ID,
            "aggregates": {str(n): a for n, a in self.aggregates.items()},
        }

    def to_csv(self, path, manifest: Optional[dict] = None):
        header = list(self.rows[0]) if self.rows else ["n"]
        write_csv(path, header, ([r.get(k) for k in header] for r in self.rows), manifest)

    def to_json(self, path, extra: Optional[dict] = None):
        doc = self.summary()
        if extra:
            doc.update(extra)
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def run_sweep(plan: SweepPlan, workers: Optional[int] = None) -> SweepResult:
    """Run every (n, replicate) of ``plan``; rows come back in plan order."""
    jobs = [(n, rep) for n in plan.n_grid for rep in range(plan.seeds)]
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_one, [plan] * len(jobs), *zip(*jobs)))
    else:
        done = [_one(plan, n, rep) for n, rep in jobs]
    rows = [r for r, _ in done]
    records = [rec for _, rec in done if rec is not None]
    return SweepResult(plan, rows, records)


# -- fits -----------------------------------------------------------------


@dataclass
class ExponentFit:
    slope: float
    intercept: float
    residual: float  # rms of log-residuals
    stderr: float
    n: list
    values: list
    spread: Optional[list] = None  # (q25, q75) per point, when known

    def ci(self, z: float = 1.96) -> tuple:
        return self.slope - z * self.stderr, self.slope + z * self.stderr

    def predict(self, n):
        return np.exp(self.intercept) * np.asarray(n, dtype=float) ** self.slope


def fit_exponent(pairs: Sequence, spread: Optional[list] = None) -> ExponentFit:
    """Least-squares slope of ``log(statistic)`` against ``log(n)``."""
    pairs = list(pairs)
    if len(pairs) < 3:
        raise ValueError("need at least 3 points")
    n = np.array([p[0] for p in pairs], dtype=float)
    y = np.array([p[1] for p in pairs], dtype=float)
    if np.any(n <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs positive values")
    lx, ly = np.log(n), np.log(y)
    fit = stats.linregress(lx, ly)
    res = ly - (fit.intercept + fit.slope * lx)
    return ExponentFit(
        float(fit.slope), float(fit.intercept), float(np.sqrt(np.mean(res**2))), float(fit.stderr),
        n.tolist(), y.tolist(), spread,
    )


def fit_statistic(result: SweepResult, name: str) -> ExponentFit:
    agg = result.aggregates
    spread = [(agg[n][name]["q25"], agg[n][name]["q75"]) for n in result.plan.n_grid]
    return fit_exponent(result.medians(name), spread)


# -- comparison with the scaling limit -----------------------------------


@dataclass
class ProfileReport:
    n: int
    sup_error: float
    relative_error: float
    threshold: float
    sites: int


def compare_profile(n: int, xs, u, profile: Optional[ScalingProfile] = None, frac: float = 0.05) -> ProfileReport:
    """Compare ``u(x) / n^(4/3)`` with ``w(x / n^(1/3))`` on lattice sites ``xs``.

    Sites where ``w`` is positive but nothing fired are included with ``u = 0``.
    """
    scale = n ** (1 / 3)
    w_of = closed_form_w if profile is None else profile.at
    R = SUPPORT_RADIUS if profile is None else profile.support_radius
    xs = np.asarray(xs, dtype=np.int64)
    u = np.asarray(u, dtype=float)
    reach = int(math.ceil(R * scale)) + 1
    lo = min(int(xs.min()) if xs.size else 0, -reach)
    hi = max(int(xs.max()) if xs.size else 0, reach)
    full = np.zeros(hi - lo + 1)
    full[xs - lo] = u
    x = np.arange(lo, hi + 1)
    uh = full / n ** (4 / 3)
    w = w_of(x / scale)
    err = np.abs(uh - w)
    thr = frac * float(w_of(0.0))
    mask = w >= thr
    rel = float(np.max(err[mask] / w[mask])) if mask.any() else 0.0
    return ProfileReport(n, float(err.max()), rel, thr, int(mask.sum()))


def profile_compare(run: RunRecord, profile: Optional[ScalingProfile] = None, frac: float = 0.05) -> ProfileReport:
    if run.dimension != 1:
        raise ValueError("profile comparison is defined for d=1")
    if run.n == 0:
        raise ValueError("n must be positive")
    xs = run.lo[0] + np.arange(run.u.shape[0])
    return compare_profile(run.n, xs, run.u, profile, frac)


@dataclass
class VarianceReport:
    per_n: dict
    slope_origin: Optional[ExponentFit]
    slope_bulk: Optional[ExponentFit]
    reference: float = 7 / 6  # heuristic bulk exponent, reported for comparison only


def variance_probe(result: SweepResult) -> VarianceReport:
    """Sample standard deviation of ``u(0)`` and ``u(floor(n^(1/3)))`` across seeds."""
    per_n = {}
    for n in result.plan.n_grid:
        a0 = result.column("u0", n)
        ab = result.column("u_bulk", n) if result.plan.dimension == 1 else a0
        ddof = 1 if len(a0) > 1 else 0
        per_n[n] = {"std_origin": float(np.std(a0, ddof=ddof)), "std_bulk": float(np.std(ab, ddof=ddof))}

    def fit(key):
        pts = [(n, v[key]) for n, v in per_n.items() if n > 0 and v[key] > 0]
        return fit_exponent(pts) if len(pts) >= 3 else None

    return VarianceReport(per_n, fit("std_origin"), fit("std_bulk"))


@dataclass
class RightmostReport:
    per_n: dict
    reference: float = SUPPORT_RADIUS
    base_violations: list = field(default_factory=list)


def rightmost_particle_stats(result: SweepResult) -> RightmostReport:
    """Distribution of the rightmost stopped particle over ``n^(1/3)``, per n."""
    if result.plan.dimension != 1:
        raise ValueError("rightmost particle is defined for d=1")
    per_n = {}
    bad = []
    for n in result.plan.n_grid:
        rows = [r for r in result.rows if r["n"] == n and r["rightmost"] is not None]
        for r in rows:
            if r["rightmost"] < r["base_hi"]:
                bad.append((n, r["seed"], r["rightmost"], r["base_hi"]))
        if rows and n > 0:
            per_n[n] = _summary([r["rightmost"] / n ** (1 / 3) for r in rows])
    return RightmostReport(per_n, base_violations=bad)


# -- plain vs merged stacks ----------------------------------------------


@dataclass
class KSReport:
    n: int
    samples: int
    statistic: dict
    critical: float
    alpha: float

    @property
    def ok(self) -> bool:
        return all(v < self.critical for v in self.statistic.values())


def ks_critical(m: int, n: int, alpha: float = 0.01) -> float:
    """Asymptotic two-sample KS critical value."""
    c = math.sqrt(-0.5 * math.log(alpha / 2))
    return c * math.sqrt((m + n) / (m * n))


def merged_equivalence(n: int = 30, samples: int = 20000, base_seed: int = 0, alpha: float = 0.01) -> KSReport:
    """KS distances of ``tau`` and ``max u`` between plain and merged stacks, on disjoint seeds."""
    out = {"plain": ([], []), "merged": ([], [])}
    for tag, mode in enumerate(("plain", "merged")):
        taus, heights = out[mode]
        for i in range(samples):
            run = run_to_fixation(n, 1, prf.derive_seed(base_seed, tag, i), "leftmost", "exact", mode=mode, track=False)
            taus.append(run.tau)
            heights.append(int(run.u.max()) if run.u.size else 0)
    stat = {
        "tau": float(stats.ks_2samp(out["plain"][0], out["merged"][0]).statistic),
        "height": float(stats.ks_2samp(out["plain"][1], out["merged"][1]).statistic),
    }
    return KSReport(n, samples, stat, ks_critical(samples, samples, alpha), alpha)

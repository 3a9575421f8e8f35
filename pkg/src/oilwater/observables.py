"""Pair counts, increment classes, returns, fluxes and exact per-run identities."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import kernels, prf
from .errors import SupportViolation
from .lattice import Configuration, LatticeField, RunRecord
from .stacks import StackSource

# drift of Z given the class, in units of 1/4
DRIFT_QUARTERS = {1: 0, 2: -1, 3: -2, 4: 0}


def pair_count(config: Configuration) -> int:
    return sum(min(v, config.water.get(x, 0)) for x, v in config.oil.items())


def classify_increment(l: int, r: int) -> int:
    """Class 1..4 of a firing from the imbalances at its two neighbours."""
    p = l * r
    if p < 0:
        return 1
    if p > 0:
        return 4
    if l == 0 and r == 0:
        return 3
    return 2


def check_support(cls: int, dp: int):
    if dp not in (-1, 0, 1):
        raise SupportViolation(f"increment {dp} outside -1..1")
    if cls == 4 and dp != 0:
        raise SupportViolation(f"class 4 firing changed the pair count by {dp}")
    if cls in (2, 3) and dp > 0:
        raise SupportViolation(f"class {cls} firing raised the pair count")


@dataclass
class PairTrajectory:
    n: int
    policy: str = "leftmost"
    series: list = field(default_factory=list)
    stride: int = 1
    N: list = field(default_factory=lambda: [0, 0, 0, 0])
    returns_by_site: dict = field(default_factory=dict)
    returns_total: int = 0
    sum_z: int = 0
    p_final: Optional[int] = None

    def __post_init__(self):
        if len(self.series) == 0:
            self.series = [self.n]
        if self.p_final is None:
            self.p_final = self.n

    @property
    def p_initial(self) -> int:
        return int(self.series[0])

    @property
    def tau(self) -> int:
        return sum(self.N)

    @classmethod
    def from_kernel(cls, run: RunRecord) -> "PairTrajectory":
        k = run.kernel
        returns = LatticeField(run.lo, run.returns_site).as_dict()
        return cls(
            n=run.n,
            policy=run.policy,
            series=np.asarray(k["p_series"]),
            stride=int(k["p_stride"]),
            N=list(k["N"]),
            returns_by_site=returns,
            returns_total=int(k["returns_total"]),
            sum_z=int(k["sum_z"]),
            p_final=int(k["p_final"]),
        )


def record_firing(trajectory: PairTrajectory, x: int, l: int, r: int, dp: int) -> PairTrajectory:
    """Tally one d=1 firing at ``x`` with neighbour imbalances ``l``, ``r``."""
    cls = classify_increment(l, r)
    check_support(cls, dp)
    trajectory.N[cls - 1] += 1
    for y, g in ((x - 1, l), (x + 1, r)):
        if g == 0:
            trajectory.returns_by_site[y] = trajectory.returns_by_site.get(y, 0) + 1
            trajectory.returns_total += 1
    trajectory.sum_z += dp
    trajectory.p_final += dp
    if isinstance(trajectory.series, list):
        trajectory.series.append(trajectory.p_final)
    return trajectory


def returns_total(trajectory: PairTrajectory) -> int:
    return sum(trajectory.returns_by_site.values())


@dataclass
class DriftReport:
    drift_sum: Fraction
    returns: int
    martingale: Fraction  # sum of Z minus its compensator

    @property
    def ok(self) -> bool:
        return self.drift_sum + Fraction(self.returns, 4) == 0


def empirical_drift_check(trajectory: PairTrajectory) -> DriftReport:
    quarters = sum(DRIFT_QUARTERS[c + 1] * k for c, k in enumerate(trajectory.N))
    drift = Fraction(quarters, 4)
    return DriftReport(drift, returns_total(trajectory), Fraction(trajectory.sum_z) - drift)


@dataclass
class TrajectoryReport:
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures


def trajectory_identities(trajectory: PairTrajectory) -> TrajectoryReport:
    t = trajectory
    fails = []
    if t.p_initial != t.n:
        fails.append(("P0", t.p_initial, t.n))
    if t.p_final != 0:
        fails.append(("Ptau", t.p_final, 0))
    if t.sum_z != -t.n:
        fails.append(("sumZ", t.sum_z, -t.n))
    if t.returns_total != t.N[1] + 2 * t.N[2]:
        fails.append(("returns", t.returns_total, t.N[1] + 2 * t.N[2]))
    if returns_total(t) != t.returns_total:
        fails.append(("returns-by-site", returns_total(t), t.returns_total))
    if not empirical_drift_check(t).ok:
        fails.append(("drift", empirical_drift_check(t).drift_sum, -Fraction(t.returns_total, 4)))
    return TrajectoryReport(fails)


# -- fluxes and final profiles --------------------------------------------


@dataclass
class FluxLedger:
    """Edge crossings and arrivals; ``out[j]`` counts moves from a site in direction ``j``."""

    lo: tuple
    out: np.ndarray
    entries: np.ndarray

    @classmethod
    def from_run(cls, run: RunRecord) -> "FluxLedger":
        return cls(run.lo, run.flux_out, run.entries)

    @property
    def dimension(self) -> int:
        return len(self.lo)

    def _at(self, j, x) -> int:
        return LatticeField(self.lo, self.out[j]).at(x)

    def d_right(self, x: int) -> int:
        """Crossings ``x -> x+1``."""
        return self._at(1, x)

    def d_left(self, x: int) -> int:
        """Crossings ``x+1 -> x``."""
        return self._at(0, x + 1)

    def entries_at(self, x) -> int:
        return LatticeField(self.lo, self.entries).at(x)

    def arrays_1d(self):
        """``(xs, D_right, D_left)`` on edges ``(x, x+1)`` of the padded window."""
        lo = self.lo[0]
        m = self.out.shape[1]
        xs = np.arange(lo - 1, lo + m)
        right = np.zeros(m + 1, dtype=np.int64)
        left = np.zeros(m + 1, dtype=np.int64)
        right[1:] = self.out[1]
        left[:-1] = self.out[0]
        return xs, right, left


@dataclass
class TypedProfile:
    lo: tuple
    g: np.ndarray
    reconstruction_ok: Optional[bool] = None
    mismatches: list = field(default_factory=list)

    def at(self, x) -> int:
        return LatticeField(self.lo, self.g).at(x)

    def site_type(self, x) -> str:
        v = self.at(x)
        return "oil" if v > 0 else "water" if v < 0 else "0"

    def total(self) -> int:
        return int(self.g.sum())


def reconstruct_imbalance(run: RunRecord) -> Optional[np.ndarray]:
    """Rebuild ``g_tau`` on the d=1 window from the stacks and the odometer.

    Each site receives the oil minus water sent to it by its two neighbours
    during their first ``u`` draws. Returns ``None`` where stack draws are not
    indexed by the odometer (merged stacks, binomial sampler).
    """
    if run.dimension != 1 or run.mode != "plain" or run.sampler != "stack":
        return None
    source = StackSource(run.seed)
    lo = run.lo[0]
    m = run.u.shape[0]
    g = np.zeros(m + 2, dtype=np.int64)  # covers lo-1 .. lo+m
    for i in range(m):
        x = lo + i
        k = int(run.u[i])
        if k == 0:
            continue
        for sp, sign in ((prf.OIL, 1), (prf.WATER, -1)):
            right = source.count_right(x, sp, k)
            g[i + 2] += sign * right
            g[i] += sign * (k - right)
    return g


def final_imbalance(run: RunRecord) -> TypedProfile:
    g = run.oil - run.water
    profile = TypedProfile(run.lo, g)
    rec = reconstruct_imbalance(run)
    if rec is None:
        return profile
    padded = np.zeros_like(rec)
    padded[1:-1] = g
    bad = np.nonzero(rec != padded)[0]
    profile.mismatches = [(int(run.lo[0] + i - 1), int(rec[i]), int(padded[i])) for i in bad]
    profile.reconstruction_ok = not profile.mismatches
    return profile


def fixated_outside(run: RunRecord, r: float) -> int:
    """Particles stopped at distance greater than ``r`` from the origin."""
    field_ = LatticeField(run.lo, run.oil + run.water)
    coords = field_.coords()
    if run.dimension == 1:
        dist = np.abs(coords[0])
    else:
        dist = np.sqrt(sum(c.astype(float) ** 2 for c in coords))
    return int(field_.values[dist > r].sum())


@dataclass
class IdentityReport:
    name: str
    checked: int = 0
    violations: list = field(default_factory=list)
    statistical: Optional[dict] = None

    @property
    def ok(self) -> bool:
        return not self.violations


def _source(run: RunRecord) -> np.ndarray:
    s = np.zeros_like(run.u)
    if run.n:
        s[run.origin_index()] = 2 * run.n
    return s


def laplacian_identity_check(run: RunRecord) -> IdentityReport:
    """Mass bookkeeping at every site, plus its discrete-Laplacian form in d=1."""
    rep = IdentityReport("laplacian")
    total = run.oil + run.water
    lhs = _source(run) + run.entries - 2 * run.u
    g_abs = np.abs(run.oil - run.water)
    for idx in np.argwhere((lhs != total) | (total != g_abs)):
        rep.violations.append(("mass", _site(run, idx), int(lhs[tuple(idx)]), int(g_abs[tuple(idx)])))
    rep.checked = lhs.size
    if run.dimension == 1:
        u = np.pad(run.u, 1)
        lap = u[:-2] + u[2:] - 2 * u[1:-1]
        rhs = g_abs - _source(run) + (u[:-2] + u[2:] - run.entries)
        for i in np.nonzero(lap != rhs)[0]:
            rep.violations.append(("laplacian", int(run.lo[0] + i), int(lap[i]), int(rhs[i])))
    return rep


def _site(run, idx):
    c = tuple(int(i) + l for i, l in zip(idx, run.lo))
    return c[0] if len(c) == 1 else c


def net_flux_check(run: RunRecord) -> IdentityReport:
    """Net crossings of each edge against the particles that stopped beyond it (d=1)."""
    if run.dimension != 1:
        raise ValueError("net_flux_check is defined for d=1")
    rep = IdentityReport("net-flux")
    ledger = FluxLedger.from_run(run)
    xs, right, left = ledger.arrays_1d()
    g_abs = np.abs(run.oil - run.water)
    # mass strictly to the right of edge (x, x+1) for x = lo-1 .. lo+m-1
    beyond = np.concatenate((np.cumsum(g_abs[::-1])[::-1], [0]))
    net = right - left
    expected = beyond - np.where(xs < 0, 2 * run.n, 0)
    for i in np.nonzero(net != expected)[0]:
        rep.violations.append(("flux", int(xs[i]), int(net[i]), int(expected[i])))
    rep.checked = len(xs)
    u0 = LatticeField(run.lo, run.u).at(0)
    rep.statistical = {"u0": u0, "D01": ledger.d_right(0)}
    return rep


def run_identities(run: RunRecord) -> list:
    """Every exact identity that applies to ``run``; each entry has ``ok``."""
    reports = [laplacian_identity_check(run)]
    if run.dimension == 1:
        reports.append(net_flux_check(run))
    prof = final_imbalance(run)
    rep = IdentityReport("imbalance")
    if prof.total() != 0:
        rep.violations.append(("sum-g", prof.total(), 0))
    rep.violations.extend(("reconstruct",) + m for m in prof.mismatches)
    reports.append(rep)
    complete = IdentityReport("complete")
    both = np.minimum(run.oil, run.water)
    if both.any() or run.tau != int(run.u.sum()):
        complete.violations.append(("complete", int(both.sum()), run.tau - int(run.u.sum())))
    reports.append(complete)
    if run.tracked and run.dimension == 1:
        t = trajectory_identities(PairTrajectory.from_kernel(run))
        traj = IdentityReport("trajectory", violations=t.failures)
        if sum(PairTrajectory.from_kernel(run).N) != run.tau:
            traj.violations.append(("N-sum", sum(run.kernel["N"]), run.tau))
        reports.append(traj)
    return reports


def height_and_base(run: RunRecord):
    """``(max u, sorted sites with u > 0)``."""
    if not run.u.size or not run.u.any():
        return 0, []
    sites = [x for x, _ in LatticeField(run.lo, run.u).items()]
    return int(run.u.max()), sorted(sites) if run.dimension == 1 else sites


def support_radius(run: RunRecord) -> float:
    """Largest distance from the origin to a site that fired."""
    if not run.u.any():
        return 0.0
    coords = LatticeField(run.lo, run.u).coords()
    d2 = sum(c.astype(float) ** 2 for c in coords)
    return float(np.sqrt(d2[run.u > 0].max()))


def rightmost_particle(run: RunRecord) -> Optional[int]:
    occupied = np.nonzero(run.oil + run.water)[0]
    if not len(occupied):
        return None
    return int(run.lo[0] + occupied.max())


@dataclass
class WalkStats:
    t: int
    end: np.ndarray
    peak: np.ndarray
    zeros: np.ndarray

    @property
    def abs_mean(self) -> float:
        return float(self.end.mean())

    @property
    def max_abs(self) -> float:
        return float(self.peak.mean())

    @property
    def zero_count(self) -> float:
        return float(self.zeros.mean())

    def zero_frequency(self, threshold: Optional[float] = None) -> float:
        """Fraction of walks with more than ``threshold`` zeros (default ``0.1 sqrt t``)."""
        if threshold is None:
            threshold = 0.1 * np.sqrt(self.t)
        return float(np.mean(self.zeros > threshold))


def lazy_walk_stats(t: int, trials: int, seed: int = 0, backend=None) -> WalkStats:
    if t < 0 or trials < 1:
        raise ValueError("need t >= 0 and trials >= 1")
    be = backend or kernels.backend
    end, peak, zeros = be.lazy_walk(t, trials, seed)
    return WalkStats(t, np.asarray(end), np.asarray(peak), np.asarray(zeros))

"""Particle configurations, firing, and whole runs to fixation.

The per-firing primitives (:func:`fire_pair`, :func:`fire_batch`) work on a
sparse :class:`Configuration` and read moves straight from a
:class:`~oilwater.stacks.StackSource`. Whole runs go through the selected
kernel backend (:mod:`oilwater.kernels`) and come back as a
:class:`RunRecord`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, Optional, Sequence

import numpy as np

from . import kernels, prf
from .errors import BudgetExhausted, IllegalFiring, InsufficientPairs
from .stacks import Site, StackSource, as_coords, merged_draw, unit_step

POLICIES = {
    "leftmost": "leftmost",
    "rightmost": "rightmost",
    "uniform-random-legal": "uniform",
    "uniform-random": "uniform",
    "uniform": "uniform",
    "sweep-parallel": "sweep",
    "sweep": "sweep",
    "adversarial-scripted": "scripted",
    "scripted": "scripted",
}
POLICY_NAMES = {
    "leftmost": "leftmost",
    "rightmost": "rightmost",
    "uniform": "uniform-random-legal",
    "sweep": "sweep-parallel",
    "scripted": "adversarial-scripted",
    "queue": "queue",
}
ENGINES = ("exact", "batched")
SAMPLERS = ("stack", "binomial")

DEFAULT_MAX_RADIUS = {1: 1 << 20, 2: 1 << 11}
BUDGET_CAP = 1 << 62


def _site(x, dimension):
    return int(x) if dimension == 1 else tuple(int(c) for c in x)


def _shift(x, step):
    if isinstance(step, tuple):
        return tuple(a + b for a, b in zip(x, step))
    return x + step


@dataclass(frozen=True)
class FiringPolicy:
    kind: str = "leftmost"
    script: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in POLICIES:
            raise ValueError(f"unknown policy {self.kind!r}")

    @property
    def code(self) -> str:
        return POLICIES[self.kind]

    @property
    def name(self) -> str:
        return POLICY_NAMES[self.code]


class Configuration:
    """Oil and water counts on a sparse window of lattice sites."""

    def __init__(self, dimension: int = 1, oil=None, water=None, origin_mass: int = 0):
        self.dimension = dimension
        self.oil: Dict[Site, int] = {k: v for k, v in (oil or {}).items() if v}
        self.water: Dict[Site, int] = {k: v for k, v in (water or {}).items() if v}
        self.origin_mass = origin_mass

    @classmethod
    def initial(cls, n: int, dimension: int = 1) -> "Configuration":
        o = 0 if dimension == 1 else (0,) * dimension
        return cls(dimension, {o: n}, {o: n}, origin_mass=n)

    def eta_oil(self, x) -> int:
        return self.oil.get(x, 0)

    def eta_water(self, x) -> int:
        return self.water.get(x, 0)

    def imbalance(self, x) -> int:
        return self.oil.get(x, 0) - self.water.get(x, 0)

    def pairs(self, x) -> int:
        return min(self.oil.get(x, 0), self.water.get(x, 0))

    def sites(self) -> list:
        return sorted(set(self.oil) | set(self.water))

    def mass(self) -> tuple[int, int]:
        return sum(self.oil.values()), sum(self.water.values())

    def add(self, x, oil: int = 0, water: int = 0):
        if oil:
            v = self.oil.get(x, 0) + oil
            if v < 0:
                raise ValueError(f"negative oil count at {x}")
            if v:
                self.oil[x] = v
            else:
                del self.oil[x]
        if water:
            v = self.water.get(x, 0) + water
            if v < 0:
                raise ValueError(f"negative water count at {x}")
            if v:
                self.water[x] = v
            else:
                del self.water[x]

    def is_complete(self) -> bool:
        return all(self.pairs(x) == 0 for x in self.oil)

    def copy(self) -> "Configuration":
        return Configuration(self.dimension, dict(self.oil), dict(self.water), self.origin_mass)

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.dimension == other.dimension and self.oil == other.oil and self.water == other.water

    def __repr__(self):
        return f"Configuration(d={self.dimension}, oil={self.oil}, water={self.water})"


def is_legal(config: Configuration, x) -> bool:
    return config.pairs(x) >= 1


def _moves(source: StackSource, x, index: int, merged_counts):
    if source.mode == "merged" and x % 3:
        anchor = x + 1 if x % 3 == 2 else x - 1
        i2 = merged_counts.get(anchor, 0) + 1
        merged_counts[anchor] = i2
        return merged_draw(source, x, i2, "oil"), merged_draw(source, x, i2, "water")
    d = source.dimension
    return (
        unit_step(source.direction(x, index, prf.OIL), d),
        unit_step(source.direction(x, index, prf.WATER), d),
    )


def fire_pair(config: Configuration, x, odometer: dict, source: StackSource, merged_counts=None):
    """Fire one oil-water pair from ``x``; ``odometer`` is updated in place."""
    if not is_legal(config, x):
        raise IllegalFiring(f"site {x} holds {config.eta_oil(x)} oil, {config.eta_water(x)} water")
    index = odometer.get(x, 0) + 1
    if merged_counts is None:
        merged_counts = {}
    step_oil, step_water = _moves(source, x, index, merged_counts)
    config.add(x, oil=-1, water=-1)
    config.add(_shift(x, step_oil), oil=1)
    config.add(_shift(x, step_water), water=1)
    odometer[x] = index
    return config


def fire_batch(config: Configuration, x, k: int, odometer: dict, source: StackSource):
    """Fire ``k`` pairs from ``x`` at once.

    The counts moved each way are the exact sums of stack draws
    ``u(x)+1 .. u(x)+k``, so the end state equals ``k`` calls to
    :func:`fire_pair`.
    """
    if source.mode != "plain":
        raise ValueError("fire_batch reads plain stacks only")
    if k < 0 or config.pairs(x) < k:
        raise InsufficientPairs(f"site {x} has {config.pairs(x)} pairs, asked for {k}")
    if k == 0:
        return config
    done = odometer.get(x, 0)
    d = source.dimension
    config.add(x, oil=-k, water=-k)
    if d == 1:
        for sp in (prf.OIL, prf.WATER):
            right = source.count_right(x, sp, done + k) - source.count_right(x, sp, done)
            amounts = {"oil": 0, "water": 0}
            name = "oil" if sp == prf.OIL else "water"
            amounts[name] = right
            config.add(x + 1, **amounts)
            amounts[name] = k - right
            config.add(x - 1, **amounts)
    else:
        for sp, name in ((prf.OIL, "oil"), (prf.WATER, "water")):
            for i in range(done + 1, done + k + 1):
                config.add(_shift(x, unit_step(source.direction(x, i, sp), d)), **{name: 1})
    odometer[x] = done + k
    return config


# -- dense lattice arrays -------------------------------------------------


@dataclass
class LatticeField:
    """Integer field on a box ``lo .. lo + shape - 1`` (zero outside)."""

    lo: tuple
    values: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.lo)

    def at(self, x) -> int:
        c = as_coords(x)
        idx = tuple(ci - li for ci, li in zip(c, self.lo))
        if any(i < 0 or i >= s for i, s in zip(idx, self.values.shape)):
            return 0
        return int(self.values[idx])

    def items(self) -> Iterator:
        for idx in np.argwhere(self.values != 0):
            c = tuple(int(i) + l for i, l in zip(idx, self.lo))
            yield (c[0] if len(c) == 1 else c), int(self.values[tuple(idx)])

    def as_dict(self) -> dict:
        return dict(self.items())

    def total(self) -> int:
        return int(self.values.sum())

    def coords(self) -> list[np.ndarray]:
        """Coordinate arrays broadcast against ``values``."""
        return np.meshgrid(
            *[np.arange(l, l + s) for l, s in zip(self.lo, self.values.shape)], indexing="ij"
        )


class OdometerField(LatticeField):
    pass


@dataclass
class RunRecord:
    n: int
    dimension: int
    seed: int
    policy: str
    engine: str
    sampler: str
    mode: str
    status: str
    tau: int
    lo: tuple
    u: np.ndarray
    oil: np.ndarray
    water: np.ndarray
    entries: np.ndarray
    flux_out: np.ndarray
    returns_site: np.ndarray
    kernel: dict = field(repr=False, default_factory=dict)
    wall_time: float = 0.0
    backend: str = kernels.BACKEND
    prf_id: str = prf.PRF_ID
    tracked: bool = False

    @property
    def odometer(self) -> OdometerField:
        return OdometerField(self.lo, self.u)

    @property
    def final_config(self) -> Configuration:
        oil = LatticeField(self.lo, self.oil).as_dict()
        water = LatticeField(self.lo, self.water).as_dict()
        return Configuration(self.dimension, oil, water, origin_mass=self.n)

    @property
    def imbalance(self) -> np.ndarray:
        return self.oil - self.water

    def origin_index(self) -> tuple:
        return tuple(-l for l in self.lo)

    @property
    def observables(self):
        from .observables import PairTrajectory

        if not self.tracked:
            return None
        return PairTrajectory.from_kernel(self)

    @property
    def flux(self):
        from .observables import FluxLedger

        return FluxLedger.from_run(self)


def crop_output(out: dict, dimension: int):
    """Crop a kernel result to the bounding box of its nonzero data; returns ``(lo, arrays)``."""
    L = out["L"]
    c = out["center"]
    shape = (L,) * dimension
    names = ("u", "eta1", "eta2", "entries", "returns_site")
    arrs = {k: out[k].reshape(shape) for k in names}
    flux = out["flux"].reshape((2 * dimension,) + shape)
    occupied = np.zeros(shape, dtype=bool)
    for a in arrs.values():
        occupied |= a != 0
    occupied |= (flux != 0).any(axis=0)
    nz = np.argwhere(occupied)
    if len(nz) == 0:
        lo = np.full(dimension, c)  # empty box at the origin
        hi = lo
    else:
        lo = nz.min(axis=0)
        hi = nz.max(axis=0) + 1
    sl = tuple(slice(a, b) for a, b in zip(lo, hi))
    cropped = {k: np.ascontiguousarray(v[sl]) for k, v in arrs.items()}
    cropped["flux"] = np.ascontiguousarray(flux[(slice(None),) + sl])
    return tuple(int(v) - c for v in lo), cropped


def default_budget(n: int) -> int:
    return min(BUDGET_CAP, 100 * 16 * n**4)


def run_to_fixation(
    n: int,
    dimension: int = 1,
    seed: int = 0,
    policy="leftmost",
    engine: str = "exact",
    *,
    sampler: str = "stack",
    mode: str = "plain",
    track: Optional[bool] = None,
    script: Optional[Sequence] = None,
    budget: Optional[int] = None,
    max_radius: Optional[int] = None,
    fault: bool = False,
    backend=None,
) -> RunRecord:
    """Run from ``n`` oil and ``n`` water particles at the origin to fixation.

    Raises :class:`~oilwater.errors.BudgetExhausted` when more than
    ``budget`` firings would be needed (default ``100 * 16 n^4``); the
    partial record is attached to the exception.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    if engine not in ENGINES:
        raise ValueError(f"engine must be one of {ENGINES}")
    if sampler not in SAMPLERS:
        raise ValueError(f"sampler must be one of {SAMPLERS}")
    if mode not in ("plain", "merged"):
        raise ValueError("mode must be 'plain' or 'merged'")
    if not 0 <= seed < 1 << 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    if not isinstance(policy, FiringPolicy):
        policy = FiringPolicy(policy, tuple(script) if script is not None else None)
    if mode == "merged" and (dimension != 1 or engine != "exact"):
        raise ValueError("merged stacks need d=1 and the exact engine")
    if engine == "batched":
        code = "queue"
        track = False
    else:
        code = policy.code
        if code == "scripted" and policy.script is None:
            raise ValueError("scripted policy needs a script")
        if track is None:
            track = True
    if budget is None:
        budget = default_budget(n)
    if max_radius is None:
        max_radius = DEFAULT_MAX_RADIUS.get(dimension, 1 << 7)
    be = backend or kernels.backend
    t0 = time.perf_counter()
    out = be.simulate(
        n,
        dim=dimension,
        seed=seed,
        engine=engine,
        policy=code,
        sampler=sampler,
        merged=mode == "merged",
        script=list(policy.script) if policy.script is not None else None,
        track=bool(track),
        budget=min(int(budget), BUDGET_CAP),
        max_radius=int(max_radius),
        fault=fault,
    )
    wall = time.perf_counter() - t0
    lo, arr = crop_output(out, dimension)
    record = RunRecord(
        n=n,
        dimension=dimension,
        seed=seed,
        policy=POLICY_NAMES[code],
        engine=engine,
        sampler=sampler if engine == "batched" else "stack",
        mode=mode,
        status=out["status"],
        tau=int(out["tau"]),
        lo=lo,
        u=arr["u"],
        oil=arr["eta1"],
        water=arr["eta2"],
        entries=arr["entries"],
        flux_out=arr["flux"],
        returns_site=arr["returns_site"],
        kernel={k: out[k] for k in ("N", "returns_total", "sum_z", "p_final", "p_series", "p_stride")},
        wall_time=wall,
        backend=be.NAME,
        tracked=bool(track),
    )
    if record.status == "budget":
        raise BudgetExhausted(f"firing budget {budget} exhausted at n={n}, seed={seed}", record)
    return record


# -- abelian property and least action ------------------------------------


@dataclass
class AbelianReport:
    n: int
    seed: int
    policies: tuple
    mismatches: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def _sparse_state(run: RunRecord):
    return (
        run.odometer.as_dict(),
        LatticeField(run.lo, run.oil).as_dict(),
        LatticeField(run.lo, run.water).as_dict(),
    )


def verify_abelian(
    n: int, seed: int, policy_set: Iterable = ("leftmost", "rightmost", "uniform-random-legal", "sweep-parallel"),
    dimension: int = 1, **kw
) -> AbelianReport:
    """Compare odometer and final state across firing policies (exact engine)."""
    policy_set = tuple(policy_set)
    report = AbelianReport(n, seed, policy_set)
    ref = None
    for pol in policy_set:
        run = run_to_fixation(n, dimension, seed, pol, "exact", track=False, **kw)
        state = _sparse_state(run)
        if ref is None:
            ref, ref_pol = state, pol
            continue
        for name, a, b in zip(("odometer", "oil", "water"), ref, state):
            for x in sorted(set(a) | set(b), key=as_coords):
                if a.get(x, 0) != b.get(x, 0):
                    report.mismatches.append((ref_pol, pol, name, x, a.get(x, 0), b.get(x, 0)))
    return report


@dataclass
class LeastActionReport:
    n: int
    seed: int
    prefix_length: int
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_least_action(
    n: int, seed: int, partial_legal_prefix: Sequence, complete_policy="leftmost", dimension: int = 1
) -> LeastActionReport:
    """Check ``u_prefix <= u_complete`` pointwise.

    Raises :class:`~oilwater.errors.IllegalFiring` if the prefix is not legal.
    """
    prefix = [_site(x, dimension) for x in partial_legal_prefix]
    partial = run_to_fixation(
        n, dimension, seed, FiringPolicy("adversarial-scripted", tuple(prefix)), "exact", track=False
    )
    full = run_to_fixation(n, dimension, seed, complete_policy, "exact", track=False)
    report = LeastActionReport(n, seed, len(prefix))
    a = partial.odometer.as_dict()
    b = full.odometer.as_dict()
    for x, v in a.items():
        if v > b.get(x, 0):
            report.violations.append((x, v, b.get(x, 0)))
    return report


def leftmost_sequence(n: int, seed: int, limit: Optional[int] = None) -> list:
    """The leftmost firing sequence, replayed through :func:`fire_pair`."""
    source = StackSource(seed)
    config = Configuration.initial(n)
    odo: dict = {}
    seq = []
    while limit is None or len(seq) < limit:
        legal = [x for x in config.oil if config.pairs(x) > 0]
        if not legal:
            break
        x = min(legal)
        fire_pair(config, x, odo, source)
        seq.append(x)
    return seq

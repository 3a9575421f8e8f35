"""Command-line interface: ``oilwater run | sweep | ode | verify | render``.

Exit codes: 0 success, 1 usage error, 2 verification failure, 3 engine anomaly.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import io, render
from .errors import EngineAnomaly
from .lattice import POLICIES, Configuration, fire_pair, run_to_fixation, verify_abelian, verify_least_action
from .stacks import StackSource

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_ANOMALY = 0, 1, 2, 3

ABELIAN_POLICIES = ("leftmost", "rightmost", "uniform-random-legal", "sweep-parallel")
IDENTITY_GRID = (1, 2, 3, 5, 10, 20, 50, 100, 200, 500, 1000)


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def _grid(text):
    try:
        vals = [int(float(t)) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated list of integers")
    if not vals:
        raise argparse.ArgumentTypeError("empty grid")
    return vals


def _add_run_flags(p, engine_default="batched"):
    p.add_argument("--n", type=_nonneg_int, required=True, help="particles of each species")
    p.add_argument("--dim", type=int, default=1, choices=range(1, 9), metavar="D")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--policy", default="leftmost", choices=sorted(POLICIES))
    p.add_argument("--engine", default=engine_default, choices=("exact", "batched"))
    p.add_argument("--sampler", default="stack", choices=("stack", "binomial"))
    p.add_argument("--mode", default="plain", choices=("plain", "merged"))
    p.add_argument("--budget", type=int, default=None, help="firing budget (default 100*16*n^4)")
    p.add_argument("--max-radius", type=int, default=None, help="window guard")
    p.add_argument("--fault", action="store_true", help=argparse.SUPPRESS)


def build_parser() -> Parser:
    parser = Parser(prog="oilwater", description=__doc__.splitlines()[0])
    parser.add_argument("--reproducible", action="store_true", help="omit timestamps and wall times")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one run to fixation")
    _add_run_flags(p)
    p.add_argument("--track", action="store_true", help="record pair-count observables (exact engine)")
    p.add_argument("--out", required=True, help="output prefix")

    p = sub.add_parser("sweep", help="seed sweep over a grid of n")
    p.add_argument("--n-grid", type=_grid, required=True)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--policy", default="leftmost", choices=sorted(POLICIES))
    p.add_argument("--engine", default="batched", choices=("exact", "batched"))
    p.add_argument("--base-seed", type=_seed, default=0)
    p.add_argument("--fit", action="store_true", help="fit log-log exponents of the medians")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True, help="output prefix")

    p = sub.add_parser("ode", help="solve the limiting free-boundary problem")
    p.add_argument("--dim", type=int, default=1, choices=(1, 2, 3, 4))
    p.add_argument("--mesh", type=_positive_float, default=1e-4)
    p.add_argument("--out", required=True, help="CSV path")

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("--suite", required=True, choices=("abelian", "least-action", "identities", "walk-stats"))
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--seeds", type=int, default=None)
    p.add_argument("--trials", type=int, default=100000, help="walks for walk-stats")
    p.add_argument("--fault", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("render", help="write a portable pixmap")
    p.add_argument("--kind", required=True, choices=("occupation", "contours", "profile"))
    p.add_argument("--record", help="run record JSON to render instead of simulating")
    p.add_argument("--n", type=_nonneg_int)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--engine", default="batched", choices=("exact", "batched"))
    p.add_argument("--margin", type=int, default=2)
    p.add_argument("--out", required=True)
    return parser


def _flags(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("command",)}


def _run(args, manifest):
    try:
        run = run_to_fixation(
            args.n, args.dim, args.seed, args.policy, args.engine,
            sampler=args.sampler, mode=args.mode, track=args.track or None,
            budget=args.budget, max_radius=args.max_radius, fault=args.fault,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    doc = io.record_to_dict(run, manifest, args.reproducible)
    io.write_json(args.out + ".json", doc)
    written = [args.out + ".json"]
    if run.dimension == 1:
        io.write_profile_csv(run, args.out + ".profile.csv", manifest)
        written.append(args.out + ".profile.csv")
    print(json.dumps({"tau": run.tau, "status": run.status, "written": written}))
    return EXIT_OK


def _sweep(args, manifest):
    from .experiments import SweepPlan, fit_statistic, run_sweep

    try:
        plan = SweepPlan(tuple(args.n_grid), args.seeds, args.dim, args.policy, args.engine, base_seed=args.base_seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    result = run_sweep(plan, workers=args.workers)
    if args.reproducible:
        for r in result.rows:
            r["wall_time"] = 0.0
    result.to_csv(args.out + ".csv", manifest)
    extra = {"manifest": manifest}
    if args.fit:
        fits = {}
        for name in ("height", "radius"):
            try:
                f = fit_statistic(result, name)
                fits[name] = {"slope": f.slope, "intercept": f.intercept, "residual": f.residual, "stderr": f.stderr}
            except ValueError as exc:
                fits[name] = {"error": str(exc)}
        extra["fits"] = fits
    result.to_json(args.out + ".json", extra)
    print(json.dumps({"runs": len(result.rows), "written": [args.out + ".csv", args.out + ".json"]}))
    return EXIT_OK


def _ode(args, manifest):
    from .scaling import ode_bvp_solve, radial_pde_solve

    if args.dim == 1:
        prof = ode_bvp_solve(args.mesh)
        xi, w, dw = prof.half()
        io.write_csv(args.out, ["xi", "w", "dw"], zip(xi, w, dw), manifest)
        radius = prof.support_radius
    else:
        prof = radial_pde_solve(args.dim, args.mesh)
        io.write_csv(args.out, ["r", "w", "dw"], zip(prof.r, prof.values, prof.derivative), manifest)
        radius = prof.support_radius
    print(json.dumps({"support_radius": radius, "written": [args.out]}))
    return EXIT_OK


def random_prefix(n: int, seed: int, greedy_site=None):
    """A legal firing prefix: optionally fire ``greedy_site`` while legal, then random legal sites."""
    rng = np.random.default_rng(seed)
    source = StackSource(seed)
    config = Configuration.initial(n)
    odo: dict = {}
    seq = []
    if greedy_site is not None:
        while config.pairs(greedy_site) > 0:
            fire_pair(config, greedy_site, odo, source)
            seq.append(greedy_site)
    full = list(seq)
    while True:
        legal = sorted(x for x in config.oil if config.pairs(x) > 0)
        if not legal:
            break
        x = legal[int(rng.integers(len(legal)))]
        fire_pair(config, x, odo, source)
        full.append(x)
    cut = int(rng.integers(len(seq), len(full) + 1))
    return full[:cut]


def suite_abelian(n_max=50, seeds=200, fault=False) -> dict:
    bad = []
    for seed in range(seeds):
        for n in range(1, n_max + 1):
            rep = verify_abelian(n, seed, ABELIAN_POLICIES, fault=fault)
            if not rep.ok:
                bad.append({"n": n, "seed": seed, "first": [str(v) for v in rep.mismatches[0]]})
    return {"cases": seeds * n_max, "failures": len(bad), "examples": bad[:5]}


def suite_least_action(n_max=50, seeds=100, fault=False) -> dict:
    del fault  # least action is checked on the unmodified stacks
    bad = []
    completes = ("leftmost", "rightmost", "sweep-parallel", "uniform-random-legal")
    for i in range(seeds):
        n = 1 + i % n_max
        prefix = random_prefix(n, i, greedy_site=0 if i % 2 else None)
        rep = verify_least_action(n, i, prefix, completes[i % len(completes)])
        if not rep.ok:
            bad.append({"n": n, "seed": i, "violations": [list(map(str, v)) for v in rep.violations[:3]]})
    return {"cases": seeds, "failures": len(bad), "examples": bad[:5]}


def suite_identities(n_max=1000, seeds=100, fault=False) -> dict:
    from .observables import run_identities

    grid = sorted({n for n in IDENTITY_GRID if n <= n_max} | {n_max})
    bad = []
    for n in grid:
        for seed in range(seeds):
            run = run_to_fixation(n, 1, seed, "leftmost", "exact", track=True, fault=fault)
            failed = [r.name for r in run_identities(run) if not r.ok]
            if failed:
                bad.append({"n": n, "seed": seed, "identities": failed})
    return {"cases": len(grid) * seeds, "failures": len(bad), "examples": bad[:5]}


def suite_walk(trials=100000, t=10000, seed=0) -> dict:
    from .observables import lazy_walk_stats

    st = lazy_walk_stats(t, trials, seed)
    ratio = st.abs_mean / math.sqrt(t)
    freq = st.zero_frequency()
    ok = abs(ratio - 1 / math.sqrt(math.pi)) <= 0.01 and freq >= 0.5
    return {"cases": trials, "failures": 0 if ok else 1, "abs_mean_ratio": ratio, "zero_frequency": freq,
            "target": 1 / math.sqrt(math.pi)}


def _verify(args, manifest):
    if args.suite == "walk-stats":
        report = suite_walk(args.trials)
    else:
        defaults = {"abelian": (50, 200), "least-action": (50, 100), "identities": (1000, 100)}[args.suite]
        n_max = args.n_max if args.n_max is not None else defaults[0]
        seeds = args.seeds if args.seeds is not None else defaults[1]
        if n_max < 1 or seeds < 1:
            raise UsageError("--n-max and --seeds must be >= 1")
        fn = {"abelian": suite_abelian, "least-action": suite_least_action, "identities": suite_identities}
        report = fn[args.suite](n_max, seeds, args.fault)
    report["suite"] = args.suite
    report["passed"] = report["failures"] == 0
    report["manifest"] = manifest
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK if report["passed"] else EXIT_VERIFY


def _render(args, manifest):
    if args.record:
        run = io.load_record(args.record)
    else:
        if args.n is None:
            raise UsageError("render needs --record or --n")
        run = run_to_fixation(args.n, args.dim, args.seed, "leftmost", args.engine, track=False)
    try:
        if args.kind == "occupation":
            render.render_occupation(run, args.out, manifest, args.margin)
        elif args.kind == "contours":
            render.render_contours(run, args.out, manifest, args.margin)
        else:
            render.render_profile(run, args.out, manifest)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    print(json.dumps({"written": [args.out]}))
    return EXIT_OK


COMMANDS = {"run": _run, "sweep": _sweep, "ode": _ode, "verify": _verify, "render": _render}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    manifest = io.make_manifest(args.command, _flags(args), getattr(args, "seed", None), args.reproducible)
    if argv is not None:
        manifest["argv"] = list(argv)
    try:
        return COMMANDS[args.command](args, manifest)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"oilwater: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EngineAnomaly as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return EXIT_ANOMALY


if __name__ == "__main__":
    sys.exit(main())

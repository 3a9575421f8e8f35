"""Run manifests, JSON run records and CSV profiles."""

from __future__ import annotations

import csv
import json
import sys
from datetime import datetime, timezone
from importlib import metadata, resources
from typing import Optional

import numpy as np

from . import prf
from .lattice import LatticeField, RunRecord

SCHEMA_NAME = "run_record.schema.json"


def version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def make_manifest(command: str, flags: dict, seed: Optional[int] = None, reproducible: bool = False) -> dict:
    from . import kernels

    m = {
        "command": command,
        "flags": {k: v for k, v in sorted(flags.items())},
        "seed": seed,
        "prf": prf.PRF_ID,
        "version": version(),
        "backend": kernels.BACKEND,
        "argv": list(sys.argv[1:]),
    }
    if not reproducible:
        m["created"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return m


def manifest_line(manifest: dict) -> str:
    return json.dumps(manifest, sort_keys=True, separators=(",", ":"))


def _site_json(site):
    return list(site) if isinstance(site, tuple) else site


def sparse(field: LatticeField) -> list:
    return [[_site_json(x), v] for x, v in field.items()]


def record_to_dict(run: RunRecord, manifest: Optional[dict] = None, reproducible: bool = False) -> dict:
    lf = lambda a: sparse(LatticeField(run.lo, a))  # noqa: E731
    crossings = []
    for j in range(2 * run.dimension):
        crossings.extend([_site_json(x), j, v] for x, v in LatticeField(run.lo, run.flux_out[j]).items())
    doc = {
        "n": run.n,
        "dimension": run.dimension,
        "seed": run.seed,
        "policy": run.policy,
        "engine": run.engine,
        "sampler": run.sampler,
        "mode": run.mode,
        "status": run.status,
        "tau": run.tau,
        "backend": run.backend,
        "prf": run.prf_id,
        "window": {"lo": list(run.lo), "shape": list(run.u.shape)},
        "odometer": lf(run.u),
        "final_config": {"oil": lf(run.oil), "water": lf(run.water)},
        "flux": {"entries": lf(run.entries), "crossings": crossings},
        "observables": None,
        "wall_time": None if reproducible else run.wall_time,
    }
    if run.tracked:
        k = run.kernel
        doc["observables"] = {
            "policy": run.policy,
            "N": [int(v) for v in k["N"]],
            "returns_total": int(k["returns_total"]),
            "returns_by_site": lf(run.returns_site),
            "sum_z": int(k["sum_z"]),
            "p_initial": int(k["p_series"][0]),
            "p_final": int(k["p_final"]),
            "p_stride": int(k["p_stride"]),
            "p_points": int(len(k["p_series"])),
        }
    if manifest is not None:
        doc["manifest"] = manifest
    return doc


def _dense(items, lo, shape, dim):
    a = np.zeros(shape, dtype=np.int64)
    for site, v in items:
        c = (site,) if dim == 1 else tuple(site)
        a[tuple(ci - li for ci, li in zip(c, lo))] = v
    return a


def record_from_dict(doc: dict) -> RunRecord:
    dim = doc["dimension"]
    lo = tuple(doc["window"]["lo"])
    shape = tuple(doc["window"]["shape"])
    dense = lambda items: _dense(items, lo, shape, dim)  # noqa: E731
    flux = np.zeros((2 * dim,) + shape, dtype=np.int64)
    for site, j, v in doc["flux"]["crossings"]:
        c = (site,) if dim == 1 else tuple(site)
        flux[(j,) + tuple(ci - li for ci, li in zip(c, lo))] = v
    obs = doc.get("observables")
    return RunRecord(
        n=doc["n"],
        dimension=dim,
        seed=doc["seed"],
        policy=doc["policy"],
        engine=doc["engine"],
        sampler=doc["sampler"],
        mode=doc["mode"],
        status=doc["status"],
        tau=doc["tau"],
        lo=lo,
        u=dense(doc["odometer"]),
        oil=dense(doc["final_config"]["oil"]),
        water=dense(doc["final_config"]["water"]),
        entries=dense(doc["flux"]["entries"]),
        flux_out=flux,
        returns_site=dense(obs["returns_by_site"]) if obs else np.zeros(shape, dtype=np.int64),
        wall_time=doc.get("wall_time") or 0.0,
        backend=doc.get("backend", ""),
        prf_id=doc.get("prf", prf.PRF_ID),
    )


def write_json(path, doc: dict):
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_record(path) -> RunRecord:
    with open(path) as fh:
        return record_from_dict(json.load(fh))


def load_schema() -> dict:
    return json.loads(resources.files("oilwater").joinpath("schema", SCHEMA_NAME).read_text())


def write_csv(path, header: list, rows, manifest: Optional[dict] = None):
    """Comma-separated, '.' decimals; the manifest goes on a leading ``#`` line."""
    with open(path, "w", newline="") as fh:
        if manifest is not None:
            fh.write("# manifest " + manifest_line(manifest) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def read_csv(path):
    """``(manifest or None, header, rows as strings)``."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    manifest = None
    if lines and lines[0].startswith("# manifest "):
        manifest = json.loads(lines[0][len("# manifest "):])
        lines = lines[1:]
    rows = list(csv.reader(lines))
    return manifest, rows[0], rows[1:]


def write_profile_csv(run: RunRecord, path, manifest: Optional[dict] = None):
    """Columns ``x, u, oil, water`` over the run window (d=1)."""
    if run.dimension != 1:
        raise ValueError("profile CSV is written for d=1 runs")
    xs = run.lo[0] + np.arange(run.u.shape[0])
    rows = zip(xs.tolist(), run.u.tolist(), run.oil.tolist(), run.water.tolist())
    write_csv(path, ["x", "u", "oil", "water"], rows, manifest)

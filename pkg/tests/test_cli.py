import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from oilwater import io, render
from oilwater.cli import main
from oilwater.lattice import LatticeField, run_to_fixation
from oilwater.scaling import closed_form_w


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out.strip().splitlines()
    return code, json.loads(out[-1]) if out else None


@pytest.fixture(scope="module")
def schema():
    return io.load_schema()


@pytest.fixture(scope="module")
def big2d():
    return run_to_fixation(1 << 18, 2, 0, engine="batched")


# -- run ------------------------------------------------------------------


def test_run_n0(tmp_path, capsys, schema):
    code, out = run_cli(capsys, "run", "--n", 0, "--out", tmp_path / "e")
    assert code == 0 and out["tau"] == 0
    doc = json.loads((tmp_path / "e.json").read_text())
    jsonschema.validate(doc, schema)
    assert doc["odometer"] == [] and doc["tau"] == 0
    _, header, rows = io.read_csv(tmp_path / "e.profile.csv")
    assert header == ["x", "u", "oil", "water"]
    assert all(r[1] == "0" for r in rows)


def test_run_n1_is_reproducible(tmp_path, capsys, schema):
    args = ("--reproducible", "run", "--n", 1, "--seed", 1, "--engine", "exact", "--out", tmp_path / "a")
    assert run_cli(capsys, *args)[0] == 0
    first = (tmp_path / "a.json").read_bytes()
    assert run_cli(capsys, *args)[0] == 0
    assert (tmp_path / "a.json").read_bytes() == first
    doc = json.loads(first)
    jsonschema.validate(doc, schema)
    assert doc["tau"] >= 1 and doc["observables"]["N"][2] == doc["tau"]
    assert sum(v for _, v in doc["odometer"]) == doc["tau"]
    assert len(doc["final_config"]["oil"]) == len(doc["final_config"]["water"]) == 1


def test_manifest_reexecutes_bit_exactly(tmp_path, capsys):
    out = tmp_path / "m"
    assert run_cli(capsys, "--reproducible", "run", "--n", 300, "--seed", 5, "--out", out)[0] == 0
    first = (tmp_path / "m.json").read_bytes(), (tmp_path / "m.profile.csv").read_bytes()
    manifest = json.loads(first[0])["manifest"]
    assert manifest["prf"] == "splitmix64-chain/v1" and manifest["seed"] == 5
    assert manifest["flags"]["n"] == 300
    assert main(manifest["argv"]) == 0
    assert ((tmp_path / "m.json").read_bytes(), (tmp_path / "m.profile.csv").read_bytes()) == first


def test_record_round_trip(tmp_path, capsys, schema):
    for dim, engine in ((1, "exact"), (2, "batched"), (3, "batched")):
        out = tmp_path / f"r{dim}"
        assert run_cli(capsys, "run", "--n", 200, "--dim", dim, "--engine", engine, "--out", out)[0] == 0
        doc = json.loads(out.with_suffix(".json").read_text())
        jsonschema.validate(doc, schema)
        back = io.record_from_dict(doc)
        ref = run_to_fixation(200, dim, 0, "leftmost", engine)
        assert back.odometer.as_dict() == ref.odometer.as_dict()
        assert back.final_config == ref.final_config
        assert np.array_equal(back.flux_out, ref.flux_out)
        assert "created" in doc["manifest"]


def test_run_reports_anomaly(tmp_path, capsys):
    code, out = run_cli(capsys, "run", "--n", 100, "--budget", 10, "--out", tmp_path / "x")
    assert code == 3
    assert out["error"] == "BudgetExhausted" and "n=100" in out["message"]


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--n", "-1", "--out", "x"],
        ["run", "--n", "3"],
        ["run", "--n", "3", "--policy", "greedy", "--out", "x"],
        ["run", "--n", "3", "--seed", str(1 << 64), "--out", "x"],
        ["ode", "--mesh", "0", "--out", "x"],
        ["ode", "--mesh", "-1e-3", "--out", "x"],
        ["frobnicate"],
    ],
)
def test_usage_errors_exit_1(argv, capsys):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 1
    assert "usage" in capsys.readouterr().err


def test_semantic_usage_errors(tmp_path, capsys):
    assert main(["run", "--n", "3", "--mode", "merged", "--engine", "batched", "--out", str(tmp_path / "x")]) == 1
    assert main(["render", "--kind", "occupation", "--out", str(tmp_path / "x.ppm")]) == 1
    assert main(["render", "--kind", "occupation", "--n", "10", "--dim", "1", "--out", str(tmp_path / "x.ppm")]) == 1
    assert main(["verify", "--suite", "abelian", "--n-max", "0"]) == 1


def test_console_script_exit_code(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "oilwater.cli", "ode", "--mesh", "0", "--out", "x"], capture_output=True)
    assert proc.returncode == 1


# -- sweep and ode ----------------------------------------------------------


def test_sweep_outputs(tmp_path, capsys):
    code, out = run_cli(capsys, "--reproducible", "sweep", "--n-grid", "10,40,160", "--seeds", 2, "--fit", "--out", tmp_path / "s")
    assert code == 0 and out["runs"] == 6
    manifest, header, rows = io.read_csv(tmp_path / "s.csv")
    assert manifest["command"] == "sweep" and len(rows) == 6
    doc = json.loads((tmp_path / "s.json").read_text())
    assert set(doc["fits"]) == {"height", "radius"}
    assert doc["prf"] == "splitmix64-chain/v1"


def test_ode_d1_csv(tmp_path, capsys):
    code, out = run_cli(capsys, "ode", "--dim", 1, "--mesh", "1e-4", "--out", tmp_path / "w.csv")
    assert code == 0
    manifest, header, rows = io.read_csv(tmp_path / "w.csv")
    assert header == ["xi", "w", "dw"] and manifest["flags"]["mesh"] == 1e-4
    a = np.array(rows, dtype=float)
    assert np.max(np.abs(a[:, 1] - closed_form_w(a[:, 0]))) <= 1e-6
    assert abs(out["support_radius"] - 3.8383) < 1e-4


def test_ode_d2_csv(tmp_path, capsys):
    code, out = run_cli(capsys, "ode", "--dim", 2, "--out", tmp_path / "r.csv")
    assert code == 0
    _, header, rows = io.read_csv(tmp_path / "r.csv")
    a = np.array(rows, dtype=float)
    assert header == ["r", "w", "dw"]
    assert a[-1, 0] == pytest.approx(out["support_radius"]) and a[-1, 1] == pytest.approx(0, abs=1e-12)


# -- verify -----------------------------------------------------------------


@pytest.mark.parametrize("suite", ["abelian", "least-action", "identities"])
def test_verify_small_suites_pass(suite, capsys):
    code, out = run_cli(capsys, "verify", "--suite", suite, "--n-max", 20, "--seeds", 10)
    assert code == 0 and out["passed"] and out["failures"] == 0


def test_verify_walk_stats(capsys):
    code, out = run_cli(capsys, "verify", "--suite", "walk-stats", "--trials", 20000)
    assert code == 0 and abs(out["abs_mean_ratio"] - out["target"]) < 0.01


@pytest.mark.parametrize("suite", ["abelian", "identities"])
def test_verify_detects_fault(suite, capsys):
    code, out = run_cli(capsys, "verify", "--suite", suite, "--n-max", 20, "--seeds", 5, "--fault")
    assert code == 2 and not out["passed"] and out["failures"] > 0


# -- rendering --------------------------------------------------------------


def test_pnm_round_trip(tmp_path):
    img = (np.arange(60).reshape(4, 5, 3) * 4).astype(np.uint8)
    render.write_pnm(tmp_path / "a.ppm", img, {"k": 1})
    back, comments = render.read_pnm(tmp_path / "a.ppm")
    assert np.array_equal(back, img)
    assert comments == ['manifest {"k":1}']
    with pytest.raises(ValueError):
        render.write_pnm(tmp_path / "b.ppm", np.zeros((2, 2, 2)))


def test_occupation_of_empty_run_is_blank():
    img = render.occupation_image(run_to_fixation(0, 2, 0, engine="batched"))
    assert img.shape == (5, 5, 3) and not img.any()


def test_occupation_dimensions():
    run = run_to_fixation(2000, 2, 3, engine="batched")
    (x0, y0), (x1, y1) = render.base_box(run)
    for m in (0, 2, 5):
        img = render.occupation_image(run, m)
        assert img.shape == (y1 - y0 + 1 + 2 * m, x1 - x0 + 1 + 2 * m, 3)
    img = render.occupation_image(run)
    assert img[..., 0].max() == 255 and img[..., 2].max() == 255 and not img[..., 1].any()
    # every stopped particle is drawn in its channel
    assert (img[..., 0] > 0).sum() == (run.oil > 0).sum()


def test_occupation_is_disk_shaped(big2d):
    img = render.occupation_image(big2d, margin=0)
    occupied = img.any(axis=2)
    h, w = occupied.shape
    assert abs(h - w) <= 0.1 * max(h, w)
    yy, xx = np.nonzero(occupied)
    r = np.hypot(xx - (w - 1) / 2, yy - (h - 1) / 2)
    # a disk fills its bounding circle; a square or diamond would not match both bounds
    assert occupied.sum() / (np.pi * r.max() ** 2) > 0.8
    assert np.percentile(r, 99) > 0.9 * r.max()


def test_contours_of_zero_are_uniform():
    f = LatticeField((-3, -3), np.zeros((7, 7), dtype=np.int64))
    img = render.contour_image(f)
    assert img.shape == (7, 7) and (img == img[0, 0]).all()


def test_contours_of_quartic_are_equal_width_rings():
    x = np.arange(-40, 41)
    X, Y = np.meshgrid(x, x, indexing="ij")
    u = (X**2 + Y**2) ** 2
    img = render.contour_image(LatticeField((-40, -40), u))
    row = img[40, 40:].astype(int)  # along the positive x axis, r = 0..40
    assert np.array_equal(row, np.floor(255 * ((np.arange(41) / 5) % 1)).astype(int))
    wraps = np.nonzero(np.diff(row) < 0)[0] + 1
    assert np.all(np.diff(wraps) == 5)
    # rotational symmetry of the shading
    assert np.array_equal(img, img.T) and np.array_equal(img, img[::-1])


def test_contours_ring_count(big2d):
    u = big2d.u
    img = render.contour_image(LatticeField(big2d.lo, u))
    c = big2d.origin_index()
    expected = render.ring_count(u.max())
    for line in (img[:, c[0]], img[c[1], :], img[::-1, c[0]]):
        half = line[: len(line) // 2 + 1].astype(int)
        wraps = int(np.sum(np.diff(half) < -128))
        assert abs(wraps - expected) <= 1


def test_render_cli_files(tmp_path, capsys):
    for kind, dim in (("occupation", 2), ("contours", 2), ("contours", 1), ("profile", 1)):
        out = tmp_path / f"{kind}{dim}.pnm"
        assert run_cli(capsys, "--reproducible", "render", "--kind", kind, "--n", 500, "--dim", dim, "--out", out)[0] == 0
        first = out.read_bytes()
        img, comments = render.read_pnm(out)
        assert comments[0].startswith("manifest ")
        assert json.loads(comments[0][len("manifest "):])["flags"]["kind"] == kind
        main(json.loads(comments[0][len("manifest "):])["argv"])
        assert out.read_bytes() == first
    capsys.readouterr()


def test_render_from_record(tmp_path, capsys):
    assert run_cli(capsys, "run", "--n", 300, "--dim", 2, "--out", tmp_path / "r")[0] == 0
    code, _ = run_cli(capsys, "render", "--kind", "occupation", "--record", tmp_path / "r.json", "--out", tmp_path / "o.ppm")
    assert code == 0
    img, _ = render.read_pnm(tmp_path / "o.ppm")
    run = run_to_fixation(300, 2, 0, engine="batched")
    assert np.array_equal(img, render.occupation_image(run))


def test_profile_image_overlay():
    run = run_to_fixation(5000, 1, 0, engine="batched")
    img = render.profile_image(run)
    assert img.ndim == 3 and img.shape[0] == 240
    assert (img == [220, 0, 0]).all(axis=2).any() and (img == [0, 0, 220]).all(axis=2).any()

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from lipmax import __version__
from lipmax.cli import CSV_COLUMNS, main
from lipmax.config import KEYS, SUITES, bundled_configs, load_config, parse_config
from lipmax.errors import ConfigurationError

SMALL = """\
# a short run
suites = calderon, norms, geometry   # any order
seed = 5
samples = 2
domain.kind = cube
domain.n = 1
calderon.L = 4
calderon.k0R = 1.0
"""


def test_defaults():
    cfg = parse_config("")
    for k, kdef in KEYS.items():
        assert cfg[k] == kdef.default
    assert cfg["domain.alpha"] == pytest.approx(np.pi / 2)


def test_values_and_comments():
    cfg = parse_config("material.epsilon = 2 + 0.5j  # lossy\n\n  calderon.k0R = 0.5,1.0 , 2\nseed=7\n")
    assert cfg["material.epsilon"] == 2 + 0.5j
    assert cfg["calderon.k0R"] == (0.5, 1.0, 2.0)
    assert cfg["seed"] == 7


@pytest.mark.parametrize("text, match", [
    ("bogus.key = 1", "unknown key 'bogus.key'"),
    ("seed 3", "expected 'key = value'"),
    ("domain.alpha = 4.0", "domain.alpha: value 4.0 out of range"),
    ("domain.alpha = 0", "domain.alpha: value 0.0 out of range"),
    ("samples = 2.5", "samples: cannot parse"),
    ("incident.direction = 0, 1", "incident.direction: expected 3 components"),
    ("maxwell.mesh_n = 5", "maxwell.mesh_n"),
    ("suites = traces, magic", "suites: value 'magic' out of range"),
    ("material.k0 = nan", "material.k0"),
    ("seed =", "seed: missing value"),
    ("mesh.path = /no/such/file.mesh", "mesh.path: file"),
    ("domain.kind = mesh", "mesh.path: required"),
])
def test_errors_name_the_key(text, match):
    with pytest.raises(ConfigurationError, match=match):
        parse_config(text)


def test_mesh_path_relative_to_config(tmp_path):
    (tmp_path / "m.mesh").write_text("")
    p = tmp_path / "run.cfg"
    p.write_text("domain.kind = mesh\nmesh.path = m.mesh\n")
    cfg = load_config(p)
    assert cfg["mesh.path"] == str(tmp_path / "m.mesh")


def test_suite_order_and_canonical_text():
    cfg = parse_config(SMALL)
    assert cfg.suites == ["geometry", "norms", "calderon"]
    text = cfg.canonical()
    keys = [line.split(" = ")[0] for line in text.splitlines()]
    assert keys == sorted(KEYS)
    assert parse_config(text.replace("mesh.path = None\n", "")).values == cfg.values


def test_overrides():
    cfg = parse_config("").with_overrides(seed=9, domain__n=2)
    assert cfg["seed"] == 9 and cfg["domain.n"] == 2
    with pytest.raises(ConfigurationError):
        parse_config("").with_overrides(nope=1)


def test_bundled_configs_load():
    names = bundled_configs()
    assert {"wedge_suite", "lossy_sphere", "cube_mesh"} <= set(names)
    for n in names:
        load_config(n)
    with pytest.raises(ConfigurationError, match="not found"):
        load_config("no_such_config")


def test_version_and_listing(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out
    assert main(["--list-suites"]) == 0
    assert capsys.readouterr().out.split() == list(SUITES)


def test_bad_arguments(tmp_path, capsys):
    assert main([]) == 2
    assert main(["run"]) == 2
    assert main(["frobnicate"]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("domain.alpha = 4.0\n")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "domain.alpha" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 2


@pytest.fixture(scope="module")
def small_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "small.cfg"
    cfg.write_text(SMALL)
    codes = [main(["run", "--config", str(cfg), "--out", str(root / d)]) for d in ("a", "b")]
    return root, codes


def test_small_run_passes_and_is_deterministic(small_runs):
    root, codes = small_runs
    assert codes == [0, 0]
    files = sorted(p.name for p in (root / "a").iterdir())
    assert files == ["calderon.jsonl", "geometry.jsonl", "norms.jsonl", "summary.json"]
    for f in files:
        assert (root / "a" / f).read_bytes() == (root / "b" / f).read_bytes()
    summary = json.loads((root / "a" / "summary.json").read_text())
    assert summary["pass"] and set(summary["suites"]) == {"geometry", "norms", "calderon"}


def test_seed_override_changes_reports(small_runs):
    root, _ = small_runs
    assert main(["run", "--config", str(root / "small.cfg"), "--seed", "6", "--out", str(root / "c")]) == 0
    assert (root / "a" / "norms.jsonl").read_bytes() != (root / "c" / "norms.jsonl").read_bytes()


def test_export_tables(small_runs, tmp_path):
    root, _ = small_runs
    assert main(["export", "--in", str(root / "a"), "--out", str(tmp_path)]) == 0
    with open(tmp_path / "all_checks.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    n = sum(len((root / "a" / f).read_text().splitlines()) for f in
            ("geometry.jsonl", "norms.jsonl", "calderon.jsonl"))
    assert len(rows) - 1 == n
    assert (tmp_path / "calderon_involution.csv").exists()


def test_export_without_reports(tmp_path):
    assert main(["export", "--in", str(tmp_path), "--out", str(tmp_path / "x")]) == 2


def test_maxwell_suite_reports_coercivity_failure(tmp_path, capsys):
    # the volume-form coercivity constant is not attained for the lossy vacuum
    cfg = tmp_path / "mx.cfg"
    cfg.write_text("suites = maxwell\nsamples = 3\nmaxwell.mesh_n = 4\ncalderon.L = 4\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["suites"]["maxwell"]["failing_ids"] == ["coercivity"]
    assert "maxwell:coercivity" in capsys.readouterr().err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "lipmax", "--list-suites"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.split()[0] == "geometry"

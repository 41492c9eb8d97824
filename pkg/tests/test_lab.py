import json
import os
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ampere_lab.errors import LabError
from ampere_lab.lab import CATALOGUE, ConfigError, LabConfig, load_config, run_experiment
from ampere_lab.lab.cli import main
from ampere_lab.lab.experiments import DEFAULTS, fit_slope, merged_params
from ampere_lab.lab.output import Table, fmt, write_csv
from ampere_lab.lab.suite import psh_suite

BOX = [[-0.6, 0.6]] * 4


def raw_config(**over):
    raw = {"model": {"kind": "twist", "rho_twist": 0.5},
           "domain": {"bbox": BOX, "resolutions": [9, 13]},
           "seed": 3}
    raw.update(over)
    return raw


def write_config(tmp_path, raw, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(raw))
    return str(p)


# ---------------------------------------------------------------- config


def test_config_round_trip():
    cfg = LabConfig.from_dict(raw_config(tolerances={"tol": 1e-7}))
    again = LabConfig.from_dict(cfg.to_dict())
    assert again == cfg
    assert cfg.omega == {"shape": "box"}
    assert cfg.omega_mask(cfg.domain(9)).sum() == 5 ** 4  # two boundary layers


@pytest.mark.parametrize("mutate, where", [
    (lambda r: r.pop("model"), "<root>"),
    (lambda r: r["domain"].update(resolutions=[13, 9]), "resolutions"),
    (lambda r: r["domain"].update(resolutions=[3]), "domain/resolutions/0"),
    (lambda r: r["domain"].update(bbox=[[1, 0]] * 4), "bbox"),
    (lambda r: r["model"].pop("rho_twist"), "model"),
    (lambda r: r.update(colour="red"), "<root>"),
    (lambda r: r["domain"].update(omega={"shape": "ball", "radius": -1}), "omega/radius"),
])
def test_config_errors_name_the_field(mutate, where):
    raw = raw_config()
    mutate(raw)
    with pytest.raises(ConfigError, match=where):
        LabConfig.from_dict(raw)


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError, match="JSON"):
        load_config(bad)


def test_overrides():
    cfg = LabConfig.from_dict(raw_config())
    new = cfg.override(resolution=17, tol=1e-4, seed=9, out_dir="x")
    assert (new.resolutions, new.tolerances["tol"], new.seed, new.output_dir) == ([17], 1e-4, 9, "x")
    assert cfg.resolutions == [9, 13]
    with pytest.raises(ConfigError):
        cfg.override(resolution=2)


def test_ball_omega():
    cfg = LabConfig.from_dict(raw_config(domain={"bbox": BOX, "resolutions": [9],
                                                 "omega": {"shape": "ball", "radius": 0.5}}))
    dom = cfg.domain(9)
    mask = cfg.omega_mask(dom)
    r = np.sqrt((dom.coordinates() ** 2).sum(-1))
    assert mask.any() and r[mask].max() < 0.5


# ---------------------------------------------------------------- suite and output


@given(st.integers(0, 2 ** 31 - 1))
def test_suite_is_deterministic(seed):
    a = psh_suite(4, seed, BOX)
    b = psh_suite(4, seed, BOX)
    assert [m.describe() for m in a] == [m.describe() for m in b]
    assert all(1 <= len(m.seeds) <= 3 for m in a)


def test_suite_member_values():
    m = psh_suite(1, 0, BOX, max_seeds=1)[0]
    s = m.seeds[0]
    x = (0.1, 0.2, -0.1, 0.3)
    q = sum((xi - ci) ** 2 for xi, ci in zip(x, s.c))
    z1 = complex(x[0], x[1])
    assert m(*x) == pytest.approx(s.a * q + (s.beta * z1 + s.gamma * z1 * z1).real + s.b)


def test_fmt():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(True) == "true" and fmt(3) == "3"
    assert fmt(float("nan")) == "nan" and fmt(-float("inf")) == "-inf"
    assert fmt(np.float64(2.5)) == "2.5"


def test_table_csv(tmp_path):
    t = Table(["a", "b"])
    t.add(1, 0.5)
    with pytest.raises(ValueError):
        t.add(1)
    write_csv(tmp_path / "t.csv", t)
    assert (tmp_path / "t.csv").read_text() == "a,b\n1,0.5\n"
    assert t.column("b") == [0.5]


def test_fit_slope():
    assert fit_slope([1, 2, 4], [1, 4, 16]) == pytest.approx(2.0)
    assert np.isnan(fit_slope([1], [1]))


# ---------------------------------------------------------------- experiments


def test_catalogue_and_params():
    assert set(CATALOGUE) == set(DEFAULTS)
    assert merged_params("cln", {"pairs": 2})["pairs"] == 2
    with pytest.raises(LabError, match="unknown parameters"):
        merged_params("cln", {"colour": 1})


def test_unknown_experiment():
    with pytest.raises(LabError, match="unknown experiment"):
        run_experiment("nope", LabConfig.from_dict(raw_config()), write=False)


def test_cln_coarse_run(tmp_path):
    cfg = LabConfig.from_dict(raw_config(output_dir=str(tmp_path / "cln")))
    t0 = time.perf_counter()
    rep = run_experiment("cln", cfg)
    assert time.perf_counter() - t0 < 60
    files = sorted(os.listdir(tmp_path / "cln"))
    assert files == ["max_ratio_W12.txt", "max_ratio_sup.txt", "max_ratios.csv", "ratios.csv",
                     "report.json"]
    data = json.loads((tmp_path / "cln" / "report.json").read_text())
    assert data["params"] == DEFAULTS["cln"]
    assert data["config"]["experiment"] == "cln"
    assert set(data["checks"]) == set(rep.checks)
    for c in data["checks"].values():
        assert {"value", "threshold", "rule", "passed"} <= set(c)
    assert np.isfinite(rep.checks["finite_W12"].value)


def test_csv_outputs_are_deterministic(tmp_path):
    paths = []
    for k in range(2):
        cfg = LabConfig.from_dict(raw_config(output_dir=str(tmp_path / f"run{k}")))
        run_experiment("cln", cfg)
        paths.append(tmp_path / f"run{k}")
    for name in ("ratios.csv", "max_ratios.csv", "max_ratio_W12.txt"):
        assert (paths[0] / name).read_bytes() == (paths[1] / name).read_bytes()


def test_under_resolved_is_reported():
    cfg = LabConfig.from_dict(raw_config(domain={"bbox": BOX, "resolutions": [5]},
                                         experiment="comparison", params={"trials": 1}))
    with pytest.raises(LabError, match="under-resolved"):
        run_experiment("comparison", cfg, write=False)


# ---------------------------------------------------------------- command line


def test_cli_success_paths(tmp_path, capsys):
    cfg = write_config(tmp_path, raw_config(
        domain={"bbox": [[-0.8, 0.8]] * 4, "resolutions": [9],
                "omega": {"shape": "ball", "radius": 0.7}}))
    out = str(tmp_path / "out")
    assert main(["--config", cfg, "validate-structure"]) == 0
    assert main(["ma", "--config", cfg, "--out-dir", out, "--expr", "x1**2 + x2**2"]) == 0
    assert main(["capacity", "--config", cfg, "--out-dir", out, "--set", "ball:0.3"]) == 0
    assert main(["extremal", "--config", cfg, "--out-dir", out, "--set", "plane:0,0@0.3"]) == 0
    assert main(["dirichlet", "--config", cfg, "--out-dir", out, "--tol", "1e-8"]) == 0
    for name in ("ma.json", "capacity.json", "extremal.json", "dirichlet.json", "dirichlet.field"):
        assert os.path.exists(os.path.join(out, name))
    rep = json.loads(open(os.path.join(out, "capacity.json")).read())
    assert rep["tolerances"]["stop_tol"] == 1e-6 and rep["seed"] == 3
    lines = capsys.readouterr().out.strip().splitlines()
    assert json.loads(lines[0])["is_valid"] is True


def test_cli_field_input(tmp_path):
    cfg = write_config(tmp_path, raw_config(domain={"bbox": BOX, "resolutions": [9]}))
    out = str(tmp_path / "out")
    assert main(["dirichlet", "--config", cfg, "--out-dir", out]) == 0
    field = os.path.join(out, "dirichlet.field")
    assert main(["ma", "--config", cfg, "--out-dir", out, "--field", field]) == 0
    assert main(["ma", "--config", cfg, "--resolution", "11", "--field", field]) == 2


@pytest.mark.parametrize("argv", [
    [],
    ["validate-structure"],
    ["bogus"],
    ["experiment", "nope"],
    ["ma"],
    ["ma", "--expr", "foo("],
    ["capacity", "--set", "disk:1"],
    ["capacity", "--set", "ball:x"],
    ["--resolution", "3", "validate-structure"],
])
def test_cli_usage_errors_exit_2(tmp_path, capsys, argv):
    cfg = write_config(tmp_path, raw_config())
    argv = argv if argv in ([], ["validate-structure"], ["bogus"]) else ["--config", cfg] + argv
    assert main(argv) == 2
    err = capsys.readouterr().err
    assert "error" in err and "config schema" in err


def test_cli_bad_config_exit_2(tmp_path, capsys):
    cfg = write_config(tmp_path, raw_config(model={"kind": "flat"}))
    assert main(["--config", cfg, "validate-structure"]) == 2
    assert "model/kind" in capsys.readouterr().err


def test_cli_validation_failure_exit_1(tmp_path):
    cfg = write_config(tmp_path, raw_config(model={"kind": "twist", "rho_twist": 4.0}))
    assert main(["--config", cfg, "validate-structure"]) == 1


def test_cli_failed_check_exit_1(tmp_path, capsys):
    raw = raw_config(experiment="cln", params={"stability": -1.0},
                     output_dir=str(tmp_path / "o"))
    cfg = write_config(tmp_path, raw)
    assert main(["--config", cfg, "experiment", "cln"]) == 1
    assert "FAIL stable_W12" in capsys.readouterr().out

import configparser

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from interconnect import cli
from interconnect.heatwave import FunctionSpec, Tolerances

REGULAR = """
[scenario]
name = regular
[grid]
N = 8
M = 2000
t1 = 1.0
[b1]
kind = polynomial
data = 0 1
[b2]
kind = polynomial
data = 0 1
[c2]
kind = polynomial
data = 1
[phi0]
kind = sine
data = 1 0.5
"""

SINGULAR = REGULAR.replace("[c2]\nkind = polynomial\ndata = 1",
                           "[c1]\nkind = polynomial\ndata = 0 3.141592653589793 -1")


def write(tmp_path, text, name="cfg.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_ini(path):
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read(path)
    return cp


def test_pipeline_regular(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["pipeline", "--config", write(tmp_path, REGULAR), "--out", str(out)]) == 0
    summary = read_ini(out / "summary.txt")["summary"]
    assert summary["classification"] == "Regular"
    assert float(summary["c_b2"]) == pytest.approx(4.9348, abs=1e-4)
    header = (out / "timeseries.csv").read_text().splitlines()[0]
    assert header == "t,v,v_hat,U,u," + ",".join(f"terminal_mode_{j}" for j in range(1, 9))
    assert cli.parse_config((out / "config.ini").read_text()) == cli.parse_config(REGULAR)


def test_pipeline_singular(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["pipeline", "--config", write(tmp_path, SINGULAR), "--out", str(out)]) == 0
    summary = read_ini(out / "summary.txt")["summary"]
    assert summary["classification"] == "Singular(1)"
    assert summary["order"] == "1"


def test_pipeline_is_deterministic(tmp_path):
    cfg = write(tmp_path, REGULAR)
    for d in ("a", "b"):
        assert cli.main(["pipeline", "--config", cfg, "--out", str(tmp_path / d)]) == 0
    for name in ("summary.txt", "timeseries.csv", "config.ini"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_grid_override_validation(tmp_path):
    cfg = write(tmp_path, REGULAR)
    assert cli.main(["pipeline", "--config", cfg, "--grid", "1", "--out", str(tmp_path)]) == 2


def test_overrides_apply(tmp_path):
    cfg = cli.load_config(write(tmp_path, REGULAR), modes=3, grid=50, horizon=0.5)
    assert (cfg.N, cfg.M, cfg.t1) == (3, 50, 0.5)


def test_stage_failure_exit_code(tmp_path):
    text = REGULAR.replace("[c2]\nkind = polynomial\ndata = 1", "")
    out = tmp_path / "out"
    assert cli.main(["pipeline", "--config", write(tmp_path, text), "--out", str(out)]) == 4
    failures = read_ini(out / "summary.txt")["failures"]
    assert "volterra" in failures
    assert (out / "timeseries.csv").exists()


def test_analyze_heat_family(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["analyze", "--config", write(tmp_path, REGULAR), "--out", str(out)]) == 0
    rep = read_ini(out / "analysis.txt")
    assert rep["dirichlet"]["hypothesis_holds"] == "true"
    assert rep["minimality"]["verdict"] in ("strong-evidence-minimal", "inconclusive")
    rows = (out / "gamma.csv").read_text().splitlines()
    assert rows[0] == "n,gamma" and len(rows) == 10


def test_analyze_degenerate_family(tmp_path, capsys):
    text = "[family]\nweights = 1 0\nrates = 0 -1\n"
    out = tmp_path / "out"
    assert cli.main(["analyze", "--config", write(tmp_path, text), "--out", str(out)]) == 0
    assert "warning" in capsys.readouterr().err
    assert read_ini(out / "analysis.txt")["minimality"]["verdict"] == "degenerate"


def test_analyze_range_failure(tmp_path):
    text = "[family]\nweights = 1 1 1\nrates = 1 100 400\n"
    out = tmp_path / "out"
    assert cli.main(["analyze", "--config", write(tmp_path, text), "--out", str(out)]) == 3
    assert read_ini(out / "analysis.txt")["range_failure"]["largest_usable_n"] == "2"


def test_config_errors(tmp_path):
    bad = [
        REGULAR.replace("data = 0 1", "data =", 1),
        REGULAR.replace("M = 2000", "M = 1"),
        REGULAR.replace("t1 = 1.0", "t1 = nan"),
        REGULAR.replace("kind = sine", "kind = spline"),
        "[grid\nN = 3",
    ]
    for i, text in enumerate(bad):
        assert cli.main(["analyze", "--config", write(tmp_path, text, f"b{i}.ini"),
                         "--out", str(tmp_path)]) == 2
    assert cli.main(["analyze", "--config", str(tmp_path / "missing.ini")]) == 2


def test_synthesize(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["synthesize", "--config", write(tmp_path, REGULAR), "--out", str(out)]) == 0
    rep = read_ini(out / "synthesis.txt")["synthesis"]
    assert float(rep["moment_residual"]) <= 1e-8
    assert float(rep["terminal_norm"]) <= 1e-4 * float(rep["uncontrolled_terminal_norm"])


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["analyze", "--config", write(tmp_path, REGULAR)]) == 0
    assert (tmp_path / "env" / "analysis.txt").exists()


def test_selftest(tmp_path):
    assert cli.main(["selftest"]) == 0
    assert cli.main(["selftest", "--perturb-kernel", "0.05"]) == 1
    for d in ("a", "b"):
        cli.main(["selftest", "--seed", "7", "--out", str(tmp_path / d)])
    assert (tmp_path / "a" / "selftest.txt").read_bytes() == \
        (tmp_path / "b" / "selftest.txt").read_bytes()


finite = st.floats(-1e6, 1e6, allow_nan=False)
kinds = st.sampled_from(["polynomial", "sine"])


@settings(max_examples=40, deadline=None)
@given(N=st.integers(1, 40), M=st.integers(2, 5000), t1=st.floats(1e-3, 10),
       data=st.lists(finite, min_size=1, max_size=5), kind=kinds,
       ridge=st.floats(0, 1), seed=st.integers(0, 2**31),
       solver=st.sampled_from(["direct", "resolvent"]), strict=st.booleans())
def test_config_round_trip(N, M, t1, data, kind, ridge, seed, solver, strict):
    cfg = cli.RunConfig(
        name="rt", functions={"b1": FunctionSpec(kind, data), "c2": FunctionSpec.polynomial(1.0)},
        N=N, M=M, t1=t1, seed=seed,
        tolerances=Tolerances(ridge=ridge, solver=solver, require_dirichlet=strict),
        family=cli.FamilyConfig((1.0, 2.0), (-1.0, -3.0), True))
    assert cli.parse_config(cli.format_config(cfg)) == cfg

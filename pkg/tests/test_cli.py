import csv
import json

import jsonschema
import numpy as np
import pytest

from bichoquard.adams import CSV_COLUMNS
from bichoquard.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_VIOLATION,
    RunConfig,
    main,
    parse_config,
    riesz_selftest,
)
from bichoquard.errors import ConfigError
from bichoquard.grid import load_snapshot
from bichoquard.reports import load_schema

SMALL = ["--grid", "12", "--box", "12", "--max-iter", "200"]


def _report(out):
    rep = json.loads((out / "report.json").read_text())
    jsonschema.validate(rep, load_schema())
    return rep


def _csv(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


# parsing ------------------------------------------------------------------------------

def test_benchmark_flags():
    cfg, prov = parse_config(["solve", "--mu", "2", "--beta", "0", "--c", "1", "--nl", "power:p=4",
                              "--grid", "32", "--box", "16"])
    assert (cfg.mu, cfg.beta, cfg.c, cfg.grid, cfg.box) == (2.0, 0.0, 1.0, 32, 16.0)
    assert prov["explicit_keys"] == ["beta", "box", "c", "grid", "mu", "nl"]
    assert prov["config_file"] is None


def test_defaults_match_benchmark():
    cfg = RunConfig(command="solve")
    assert (cfg.mu, cfg.beta, cfg.c, cfg.nl, cfg.grid, cfg.box) == (2.0, 0.0, 1.0, "power:p=4", 32, 16.0)


@pytest.mark.parametrize("argv,needle", [
    (["solve", "--mu", "5"], "mu"),
    (["solve", "--mu", "0"], "mu"),
    (["solve", "--c", "-1"], "c"),
    (["solve", "--grid", "3.5"], "grid"),
    (["solve", "--grid", "13"], "grid"),
    (["solve", "--beta", "abc"], "abc"),
    (["solve", "--box", "nan"], "box"),
    (["solve", "--nl", "power:p=1"], "p"),
    (["solve", "--bogus", "1"], "bogus"),
    (["launch"], "launch"),
    (["sweep-c", "--c-list", "1,0.5"], "c_list"),
    (["fiber", "--s-range", "1,0,5"], "s_range"),
])
def test_bad_input_names_the_token(argv, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config(argv)


def test_file_then_flag_override(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# benchmark\ncommand = solve\nmu = 3\nc = 0.5  # small mass\ngrid = 16\n")
    cfg, prov = parse_config(["--config", str(path), "--c", "0.8"])
    assert cfg.command == "solve"
    assert (cfg.mu, cfg.c, cfg.grid) == (3.0, 0.8, 16)
    assert prov["from_file"] == ["c", "grid", "mu"]
    assert prov["overridden_by_flags"] == ["c"]
    assert prov["config_file"] == str(path)


@pytest.mark.parametrize("text,needle", [("mux = 2\n", "mux"), ("mu 2\n", "key = value"), ("mu = 2x\n", "2x")])
def test_bad_config_file(tmp_path, text, needle):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(ConfigError, match=needle):
        parse_config(["solve", "--config", str(path)])


def test_main_exit_codes(tmp_path, capsys):
    assert main([]) == EXIT_CONFIG
    assert main(["--help"]) == EXIT_OK
    assert main(["solve", "--mu", "5", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert not (tmp_path / "report.json").exists()


# commands -----------------------------------------------------------------------------

@pytest.fixture(scope="module")
def solved_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("solve")
    code = main(["solve", *SMALL, "--out", str(out)])
    return out, code


def test_solve_writes_valid_outputs(solved_dir):
    out, code = solved_dir
    rep = _report(out)
    assert code == EXIT_OK and rep["status"] == "ok"
    assert rep["provenance"]["files"] == ["state.bch4"]
    res = rep["results"]
    assert res["E"] > 0 and res["lambda_direct"] < 0
    assert "seconds" not in res
    u = load_snapshot(out / "state.bch4")
    assert u.grid.n == 12
    assert float(np.sum(u.data**2) * u.grid.cell_volume) == pytest.approx(1.0, rel=1e-12)


def test_solve_rerun_is_byte_identical(solved_dir):
    out, _ = solved_dir
    before = {p.name: p.read_bytes() for p in out.iterdir()}
    assert main(["solve", *SMALL, "--out", str(out)]) == EXIT_OK
    after = {p.name: p.read_bytes() for p in out.iterdir()}
    assert before == after


def test_sweep_c_sequential_and_parallel(tmp_path):
    seq, par = tmp_path / "seq", tmp_path / "par"
    args = ["sweep-c", *SMALL, "--c-list", "0.8,1.0"]
    assert main([*args, "--out", str(seq)]) == EXIT_OK
    assert main([*args, "--workers", "2", "--out", str(par)]) == EXIT_OK
    a, b = _csv(seq / "sweep.csv"), _csv(par / "sweep.csv")
    assert {"c", "E", "nonincreasing", "strict_decrease"} <= set(a[0])
    assert a[1]["nonincreasing"] == "true" and a[1]["strict_decrease"] == "true"
    for ra, rb in zip(a, b):
        assert float(ra["E"]) == pytest.approx(float(rb["E"]), rel=1e-6)
        assert ra["strict_decrease"] == rb["strict_decrease"]
    assert (seq / "sweep.csv").read_text().startswith("# bichoquard=")
    _report(seq)


def test_sweep_beta(tmp_path):
    assert main(["sweep-beta", *SMALL, "--beta-list", "0,0.5", "--out", str(tmp_path)]) == EXIT_OK
    rows = _csv(tmp_path / "sweep_beta.csv")
    assert [float(r["beta"]) for r in rows] == [0.0, 0.5]
    _report(tmp_path)


def test_fiber(tmp_path):
    assert main(["fiber", "--grid", "12", "--box", "12", "--s-range=-1,0.5,7",
                 "--out", str(tmp_path)]) == EXIT_OK
    rows = _csv(tmp_path / "fiber.csv")
    assert len(rows) == 7 and list(rows[0]) == ["s", "g", "gprime"]
    res = _report(tmp_path)["results"]
    # [PAPER] g'(s_u) = 0 at the fiber maximum
    assert abs(res["gprime_at_su"]) <= 1e-8 * max(1.0, abs(res["g_at_su"]))
    assert res["curvature_at_su"] < 0


def test_adams(tmp_path):
    assert main(["adams", "--n-list", "100,1000", "--out", str(tmp_path)]) in (EXIT_OK,)
    path = tmp_path / "adams.csv"
    header = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")][0]
    assert header.split(",") == list(CSV_COLUMNS)
    assert len(_csv(path)) == 2
    _report(tmp_path)


def test_verify_small(tmp_path):
    assert main(["verify", "--grid", "8", "--box", "12", "--fields", "5", "--out", str(tmp_path)]) == EXIT_OK
    res = _report(tmp_path)["results"]
    assert res["violations"] == 0 and res["fields"] == 5
    assert [g["n"] for g in res["grids"]] == [8, 12]


def test_riesz_selftest_small(tmp_path):
    # h = 0.5 resolves the unit Gaussian as on the 32^4 benchmark grid
    assert main(["riesz-selftest", "--box", "8", "--n-list", "16", "--out", str(tmp_path)]) == EXIT_OK
    res = _report(tmp_path)["results"]
    assert all(d["max_rel_error"] <= 1e-10 for d in res["direct"])


def test_riesz_selftest_flags_unresolved_grid(tmp_path):
    # h = 2 cannot resolve the Gaussian; the command must say so
    assert main(["riesz-selftest", "--box", "16", "--n-list", "8", "--out", str(tmp_path)]) == EXIT_VIOLATION
    assert _report(tmp_path)["status"] == "violation"


def test_riesz_selftest_function_shape():
    res = riesz_selftest(mu_list=(2.0,), n_direct=4, n_list=(8,), length=4.0)
    assert len(res["direct"]) == 1 and len(res["gaussian_origin"]) == 1


def test_refine(tmp_path):
    code = main(["refine", "--box", "12", "--n-list", "8,12", "--max-iter", "200", "--out", str(tmp_path)])
    rows = _csv(tmp_path / "refine.csv")
    assert [int(float(r["N"])) for r in rows] == [8, 12]
    rep = _report(tmp_path)
    assert code == (EXIT_OK if rep["status"] == "ok" else 1)

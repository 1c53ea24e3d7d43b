import csv
import json
import subprocess
import sys

import pytest

from slabrad import cli
from slabrad.quadrature import QuadratureConfig

SMALL = {
    "modes": ["--modes.points", "3"],
    "greens": ["--sweep.d-points", "2"],
    "pairpower": ["--sweep.d-points", "2"],
    "spectrum": ["--sweep.d-points", "2", "--lattice.sites", "3"],
    "map": ["--sweep.d-points", "2", "--sweep.phi-points", "3", "--lattice.sites", "3"],
    "sizesweep": ["--sweep.d-points", "2", "--sweep.n-list", "[2, 3]"],
    "scaling": ["--scaling.n-list", "[8, 16]"],
    "disorder": ["--sweep.phi-points", "3", "--lattice.sites", "3", "--disorder.realizations", "3",
                 "--disorder.sigma-over-d", "[0.0, 0.1]", "--environment", "homogeneous"],
    "oracle-check": ["--n", "2", "--oracle.cases", "2", "--oracle.phi-points", "1"],
}

HEADERS = {
    "modes": ["width_nm", "te0_n_eff", "tm0_n_eff", "te_modes", "tm_modes"],
    "greens": ["d_over_lambda"] + [f"g_{a}{b}_{p}" for a in "xyz" for b in "xyz" for p in ("re", "im")],
    "pairpower": ["d_over_lambda", "homogeneous", "slab"],
    "spectrum": ["d_over_lambda", "gamma_nu_1", "gamma_nu_2", "gamma_nu_3"],
    "map": ["d_over_lambda", "phi", "gamma_dot", "sign"],
    "sizesweep": ["n", "d_over_lambda", "gamma_dot", "sign"],
    "scaling": ["dimensionality", "alpha", "n", "d_min_k0"],
    "disorder": ["phi", "mean_gamma_dot", "stderr", "realizations_used", "sigma_over_d"],
    "oracle-check": ["case", "n", "environment", "orientation", "quantity", "phi",
                     "closed_form", "finite_difference", "rel_error", "pass"],
}


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.mark.parametrize("sub", list(SMALL))
def test_subcommand_headers(sub, tmp_path):
    out = tmp_path / f"{sub}.csv"
    assert cli.main([sub, *SMALL[sub], "-o", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == HEADERS[sub]
    assert len(rows) > 1
    meta = json.loads((tmp_path / f"{sub}.csv.meta.json").read_text())
    assert meta["subcommand"] == sub and meta["columns"] == HEADERS[sub]
    assert meta["rows"] == len(rows) - 1
    for key in ("tool_version", "config", "seed", "wall_time_s", "failures"):
        assert key in meta


def test_sizes_and_map_shapes(tmp_path):
    out = tmp_path / "m.csv"
    cli.main(["map", *SMALL["map"], "-o", str(out)])
    assert len(read_csv(out)) == 1 + 2 * 3


def test_empty_grid_is_hard_error(tmp_path, capsys):
    rc = cli.main(["map", "--sweep.d-points", "0", "-o", str(tmp_path / "x.csv")])
    assert rc == 1
    assert "empty sweep axis" in capsys.readouterr().err
    assert not (tmp_path / "x.csv").exists()


def test_oracle_check_is_reproducible(tmp_path):
    cmd = [sys.executable, "-m", "slabrad.cli", "oracle-check", "--n", "3", "--seed", "7",
           "--oracle.cases", "2", "--oracle.phi-points", "2"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        subprocess.run(cmd + ["-o", str(path)], check=True)
    assert a.read_bytes() == b.read_bytes()
    rows = read_csv(a)[1:]
    assert {r[1] for r in rows} == {"3"}
    assert all(r[-1] == "1" for r in rows)


def test_sidecar_round_trip(tmp_path):
    first = tmp_path / "first.csv"
    assert cli.main(["spectrum", *SMALL["spectrum"], "--environment", "homogeneous", "-o", str(first)]) == 0
    second = tmp_path / "second.csv"
    assert cli.main(["spectrum", "--config", str(first) + ".meta.json", "-o", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    cfg1 = json.loads((tmp_path / "first.csv.meta.json").read_text())["config"]
    cfg2 = json.loads((tmp_path / "second.csv.meta.json").read_text())["config"]
    cfg1["output"]["path"] = cfg2["output"]["path"]
    assert cfg1 == cfg2


def test_yaml_config_and_schema_errors(tmp_path, capsys):
    good = tmp_path / "good.yaml"
    good.write_text("environment: homogeneous\nscaling:\n  n_list: [8, 16]\n")
    assert cli.main(["scaling", "--config", str(good), "-o", str(tmp_path / "s.csv")]) == 0
    bad = tmp_path / "bad.yaml"
    bad.write_text("environment: homogeneous\nslab:\n  index: 3.5\n  widht_nm: 200\n")
    assert cli.main(["modes", "--config", str(bad), "-o", str(tmp_path / "m.csv")]) == 1
    err = capsys.readouterr().err
    assert f"{bad}:4" in err and "slab.widht_nm" in err
    bad.write_text("sweep:\n  d_points: many\n")
    assert cli.main(["map", "--config", str(bad)]) == 1
    assert f"{bad}:2" in capsys.readouterr().err
    assert cli.main(["map", "--sweep.d-points", "-3"]) == 1
    assert "flag --sweep.d-points" in capsys.readouterr().err


def test_json_config_and_output(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"modes": {"points": 2}, "output": {"format": "json"}}))
    out = tmp_path / "m.json"
    assert cli.main(["modes", "--config", str(cfg), "-o", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["columns"] == HEADERS["modes"] and len(data["rows"]) == 2


def test_thread_count_does_not_change_output(tmp_path, monkeypatch):
    outs = []
    for threads in ("1", "8"):
        monkeypatch.setenv("SLABRAD_THREADS", threads)
        path = tmp_path / f"t{threads}.csv"
        assert cli.main(["spectrum", "--sweep.d-points", "4", "--lattice.sites", "4", "-o", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_failed_points_exit_2(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(cli, "_quad", lambda cfg: QuadratureConfig(max_tail_terms=8, rel_tol=1e-15))
    out = tmp_path / "f.csv"
    assert cli.main(["spectrum", "--sweep.d-points", "2", "--lattice.sites", "2", "-o", str(out)]) == 2
    rows = read_csv(out)
    assert rows[1][1] == "nan"
    meta = json.loads((tmp_path / "f.csv.meta.json").read_text())
    assert len(meta["failures"]) == 2
    assert "failed" in capsys.readouterr().err


def test_help_lists_flags(capsys):
    with pytest.raises(SystemExit):
        cli.main(["map", "--help"])
    text = capsys.readouterr().out
    assert "--sweep.phi-points" in text and "--quadrature.detour-height" in text

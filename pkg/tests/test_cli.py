import json
import math
import subprocess
import sys

import pytest

from llcorr.cli import ConfigError, main, parse_config, parse_floats, run


def _read_csv(path):
    lines = path.read_text().splitlines()
    meta = json.loads(lines[0][2:])
    cols = lines[1].split(",")
    rows = [dict(zip(cols, ln.split(","))) for ln in lines[2:]]
    return meta, rows


def test_parse_echo():
    cfg = parse_config(["correlator", "--kind", "field", "--density", "family:gaussian,A=0.01,sigma=1",
                        "--c", "1", "--x", "0", "--t", "0"])
    assert cfg.command == "correlator"
    assert cfg.params["kind"] == "field" and cfg.params["c"] == 1.0
    assert cfg.params["density"] == "family:gaussian,A=0.01,sigma=1"
    assert (cfg.params["x"], cfg.params["t"]) == ("0", "0")
    assert cfg.fmt == "csv" and cfg.cache


def test_missing_flag_named():
    with pytest.raises(ConfigError, match="--c"):
        parse_config(["correlator", "--density", "family:gaussian,A=0.01", "--x", "0", "--t", "0"])


def test_flag_overrides_file(tmp_path):
    f = tmp_path / "cfg.json"
    f.write_text(json.dumps({"c": 1, "density": "family:box,h=0.01,a=1", "x": "0", "t": "0"}))
    cfg = parse_config(["correlator", "--config", str(f), "--c", "2"])
    assert cfg.params["c"] == 2.0
    assert parse_config(["correlator", "--config", str(f)]).params["c"] == 1.0


def test_config_file_errors(tmp_path):
    f = tmp_path / "cfg.json"
    f.write_text(json.dumps({"c": 1, "bogus": 3}))
    with pytest.raises(ConfigError, match="bogus"):
        parse_config(["chi", "--config", str(f), "--x", "0"])
    f.write_text("{not json")
    with pytest.raises(ConfigError):
        parse_config(["chi", "--config", str(f), "--x", "0"])
    f.write_text(json.dumps({"command": "ff", "x": "0"}))
    with pytest.raises(ConfigError):
        parse_config(["chi", "--config", str(f)])


def test_invalid_values_rejected():
    with pytest.raises(ConfigError):
        parse_config(["bethe-solve", "--L", "10", "--c", "-1", "--N", "2"])
    with pytest.raises(SystemExit):
        parse_config(["bethe-solve", "--L", "10", "--c", "1", "--bogus", "2"])


def test_parse_floats():
    assert parse_floats("0,0.5,1") == [0.0, 0.5, 1.0]
    assert parse_floats("-1:1:5") == [-1.0, -0.5, 0.0, 0.5, 1.0]
    assert parse_floats("2.5") == [2.5]
    with pytest.raises(ConfigError):
        parse_floats("a,b")


def test_field_origin_is_density(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["correlator", "--density", "family:gaussian,A=0.01,sigma=1", "--c", "1",
                 "--x", "0", "--t", "0", "-o", str(out)]) == 0
    meta, rows = _read_csv(out)
    assert abs(float(rows[0]["re"]) - 0.01 * math.sqrt(math.pi)) <= 1e-8
    assert meta["params"]["c"] == 1.0 and "config_hash" in meta
    assert {"numpy", "scipy", "llcorr"} <= meta.keys()


def test_cache_hit_and_byte_identical(tmp_path):
    args = ["correlator", "--density", "family:gaussian,A=0.01,sigma=1", "--c", "1",
            "--x=-1:1:3", "--t", "0.3"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["-o", str(a)]) == 0
    assert main(args + ["-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert json.loads((tmp_path / "a.csv.run.json").read_text())["cache_hit"] is False
    assert json.loads((tmp_path / "b.csv.run.json").read_text())["cache_hit"] is True
    c = tmp_path / "c.csv"
    assert main(args + ["-o", str(c), "--no-cache"]) == 0
    assert c.read_bytes() == a.read_bytes()


def test_error_record(capsys):
    code = main(["bethe-solve", "--L", "10", "--c", "1", "--numbers", "0,1"])
    assert code == 1
    rec = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert rec["error"] == "ValueError" and rec["command"] == "bethe-solve"
    assert main(["correlator", "--x", "0", "--t", "0", "--c", "1"]) == 2


def test_bethe_solve_json(capsys):
    assert main(["bethe-solve", "--L", "10", "--c", "1", "--N", "3", "--no-cache"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert [d["number"] for d in doc["data"]] == [-1.0, 0.0, 1.0]
    assert doc["meta"]["result"]["residual"] <= 1e-12


def test_ff_json(capsys):
    assert main(["ff", "--L", "10", "--c", "1", "--ket", "0", "--bra", ""]) == 0
    doc = json.loads(capsys.readouterr().out)
    # single particle, vacuum bra: |FF|^2 = 1/L
    assert doc["data"][0]["modulus_sq"] == pytest.approx(0.1, rel=1e-12)


def test_pfd_verify_all_pass(capsys):
    assert main(["pfd-verify"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["meta"]["result"]["all_pass"] is True
    assert all(d["pass"] for d in doc["data"])


def test_chi_json(capsys):
    assert main(["chi", "--x", "0"]) == 0
    v = json.loads(capsys.readouterr().out)["data"][0]["value"]
    s = math.sqrt(2 * math.pi)
    assert v == pytest.approx([-s, s], rel=1e-8)


def test_lattice_sum_json(capsys):
    assert main(["lattice-sum", "--alpha", "0.3", "--w", "0.2", "--tau", "0.1", "--L", "100"]) == 0
    d = json.loads(capsys.readouterr().out)["data"][0]
    assert d["gap"] <= 5 / 100 ** 2
    assert main(["lattice-sum", "--alpha", "0.3"]) == 2


def test_density_csv(tmp_path):
    out = tmp_path / "rho.csv"
    assert main(["density", "--density", "family:box,h=0.02,a=2", "--c", "1", "--grid", "0,5",
                 "-o", str(out)]) == 0
    meta, rows = _read_csv(out)
    assert meta["result"]["D"] == pytest.approx(0.08)
    assert float(rows[0]["rho"]) == 0.02 and float(rows[1]["rho"]) == 0.0


def test_spectral_csv(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["spectral", "--density", "family:gaussian,A=0.01,sigma=1", "--c", "1",
                 "--x=-2:2:5", "--t=-1:1:3", "-o", str(out)]) == 0
    meta, rows = _read_csv(out)
    assert len(rows) == 15 and meta["result"]["kind"] == "field"


def test_oracle_compare_csv(tmp_path):
    out = tmp_path / "o.csv"
    assert main(["oracle-compare", "--N", "2", "--D", "0.1,0.05", "--window", "60",
                 "-o", str(out)]) == 0
    meta, rows = _read_csv(out)
    errs = [float(r["rel_err"]) for r in rows]
    assert errs[1] < errs[0]
    assert "fitted_exponent" in meta["result"]


def test_run_returns_info(tmp_path, monkeypatch):
    cfg = parse_config(["chi", "--x", "0,1", "-o", str(tmp_path / "chi.json")])
    code, info = run(cfg)
    assert code == 0 and info["config_hash"] == cfg.digest()


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "llcorr", "chi", "--x", "1", "--no-cache"],
                       capture_output=True, text=True, check=True)
    assert json.loads(r.stdout)["data"][0]["x"] == 1.0

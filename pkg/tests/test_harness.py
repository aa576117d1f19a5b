import json
from pathlib import Path

import pytest

from cocycle_lab import harness as hs
from cocycle_lab.cli import main
from cocycle_lab.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL = {
    "ldt-determinant": {"n": 64},
    "ldt-matrix": {"n": 64},
    "sbet": {"n": 64},
    "eigencount": {"n": 64, "phases": 2, "centers": 3},
    "ap-check": {"count": 50},
    "lyapunov-table": {"ns": [32, 64], "ref_n": 256},
    "jensen-vs-sturm": {"disks": 5},
}


def small_config(name, **consts):
    cfg = json.loads((CONFIGS / f"{name}.json").read_text())
    cfg["options"] = {**cfg.get("options", {}), **SMALL[name]}
    cfg["constants"] = {**cfg.get("constants", {}), "samples": 4096, "grid_log2": 8, **consts}
    return cfg


@pytest.mark.parametrize("name", hs.SCENARIOS)
def test_shipped_configs_validate(name):
    cfg = hs.load_config(CONFIGS / f"{name}.json")
    assert cfg["scenario"] == name


@pytest.mark.parametrize("name", hs.SCENARIOS)
def test_scenarios_write_bundle(name, tmp_path):
    rep = hs.run(small_config(name), tmp_path)
    assert (tmp_path / "report.json").exists() and (tmp_path / "plots.json").exists()
    plots = json.loads((tmp_path / "plots.json").read_text())["plots"]
    for p in plots:
        assert (tmp_path / p["table"]).exists()
    on_disk = json.loads((tmp_path / "report.json").read_text())
    assert on_disk["scenario"] == name and "_cache" not in on_disk
    assert isinstance(rep["passed"], bool)


def test_bundle_is_deterministic_across_threads(tmp_path):
    cfg = small_config("ldt-determinant")
    hs.run(cfg, tmp_path / "a", threads=1)
    hs.run(cfg, tmp_path / "b", threads=4)
    for f in ("report.json", "plots.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_cache_hit_miss_corrupt(tmp_path):
    cfg = small_config("lyapunov-table")
    cache = tmp_path / "cache"
    r1 = hs.run(cfg, tmp_path / "o1", cache_dir=cache)
    assert r1["_cache"]["misses"] > 0 and r1["_cache"]["hits"] == 0
    r2 = hs.run(cfg, tmp_path / "o2", cache_dir=cache)
    assert r2["_cache"]["misses"] == 0 and r2["_cache"]["hits"] == r1["_cache"]["misses"]
    victim = sorted(cache.glob("*.json"))[0]
    doc = json.loads(victim.read_text())
    doc["payload"] = "tampered"
    victim.write_text(json.dumps(doc))
    r3 = hs.run(cfg, tmp_path / "o3", cache_dir=cache)
    assert r3["_cache"]["corrupt"] == 1 and r3["_cache"]["misses"] == 1
    assert (tmp_path / "o1" / "report.json").read_bytes() == (tmp_path / "o3" / "report.json").read_bytes()


def test_cache_key_ignores_dict_order(tmp_path):
    c = hs.Cache(tmp_path)
    assert c.lookup_or_compute({"a": 1, "b": 2}, lambda: [1]) == [1]
    assert c.lookup_or_compute({"b": 2, "a": 1}, lambda: [2]) == [1]
    assert (c.hits, c.misses) == (1, 1)


@pytest.mark.parametrize(
    "mutate,path",
    [
        (lambda c: c.pop("params"), "<root>"),
        (lambda c: c.update(schema_version=2), "schema_version"),
        (lambda c: c.update(scenario="nope"), "scenario"),
        (lambda c: c["constants"].update(epsilon=0.7), "constants/epsilon"),
        (lambda c: c["options"].update(bogus=1), "options"),
        (lambda c: c.update(extra=1), "<root>"),
    ],
)
def test_config_errors(mutate, path):
    cfg = small_config("ap-check")
    mutate(cfg)
    with pytest.raises(ConfigError) as ei:
        hs.ExperimentConfig.from_dict(cfg)
    assert ei.value.path == path


def test_cli_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.json"
    good.write_text(json.dumps(small_config("ap-check")))
    assert main(["ap-check", "--config", str(good), "--out", str(tmp_path / "o")]) == 0
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema_version": 1}')
    assert main(["ap-check", "--config", str(bad), "--out", str(tmp_path / "o")]) == 3
    assert main(["ap-check", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 3


def test_cli_assertion_exit(tmp_path):
    cfg = small_config("lyapunov-table")
    cfg["options"]["max_L"] = 0.1  # AMO lambda = 5 has L > 1.5
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    assert main(["lyapunov-table", "--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_cli_module_commands(tmp_path):
    amo = str(CONFIGS / "amo.json")
    assert main(["freq", "--omega", "pi-3", "--depth", "6", "--delta-family", "power", "--alpha", "2",
                 "--hypothesis", "H.3", "--out", str(tmp_path / "f.json")]) == 0
    doc = json.loads((tmp_path / "f.json").read_text())
    assert [int(a) for a in doc["frequency"]["partial_quotients"][:4]] == [7, 15, 1, 292]
    assert main(["lyapunov", "--params-config", amo, "--n", "32,64", "--grid-log2", "7",
                 "--out", str(tmp_path / "l.csv")]) == 0
    assert (tmp_path / "l.csv").read_text().startswith("n,L_n,L_n_a,L_n_u,D,skipped_points")
    assert main(["determinant", "--params-config", amo, "--n", "20", "--grid-log2", "6",
                 "--out", str(tmp_path / "d.csv")]) == 0
    assert main(["spectrum", "--params-config", amo, "--n", "40", "--window-radius", "1",
                 "--delta0", "0.3", "--out", str(tmp_path / "s.csv")]) == 0
    assert json.loads((tmp_path / "s.json").read_text())["n"] == 40
    assert main(["ldt", "--observable", "matrix", "--params-config", amo, "--n", "32",
                 "--delta-grid", "0.01,0.05", "--samples", "2048", "--out", str(tmp_path / "m")]) == 0
    assert (tmp_path / "m.csv").exists() and (tmp_path / "m.json").exists()

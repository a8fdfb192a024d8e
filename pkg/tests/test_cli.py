import json
from pathlib import Path

import pytest

from cubelab import cli

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_list_checks(capsys):
    assert cli.main(["--list-checks"]) == 0
    out = capsys.readouterr().out
    assert all(name in out for name, _ in cli.CHECKS)


def test_gowers_report_and_csv(tmp_path):
    out, table = tmp_path / "r.json", tmp_path / "r.csv"
    rc = cli.main(["gowers", "--config", str(CONFIGS / "gowers_quadratic.toml"),
                   "--out", str(out), "--csv", str(table)])
    assert rc == 0
    rep = json.loads(out.read_text())
    assert rep["pass"] and {c["name"] for c in rep["checks"]} == {"gowers.naive_eq_recursive",
                                                                  "gowers.expected"}
    lines = table.read_text().splitlines()
    assert lines[0] == "method,k,N,value,stderr,samples,seed" and len(lines) == 3


def test_exit_codes(tmp_path):
    assert cli.main(["gowers", "--config", str(tmp_path / "missing.toml")]) == 2
    bad = tmp_path / "bad.toml"
    bad.write_text('experiment = "gowers"\nseed = -1\nk = 2\n'
                   'system = { system = "cyclic", n = 8 }\nf = { f = "char", xi = 1 }\n')
    assert cli.main(["gowers", "--config", str(bad)]) == 2
    bad.write_text('experiment = "avg"\nseed = 1\nfs = []\n')
    assert cli.main(["gowers", "--config", str(bad)]) == 2  # command and config disagree
    bad.write_text("not toml = = =")
    assert cli.main(["gowers", "--config", str(bad)]) == 2
    assert cli.main([]) == 2
    fail = tmp_path / "fail.toml"
    fail.write_text('experiment = "gowers"\nseed = 1\nk = 2\nexpect = 0.5\n'
                    'system = { system = "cyclic", n = 16 }\nf = { f = "char", xi = 3 }\n')
    assert cli.main(["gowers", "--config", str(fail), "--out", str(tmp_path / "o.json")]) == 1


def test_size_cap_is_config_error(tmp_path):
    cfg = tmp_path / "big.toml"
    cfg.write_text('experiment = "gowers"\nseed = 1\nk = 4\n'
                   'system = { system = "cyclic", n = 512 }\nf = { f = "char", xi = 3 }\n')
    assert cli.main(["gowers", "--config", str(cfg)]) == 2


def test_seed_override_changes_report(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    cfg = str(CONFIGS / "cubes_z5.toml")
    cli.main(["cubes", "--config", cfg, "--out", str(a), "--seed", "1", "--samples", "10"])
    cli.main(["cubes", "--config", cfg, "--out", str(b), "--seed", "1", "--samples", "10"])
    ra, rb = json.loads(a.read_text()), json.loads(b.read_text())
    assert ra["config"]["seed"] == 1 and ra["config"]["samples"] == 10
    assert cli.dumps(cli.stable_view(ra)) == cli.dumps(cli.stable_view(rb))


def test_run_is_deterministic():
    cfg = cli.load_config(CONFIGS / "extract_twisted.toml")
    cfg["samples"] = 50
    r1, d1 = cli.run(cfg)
    r2, d2 = cli.run(cfg)
    assert cli.dumps(cli.stable_view(r1)) == cli.dumps(cli.stable_view(r2)) and d1 == d2
    assert "timestamp" in r1 and "timestamp" not in cli.stable_view(r1)


def test_suite_with_broken_row(tmp_path):
    man = tmp_path / "m.toml"
    man.write_text(
        'seed = 5\n'
        'experiments = [\n'
        '  { experiment = "nrp", k = 1, expect_classes = 6, system = { system = "cyclic", n = 6 } },\n'
        '  { experiment = "q-check", samples = 5, system = { system = "skew_torus", broken = true } },\n'
        ']\n')
    agg = cli.suite(man, threads=2)
    assert [s["pass"] for s in agg["summary"]] == [True, False]
    assert "error" in agg["results"][1]
    assert cli.main(["suite", str(man), "--out", str(tmp_path / "s.json"),
                     "--csv", str(tmp_path / "s.csv")]) == 1
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "index,name,experiment,pass"
    # seeds derive from the master seed and the row index
    again = cli.suite(man, threads=1)
    assert cli.dumps(cli.stable_view(agg)) == cli.dumps(cli.stable_view(again))


def test_empty_suite_passes(tmp_path):
    man = tmp_path / "empty.toml"
    man.write_text("")
    agg = cli.suite(man)
    assert agg["pass"] and agg["summary"] == []


def test_manifest_paths_resolve():
    seed, configs = cli.load_manifest(CONFIGS / "suite.toml")
    assert seed == 2024 and len(configs) == 10
    assert all(c["experiment"] in cli.EXPERIMENTS for c in configs)


@pytest.mark.parametrize("name", ["avg_resonance", "nrp_z12", "verify_mutation"])
def test_shipped_configs_pass(name):
    cfg = cli.load_config(CONFIGS / f"{name}.toml")
    if "samples" in cfg:
        cfg["samples"] = min(cfg["samples"], 200)
    rep, _ = cli.run(cfg)
    assert rep["pass"], rep["checks"]

import json
import time
from pathlib import Path

import pytest

from brownfunc import cli
from brownfunc.output import read_csv

BASE = {"dt": 1e-3, "horizon": 5.0, "seed": 7, "replicates": 120}

# small configurations exercising every subcommand
SMOKE_CONFIGS = {
    "simulate-exit": {},
    "tail-fit": {"t_grid_step": 0.1},
    "small-ball": {"eps_list": [0.8, 0.6, 0.4]},
    "phi-sup": {"t": 1.0},
    "submult": {"s": 1.0, "t": 2.0},
    "anderson": {"t": 2.0},
    "logconcavity": {"t": 1.0},
    "levy-check": {"horizon": 20.0, "compare_lam": 4.0},
    "lil": {"horizon": 64.0, "dt": 0.01, "k_hat": 0.69},
    "selfcheck": {"scale": 0.002},
}


def write_config(path, op, **overrides):
    cfg = {**BASE, **SMOKE_CONFIGS[op], "operation": op, **overrides}
    path.write_text(json.dumps(cfg))
    return path


def invoke(tmp_path, op, out, **overrides):
    name = out.replace("/", "_")
    cfg = write_config(tmp_path / f"{op}-{name}.json", op, output_dir=str(tmp_path / out),
                       **overrides)
    return cli.main([op, "--config", str(cfg)])


def csv_bodies(directory):
    return {p.name: p.read_bytes() for p in sorted(Path(directory).glob("*.csv"))}


def test_determinism_across_worker_counts(tmp_path):
    start = time.perf_counter()
    for op in SMOKE_CONFIGS:
        codes = [invoke(tmp_path, op, f"{op}-w{w}", workers=w) for w in (1, 8)]
        assert codes[0] == codes[1]
        assert codes[0] in (cli.EXIT_OK, cli.EXIT_CHECK_FAILED)
        one = csv_bodies(tmp_path / f"{op}-w1")
        eight = csv_bodies(tmp_path / f"{op}-w8")
        assert one and one == eight, op
        s1 = json.loads((tmp_path / f"{op}-w1" / "summary.json").read_text())
        s8 = json.loads((tmp_path / f"{op}-w8" / "summary.json").read_text())
        assert s1 == s8
    elapsed = time.perf_counter() - start
    print(f"determinism sweep over {len(SMOKE_CONFIGS)} subcommands: {elapsed:.1f}s")
    assert elapsed <= 60.0


def test_manifest_contents(tmp_path):
    assert invoke(tmp_path, "simulate-exit", "m", workers=3) == 0
    man = json.loads((tmp_path / "m" / "manifest.json").read_text())
    assert man["version"] == cli.__version__
    assert man["outputs"] == [{"file": "exits.csv", "schema": "exits", "rows": 120}]
    assert [r["stop"] - r["first"] for r in man["worker_ranges"]] == [40, 40, 40]
    assert man["started"] <= man["finished"]
    _, rows = read_csv(tmp_path / "m" / "exits.csv")
    assert [r[0] for r in rows] == list(range(120))


@pytest.mark.parametrize("op", [op for op in SMOKE_CONFIGS if op != "selfcheck"])
def test_zero_replicates_gives_header_only(tmp_path, op):
    assert invoke(tmp_path, op, "z", replicates=0) == 0
    man = json.loads((tmp_path / "z" / "manifest.json").read_text())
    assert man["outputs"]
    for entry in man["outputs"]:
        assert entry["rows"] == 0
        text = (tmp_path / "z" / entry["file"]).read_text()
        assert text.count("\n") == 1


def test_output_dir_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    assert invoke(tmp_path, "simulate-exit", "ignored") == 0
    assert (tmp_path / "env" / "exits.csv").exists()
    assert not (tmp_path / "ignored").exists()


def test_same_config_same_bytes(tmp_path):
    invoke(tmp_path, "tail-fit", "a")
    invoke(tmp_path, "tail-fit", "b")
    assert csv_bodies(tmp_path / "a") == csv_bodies(tmp_path / "b")


@pytest.mark.parametrize("bad", [
    {"alpha": -1},
    {"typo_key": 1},
    {"operation": "tail-fit"},
])
def test_invalid_config_exit_code(tmp_path, bad):
    assert invoke(tmp_path, "simulate-exit", "bad", **bad) == cli.EXIT_CONFIG


def test_domain_error_is_config_error(tmp_path):
    assert invoke(tmp_path, "anderson", "bad", alpha=2.0) == cli.EXIT_CONFIG


def test_malformed_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{")
    assert cli.main(["simulate-exit", "--config", str(p)]) == cli.EXIT_CONFIG


def test_io_error_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert invoke(tmp_path, "simulate-exit", "file/sub") == cli.EXIT_IO


def test_missing_config_is_io_error(tmp_path):
    assert cli.main(["simulate-exit", "--config", str(tmp_path / "nope.json")]) == cli.EXIT_IO


def test_unknown_subcommand_rejected():
    with pytest.raises(SystemExit) as exc:
        cli.main(["teleport", "--config", "x.json"])
    assert exc.value.code == 2


def test_tail_fit_outputs(tmp_path):
    assert invoke(tmp_path, "tail-fit", "t", replicates=3000, horizon=20.0) == 0
    summary = json.loads((tmp_path / "t" / "summary.json").read_text())
    assert summary["fit"]["k_hat"] > 0
    header, rows = read_csv(tmp_path / "t" / "plot_survival.csv")
    assert header == ("t", "log_p_hat", "log_ci_low", "log_ci_high")


def test_selfcheck_passes_on_smoke_profile(tmp_path):
    code = invoke(tmp_path, "selfcheck", "sc", scale=1.0, workers=1)
    summary = json.loads((tmp_path / "sc" / "summary.json").read_text())
    assert code == cli.EXIT_OK, summary
    assert summary["passed"] is True

import csv
import math
import os

import pytest

from coagsens import mean_sensitivity, variance
from coagsens.cli import main as cli_main
from coagsens.config import parse_config
from coagsens.experiment import run_experiment


def _cfg(tmp_path, **kw):
    base = {"mode": "exact_coupling", "kernel": "additive", "lambda": "1.0",
            "t_end": "0.5", "n_particles": "60", "n_runs": "5",
            "output_times": "0.25, 0.5", "seed": "7",
            "output_dir": str(tmp_path / "out")}
    base.update(kw)
    return parse_config("\n".join(f"{k} = {v}" for k, v in base.items()))


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_oracle_mode_outputs(tmp_path):
    cfg = _cfg(tmp_path, mode="oracle", oracle_x_max="40")
    for key in ("n_particles", "n_runs"):
        pass
    info = run_experiment(cfg)
    rows = list(csv.DictReader(open(info["paths"]["runs.csv"])))
    assert rows and all(r["run_id"] == "oracle" for r in rows)
    times = sorted({float(r["time"]) for r in rows})
    assert times == [0.25, 0.5]
    # the sigma column holds the forward-sensitivity solution
    import coagsens
    sol = coagsens.solve_sensitivity(coagsens.make_kernel("additive", 1.0),
                                     40, (0.25, 0.5))
    lookup = {(r["time"], int(r["mass"])): float(r["sigma_estimate"])
              for r in rows}
    sens = sol.sens_map(0.5)
    for mass, val in list(sens.items())[:10]:
        assert lookup[("0.5", mass)] == pytest.approx(val, rel=1e-9)


def test_runs_are_byte_identical_across_reruns_and_thread_counts(tmp_path):
    a = run_experiment(_cfg(tmp_path / "a"))
    b = run_experiment(_cfg(tmp_path / "b"))
    assert _read(a["paths"]["runs.csv"]) == _read(b["paths"]["runs.csv"])
    assert _read(a["paths"]["summary.csv"]) == _read(b["paths"]["summary.csv"])
    c = run_experiment(_cfg(tmp_path / "c", threads="3"))
    assert _read(a["paths"]["runs.csv"]) == _read(c["paths"]["runs.csv"])
    assert _read(a["paths"]["summary.csv"]) == _read(c["paths"]["summary.csv"])
    d = run_experiment(_cfg(tmp_path / "d", seed="8"))
    assert _read(a["paths"]["runs.csv"]) != _read(d["paths"]["runs.csv"])


def test_summary_matches_stats_recomputed_from_runs(tmp_path):
    info = run_experiment(_cfg(tmp_path, n_runs="8"))
    by_run = {}
    for row in csv.DictReader(open(info["paths"]["runs.csv"])):
        t = float(row["time"])
        sig = float(row["sigma_estimate"])
        if sig != 0.0:
            by_run.setdefault(row["run_id"], {}).setdefault(t, {})[
                int(row["mass"])] = sig
        else:
            by_run.setdefault(row["run_id"], {}).setdefault(t, {})
    runs = [by_run[k] for k in sorted(by_run, key=int)]
    for row in csv.DictReader(open(info["paths"]["summary.csv"])):
        t = float(row["time"])
        mass = int(row["mass"])
        ests = [r.get(t, {}) for r in runs]
        mean = mean_sensitivity(ests).get(mass, 0.0)
        per_mass, _ = variance(ests)
        var = per_mass.get(mass, 0.0)
        # both sides pass through the 12-significant-digit CSV format, so
        # agreement is capped at print granularity (inputs to the variance
        # recompute are themselves rounded runs.csv values)
        assert float(row["mean_sigma"]) == pytest.approx(mean, rel=1e-9, abs=1e-12)
        assert float(row["var_sigma"]) == pytest.approx(var, rel=1e-6, abs=1e-12)
        assert float(row["ci_halfwidth"]) == pytest.approx(
            1.96 * math.sqrt(var / len(runs)), rel=1e-6, abs=1e-12)
        assert int(row["n_runs"]) == len(runs)


def test_rows_sorted_and_formatted(tmp_path):
    info = run_experiment(_cfg(tmp_path))
    rows = list(csv.DictReader(open(info["paths"]["runs.csv"])))
    keys = [(int(r["run_id"]), float(r["time"]), int(r["mass"])) for r in rows]
    assert keys == sorted(keys)
    for r in rows[:20]:
        assert len(r["mu_density"]) <= 18  # 12 significant digits plus sign/exp


def test_manifest_contents_and_dvar(tmp_path):
    oracle_cfg = _cfg(tmp_path / "oracle", mode="oracle", oracle_x_max="40")
    oracle_info = run_experiment(oracle_cfg)
    cfg = _cfg(tmp_path / "sim", n_runs="6")
    cfg.oracle_csv = oracle_info["paths"]["runs.csv"]
    info = run_experiment(cfg)
    manifest = open(info["paths"]["manifest.txt"]).read()
    assert "version = " in manifest
    assert "kernel = additive" in manifest
    assert "run 0: wall_clock_s" in manifest
    assert "type0=" in manifest
    assert "d_var_vs_oracle = " in manifest
    assert info["d_var_vs_oracle"] is not None
    assert info["d_var_vs_oracle"] > 0.0


def test_failure_removes_partial_outputs(tmp_path):
    cfg = _cfg(tmp_path)
    cfg.oracle_csv = str(tmp_path / "missing.csv")
    with pytest.raises(OSError):
        run_experiment(cfg)
    out = tmp_path / "out"
    assert not (out / "runs.csv").exists()
    assert not (out / "summary.csv").exists()
    assert not (out / "manifest.txt").exists()


def test_ml_and_cd_modes(tmp_path):
    info = run_experiment(_cfg(tmp_path / "ml", mode="ml", n_runs="3"))
    rows = list(csv.DictReader(open(info["paths"]["runs.csv"])))
    assert all(float(r["sigma_estimate"]) == 0.0 for r in rows)
    assert any(float(r["mu_density"]) > 0 for r in rows)

    info = run_experiment(_cfg(tmp_path / "cd", mode="cd", n_runs="3",
                               delta_lambda="0.1"))
    rows = list(csv.DictReader(open(info["paths"]["runs.csv"])))
    assert any(float(r["sigma_estimate"]) != 0.0 for r in rows)


def test_cli_end_to_end(tmp_path):
    cfg_path = tmp_path / "exp.cfg"
    out_dir = tmp_path / "cli_out"
    cfg_path.write_text(
        "mode = exact_coupling\nkernel = additive\nlambda = 1.0\n"
        "t_end = 0.25\nn_particles = 40\nn_runs = 2\n"
        "output_times = 0.25\n")
    rc = cli_main(["--config", str(cfg_path), "--output", str(out_dir),
                   "--seed", "3", "--threads", "1"])
    assert rc == 0
    assert (out_dir / "runs.csv").exists()
    assert (out_dir / "summary.csv").exists()
    assert (out_dir / "manifest.txt").exists()
    manifest = (out_dir / "manifest.txt").read_text()
    assert "seed = 3" in manifest


def test_cli_error_paths(tmp_path, capsys):
    rc = cli_main(["--config", str(tmp_path / "absent.cfg")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err

    bad = tmp_path / "bad.cfg"
    bad.write_text("mode = cd\nkernel = additive\nlambda = 1\nt_end = 1\n"
                   "n_particles = 5\n")
    rc = cli_main(["--config", str(bad)])
    assert rc == 1
    assert "delta_lambda" in capsys.readouterr().err

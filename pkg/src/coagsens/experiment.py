"""Experiment runner: replications, aggregation, deterministic CSV output.

A run's random stream is derived from ``(seed, run_index)``, results are
buffered per run and aggregated in run-index order, so every CSV byte is a
function of the configuration alone, independent of the worker count.
Worker parallelism uses processes (the simulators are pure Python, so OS
threads would serialize on the interpreter lock).

Outputs, all inside the configured directory:

* ``runs.csv``     one row per (run, time, mass): run_id, time, mass,
  mu_density, sigma_estimate; densities carry 12 significant digits.
* ``summary.csv``  one row per (time, mass): mean_sigma, var_sigma,
  ci_halfwidth, n_runs, over the union of masses any run observed.
* ``manifest.txt`` resolved configuration, code version, per-run wall
  clock and event counters, and the distance to a reference solution when
  ``oracle_csv`` points at one.

Partial files are removed when a run fails, so a directory either holds a
complete experiment or none.
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .config import ExperimentConfig
from .driver import SimConfig, run as run_exact
from .kernels import make_kernel
from .mldriver import CdConfig, run_cd, run_ml
from .oracle import solve_sensitivity
from .stats import d_var, mean_sensitivity, variance


def _tkey(t):
    return round(float(t), 9)


def _simulate_one(payload):
    """Execute one replication; must stay a module-level picklable function."""
    cfg, run_index = payload
    t0 = time.perf_counter()
    if cfg.mode in ("exact_coupling", "exact_indep"):
        sim_cfg = SimConfig(
            kernel=cfg.kernel, lam=cfg.lam, n_particles=cfg.n_particles,
            t_end=cfg.t_end, algorithm=cfg.mode, output_times=cfg.output_times,
            resample_max=cfg.resample_max, resample_target=cfg.resample_target,
            seed=cfg.seed, run_index=run_index)
        snaps = run_exact(sim_cfg)
        records = [(s.time, s.mu_density(), s.sensitivity()) for s in snaps]
        counters = snaps[-1].counters if snaps else {}
    elif cfg.mode == "ml":
        sim_cfg = SimConfig(
            kernel=cfg.kernel, lam=cfg.lam, n_particles=cfg.n_particles,
            t_end=cfg.t_end, algorithm="exact_indep",
            output_times=cfg.output_times, seed=cfg.seed, run_index=run_index)
        snaps = run_ml(sim_cfg)
        records = [(s.time, s.mu_density(), {}) for s in snaps]
        counters = snaps[-1].counters if snaps else {}
    elif cfg.mode == "cd":
        cd_cfg = CdConfig(
            kernel=cfg.kernel, lam=cfg.lam, n_particles=cfg.n_particles,
            t_end=cfg.t_end, delta_lambda=cfg.delta_lambda,
            coupling=cfg.cd_coupling, output_times=cfg.output_times,
            seed=cfg.seed, run_index=run_index)
        snaps = run_cd(cd_cfg)
        records = [(s.time, s.mu_density(), s.sensitivity()) for s in snaps]
        counters = {}
    else:
        raise ValueError(f"mode {cfg.mode!r} is not a simulation mode")
    duration = time.perf_counter() - t0
    return run_index, records, duration, counters


def _oracle_records(cfg):
    kernel = make_kernel(cfg.kernel, cfg.lam)
    t0 = time.perf_counter()
    sol = solve_sensitivity(kernel, cfg.oracle_x_max, cfg.output_times)
    duration = time.perf_counter() - t0
    records = [(t, sol.mu_map(t), sol.sens_map(t)) for t in cfg.output_times]
    return records, duration


def _fmt(x):
    return f"{x:.12g}"


def _write_runs_csv(path, all_records):
    """all_records: list of (run_id, records); records = [(t, mu, sigma)]."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run_id", "time", "mass", "mu_density", "sigma_estimate"])
        for run_id, records in all_records:
            for t, mu, sigma in records:
                for mass in sorted(mu.keys() | sigma.keys()):
                    writer.writerow([run_id, _fmt(t), mass,
                                     _fmt(mu.get(mass, 0.0)),
                                     _fmt(sigma.get(mass, 0.0))])


def _write_summary_csv(path, times, estimates_by_run):
    """estimates_by_run: per run {tkey: {mass: sigma}}."""
    n = len(estimates_by_run)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "mass", "mean_sigma", "var_sigma",
                         "ci_halfwidth", "n_runs"])
        for t in times:
            key = _tkey(t)
            ests = [run.get(key, {}) for run in estimates_by_run]
            means = mean_sensitivity(ests) if ests else {}
            if n >= 2:
                per_mass, _ = variance(ests)
            else:
                per_mass = dict.fromkeys(means, 0.0)
            for mass in sorted(means):
                var = per_mass.get(mass, 0.0)
                ci = 1.96 * math.sqrt(var / n) if n >= 1 else 0.0
                writer.writerow([_fmt(t), mass, _fmt(means[mass]),
                                 _fmt(var), _fmt(ci), n])


def _read_reference_csv(path):
    by_time = {}
    seen_runs = set()
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            seen_runs.add(row["run_id"])
            if len(seen_runs) > 1:
                raise ValueError(f"{path} holds multiple runs; expected one reference run")
            t = _tkey(float(row["time"]))
            v = float(row["sigma_estimate"])
            if v != 0.0:
                by_time.setdefault(t, {})[int(row["mass"])] = v
            else:
                by_time.setdefault(t, {})
    return by_time


def run_experiment(cfg: ExperimentConfig):
    """Execute the configured experiment; returns paths and key aggregates."""
    if not cfg.output_times:
        raise ValueError("experiment needs a non-empty output_times grid")
    os.makedirs(cfg.output_dir, exist_ok=True)
    paths = {name: os.path.join(cfg.output_dir, name)
             for name in ("runs.csv", "summary.csv", "manifest.txt")}
    created = []
    try:
        if cfg.mode == "oracle":
            records, duration = _oracle_records(cfg)
            all_records = [("oracle", records)]
            durations = [duration]
            counters = [{}]
        else:
            payloads = [(cfg, i) for i in range(cfg.n_runs)]
            if cfg.threads > 1 and cfg.n_runs > 1:
                chunk = max(1, cfg.n_runs // (cfg.threads * 4))
                with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
                    results = list(pool.map(_simulate_one, payloads, chunksize=chunk))
            else:
                results = [_simulate_one(p) for p in payloads]
            results.sort(key=lambda r: r[0])
            all_records = [(idx, recs) for idx, recs, _, _ in results]
            durations = [r[2] for r in results]
            counters = [r[3] for r in results]

        estimates_by_run = [
            {_tkey(t): sigma for t, _, sigma in records}
            for _, records in all_records]

        created.append(paths["runs.csv"])
        _write_runs_csv(paths["runs.csv"], all_records)
        created.append(paths["summary.csv"])
        _write_summary_csv(paths["summary.csv"], cfg.output_times, estimates_by_run)

        dvar_value = None
        if cfg.oracle_csv:
            reference = _read_reference_csv(cfg.oracle_csv)
            mean_by_time = {}
            for t in cfg.output_times:
                key = _tkey(t)
                mean_by_time[key] = mean_sensitivity(
                    [run.get(key, {}) for run in estimates_by_run])
            dvar_value = d_var(mean_by_time, reference,
                               [_tkey(t) for t in cfg.output_times])

        created.append(paths["manifest.txt"])
        with open(paths["manifest.txt"], "w") as fh:
            fh.write("# coagsens experiment manifest\n")
            fh.write(f"version = {__version__}\n")
            for key, value in sorted(cfg.resolved().items()):
                fh.write(f"{key} = {value}\n")
            fh.write(f"n_completed_runs = {len(all_records)}\n")
            for (run_id, _), dur, cnt in zip(all_records, durations, counters):
                line = f"run {run_id}: wall_clock_s = {dur:.6f}"
                if cnt:
                    line += "; " + ", ".join(f"{k}={v}" for k, v in sorted(cnt.items()))
                fh.write(line + "\n")
            fh.write(f"mean_wall_clock_s = {sum(durations) / len(durations):.6f}\n")
            if dvar_value is not None:
                fh.write(f"d_var_vs_oracle = {dvar_value:.12g}\n")
    except BaseException:
        for path in created:
            try:
                os.remove(path)
            except OSError:
                pass
        raise

    return {
        "paths": paths,
        "n_runs": len(all_records),
        "mean_wall_clock_s": sum(durations) / len(durations),
        "d_var_vs_oracle": dvar_value,
    }

"""Aggregation of replicated sensitivity estimates.

Estimates are sparse maps from integer mass to signed density; a mass
absent from a run counts as zero.  Aggregates follow the conventions of
the experiment campaign: per-mass unbiased sample variance, aggregate
variance summed over all observed masses, total-variation distance to a
reference summed over a time grid, and the time-times-variance efficiency
ratio used to rank algorithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


def mean_sensitivity(estimates):
    """Per-mass arithmetic mean of a list of sparse estimates."""
    if not estimates:
        raise ValueError("need at least one run")
    inv = 1.0 / len(estimates)
    acc = {}
    for est in estimates:
        for mass, v in est.items():
            acc[mass] = acc.get(mass, 0.0) + v
    return {mass: s * inv for mass, s in acc.items()}


def variance(estimates):
    """(per-mass unbiased variance, aggregate over observed masses)."""
    n = len(estimates)
    if n < 2:
        raise ValueError("variance needs at least two runs")
    means = mean_sensitivity(estimates)
    per_mass = dict.fromkeys(means, 0.0)
    for est in estimates:
        for mass, m in means.items():
            d = est.get(mass, 0.0) - m
            per_mass[mass] += d * d
    scale = 1.0 / (n - 1)
    per_mass = {mass: s * scale for mass, s in per_mass.items()}
    return per_mass, sum(per_mass.values())


def d_var(mean_by_time, reference_by_time, times):
    """Total-variation distance to the reference summed over the time grid."""
    total = 0.0
    for t in times:
        if t not in mean_by_time or t not in reference_by_time:
            raise ValueError(f"time {t} missing from one of the grids")
        a = mean_by_time[t]
        b = reference_by_time[t]
        for mass in a.keys() | b.keys():
            total += abs(a.get(mass, 0.0) - b.get(mass, 0.0))
    return total


def gain_factor(t_ref, var_ref, t_alg, var_alg):
    """Efficiency of an algorithm against a reference: (T_ref * Var_ref) /
    (T_alg * Var_alg); above 1 means the algorithm wins."""
    for name, v in (("t_ref", t_ref), ("var_ref", var_ref),
                    ("t_alg", t_alg), ("var_alg", var_alg)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    return (t_ref * var_ref) / (t_alg * var_alg)


def confidence_interval(estimates, mass):
    """(mean, 1.96 * sqrt(var / L)) for one mass across runs."""
    n = len(estimates)
    if n < 2:
        raise ValueError("confidence interval needs at least two runs")
    values = [est.get(mass, 0.0) for est in estimates]
    m = sum(values) / n
    var = sum((v - m) ** 2 for v in values) / (n - 1)
    return m, 1.96 * math.sqrt(var / n)


@dataclass
class RunSet:
    """Replicated estimates on a common time grid."""

    times: tuple
    estimates: list = field(default_factory=list)   # per run: {time: {mass: v}}
    durations: list = field(default_factory=list)   # per run wall-clock seconds
    fingerprint: str = ""

    def add_run(self, by_time, duration=0.0):
        missing = [t for t in self.times if t not in by_time]
        if missing:
            raise ValueError(f"run lacks times {missing}")
        self.estimates.append(by_time)
        self.durations.append(duration)

    @property
    def n_runs(self):
        return len(self.estimates)

    def at(self, t):
        if t not in self.times:
            raise ValueError(f"time {t} is not on the grid")
        return [run[t] for run in self.estimates]

    def mean(self, t):
        return mean_sensitivity(self.at(t))

    def variance(self, t):
        return variance(self.at(t))

    def confidence_interval(self, t, mass):
        return confidence_interval(self.at(t), mass)

    def mean_by_time(self):
        return {t: self.mean(t) for t in self.times}

    def mean_duration(self):
        if not self.durations:
            raise ValueError("no runs recorded")
        return sum(self.durations) / len(self.durations)

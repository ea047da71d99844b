"""Marcus-Lushnikov baseline and the central-difference sensitivity estimator.

``run_ml`` simulates the coagulating population alone: it is the exact
driver restricted to type-0 events (derivative majorants disabled), so with
the same seed its trajectory coincides with the main-population marginal of
the full chain.

``run_cd`` estimates the parameter sensitivity as the ratio
``(mu[lam + d/2] - mu[lam - d/2]) / d`` from two coagulation processes.
Under ``shared_randomness`` coupling the two processes consume the identical
uniform stream against one common majorant valid for both parameter values;
each candidate coagulation is accepted by process p with probability
``K_p / K_common`` using the same uniform, so both accept whenever the
uniform falls below the smaller ratio (maximal coupling of the acceptance
indicators).  Up to the first disagreement the processes are bit-identical
and share one state; afterwards each continues on its own state while still
drawing the identical uniform sequence (common random numbers), which keeps
their difference small for small parameter offsets.
"""

from __future__ import annotations

from dataclasses import dataclass

from .driver import SimConfig
from .driver import run as _driver_run
from .ensemble import Ensemble
from .kernels import make_kernel
from .rng import UniformStream

SHARED_RANDOMNESS = "shared_randomness"
INDEPENDENT = "independent"


@dataclass
class CdConfig:
    kernel: str
    lam: float
    n_particles: int
    t_end: float
    delta_lambda: float
    coupling: str = SHARED_RANDOMNESS
    output_times: tuple = ()
    seed: int = 0
    run_index: int = 0
    initial_histogram: dict | None = None

    def __post_init__(self):
        if self.coupling not in (SHARED_RANDOMNESS, INDEPENDENT):
            raise ValueError(f"unknown coupling {self.coupling!r}")
        if self.delta_lambda < 0:
            raise ValueError("delta_lambda must be non-negative")
        if self.lam - self.delta_lambda / 2 <= 0:
            raise ValueError("lambda - delta_lambda/2 must stay positive")
        times = tuple(float(t) for t in self.output_times)
        if any(t < 0 or t > self.t_end for t in times):
            raise ValueError("output_times must lie in [0, t_end]")
        self.output_times = times


@dataclass
class CdSnapshot:
    time: float
    mu_plus_counts: dict
    mu_minus_counts: dict
    scale: int
    delta_lambda: float

    def sensitivity(self):
        """Central-difference estimate (c+ - c-) / (N * delta_lambda) per mass."""
        if self.delta_lambda == 0.0:
            return {}
        w = 1.0 / (self.scale * self.delta_lambda)
        out = {}
        for m, c in self.mu_plus_counts.items():
            out[m] = w * c
        for m, c in self.mu_minus_counts.items():
            v = out.get(m, 0.0) - w * c
            if v:
                out[m] = v
            elif m in out:
                del out[m]
        return out

    def mu_density(self):
        """Pooled density estimate, the mean of the two processes."""
        w = 0.5 / self.scale
        out = {}
        for m, c in self.mu_plus_counts.items():
            out[m] = w * c
        for m, c in self.mu_minus_counts.items():
            out[m] = out.get(m, 0.0) + w * c
        return out


def run_ml(config: SimConfig):
    """Simulate the coagulating population only; returns driver snapshots."""
    return _driver_run(config, sensitivity=False)


class _MlState:
    """Population plus component bindings for one coagulation process."""

    __slots__ = ("ens", "binds", "comps", "n")

    def __init__(self, comps, n, initial_histogram=None, ens=None):
        self.comps = comps
        self.n = n
        if ens is None:
            feats = [c.f for c in comps] + [c.g for c in comps]
            ens = Ensemble(feats)
            hist = initial_histogram if initial_histogram is not None else {1: n}
            if sum(hist.values()) != n:
                raise ValueError("initial histogram does not sum to n_particles")
            for mass in sorted(hist):
                for _ in range(hist[mass]):
                    ens.add_particle(mass)
        self.ens = ens
        self.binds = [(c.coef, c.f, c.g, ens.tree(c.f.key), ens.tree(c.g.key))
                      for c in comps]

    def rate(self):
        return 0.5 * sum(c * ft.total * gt.total
                         for c, _, _, ft, gt in self.binds) / self.n

    def khat(self, x, y):
        return sum(c * f(x) * g(y) for c, f, g, _, _ in self.binds)

    def propose_pair(self, rng):
        """Component + ordered particle pair; None when the same particle
        was drawn twice (a fictitious proposal, rejected outright)."""
        total = sum(c * ft.total * gt.total for c, _, _, ft, gt in self.binds)
        u = rng.uniform() * total
        acc = 0.0
        chosen = self.binds[-1]
        for entry in self.binds:
            acc += entry[0] * entry[3].total * entry[4].total
            if u < acc:
                chosen = entry
                break
        hi = chosen[3].sample(rng.uniform())
        hj = chosen[4].sample(rng.uniform())
        if hi == hj:
            return None
        return hi, hj

    def coagulate(self, hi, hj):
        ens = self.ens
        x = ens.mass_of(hi)
        y = ens.mass_of(hj)
        ens.remove_particle(hi)
        ens.remove_particle(hj)
        ens.add_particle(x + y)

    def clone(self):
        return _MlState(self.comps, self.n, ens=self.ens.clone())


def _ml_tail(state, kernel, rng, t, pending, t_end):
    """Finish one process independently; returns (time, histogram) pairs."""
    snaps = []
    pos = 0
    while pos < len(pending):
        if state.ens.size <= 1:
            while pos < len(pending):
                snaps.append((pending[pos], state.ens.histogram()))
                pos += 1
            break
        dt = rng.exponential(state.rate())
        t_next = t + dt
        while pos < len(pending) and pending[pos] <= t_next:
            snaps.append((pending[pos], state.ens.histogram()))
            pos += 1
        if pos == len(pending) or t_next > t_end:
            break
        t = t_next
        pair = state.propose_pair(rng)
        if pair is None:
            continue
        hi, hj = pair
        x = state.ens.mass_of(hi)
        y = state.ens.mass_of(hj)
        if rng.uniform() * state.khat(x, y) < kernel(x, y):
            state.coagulate(hi, hj)
    return snaps


def run_cd(config: CdConfig):
    """Run the two-process central-difference estimator for one replication."""
    lam_p = config.lam + config.delta_lambda / 2
    lam_m = config.lam - config.delta_lambda / 2
    kp = make_kernel(config.kernel, lam_p)
    km = make_kernel(config.kernel, lam_m)
    pending = sorted(config.output_times) if config.output_times else [config.t_end]

    if config.coupling == INDEPENDENT:
        base = make_kernel(config.kernel, config.lam)
        comps = base.interval_majorant(lam_m, lam_p)
        snaps = []
        for side_key, kernel in ((1, kp), (2, km)):
            state = _MlState(comps, config.n_particles, config.initial_histogram)
            rng = UniformStream((config.seed, config.run_index, side_key))
            snaps.append(_ml_tail(state, kernel, rng, 0.0, pending, config.t_end))
        plus, minus = snaps
    else:
        plus, minus = _run_cd_shared(config, kp, km, pending)

    return [CdSnapshot(time=tp, mu_plus_counts=hp, mu_minus_counts=hm,
                       scale=config.n_particles, delta_lambda=config.delta_lambda)
            for (tp, hp), (_, hm) in zip(plus, minus)]


def _run_cd_shared(config, kp, km, pending):
    base = make_kernel(config.kernel, config.lam)
    comps = base.interval_majorant(km.lam, kp.lam)
    state = _MlState(comps, config.n_particles, config.initial_histogram)
    rng = UniformStream((config.seed, config.run_index))
    t = 0.0
    t_end = config.t_end
    merged = []
    pos = 0
    while pos < len(pending):
        if state.ens.size <= 1:
            while pos < len(pending):
                merged.append((pending[pos], state.ens.histogram()))
                pos += 1
            return merged, list(merged)
        dt = rng.exponential(state.rate())
        t_next = t + dt
        while pos < len(pending) and pending[pos] <= t_next:
            merged.append((pending[pos], state.ens.histogram()))
            pos += 1
        if pos == len(pending) or t_next > t_end:
            return merged, list(merged)
        t = t_next
        pair = state.propose_pair(rng)
        if pair is None:
            continue
        hi, hj = pair
        x = state.ens.mass_of(hi)
        y = state.ens.mass_of(hj)
        u = rng.uniform() * state.khat(x, y)
        acc_p = u < kp(x, y)
        acc_m = u < km(x, y)
        if acc_p and acc_m:
            state.coagulate(hi, hj)
        elif acc_p or acc_m:
            # First disagreement: split states, give both the identical
            # remaining uniform stream, and finish each side on its own.
            other = state.clone()
            rng_other = rng.clone()
            if acc_p:
                state.coagulate(hi, hj)
                tail_p = _ml_tail(state, kp, rng, t, pending[pos:], t_end)
                tail_m = _ml_tail(other, km, rng_other, t, pending[pos:], t_end)
            else:
                other.coagulate(hi, hj)
                tail_p = _ml_tail(state, kp, rng, t, pending[pos:], t_end)
                tail_m = _ml_tail(other, km, rng_other, t, pending[pos:], t_end)
            return merged + tail_p, list(merged) + tail_m
    return merged, list(merged)

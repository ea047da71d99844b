"""Jump-chain simulator for the coagulation sensitivity triple ensemble.

The state couples a main particle population ``mu`` (the coagulating system)
with two sensitivity populations ``sig_plus`` and ``sig_minus`` whose signed
difference, rescaled by the particle number N and a shared weight multiplier,
estimates the derivative of the mass density with respect to the kernel
parameter.

Five event classes drive the chain.  With all rates per unordered pair and
divided by N:

* type 0   : two mu-particles x, y coagulate at rate K(x, y); mu loses x and
  y and gains x+y.
* type 1+/-: a mu-pair fires at rate |K'(x, y)| (positive/negative part);
  sig_plus gains x+y and sig_minus gains x and y, or the mirror image,
  according to the sign of K'.  mu is untouched.
* type 2+/-: a mu-particle x and a sensitivity particle y of sig_plus
  (resp. sig_minus) interact at rate K(x, y); that ensemble replaces y by
  x+y and the opposite ensemble gains x.  mu is untouched.

Events are generated by thinning: proposals are drawn from separable
majorant components via per-feature sum trees (two O(log n) single-particle
draws), then accepted with probability true-rate over majorant evaluated at
the sampled pair.  Proposals that draw the same mu-particle twice are
rejected outright; the consumed holding time stands.

Variance reduction (``exact_coupling`` only):

* cancellation: equal masses never coexist in the two sensitivity
  ensembles; an insertion whose mass the opposite ensemble holds removes
  that particle instead (the signed measure is unchanged either way),
* coupling: type-2 events draw a partner from each sensitivity ensemble and
  execute both replacement jumps together with probability proportional to
  the smaller ensemble's sampling weight, so the offsetting x insertions
  cancel and the ensembles do not grow,
* resampling: when either sensitivity ensemble reaches ``resample_max``
  particles, both are Bernoulli-thinned with keep probability
  ``resample_target / resample_max`` and the shared weight multiplier is
  divided by it, preserving the represented signed measure in expectation.

``exact_indep`` applies plain thinning with none of the three tricks.

Per proposal the uniforms are consumed in a fixed order: holding time,
event class, component (when the class has more than one), f-side particle,
g-side particle, (coupling only, when the opposite ensemble is nonempty)
opposite partner, acceptance/branch uniform, then one uniform per
sensitivity particle when a resampling pass triggers.  Runs are therefore
bit-reproducible from ``(seed, run_index)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ensemble import Ensemble
from .kernels import DERIV_NEG, DERIV_POS, MAIN, make_kernel
from .rng import UniformStream

EXACT_COUPLING = "exact_coupling"
EXACT_INDEP = "exact_indep"

COUNTER_KEYS = ("type0", "type1_plus", "type1_minus", "type2_plus",
                "type2_minus", "rejections", "cancellations", "resamples")


@dataclass
class SimConfig:
    """Parameters of one simulation run."""

    kernel: str
    lam: float
    n_particles: int
    t_end: float
    algorithm: str = EXACT_COUPLING
    output_times: tuple = ()
    resample_max: int | None = None      # default 2 * n_particles
    resample_target: int | None = None   # default n_particles
    seed: int = 0
    run_index: int = 0
    initial_histogram: dict | None = None

    def __post_init__(self):
        if self.algorithm not in (EXACT_COUPLING, EXACT_INDEP):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.n_particles < 1:
            raise ValueError("n_particles must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        times = tuple(float(t) for t in self.output_times)
        if any(t < 0 or t > self.t_end for t in times):
            raise ValueError("output_times must lie in [0, t_end]")
        if list(times) != sorted(times):
            raise ValueError("output_times must be sorted")
        self.output_times = times


@dataclass
class Snapshot:
    """State of the chain at one output time (histograms hold raw counts)."""

    time: float
    mu_counts: dict
    sig_plus_counts: dict
    sig_minus_counts: dict
    weight: float
    scale: int
    counters: dict = field(repr=False)

    def mu_density(self):
        n = self.scale
        return {m: c / n for m, c in self.mu_counts.items()}

    def sensitivity(self):
        """Signed measure w * (c+ - c-) / N as a sparse mass -> value map."""
        w = self.weight / self.scale
        out = {}
        for m, c in self.sig_plus_counts.items():
            out[m] = w * c
        for m, c in self.sig_minus_counts.items():
            v = out.get(m, 0.0) - w * c
            if v:
                out[m] = v
            elif m in out:
                del out[m]
        return out

    def mu_mass(self):
        return sum(m * c for m, c in self.mu_counts.items())


class TripleSimulation:
    """Mutable chain state plus the event machinery operating on it."""

    def __init__(self, kernel, n_particles, algorithm=EXACT_COUPLING,
                 resample_max=None, resample_target=None,
                 initial_histogram=None, sensitivity=True):
        if algorithm not in (EXACT_COUPLING, EXACT_INDEP):
            raise ValueError(f"unknown algorithm {algorithm!r}")
        self.kernel = kernel
        self.n = int(n_particles)
        self.algorithm = algorithm
        self.coupling = algorithm == EXACT_COUPLING
        self.sensitivity = sensitivity

        self._main = kernel.majorant(MAIN)
        self._dpos = kernel.majorant(DERIV_POS) if sensitivity else ()
        self._dneg = kernel.majorant(DERIV_NEG) if sensitivity else ()

        mu_feats = [c.f for c in self._main + self._dpos + self._dneg]
        mu_feats += [c.g for c in self._main + self._dpos + self._dneg]
        sig_feats = [c.g for c in self._main]
        self.mu = Ensemble(mu_feats)
        self.sig_plus = Ensemble(sig_feats)
        self.sig_minus = Ensemble(sig_feats)

        hist = initial_histogram if initial_histogram is not None else {1: self.n}
        total = sum(hist.values())
        if total != self.n:
            raise ValueError(
                f"initial histogram holds {total} particles, expected {self.n}")
        for mass in sorted(hist):
            for _ in range(hist[mass]):
                self.mu.add_particle(mass)

        self.resample_max = resample_max if resample_max is not None else 2 * self.n
        self.resample_target = (resample_target if resample_target is not None
                                else self.n)
        if not 0 < self.resample_target <= self.resample_max:
            raise ValueError("resample_target must satisfy 0 < m <= M")

        self.weight = 1.0
        self.clock = 0.0
        self.counters = dict.fromkeys(COUNTER_KEYS, 0)
        self._rates = None
        self._bind_trees()

    def _bind_trees(self):
        # Cache (coef, f, g, f_tree, g_tree[, opposite g_tree]) per component;
        # tree totals then give class rates in O(#components).
        mu, sp, sm = self.mu, self.sig_plus, self.sig_minus
        self._c0 = [(c.coef, c.f.fn(), c.g.fn(), mu.tree(c.f.key),
                     mu.tree(c.g.key)) for c in self._main]
        self._c1p = [(c.coef, c.f.fn(), c.g.fn(), mu.tree(c.f.key),
                      mu.tree(c.g.key)) for c in self._dpos]
        self._c1m = [(c.coef, c.f.fn(), c.g.fn(), mu.tree(c.f.key),
                      mu.tree(c.g.key)) for c in self._dneg]
        self._c2p = [(c.coef, c.f.fn(), c.g.fn(), mu.tree(c.f.key),
                      sp.tree(c.g.key), sm.tree(c.g.key)) for c in self._main]
        self._c2m = [(c.coef, c.f.fn(), c.g.fn(), mu.tree(c.f.key),
                      sm.tree(c.g.key), sp.tree(c.g.key)) for c in self._main]
        # Slim (coef, f_tree, g_tree) views for the per-event rate loop.
        self._terms = tuple(
            [(e[0], e[3], e[4]) for e in comps]
            for comps in (self._c0, self._c1p, self._c1m, self._c2p, self._c2m))

    # -- rates ---------------------------------------------------------------

    def class_rates(self):
        """Effective majorant proposal rates per event class (chain time).

        Same-ensemble classes carry a factor 1/2 because the separable sums
        run over ordered pairs while the chain attaches one exponential clock
        per unordered pair.
        """
        t0, t1p, t1m, t2p, t2m = self._terms
        s0 = 0.0
        for c, ft, gt in t0:
            s0 += c * ft.total * gt.total
        if self.sensitivity:
            r1p = 0.0
            for c, ft, gt in t1p:
                r1p += c * ft.total * gt.total
            r1m = 0.0
            for c, ft, gt in t1m:
                r1m += c * ft.total * gt.total
            r2p = 0.0
            for c, ft, gt in t2p:
                r2p += c * ft.total * gt.total
            r2m = 0.0
            for c, ft, gt in t2m:
                r2m += c * ft.total * gt.total
            r1p *= 0.5
            r1m *= 0.5
        else:
            r1p = r1m = r2p = r2m = 0.0
        return 0.5 * s0, r1p, r1m, r2p, r2m

    def total_majorant_rate(self):
        """Per-class proposal rates and the grand holding-time rate (1/N scaled)."""
        rates = self.class_rates()
        names = ("type0", "type1_plus", "type1_minus", "type2_plus", "type2_minus")
        return dict(zip(names, rates)), sum(rates) / self.n

    @property
    def absorbed(self):
        """True once no event can ever be accepted again."""
        return (self.mu.size <= 1 and self.sig_plus.size == 0
                and self.sig_minus.size == 0)

    # -- stepping --------------------------------------------------------------

    def propose(self, rng):
        """Draw the next holding time, or None when the chain is absorbed."""
        if self.absorbed:
            return None
        rates = self.class_rates()
        rhat = sum(rates) / self.n
        if rhat <= 0.0:
            return None
        self._rates = rates
        return rng.exponential(rhat)

    def execute(self, rng):
        """Select and (maybe) apply one event; assumes propose() was called."""
        r0, r1p, r1m, r2p, r2m = self._rates
        u = rng.uniform() * (r0 + r1p + r1m + r2p + r2m)
        if u < r0:
            self._event_type0(rng)
        elif u < r0 + r1p:
            self._event_type1(rng, self._c1p)
        elif u < r0 + r1p + r1m:
            self._event_type1(rng, self._c1m)
        elif u < r0 + r1p + r1m + r2p:
            self._event_type2(rng, self._c2p, self.sig_plus,
                              self.sig_minus, True)
        else:
            self._event_type2(rng, self._c2m, self.sig_minus,
                              self.sig_plus, False)

    def step(self, rng):
        """One propose/execute cycle; returns the holding time or None."""
        dt = self.propose(rng)
        if dt is None:
            return None
        self.clock += dt
        self.execute(rng)
        return dt

    @staticmethod
    def _pick_component(rng, comps):
        if len(comps) == 1:
            return comps[0]
        prods = [entry[0] * entry[3].total * entry[4].total for entry in comps]
        u = rng.uniform() * sum(prods)
        acc = 0.0
        for i, v in enumerate(prods):
            acc += v
            if u < acc:
                return comps[i]
        return comps[-1]  # guards the floating-point edge u == total

    def _khat_main(self, x, y):
        s = 0.0
        for c, f, g, _, _ in self._c0:
            s += c * f(x) * g(y)
        return s

    def _khat_deriv(self, x, y):
        s = 0.0
        for c, f, g, _, _ in self._c1p:
            s += c * f(x) * g(y)
        for c, f, g, _, _ in self._c1m:
            s += c * f(x) * g(y)
        return s

    def _event_type0(self, rng):
        _, _, _, ftree, gtree = self._pick_component(rng, self._c0)
        hi = ftree.sample(rng.uniform())
        hj = gtree.sample(rng.uniform())
        if hi == hj:
            self.counters["rejections"] += 1
            return
        mu = self.mu
        x = mu.mass_of(hi)
        y = mu.mass_of(hj)
        if rng.uniform() * self._khat_main(x, y) < self.kernel(x, y):
            mu.remove_particle(hi)
            mu.remove_particle(hj)
            mu.add_particle(x + y)
            self.counters["type0"] += 1
        else:
            self.counters["rejections"] += 1

    def _event_type1(self, rng, comps):
        _, _, _, ftree, gtree = self._pick_component(rng, comps)
        hi = ftree.sample(rng.uniform())
        hj = gtree.sample(rng.uniform())
        if hi == hj:
            self.counters["rejections"] += 1
            return
        mu = self.mu
        x = mu.mass_of(hi)
        y = mu.mass_of(hj)
        d = self.kernel.deriv(x, y)
        # Pooled thinning: K'+ and K'- never overlap pointwise, so accepting
        # against the summed derivative majorant and branching on the sign of
        # K' at the pair reproduces both clocks exactly.
        if rng.uniform() * self._khat_deriv(x, y) < abs(d):
            merged = x + y
            sig_add = self._sig_insert
            if d > 0:
                sig_add(self.sig_plus, self.sig_minus, merged)
                sig_add(self.sig_minus, self.sig_plus, x)
                sig_add(self.sig_minus, self.sig_plus, y)
                self.counters["type1_plus"] += 1
            else:
                sig_add(self.sig_plus, self.sig_minus, x)
                sig_add(self.sig_plus, self.sig_minus, y)
                sig_add(self.sig_minus, self.sig_plus, merged)
                self.counters["type1_minus"] += 1
            if self.coupling:
                self.maybe_resample(rng)
        else:
            self.counters["rejections"] += 1

    def _event_type2(self, rng, comps, side, opp, side_is_plus):
        _, _, g, ftree, gtree, gtree_opp = self._pick_component(rng, comps)
        hi = ftree.sample(rng.uniform())
        hk = gtree.sample(rng.uniform())
        mu = self.mu
        x = mu.mass_of(hi)
        y = side.mass_of(hk)
        ratio = self.kernel(x, y) / self._khat_main(x, y)

        if not self.coupling:
            if rng.uniform() < ratio:
                side.remove_particle(hk)
                side.add_particle(x + y)
                opp.add_particle(x)
                key = "type2_plus" if side_is_plus else "type2_minus"
                self.counters[key] += 1
            else:
                self.counters["rejections"] += 1
            return

        r_side = gtree.total
        r_opp = gtree_opp.total
        if opp.size == 0 or r_opp <= 0.0:
            hz = None
            p_min, p_max = 0.0, ratio
        else:
            hz = gtree_opp.sample(rng.uniform())
            s = r_side + r_opp
            lo, hi_ = (r_side, r_opp) if r_side < r_opp else (r_opp, r_side)
            p_min = lo / s * ratio
            p_max = hi_ / s * ratio

        u = rng.uniform()
        if u < p_min:
            # Coupled branch: both replacement jumps fire and the two x
            # insertions cancel, so neither ensemble grows.
            z = opp.mass_of(hz)
            side.remove_particle(hk)
            opp.remove_particle(hz)
            self._sig_insert(side, opp, x + y)
            self._sig_insert(opp, side, x + z)
            self.counters["type2_plus"] += 1
            self.counters["type2_minus"] += 1
        elif u < p_max:
            if r_side > r_opp:
                side.remove_particle(hk)
                self._sig_insert(side, opp, x + y)
                self._sig_insert(opp, side, x)
                key = "type2_plus" if side_is_plus else "type2_minus"
                self.counters[key] += 1
            else:
                z = opp.mass_of(hz)
                opp.remove_particle(hz)
                self._sig_insert(opp, side, x + z)
                self._sig_insert(side, opp, x)
                key = "type2_minus" if side_is_plus else "type2_plus"
                self.counters[key] += 1
        else:
            self.counters["rejections"] += 1
            return
        self.maybe_resample(rng)

    # -- variance-reduction primitives ---------------------------------------

    def _sig_insert(self, dest, other, mass):
        """Insert into a sensitivity ensemble, fusing the cancellation sweep:
        under coupling, adding a mass the opposite ensemble already holds is
        a pairwise cancellation, so the insert-then-remove round trip is
        skipped and one particle of that mass leaves the opposite side."""
        if self.coupling and other.count_of_mass(mass):
            other.remove_one_of_mass(mass)
            self.counters["cancellations"] += 1
        else:
            dest.add_particle(mass)

    def cancel(self, mass):
        """Remove min(c+, c-) particles of this mass from both sensitivity
        ensembles; the represented signed measure is unchanged."""
        k = min(self.sig_plus.count_of_mass(mass),
                self.sig_minus.count_of_mass(mass))
        for _ in range(k):
            self.sig_plus.remove_one_of_mass(mass)
            self.sig_minus.remove_one_of_mass(mass)
        if k:
            self.counters["cancellations"] += k
        return k

    def maybe_resample(self, rng):
        """Bernoulli-thin both sensitivity ensembles once either hits the cap."""
        cap = self.resample_max
        if self.sig_plus.size < cap and self.sig_minus.size < cap:
            return
        q = self.resample_target / cap
        for ens in (self.sig_plus, self.sig_minus):
            for handle, _ in ens.particles():
                if rng.uniform() >= q:
                    ens.remove_particle(handle)
        self.weight /= q
        self.counters["resamples"] += 1

    # -- inspection ------------------------------------------------------------

    def snapshot(self, time=None):
        return Snapshot(
            time=self.clock if time is None else time,
            mu_counts=self.mu.histogram(),
            sig_plus_counts=self.sig_plus.histogram(),
            sig_minus_counts=self.sig_minus.histogram(),
            weight=self.weight,
            scale=self.n,
            counters=self.counters.copy(),
        )

    def sensitivity_estimate(self):
        return self.snapshot().sensitivity()

    def clone(self):
        other = TripleSimulation.__new__(TripleSimulation)
        other.kernel = self.kernel
        other.n = self.n
        other.algorithm = self.algorithm
        other.coupling = self.coupling
        other.sensitivity = self.sensitivity
        other._main, other._dpos, other._dneg = self._main, self._dpos, self._dneg
        other.mu = self.mu.clone()
        other.sig_plus = self.sig_plus.clone()
        other.sig_minus = self.sig_minus.clone()
        other.resample_max = self.resample_max
        other.resample_target = self.resample_target
        other.weight = self.weight
        other.clock = self.clock
        other.counters = self.counters.copy()
        other._rates = self._rates
        other._bind_trees()
        return other


def simulate(sim, rng, output_times, t_end):
    """Drive a simulation, emitting a snapshot the first time the clock
    passes each output time; the snapshot reflects the state strictly
    before the crossing jump.  Stops at t_end, at absorption, or once all
    requested snapshots are out."""
    pending = list(output_times) if output_times else [t_end]
    pending.sort()
    pos = 0
    snaps = []
    while pos < len(pending):
        dt = sim.propose(rng)
        if dt is None:
            while pos < len(pending):
                snaps.append(sim.snapshot(pending[pos]))
                pos += 1
            break
        t_next = sim.clock + dt
        while pos < len(pending) and pending[pos] <= t_next:
            snaps.append(sim.snapshot(pending[pos]))
            pos += 1
        if pos == len(pending) or t_next > t_end:
            break
        sim.clock = t_next
        sim.execute(rng)
    return snaps


def run(config, sensitivity=True):
    """Simulate one run from a SimConfig and return its snapshots."""
    kernel = make_kernel(config.kernel, config.lam)
    rng = UniformStream((config.seed, config.run_index))
    sim = TripleSimulation(
        kernel, config.n_particles,
        algorithm=config.algorithm,
        resample_max=config.resample_max,
        resample_target=config.resample_target,
        initial_histogram=config.initial_histogram,
        sensitivity=sensitivity,
    )
    return simulate(sim, rng, config.output_times, config.t_end)

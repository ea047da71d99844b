"""Parameterized coagulation kernel families and their separable majorants.

Two families are provided: the additive kernel ``lam * (x + y)`` and the
free-molecular "soot" kernel ``sqrt(1/x + 1/y) * (x**(1/lam) + y**(1/lam))**2``.
Each family exposes the rate itself, its derivative with respect to the
parameter ``lam`` (split into positive and negative parts), and, for every
event class, a list of separable components ``coef * f(x) * g(y)`` whose sum
dominates the corresponding true rate.  Separability is what allows particle
pairs to be drawn by two independent single-particle lookups.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Event classes a majorant can be requested for.
MAIN = "main"            # the kernel K itself (coagulation events)
DERIV_POS = "deriv_pos"  # positive part of dK/dlam
DERIV_NEG = "deriv_neg"  # negative part of dK/dlam

EVENT_CLASSES = (MAIN, DERIV_POS, DERIV_NEG)


@dataclass(frozen=True)
class Feature:
    """Single-particle weight function ``x**power * (log(x+1) if with_log)``.

    Instances with equal fields are interchangeable, so ensembles can share
    one sum tree between majorant components that reuse a feature.
    """

    power: float
    with_log: bool = False

    @property
    def key(self):
        return (self.power, self.with_log)

    def __call__(self, mass):
        p = self.power
        if p == 1.0:
            v = float(mass)
        elif p == 0.0:
            v = 1.0
        else:
            v = mass ** p
        if self.with_log:
            v *= math.log(mass + 1.0)
        return v

    def fn(self):
        """Plain-function form, specialized for the common exponents; used
        in the simulators' inner loops."""
        p, with_log = self.power, self.with_log
        log = math.log
        if not with_log:
            if p == 0.0:
                return lambda m: 1.0
            if p == 1.0:
                return float
            return lambda m: m ** p
        if p == 0.0:
            return lambda m: log(m + 1.0)
        if p == 1.0:
            return lambda m: m * log(m + 1.0)
        return lambda m: (m ** p) * log(m + 1.0)

    def values(self, masses):
        masses = np.asarray(masses, dtype=float)
        v = masses ** self.power
        if self.with_log:
            v = v * np.log(masses + 1.0)
        return v


@dataclass(frozen=True)
class MajorantComponent:
    """One separable term ``coef * f(x) * g(y)`` of a majorant kernel."""

    coef: float
    f: Feature
    g: Feature

    def bound(self, x, y):
        return self.coef * self.f(x) * self.g(y)


def majorant_value(components, x, y):
    """Evaluate the full majorant sum at an ordered pair of masses."""
    return sum(c.coef * c.f(x) * c.g(y) for c in components)


def _check_masses(x, y):
    if x < 1 or y < 1:
        raise ValueError(f"masses must be >= 1, got ({x}, {y})")


class KernelFamily:
    """Base class; concrete families implement the rate and its majorants."""

    id = None

    def __init__(self, lam):
        if not lam > 0:
            raise ValueError(f"lambda must be positive, got {lam}")
        self.lam = float(lam)

    def __call__(self, x, y):
        raise NotImplementedError

    def deriv(self, x, y):
        raise NotImplementedError

    def deriv_split(self, x, y):
        """Return (max(K', 0), max(-K', 0)); exactly one is nonzero."""
        d = self.deriv(x, y)
        return (d, 0.0) if d >= 0.0 else (0.0, -d)

    def majorant(self, event_class):
        raise NotImplementedError

    def interval_majorant(self, lam_lo, lam_hi):
        """Main-class components dominating K_lam' for every lam' in the interval.

        Used by the shared-randomness central-difference driver, which thins
        two nearby parameter values against one common proposal rate.
        """
        raise NotImplementedError

    def eval_grid(self, xs, ys):
        """Vectorized kernel matrix K[i, j] over two mass vectors."""
        raise NotImplementedError

    def deriv_grid(self, xs, ys):
        raise NotImplementedError

    def with_lambda(self, lam):
        return type(self)(lam)

    def __repr__(self):
        return f"{type(self).__name__}(lam={self.lam})"


_ONE = Feature(0.0)
_LIN = Feature(1.0)


class AdditiveKernel(KernelFamily):
    """K(x, y) = lam * (x + y).  The majorant is the kernel itself."""

    id = "additive"

    def __call__(self, x, y):
        _check_masses(x, y)
        return self.lam * (x + y)

    def deriv(self, x, y):
        _check_masses(x, y)
        return float(x + y)

    def majorant(self, event_class):
        if event_class == MAIN:
            return (MajorantComponent(self.lam, _LIN, _ONE),
                    MajorantComponent(self.lam, _ONE, _LIN))
        if event_class == DERIV_POS:
            return (MajorantComponent(1.0, _LIN, _ONE),
                    MajorantComponent(1.0, _ONE, _LIN))
        if event_class == DERIV_NEG:
            return ()
        raise ValueError(f"unknown event class {event_class!r}")

    def interval_majorant(self, lam_lo, lam_hi):
        # K is increasing in lam, so the upper endpoint dominates the interval.
        return type(self)(lam_hi).majorant(MAIN)

    def eval_grid(self, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        return self.lam * (xs[:, None] + ys[None, :])

    def deriv_grid(self, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        return xs[:, None] + ys[None, :]


class SootKernel(KernelFamily):
    """Free-molecular collision rate K = sqrt(1/x + 1/y) * (x**a + y**a)**2, a = 1/lam.

    dK/dlam <= 0 on integer masses, so the derivative majorant lives entirely
    in the negative class.  Bounds use sqrt(1/x + 1/y) <= x**-.5 + y**-.5 and
    log(x) <= log(x + 1); the latter keeps the mass-1 feature weight positive,
    which only enlarges the bound and never breaks domination.
    """

    id = "soot"

    def __call__(self, x, y):
        _check_masses(x, y)
        a = 1.0 / self.lam
        return math.sqrt(1.0 / x + 1.0 / y) * (x ** a + y ** a) ** 2

    def deriv(self, x, y):
        _check_masses(x, y)
        a = 1.0 / self.lam
        xa = x ** a
        ya = y ** a
        bracket = xa * math.log(x) + ya * math.log(y)
        return -(2.0 / self.lam ** 2) * math.sqrt(1.0 / x + 1.0 / y) * (xa + ya) * bracket

    def majorant(self, event_class):
        a = 1.0 / self.lam
        if event_class == MAIN:
            return self._main_components(a)
        if event_class == DERIV_POS:
            return ()
        if event_class == DERIV_NEG:
            c = 2.0 / self.lam ** 2
            fa = Feature(a)
            fam = Feature(a - 0.5)
            fs = Feature(-0.5)
            la = Feature(a, with_log=True)
            lam_ = Feature(a - 0.5, with_log=True)
            l2a = Feature(2 * a, with_log=True)
            l2am = Feature(2 * a - 0.5, with_log=True)
            # (x^-.5 + y^-.5)(x^a + y^a)(x^a log(x+1) + y^a log(y+1)) expanded
            return (MajorantComponent(c, l2am, _ONE),
                    MajorantComponent(c, fam, la),
                    MajorantComponent(c, lam_, fa),
                    MajorantComponent(c, fs, l2a),
                    MajorantComponent(c, l2a, fs),
                    MajorantComponent(c, fa, lam_),
                    MajorantComponent(c, la, fam),
                    MajorantComponent(c, _ONE, l2am))
        raise ValueError(f"unknown event class {event_class!r}")

    @staticmethod
    def _main_components(a):
        fa = Feature(a)
        f2a = Feature(2 * a)
        fam = Feature(a - 0.5)
        f2am = Feature(2 * a - 0.5)
        fs = Feature(-0.5)
        # (x^-.5 + y^-.5)(x^a + y^a)^2 expanded into six separable terms
        return (MajorantComponent(1.0, f2am, _ONE),
                MajorantComponent(2.0, fam, fa),
                MajorantComponent(1.0, fs, f2a),
                MajorantComponent(1.0, f2a, fs),
                MajorantComponent(2.0, fa, fam),
                MajorantComponent(1.0, _ONE, f2am))

    def interval_majorant(self, lam_lo, lam_hi):
        # x**(1/lam) decreases in lam for x >= 1, so the lower endpoint dominates.
        return self._main_components(1.0 / lam_lo)

    def eval_grid(self, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        a = 1.0 / self.lam
        return np.sqrt(1.0 / xs[:, None] + 1.0 / ys[None, :]) * (
            xs[:, None] ** a + ys[None, :] ** a) ** 2

    def deriv_grid(self, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        a = 1.0 / self.lam
        xa = xs[:, None] ** a
        ya = ys[None, :] ** a
        bracket = xa * np.log(xs)[:, None] + ya * np.log(ys)[None, :]
        return -(2.0 / self.lam ** 2) * np.sqrt(
            1.0 / xs[:, None] + 1.0 / ys[None, :]) * (xa + ya) * bracket


KERNELS = {"additive": AdditiveKernel, "soot": SootKernel}


def make_kernel(name, lam):
    """Build a kernel family from its config name and parameter value."""
    try:
        cls = KERNELS[name]
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; expected one of {sorted(KERNELS)}")
    return cls(lam)

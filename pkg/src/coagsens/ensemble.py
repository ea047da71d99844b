"""Particle population indexed for factorized majorant sampling.

An :class:`Ensemble` is a multiset of integer particle masses addressed by
stable handles.  It maintains one :class:`~coagsens.sumtree.WeightedIndexTree`
per registered non-constant feature function, so a particle can be drawn with
probability proportional to ``f(mass)`` in O(log n), plus a per-mass index
used by the cancellation step to pull an exact-mass particle in O(1).

The constant feature (weight 1 for every particle) is always registered and
is backed by a swap-remove list instead of a tree: its total is the live
count and sampling is a single O(1) lookup, uniform over live particles in
a deterministic internal order.

All index structures of an ensemble see the identical insert/remove
sequence, so their slot allocators stay in lockstep and a single handle is
valid everywhere.
"""

from __future__ import annotations

from .kernels import Feature
from .sumtree import NoMassError, StaleHandleError, WeightedIndexTree

_COUNT = Feature(0.0)  # constant-1 feature, always registered
COUNT_KEY = _COUNT.key

_SLOT_BITS = 32
_SLOT_MASK = (1 << _SLOT_BITS) - 1


class NoSuchMassError(Exception):
    """No particle of the requested mass is present."""


class _CountIndex:
    """Uniform sampler over live handles; allocates slots exactly like a
    WeightedIndexTree so handles agree across all of an ensemble's indexes."""

    __slots__ = ("_gen", "_free", "_n_slots", "_handles", "_pos", "total")

    def __init__(self):
        self._gen = []
        self._free = []
        self._n_slots = 0
        self._handles = []
        self._pos = {}
        self.total = 0.0  # live count as a float, kept current

    def __len__(self):
        return len(self._handles)

    def insert(self):
        if self._free:
            slot = self._free.pop()
        else:
            slot = self._n_slots
            self._n_slots += 1
            self._gen.append(0)
        handle = (self._gen[slot] << _SLOT_BITS) | slot
        self._pos[handle] = len(self._handles)
        self._handles.append(handle)
        self.total = float(len(self._handles))
        return handle

    def remove(self, handle):
        slot = handle & _SLOT_MASK
        if slot >= self._n_slots or self._gen[slot] != handle >> _SLOT_BITS:
            raise StaleHandleError(f"handle {handle} is not live")
        self._gen[slot] += 1
        self._free.append(slot)
        i = self._pos.pop(handle)
        last = self._handles.pop()
        if last != handle:
            self._handles[i] = last
            self._pos[last] = i
        self.total = float(len(self._handles))

    def sample(self, u):
        n = len(self._handles)
        if n == 0:
            raise NoMassError("cannot sample from an empty ensemble")
        i = int(u * n)
        if i >= n:  # guard the u -> 1 rounding corner
            i = n - 1
        return self._handles[i]

    def clone(self):
        other = _CountIndex.__new__(_CountIndex)
        other._gen = self._gen.copy()
        other._free = self._free.copy()
        other._n_slots = self._n_slots
        other._handles = self._handles.copy()
        other._pos = self._pos.copy()
        other.total = self.total
        return other


class Ensemble:

    __slots__ = ("_features", "_trees", "_bound", "_count", "_masses",
                 "_mass_index", "_total_mass", "size")

    def __init__(self, features=()):
        feats = {COUNT_KEY: _COUNT}
        for f in features:
            feats.setdefault(f.key, f)
        self._features = list(feats.values())
        self._count = _CountIndex()
        self._trees = {f.key: WeightedIndexTree()
                       for f in self._features if f.key != COUNT_KEY}
        self._bound = [(f.fn(), self._trees[f.key])
                       for f in self._features if f.key != COUNT_KEY]
        self._masses = {}       # handle -> mass
        self._mass_index = {}   # mass -> {handle: None}, insertion ordered
        self._total_mass = 0
        self.size = 0           # live particle count, kept current

    @property
    def total_mass(self):
        """Exact integer sum of all particle masses."""
        return self._total_mass

    def feature_keys(self):
        return [f.key for f in self._features]

    def tree(self, key):
        """Sampling index for a registered feature (.total / .sample)."""
        if key == COUNT_KEY:
            return self._count
        return self._trees[key]

    def feature_total(self, key):
        if key == COUNT_KEY:
            return self._count.total
        return self._trees[key].total

    def add_particle(self, mass):
        if mass < 1:
            raise ValueError(f"particle mass must be >= 1, got {mass}")
        handle = self._count.insert()
        for f, tree in self._bound:
            if tree.insert(f(mass)) != handle:
                # indexes share one allocator history by construction
                raise AssertionError("feature indexes disagree on slot allocation")
        self._masses[handle] = mass
        bucket = self._mass_index.get(mass)
        if bucket is None:
            self._mass_index[mass] = {handle: None}
        else:
            bucket[handle] = None
        self._total_mass += mass
        self.size += 1
        return handle

    def remove_particle(self, handle):
        try:
            mass = self._masses.pop(handle)
        except KeyError:
            raise StaleHandleError(f"handle {handle} is not live") from None
        self._count.remove(handle)
        for _, tree in self._bound:
            tree.remove(handle)
        bucket = self._mass_index[mass]
        del bucket[handle]
        if not bucket:
            del self._mass_index[mass]
        self._total_mass -= mass
        self.size -= 1
        return mass

    def remove_one_of_mass(self, mass):
        """Remove the most recently added particle of the exact mass."""
        bucket = self._mass_index.get(mass)
        if not bucket:
            raise NoSuchMassError(f"no particle of mass {mass}")
        handle = next(reversed(bucket))
        self.remove_particle(handle)
        return handle

    def count_of_mass(self, mass):
        bucket = self._mass_index.get(mass)
        return len(bucket) if bucket else 0

    def sample_by_feature(self, key, u):
        """Draw a particle with probability f(mass) / feature_total."""
        try:
            handle = self.tree(key).sample(u)
        except NoMassError:
            raise NoMassError(f"feature {key} has zero total weight") from None
        return handle, self._masses[handle]

    def mass_of(self, handle):
        return self._masses[handle]

    def particles(self):
        """List of (handle, mass) in insertion order."""
        return list(self._masses.items())

    def histogram(self):
        return {mass: len(bucket) for mass, bucket in self._mass_index.items()}

    def clone(self):
        other = Ensemble.__new__(Ensemble)
        other._features = self._features
        other._count = self._count.clone()
        other._trees = {key: tree.clone() for key, tree in self._trees.items()}
        other._bound = [(f.fn(), other._trees[f.key]) for f in other._features
                        if f.key != COUNT_KEY]
        other._masses = self._masses.copy()
        other._mass_index = {m: b.copy() for m, b in self._mass_index.items()}
        other._total_mass = self._total_mass
        other.size = self.size
        return other

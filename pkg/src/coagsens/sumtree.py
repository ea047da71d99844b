"""Binary sum tree over dynamic non-negative weights.

Supports insert / remove / update / total / inverse-CDF sampling, each
touching O(log n) nodes.  Leaves live in a flat float64 array under an
implicit complete binary tree; every internal node is kept exactly equal
to the sum of its two children after each mutation, so descent invariants
hold in floating point without accumulated drift.

Handles returned by :meth:`WeightedIndexTree.insert` stay valid until the
leaf is removed.  Slots of removed leaves are reused (most recently freed
first) with a generation counter, so a stale handle is always detected
rather than silently aliasing a newer particle.  Leaf ordering, and hence
the outcome of ``sample`` for a given uniform, is a deterministic function
of the operation sequence.

The path-update and descent loops are compiled with numba when it is
installed (they dominate the simulators' run time); the pure-Python
fallbacks compute bit-identical results.
"""

from __future__ import annotations

import math

import numpy as np


class StaleHandleError(Exception):
    """A handle referring to a removed (or never existing) leaf was used."""


class NoMassError(Exception):
    """Sampling was attempted from a tree with zero total weight."""


_SLOT_BITS = 32
_SLOT_MASK = (1 << _SLOT_BITS) - 1


def _py_set_path(tree, cap, slot, w):
    i = cap + slot
    tree[i] = w
    i >>= 1
    while i:
        j = 2 * i
        tree[i] = tree[j] + tree[j + 1]
        i >>= 1
    return tree[1]


def _py_descend(tree, cap, target):
    node = 1
    while node < cap:
        node <<= 1
        left = tree[node]
        if target >= left:
            target -= left
            node |= 1
    return node - cap


def _py_rebuild(tree, cap):
    for i in range(cap - 1, 0, -1):
        tree[i] = tree[2 * i] + tree[2 * i + 1]
    return tree[1]


try:
    from numba import njit

    _set_path = njit("float64(float64[::1], int64, int64, float64)",
                     cache=True)(_py_set_path)
    _descend = njit("int64(float64[::1], int64, float64)",
                    cache=True)(_py_descend)
    _rebuild_tree = njit("float64(float64[::1], int64)",
                         cache=True)(_py_rebuild)
except ImportError:  # pragma: no cover - exercised only without numba
    _set_path, _descend, _rebuild_tree = _py_set_path, _py_descend, _py_rebuild


class WeightedIndexTree:

    # Full recompute every ~1M mutations; cheap insurance against any
    # pathological rounding pattern in very long runs.
    REBUILD_PERIOD = 1 << 20

    __slots__ = ("_tree", "_cap", "_depth", "_gen", "_free", "_n_slots",
                 "_live", "_mutations", "node_visits", "total")

    def __init__(self):
        self._cap = 2
        self._depth = 1
        self._tree = np.zeros(4)
        self._gen = []          # per-slot generation, bumped on remove
        self._free = []         # reusable slots, LIFO
        self._n_slots = 0       # high-water mark of allocated slots
        self._live = 0
        self._mutations = 0
        self.node_visits = 0    # instrumentation for complexity tests
        self.total = 0.0        # root sum, kept current by every mutation

    def __len__(self):
        return self._live

    @property
    def capacity(self):
        return self._cap

    def insert(self, weight):
        """Add a leaf with the given weight and return its handle."""
        if not (weight >= 0.0) or weight == math.inf:
            raise ValueError(f"weight must be finite and non-negative, got {weight}")
        if self._free:
            slot = self._free.pop()
        else:
            if self._n_slots == self._cap:
                self._grow()
            slot = self._n_slots
            self._n_slots += 1
            self._gen.append(0)
        self._live += 1
        self._set_leaf(slot, float(weight))
        return (self._gen[slot] << _SLOT_BITS) | slot

    def remove(self, handle):
        """Remove a leaf; its handle becomes stale.  Returns the old weight."""
        slot = handle & _SLOT_MASK
        if slot >= self._n_slots or self._gen[slot] != handle >> _SLOT_BITS:
            raise StaleHandleError(f"handle {handle} is not live")
        old = float(self._tree[self._cap + slot])
        self._set_leaf(slot, 0.0)
        self._gen[slot] += 1
        self._free.append(slot)
        self._live -= 1
        return old

    def update(self, handle, weight):
        """Replace the weight of a live leaf."""
        if not (weight >= 0.0) or weight == math.inf:
            raise ValueError(f"weight must be finite and non-negative, got {weight}")
        slot = self._resolve(handle)
        self._set_leaf(slot, float(weight))

    def weight(self, handle):
        return float(self._tree[self._cap + self._resolve(handle)])

    def sample(self, u):
        """Return the handle whose weight interval contains ``u * total``.

        ``u`` must lie in [0, 1); the probability of returning a leaf equals
        its weight divided by the total.
        """
        total = self.total
        if total <= 0.0:
            raise NoMassError("cannot sample from a tree with zero total weight")
        target = u * total
        if target >= total:  # guard the u -> 1 rounding corner
            target = math.nextafter(total, 0.0)
        slot = int(_descend(self._tree, self._cap, target))
        self.node_visits += 2 * self._depth + 1
        return (self._gen[slot] << _SLOT_BITS) | slot

    def rebuild(self):
        """Recompute every internal node from the leaves."""
        self.total = float(_rebuild_tree(self._tree, self._cap))

    def clone(self):
        """Independent copy; existing handles are valid in both trees."""
        other = WeightedIndexTree.__new__(WeightedIndexTree)
        other._tree = self._tree.copy()
        other._cap = self._cap
        other._depth = self._depth
        other._gen = self._gen.copy()
        other._free = self._free.copy()
        other._n_slots = self._n_slots
        other._live = self._live
        other._mutations = self._mutations
        other.node_visits = self.node_visits
        other.total = self.total
        return other

    # -- internals ---------------------------------------------------------

    def _resolve(self, handle):
        slot = handle & _SLOT_MASK
        if slot >= self._n_slots or self._gen[slot] != handle >> _SLOT_BITS:
            raise StaleHandleError(f"handle {handle} is not live")
        return slot

    def _set_leaf(self, slot, weight):
        self.total = float(_set_path(self._tree, self._cap, slot, weight))
        self.node_visits += self._depth + 1
        self._mutations += 1
        if not self._mutations & (self.REBUILD_PERIOD - 1):
            self.rebuild()

    def _grow(self):
        old_cap, cap = self._cap, 2 * self._cap
        tree = np.zeros(2 * cap)
        tree[cap:cap + old_cap] = self._tree[old_cap:2 * old_cap]
        self._tree = tree
        self._cap = cap
        self._depth = cap.bit_length() - 1
        self.rebuild()

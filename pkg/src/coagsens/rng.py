"""Deterministic uniform streams for the simulators.

Each run owns one counter-based (Philox) stream derived from an integer
entropy tuple, normally ``(seed, run_index)``, so replications are
reproducible and independent of scheduling.  Uniforms are buffered in
blocks; consumers draw them strictly one at a time in a fixed documented
order, which makes whole trajectories a pure function of the entropy.
"""

from __future__ import annotations

import copy
import math

import numpy as np

_BLOCK = 4096


class UniformStream:

    __slots__ = ("entropy", "_gen", "_buf", "_pos")

    def __init__(self, entropy):
        self.entropy = tuple(int(e) for e in entropy)
        self._gen = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(self.entropy)))
        # .tolist() hands out native floats; arithmetic on them is several
        # times faster than on numpy scalars in the simulators' hot loops.
        self._buf = self._gen.random(_BLOCK).tolist()
        self._pos = 0

    def uniform(self):
        """Next uniform in [0, 1)."""
        i = self._pos
        if i == _BLOCK:
            self._buf = self._gen.random(_BLOCK).tolist()
            i = 0
        self._pos = i + 1
        return self._buf[i]

    def exponential(self, rate):
        """Exponential holding time with the given rate."""
        return -math.log1p(-self.uniform()) / rate

    def child(self, key):
        """Fresh independent stream derived from this stream's entropy."""
        return UniformStream(self.entropy + (int(key),))

    def clone(self):
        """Copy that will produce the identical remaining uniform sequence."""
        other = UniformStream.__new__(UniformStream)
        other.entropy = self.entropy
        other._gen = copy.deepcopy(self._gen)
        other._buf = list(self._buf)
        other._pos = self._pos
        return other

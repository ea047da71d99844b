import math
import random

import pytest
from scipy import stats as sps

from coagsens import NoMassError, StaleHandleError, WeightedIndexTree
from coagsens.sumtree import _py_descend, _py_rebuild, _py_set_path

from _util import chi_square_stat, naive_weighted_pick


def test_insert_totals():
    t = WeightedIndexTree()
    for w in (1.0, 2.0, 3.0):
        t.insert(w)
    assert t.total == 6.0
    h = t.insert(0.0)
    assert t.total == 6.0
    assert t.weight(h) == 0.0


def test_zero_weight_never_sampled():
    t = WeightedIndexTree()
    hz = t.insert(0.0)
    h1 = t.insert(5.0)
    for k in range(200):
        assert t.sample(k / 200.0) == h1
    assert hz != h1


def test_insert_rejects_bad_weights():
    t = WeightedIndexTree()
    for bad in (-1.0, float("nan"), float("inf")):
        with pytest.raises(ValueError):
            t.insert(bad)
        with pytest.raises(ValueError):
            h = t.insert(1.0)
            try:
                t.update(h, bad)
            finally:
                t.remove(h)


def test_large_insert_total_matches_compensated_sum():
    rng = random.Random(42)
    t = WeightedIndexTree()
    ws = [rng.random() * rng.choice([1e-6, 1.0, 1e6]) for _ in range(100_000)]
    for w in ws:
        t.insert(w)
    exact = math.fsum(ws)
    assert abs(t.total - exact) / exact < 1e-9


def test_remove_update_examples():
    t = WeightedIndexTree()
    h1 = t.insert(1.0)
    h2 = t.insert(2.0)
    h3 = t.insert(3.0)
    assert t.remove(h2) == 2.0
    assert t.total == 4.0
    t.update(h1, 0.0)
    t.update(h3, 0.0)
    assert t.total == 0.0
    with pytest.raises(NoMassError):
        t.sample(0.5)


def test_stale_handles_detected():
    t = WeightedIndexTree()
    h = t.insert(1.0)
    t.remove(h)
    for op in (lambda: t.remove(h), lambda: t.update(h, 2.0),
               lambda: t.weight(h)):
        with pytest.raises(StaleHandleError):
            op()
    # slot reuse must not resurrect the stale handle
    h2 = t.insert(7.0)
    assert h2 != h
    with pytest.raises(StaleHandleError):
        t.weight(h)


def test_sample_prefix_inversion_example():
    t = WeightedIndexTree()
    handles = [t.insert(w) for w in (1.0, 2.0, 3.0)]
    assert t.sample(0.5) == handles[2]      # target 3.0 lies in [3, 6)
    assert t.sample(0.0) == handles[0]
    assert t.sample(1.0 - 1e-12) == handles[2]


def test_sample_single_leaf():
    t = WeightedIndexTree()
    h = t.insert(0.123)
    for u in (0.0, 0.37, 0.999999):
        assert t.sample(u) == h


def test_sample_chi_square():
    t = WeightedIndexTree()
    handles = [t.insert(w) for w in (1.0, 2.0, 3.0)]
    rng = random.Random(2024)
    counts = dict.fromkeys(handles, 0)
    n = 1_000_000
    for _ in range(n):
        counts[t.sample(rng.random())] += 1
    probs = {handles[0]: 1 / 6, handles[1]: 2 / 6, handles[2]: 3 / 6}
    stat = chi_square_stat(counts, probs, n)
    assert stat < sps.chi2.ppf(0.999, df=2)


def test_oracle_equivalence_random_ops():
    """Totals and sample outcomes match a naive slot array under one u stream.

    The naive model mirrors the documented leaf ordering: slots in insertion
    order, freed slots reused most recently freed first, linear-scan
    inverse CDF over live slots.
    """
    rng = random.Random(99)
    t = WeightedIndexTree()
    slots = []        # per slot: [handle, weight] or None when free
    free = []
    by_handle = {}    # handle -> slot
    for step in range(10_000):
        r = rng.random()
        if r < 0.45 or not by_handle:
            w = rng.choice([0.0, rng.random(), rng.random() * 100])
            h = t.insert(w)
            assert h not in by_handle
            slot = free.pop() if free else len(slots)
            if slot == len(slots):
                slots.append(None)
            slots[slot] = [h, w]
            by_handle[h] = slot
        elif r < 0.65:
            h = rng.choice(list(by_handle))
            w = rng.random() * 10
            t.update(h, w)
            slots[by_handle[h]][1] = w
        elif r < 0.85:
            h = rng.choice(list(by_handle))
            slot = by_handle.pop(h)
            assert t.remove(h) == slots[slot][1]
            slots[slot] = None
            free.append(slot)
        else:
            live = [(entry[0], entry[1]) for entry in slots if entry]
            total = sum(w for _, w in live)
            assert t.total == pytest.approx(total, rel=1e-11, abs=1e-11)
            if total > 0:
                u = rng.random()
                expect = naive_weighted_pick(live, u)
                assert t.sample(u) == expect
    live_total = sum(entry[1] for entry in slots if entry)
    assert t.total == pytest.approx(live_total, rel=1e-11, abs=1e-11)


def test_node_visit_complexity():
    for n in (2, 5, 16, 100, 1000):
        t = WeightedIndexTree()
        handles = [t.insert(1.0 + i) for i in range(n)]
        bound = 2 * math.ceil(math.log2(n)) + 2
        t.node_visits = 0
        t.update(handles[n // 2], 5.0)
        assert t.node_visits <= bound
        t.node_visits = 0
        t.sample(0.777)
        assert t.node_visits <= bound
        t.node_visits = 0
        t.remove(handles[0])
        assert t.node_visits <= bound


def test_internal_nodes_equal_child_sums():
    rng = random.Random(17)
    t = WeightedIndexTree()
    handles = []
    for _ in range(500):
        handles.append(t.insert(rng.random()))
    for _ in range(300):
        h = handles.pop(rng.randrange(len(handles)))
        t.remove(h)
    tree, cap = t._tree, t._cap
    for i in range(1, cap):
        assert tree[i] == tree[2 * i] + tree[2 * i + 1]
    t.rebuild()
    for i in range(1, cap):
        assert tree[i] == tree[2 * i] + tree[2 * i + 1]


def test_clone_is_independent():
    t = WeightedIndexTree()
    h1 = t.insert(1.0)
    c = t.clone()
    t.insert(2.0)
    assert c.total == 1.0 and t.total == 3.0
    assert c.weight(h1) == 1.0
    c.remove(h1)
    assert t.weight(h1) == 1.0


def test_python_and_compiled_paths_agree():
    rng = random.Random(1)
    import numpy as np
    from coagsens.sumtree import _descend, _rebuild_tree, _set_path
    cap = 64
    a = np.zeros(2 * cap)
    b = np.zeros(2 * cap)
    for _ in range(500):
        slot = rng.randrange(cap)
        w = rng.random()
        ra = _set_path(a, cap, slot, w)
        rb = _py_set_path(b, cap, slot, w)
        assert float(ra) == float(rb)
    assert float(_rebuild_tree(a, cap)) == float(_py_rebuild(b, cap))
    for _ in range(500):
        target = rng.random() * float(a[1])
        assert int(_descend(a, cap, target)) == int(_py_descend(b, cap, target))

import json
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairaudit.domain import Domain, HypothesisClass, VersionSpace, restrict
from fairaudit.errors import EmptyVersionSpace, NoQueryNeeded, SizeLimit
from fairaudit.harness.generators import gen_shattered
from fairaudit.harness.oracles import CountingOracle
from fairaudit.minimax import (
    CACHE_ENV,
    CostTable,
    best_query,
    cost,
    min_specifying_set,
    minimax_audit,
    tree_depth_bruteforce,
    xtd,
)
from instances import random_instance


def naive_cost(C, eps):
    """Plain min-max recursion over tuples of member indices."""
    labels = C.labels
    mus = C.mus

    @lru_cache(maxsize=None)
    def rec(members):
        vals = [mus[i] for i in members]
        if max(vals) - min(vals) <= 2 * eps + 1e-12:
            return 0
        best = None
        for x in range(C.m):
            pos = tuple(i for i in members if labels[i][x] == 1)
            neg = tuple(i for i in members if labels[i][x] == -1)
            if not pos or not neg:
                continue
            v = max(rec(pos), rec(neg))
            best = v if best is None else min(best, v)
        return 1 + best

    return rec(tuple(range(len(C))))


def is_specifying(C, h, S, eps):
    idx = [i for i in range(len(C)) if all(C.labels[i][x] == h[x] for x in S)]
    if not idx:
        return True
    return C.mus[idx].max() - C.mus[idx].min() <= 2 * eps + 1e-12


@pytest.fixture(scope="module")
def shattered4():
    return gen_shattered(4)


def test_cost_shattered4(shattered4):
    C, _ = shattered4
    assert cost(C.full(), 0.25, C) == 2
    assert tree_depth_bruteforce(C.full(), 0.25, C, 6) == 2


def test_cost_base_case():
    C, _ = gen_shattered(2)
    assert cost(C.full(), 0.5, C) == 0
    with pytest.raises(NoQueryNeeded):
        best_query(C.full(), 0.5, C)
    with pytest.raises(EmptyVersionSpace):
        cost(VersionSpace(0), 0.1, C)


def test_cost_two_members():
    D = Domain.from_groups([1, 1, 0], [0.5, 0.5, 1.0], 0.5)
    C = HypothesisClass([[-1, -1, -1], [1, 1, -1]], D)
    assert cost(C.full(), 0.1, C) == 1
    assert best_query(C.full(), 0.1, C) == 0


def test_best_query_tie_breaks_to_smallest_id(shattered4):
    C, _ = shattered4
    assert best_query(C.full(), 0.25, C) == 1


def test_best_query_prefers_resolving_example():
    # x0 resolves everything; x1/x2 each leave a gap
    D = Domain.from_groups([1, 1, 1, 0], [0.6, 0.2, 0.2, 1.0], 0.5)
    C = HypothesisClass([[1, 1, 1, -1], [-1, 1, -1, -1], [-1, -1, 1, -1], [-1, -1, -1, -1]], D)
    V = C.full()
    assert cost(V, 0.15, C) == naive_cost(C, 0.15)
    x = best_query(V, 0.15, C)
    for y in (1, -1):
        V2 = restrict(V, x, y, C)
        if V2.members:
            assert cost(V2, 0.15, C) == cost(V, 0.15, C) - 1


def test_minimax_audit_shattered(shattered4):
    C, star = shattered4
    res = minimax_audit(CountingOracle.from_class(C, star), C, 0.25)
    assert res.queries == 2
    assert abs(res.estimate - C.mus[star]) <= 0.25
    assert not res.truncated


def test_minimax_zero_queries():
    C, _ = gen_shattered(2)
    res = minimax_audit(CountingOracle.from_class(C, 1), C, 0.5)
    assert res.queries == 0
    assert res.estimate == 0.5


def test_minimax_truncated(shattered4):
    C, star = shattered4
    res = minimax_audit(CountingOracle.from_class(C, star), C, 0.1, budget=1)
    assert res.truncated and res.queries == 1


def test_minimax_any_labeler_keeps_consistent_member():
    # only disagreement points are queried, so every answer is realized by some member
    import itertools

    C = random_instance(5, max_h=8, max_m=5)
    for bits in itertools.product((1, -1), repeat=C.m):
        res = minimax_audit(CountingOracle(np.array(bits)), C, 0.05)
        assert res.version_space.members
        assert C.diam(res.version_space.members) <= 0.1 + 1e-12


def test_specifying_sets_shattered(shattered4):
    C, star = shattered4
    h = C.labels[star]
    S = min_specifying_set(h, C, 0.25)
    assert len(S) == 2 and S <= {1, 2, 3, 4}
    assert is_specifying(C, h, S, 0.25)
    G = min_specifying_set(h, C, 0.25, mode="greedy")
    assert len(G) >= 2 and is_specifying(C, h, G, 0.25)
    assert xtd(C, 0.25) == 2


def test_specifying_set_trivial_class():
    C, _ = gen_shattered(2)
    assert min_specifying_set(C.labels[0], C, 0.5) == frozenset()
    assert xtd(C, 0.5) == 0


def test_size_limits():
    C, _ = gen_shattered(16)
    with pytest.raises(SizeLimit):
        xtd(C, 0.25)
    with pytest.raises(SizeLimit):
        gen_shattered(17)


def test_cost_table_persistence(tmp_path, monkeypatch, shattered4):
    C, _ = shattered4
    monkeypatch.setenv(CACHE_ENV, str(tmp_path))
    t = CostTable.open(C, 0.25)
    assert cost(C.full(), 0.25, C, t) == 2
    path = t.save()
    blob = json.loads(path.read_text())
    assert blob["class_hash"] == C.content_hash()
    t2 = CostTable.open(C, 0.25)
    assert len(t2) == len(t)
    assert t2.lookup(C.full()) == (2, 1)
    # another class with the same eps does not see these entries
    C2, _ = gen_shattered(3)
    assert len(CostTable.open(C2, 0.25)) == 0


# -- properties --------------------------------------------------------------

seeds = st.integers(0, 10**6)
eps_values = st.sampled_from([0.05, 0.1, 0.25])


@settings(max_examples=40, deadline=None)
@given(seeds, eps_values)
def test_cost_matches_naive_recursion(seed, eps):
    C = random_instance(seed, max_h=16, max_m=7)
    assert cost(C.full(), eps, C) == naive_cost(C, eps)


@settings(max_examples=40, deadline=None)
@given(seeds, eps_values)
def test_recursion_consistency_and_bounds(seed, eps):
    C = random_instance(seed, max_h=16, max_m=7)
    table = CostTable(eps)
    V = C.full()
    c = cost(V, eps, C, table)
    assert c <= len([x for x in range(C.m) if C.pos_masks[x] & V.members and C.neg_masks[x] & V.members])
    for mask, (cv, bx) in list(table.entries.items()):
        if cv == 0:
            continue
        W = VersionSpace(mask)
        for x in range(C.m):
            kids = [restrict(W, x, y, C) for y in (1, -1)]
            kids = [k for k in kids if k.members]
            if len(kids) < 2:
                continue
            worst = max(cost(k, eps, C, table) for k in kids)
            assert worst >= cv - 1
            if x == bx:
                assert worst == cv - 1


@settings(max_examples=40, deadline=None)
@given(seeds, eps_values, st.data())
def test_cost_monotone(seed, eps, data):
    C = random_instance(seed, max_h=16, max_m=7)
    sub = data.draw(st.lists(st.integers(0, len(C) - 1), min_size=1, unique=True))
    assert cost(VersionSpace.from_indices(sub), eps, C) <= cost(C.full(), eps, C)


@settings(max_examples=40, deadline=None)
@given(seeds, eps_values)
def test_adversary_forces_full_cost(seed, eps):
    C = random_instance(seed, max_h=16, max_m=7)
    table = CostTable(eps)
    total = cost(C.full(), eps, C, table)

    class Adversary:
        def __init__(self):
            self.mask = C.full_mask

        def query(self, x):
            options = []
            for y in (1, -1):
                m2 = self.mask & C.label_mask(x, y)
                if m2:
                    options.append((cost(VersionSpace(m2), eps, C, table), y, m2))
            c, y, m2 = max(options)
            self.mask = m2
            return y

    res = minimax_audit(Adversary(), C, eps, table=table)
    assert res.queries == total


@settings(max_examples=30, deadline=None)
@given(seeds, eps_values, st.data())
def test_specifying_sets_valid_and_greedy_not_smaller(seed, eps, data):
    C = random_instance(seed, max_h=16, max_m=7)
    h = np.array(data.draw(st.lists(st.sampled_from([1, -1]), min_size=C.m, max_size=C.m)))
    exact = min_specifying_set(h, C, eps)
    greedy = min_specifying_set(h, C, eps, mode="greedy")
    online = min_specifying_set(h, C, eps, mode="online", seed=seed)
    for S in (exact, greedy, online):
        assert is_specifying(C, h, S, eps)
    assert len(greedy) >= len(exact) and len(online) >= len(exact)
    # no smaller set works
    import itertools

    for S in itertools.combinations(range(C.m), len(exact) - 1 if exact else 0):
        if len(exact):
            assert not is_specifying(C, h, S, eps)


def brute_xtd(C, eps):
    import itertools

    best = 0
    for h in itertools.product((1, -1), repeat=C.m):
        for k in range(C.m + 1):
            if any(is_specifying(C, h, S, eps) for S in itertools.combinations(range(C.m), k)):
                best = max(best, k)
                break
    return best


@settings(max_examples=25, deadline=None)
@given(seeds, eps_values)
def test_xtd_matches_brute_force(seed, eps):
    C = random_instance(seed, max_h=16, max_m=6)
    assert xtd(C, eps) == brute_xtd(C, eps)
    assert xtd(C, eps) <= cost(C.full(), eps, C)

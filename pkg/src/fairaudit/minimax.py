"""Minimax query cost, the optimal deterministic auditor, and exact combinatorial cross-checks.

``cost`` evaluates

    Cost(V) = 0                                   if diam_mu(V) <= 2 eps
            = 1 + min_x max_y Cost(V restricted to (x, y))   otherwise

with ``x`` ranging over the disagreement region of ``V`` (a query outside it
leaves ``V`` unchanged) and ``y`` over labels some member of ``V`` realizes.
"""

from __future__ import annotations

import itertools
import json
import os
from pathlib import Path

import numpy as np

from .domain import MU_TOL, VersionSpace, within_2eps
from .errors import EmptyVersionSpace, InvalidInput, NonRealizableOracle, NoQueryNeeded, SizeLimit
from .session import AuditResult, BudgetExhausted, QuerySession

CACHE_ENV = "FAIRAUDIT_CACHE_DIR"


class CostTable:
    """Memo of ``mask -> (cost, best query or None)`` for one (class, eps) pair."""

    def __init__(self, eps, class_hash=None):
        self.eps = float(eps)
        self.class_hash = class_hash
        self.entries = {}
        self.path = None

    def __len__(self):
        return len(self.entries)

    def lookup(self, V):
        return self.entries.get(V.members)

    @classmethod
    def open(cls, C, eps, cache_dir=None):
        """Load the persisted table for ``(C, eps)`` if one exists under the cache directory.

        ``cache_dir`` defaults to ``$FAIRAUDIT_CACHE_DIR``; with neither set the
        table is purely in-memory.
        """
        table = cls(eps, C.content_hash())
        cache_dir = cache_dir or os.environ.get(CACHE_ENV)
        if not cache_dir:
            return table
        table.path = Path(cache_dir) / f"cost_{table.class_hash[:24]}_{eps!r}.json"
        if table.path.exists():
            try:
                data = json.loads(table.path.read_text())
            except (OSError, json.JSONDecodeError):
                return table
            if data.get("class_hash") == table.class_hash and data.get("eps") == table.eps:
                for entry in data["entries"].values():
                    table.entries[int(entry["members"], 16)] = (entry["cost"], entry["best_query"])
        return table

    def save(self, path=None):
        path = Path(path or self.path)
        path.parent.mkdir(parents=True, exist_ok=True)
        entries = {
            VersionSpace(mask).key(): {"cost": c, "best_query": x, "members": format(mask, "x")}
            for mask, (c, x) in sorted(self.entries.items())
        }
        blob = {"class_hash": self.class_hash, "eps": self.eps, "entries": entries}
        path.write_text(json.dumps(blob, sort_keys=True))
        return path


def _solve(mask, eps, C, entries):
    hit = entries.get(mask)
    if hit is not None:
        return hit[0]
    if within_2eps(C.diam(mask), eps):
        entries[mask] = (0, None)
        return 0
    best, best_x = None, None
    for x in range(C.m):
        pos = mask & C.pos_masks[x]
        if not pos or pos == mask:
            continue
        a = _solve(pos, eps, C, entries)
        if best is not None and a >= best:
            continue
        v = max(a, _solve(mask ^ pos, eps, C, entries))
        if best is None or v < best:
            best, best_x = v, x
            if best == 0:
                break
    entries[mask] = (best + 1, best_x)
    return best + 1


def _table_for(C, eps, table):
    if table is None:
        return CostTable(eps)
    if table.eps != float(eps):
        raise InvalidInput(f"cost table was built for eps={table.eps}, not {eps}")
    return table


def cost(V, eps, C, table=None):
    """Minimax number of label queries needed to shrink ``V`` to mu-diameter <= 2 eps."""
    if eps <= 0:
        raise InvalidInput("eps must be positive")
    if not V.members:
        raise EmptyVersionSpace("cost of an empty version space")
    table = _table_for(C, eps, table)
    return _solve(V.members, eps, C, table.entries)


def best_query(V, eps, C, table=None):
    """Smallest-id example achieving the min-max in the cost recursion."""
    table = _table_for(C, eps, table)
    if cost(V, eps, C, table) == 0:
        raise NoQueryNeeded("version space already has mu-diameter <= 2 eps")
    return table.entries[V.members][1]


def minimax_audit(oracle, C, eps, budget=None, table=None):
    """Query the min-max example until the version space's mu-diameter is at most 2 eps."""
    table = _table_for(C, eps, table)
    total = cost(C.full(), eps, C, table)
    session = QuerySession(oracle, budget)
    mask = C.full_mask
    truncated = False
    while not within_2eps(C.diam(mask), eps):
        x = best_query(VersionSpace(mask), eps, C, table)
        try:
            y = session.ask(x)
        except BudgetExhausted:
            truncated = True
            break
        mask &= C.label_mask(x, y)
        if not mask:
            raise NonRealizableOracle(f"label {y} on example {x} is inconsistent with every hypothesis")
    return AuditResult(
        method="minimax",
        estimate=C.midpoint(mask),
        queries=session.queries,
        transcript=session.transcript(),
        truncated=truncated,
        version_space=VersionSpace(mask),
        details={"cost": total},
    )


def tree_depth_bruteforce(V, eps, C, depth_cap):
    """Minimum depth of an example-rooted decision tree whose leaves all have diameter <= 2 eps.

    Searched by iterative deepening over trees that may test any example,
    including ones that do not split ``V``.  Returns ``None`` when no tree of
    depth ``<= depth_cap`` exists.
    """
    memo = {}

    def separable(mask, k):
        if not mask or within_2eps(C.diam(mask), eps):
            return True
        if k == 0:
            return False
        key = (mask, k)
        if key not in memo:
            memo[key] = any(
                separable(mask & C.pos_masks[x], k - 1) and separable(mask & C.neg_masks[x], k - 1)
                for x in range(C.m)
            )
        return memo[key]

    for depth in range(depth_cap + 1):
        if separable(V.members, depth):
            return depth
    return None


def _specifies(C, eps):
    def ok(mask):
        return not mask or within_2eps(C.diam(mask), eps)

    return ok


def _find_of_size(agree, k, full, ok):
    """First size-``k`` subset (lexicographic) whose restricted version space satisfies ``ok``."""
    m = len(agree)
    chosen = []

    def rec(start, mask):
        if len(chosen) == k:
            return ok(mask)
        for x in range(start, m - (k - len(chosen)) + 1):
            chosen.append(x)
            if rec(x + 1, mask & agree[x]):
                return True
            chosen.pop()
        return False

    return list(chosen) if rec(0, full) else None


def min_specifying_set(h, C, eps, mode="exact", seed=None):
    """A set of example ids whose labels under ``h`` pin every consistent hypothesis's mu within 2 eps.

    ``exact`` enumerates subsets by increasing size and returns a minimum one;
    ``greedy`` runs greedy set cover over the pairs with mu-gap above 2 eps;
    ``online`` runs the randomized weight-doubling construction with ``seed``.
    ``h`` may be any ±1 vector, in or outside the class.
    """
    h = np.asarray(h, dtype=np.int8)
    if h.shape != (C.m,):
        raise InvalidInput(f"label vector must have length {C.m}")
    if mode == "exact":
        if C.m > 20:
            raise SizeLimit("exact specifying-set search is limited to 20 examples")
        agree = C.agree_masks(h)
        ok = _specifies(C, eps)
        for k in range(C.m + 1):
            found = _find_of_size(agree, k, C.full_mask, ok)
            if found is not None:
                return frozenset(found)
        raise AssertionError("the whole domain is always specifying")
    if mode == "greedy":
        return frozenset(_greedy_cover(h, C, eps))
    if mode == "online":
        from .oracle_auditor import SetCoverState, online_specifying_set

        state = SetCoverState.fresh(C, np.random.default_rng(seed))
        T, _ = online_specifying_set(h, C, eps, state)
        return frozenset(T)
    raise InvalidInput(f"unknown mode {mode!r}")


def _greedy_cover(h, C, eps):
    mus = C.mus
    hi, lo = np.nonzero(mus[:, None] - mus[None, :] > 2 * eps + MU_TOL)
    if len(hi) == 0:
        return []
    differ = C.labels != h[None, :]
    cover = differ[hi] | differ[lo]
    alive = np.ones(len(hi), dtype=bool)
    chosen = []
    while alive.any():
        counts = cover[alive].sum(axis=0)
        x = int(np.argmax(counts))
        chosen.append(x)
        alive &= ~cover[:, x]
    return chosen


def xtd(C, eps):
    """Largest minimum specifying-set size over all 2^m label vectors."""
    if C.m > 16:
        raise SizeLimit("xtd enumerates all labelings; limited to 16 examples")
    ok = _specifies(C, eps)
    if ok(C.full_mask):
        return 0
    best = 1
    for bits in itertools.product((1, -1), repeat=C.m):
        agree = C.agree_masks(bits)
        # monotone in S: a specifying set of size best means t(h) <= best
        if _find_of_size(agree, best, C.full_mask, ok) is not None:
            continue
        k = best + 1
        while _find_of_size(agree, k, C.full_mask, ok) is None:
            k += 1
        best = k
    return best

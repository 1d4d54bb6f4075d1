"""Finite domains, hypothesis classes, demographic parity and version spaces.

A hypothesis is a plain ``numpy`` vector of ±1 labels over the domain's
examples.  Version spaces are bitmasks over class indices, so restricting by a
labeled example is a single ``&`` against a precomputed per-example mask.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyVersionSpace, InvalidInput, ParseError

NORM_TOL = 1e-9
# slack on every ``diam <= 2 eps`` decision
MU_TOL = 1e-12


def within_2eps(diam, eps):
    return diam <= 2.0 * eps + MU_TOL


@dataclass(frozen=True)
class Example:
    id: int
    group: int
    p0: float
    p1: float

    def __post_init__(self):
        if self.group not in (0, 1):
            raise InvalidInput(f"example {self.id}: group must be 0 or 1")
        if self.p0 < 0 or self.p1 < 0:
            raise InvalidInput(f"example {self.id}: negative probability mass")
        if (self.group == 1 and self.p0 != 0) or (self.group == 0 and self.p1 != 0):
            raise InvalidInput(f"example {self.id}: mass assigned outside its own group")

    @property
    def p(self):
        """Conditional mass within the example's own group."""
        return self.p1 if self.group == 1 else self.p0


class Domain:
    """Finite example set together with the two group-conditional distributions."""

    def __init__(self, examples, pi1):
        examples = list(examples)
        if not examples:
            raise InvalidInput("domain must contain at least one example")
        for i, ex in enumerate(examples):
            if ex.id != i:
                raise InvalidInput(f"example ids must be 0..m-1 in order (got {ex.id} at position {i})")
        if not 0.0 < pi1 < 1.0:
            raise InvalidInput(f"pi1 must lie in (0, 1), got {pi1}")
        self.examples = tuple(examples)
        self.pi1 = float(pi1)
        self.group = _frozen(np.array([ex.group for ex in examples], dtype=np.int8))
        self.p0 = _frozen(np.array([ex.p0 for ex in examples], dtype=float))
        self.p1 = _frozen(np.array([ex.p1 for ex in examples], dtype=float))
        for g, arr in ((0, self.p0), (1, self.p1)):
            if abs(arr.sum() - 1.0) > NORM_TOL:
                raise InvalidInput(f"group {g} masses sum to {arr.sum():.12g}, expected 1")
        self.marginal = _frozen(self.pi1 * self.p1 + (1.0 - self.pi1) * self.p0)

    @classmethod
    def from_groups(cls, groups, p, pi1):
        """Build from per-example group bits and within-group masses."""
        examples = []
        for i, (g, q) in enumerate(zip(groups, p)):
            g = int(g)
            q = float(q)
            examples.append(Example(i, g, q if g == 0 else 0.0, q if g == 1 else 0.0))
        return cls(examples, pi1)

    @property
    def m(self):
        return len(self.examples)

    @property
    def p_min(self):
        """Smaller of the two group proportions."""
        return min(self.pi1, 1.0 - self.pi1)

    def to_dict(self):
        return {
            "pi1": self.pi1,
            "examples": [{"id": ex.id, "group": ex.group, "p": ex.p} for ex in self.examples],
        }

    def __eq__(self, other):
        return (
            isinstance(other, Domain)
            and self.pi1 == other.pi1
            and np.array_equal(self.group, other.group)
            and np.array_equal(self.p0, other.p0)
            and np.array_equal(self.p1, other.p1)
        )

    def __repr__(self):
        return f"Domain(m={self.m}, pi1={self.pi1:.4g})"


def _frozen(arr):
    arr.setflags(write=False)
    return arr


def _iter_bits(mask):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


@dataclass(frozen=True)
class VersionSpace:
    """Set of class indices, stored as a bitmask."""

    members: int

    @classmethod
    def from_indices(cls, indices):
        mask = 0
        for i in indices:
            mask |= 1 << int(i)
        return cls(mask)

    def indices(self):
        return list(_iter_bits(self.members))

    def __len__(self):
        return self.members.bit_count()

    def __contains__(self, i):
        return bool(self.members >> i & 1)

    def __iter__(self):
        return _iter_bits(self.members)

    def issubset(self, other):
        return self.members & ~other.members == 0

    def key(self):
        """Stable 128-bit hex key of the sorted member tuple."""
        data = np.asarray(self.indices(), dtype="<u4").tobytes()
        return hashlib.blake2b(data, digest_size=16).hexdigest()


class HypothesisClass:
    """A finite class of distinct ±1 labelings over ``domain``."""

    def __init__(self, hypotheses, domain):
        labels = np.array(hypotheses, dtype=np.int8)
        if labels.ndim != 2 or labels.shape[0] == 0:
            raise InvalidInput("hypothesis class must be a non-empty list of label vectors")
        if labels.shape[1] != domain.m:
            raise InvalidInput(f"hypotheses have length {labels.shape[1]}, domain has {domain.m} examples")
        if not np.all(np.abs(labels) == 1):
            raise InvalidInput("labels must be +1 or -1")
        if len(np.unique(labels, axis=0)) != len(labels):
            raise InvalidInput("hypotheses must be distinct")
        self.labels = _frozen(labels)
        self.domain = domain
        self.mus = _frozen((labels == 1).astype(float) @ (domain.p1 - domain.p0))
        self.pos_masks = []
        self.neg_masks = []
        for x in range(domain.m):
            col = labels[:, x]
            self.pos_masks.append(_mask_of(np.flatnonzero(col == 1)))
            self.neg_masks.append(_mask_of(np.flatnonzero(col == -1)))
        self.full_mask = (1 << len(labels)) - 1
        self._range_cache = {}

    def __len__(self):
        return len(self.labels)

    @property
    def m(self):
        return self.domain.m

    def full(self):
        return VersionSpace(self.full_mask)

    def label_mask(self, x, y):
        return self.pos_masks[x] if y == 1 else self.neg_masks[x]

    def agree_masks(self, h):
        """Per-example mask of hypotheses agreeing with the label vector ``h``."""
        return [self.pos_masks[x] if h[x] == 1 else self.neg_masks[x] for x in range(self.m)]

    def mu_range(self, mask):
        """``(min mu, max mu, argmin, argmax)`` over a nonempty mask; ties to smallest index."""
        hit = self._range_cache.get(mask)
        if hit is not None:
            return hit
        if not mask:
            raise EmptyVersionSpace("version space is empty")
        mus = self.mus
        lo = hi = None
        for i in _iter_bits(mask):
            v = mus[i]
            if lo is None or v < mus[lo]:
                lo = i
            if hi is None or v > mus[hi]:
                hi = i
        out = (float(mus[lo]), float(mus[hi]), lo, hi)
        self._range_cache[mask] = out
        return out

    def diam(self, mask):
        lo, hi, _, _ = self.mu_range(mask)
        return hi - lo

    def midpoint(self, mask):
        lo, hi, _, _ = self.mu_range(mask)
        return 0.5 * (lo + hi)

    def dis_mask_examples(self, mask):
        """Example ids on which members of ``mask`` disagree."""
        return [x for x in range(self.m) if self.pos_masks[x] & mask and self.neg_masks[x] & mask]

    def pairwise_disagreement(self):
        """``|H| x |H|`` matrix of marginal disagreement masses (cached)."""
        if getattr(self, "_pairwise", None) is None:
            L = self.labels.astype(float)
            agree = (L * self.domain.marginal[None, :]) @ L.T
            self._pairwise = _frozen(np.clip(0.5 * (1.0 - agree), 0.0, 1.0))
        return self._pairwise

    def index_of(self, h):
        hits = np.flatnonzero(np.all(self.labels == np.asarray(h, dtype=np.int8), axis=1))
        return int(hits[0]) if len(hits) else None

    def to_dict(self):
        out = self.domain.to_dict()
        out["hypotheses"] = self.labels.astype(int).tolist()
        return out

    def content_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def __repr__(self):
        return f"HypothesisClass(|H|={len(self)}, m={self.m})"


def _mask_of(indices):
    mask = 0
    for i in indices:
        mask |= 1 << int(i)
    return mask


@dataclass(frozen=True)
class Transcript:
    """Ordered labeled queries ``((x, y), ...)``."""

    entries: tuple = ()

    def __post_init__(self):
        seen = {}
        for x, y in self.entries:
            if y not in (1, -1):
                raise InvalidInput(f"label for example {x} must be ±1, got {y}")
            if seen.get(x, y) != y:
                raise InvalidInput(f"conflicting labels for example {x}")
            seen[x] = y

    def add(self, x, y):
        return Transcript(self.entries + ((int(x), int(y)),))

    def labels(self):
        return dict(self.entries)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def _check_len(h, m):
    h = np.asarray(h)
    if h.shape != (m,):
        raise InvalidInput(f"hypothesis length {h.shape} does not match domain size {m}")
    return h


def mu(h, D):
    """Demographic parity gap Pr(h=+1 | group 1) - Pr(h=+1 | group 0)."""
    h = _check_len(h, D.m)
    pos = h == 1
    return float(D.p1[pos].sum() - D.p0[pos].sum())


def diam_mu(V, C):
    """Return ``(max mu - min mu, (argmax, argmin))`` over the members of ``V``."""
    if not V.members:
        raise EmptyVersionSpace("diameter of an empty version space")
    lo, hi, i_lo, i_hi = C.mu_range(V.members)
    return hi - lo, (i_hi, i_lo)


def restrict(V, x, y, C):
    if not 0 <= x < C.m:
        raise InvalidInput(f"example id {x} out of range")
    return VersionSpace(V.members & C.label_mask(x, y))


def version_space(C, T):
    mask = C.full_mask
    for x, y in T:
        mask &= C.label_mask(x, y)
    return VersionSpace(mask)


def disagreement_region(V, C):
    if not V.members:
        raise EmptyVersionSpace("disagreement region of an empty version space")
    return frozenset(C.dis_mask_examples(V.members))


def disagreement_mass(h, h2, D):
    h = _check_len(h, D.m)
    h2 = _check_len(h2, D.m)
    return float(D.marginal[h != h2].sum())


# -- class files -------------------------------------------------------------


def class_from_dict(data, text=None):
    """Validate a decoded class file; ``text`` (raw JSON) enables line numbers in errors."""

    def fail(msg, key=None, index=None):
        loc = key if index is None else f"{key}[{index}]"
        if text is not None and key is not None:
            line = _locate_line(text, key, index)
            if line is not None:
                loc = f"line {line} ({loc})"
        raise ParseError(msg, loc)

    if not isinstance(data, dict):
        raise ParseError("top level must be a JSON object")
    for key in ("pi1", "examples", "hypotheses"):
        if key not in data:
            fail(f"missing field {key!r}")
    pi1 = data["pi1"]
    if not isinstance(pi1, (int, float)) or not 0 < pi1 < 1:
        fail("pi1 must be a number in (0, 1)", "pi1")
    raw = data["examples"]
    if not isinstance(raw, list) or not raw:
        fail("examples must be a non-empty list", "examples")
    by_id = {}
    for i, ex in enumerate(raw):
        if not isinstance(ex, dict) or not {"id", "group", "p"} <= ex.keys():
            fail("example needs id, group and p", "examples", i)
        if not isinstance(ex["id"], int) or ex["id"] in by_id:
            fail("example id must be a unique integer", "examples", i)
        if ex["group"] not in (0, 1):
            fail("group must be 0 or 1", "examples", i)
        if not isinstance(ex["p"], (int, float)) or ex["p"] < 0:
            fail("p must be a nonnegative number", "examples", i)
        by_id[ex["id"]] = ex
    m = len(raw)
    if sorted(by_id) != list(range(m)):
        fail("example ids must be exactly 0..m-1", "examples")
    groups = [by_id[i]["group"] for i in range(m)]
    p = [float(by_id[i]["p"]) for i in range(m)]
    for g in (0, 1):
        s = sum(q for q, gg in zip(p, groups) if gg == g)
        if abs(s - 1.0) > NORM_TOL:
            fail(f"group {g} masses sum to {s:.12g}, expected 1", "examples")
    hyps = data["hypotheses"]
    if not isinstance(hyps, list) or not hyps:
        fail("hypotheses must be a non-empty list", "hypotheses")
    seen = {}
    for i, h in enumerate(hyps):
        if not isinstance(h, list) or len(h) != m:
            fail(f"hypothesis must be a list of {m} labels", "hypotheses", i)
        if any(v not in (1, -1) or isinstance(v, bool) for v in h):
            fail("labels must be +1 or -1", "hypotheses", i)
        t = tuple(h)
        if t in seen:
            fail(f"duplicate of hypothesis {seen[t]}", "hypotheses", i)
        seen[t] = i
    domain = Domain.from_groups(groups, p, float(pi1))
    return HypothesisClass(hyps, domain)


def load_class(path):
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno} col {exc.colno}") from None
    return class_from_dict(data, text)


def dump_class(C, path):
    """Write a class file with one hypothesis per line."""
    d = C.to_dict()
    lines = ["{", f'  "pi1": {json.dumps(d["pi1"])},', '  "examples": [']
    lines += [f"    {json.dumps(ex)}," for ex in d["examples"]]
    lines[-1] = lines[-1].rstrip(",")
    lines += ["  ],", '  "hypotheses": [']
    lines += [f"    {json.dumps(h)}," for h in d["hypotheses"]]
    lines[-1] = lines[-1].rstrip(",")
    lines += ["  ]", "}"]
    Path(path).write_text("\n".join(lines) + "\n")


def _locate_line(text, key, index=None):
    pos = text.find(f'"{key}"')
    if pos < 0:
        return None
    if index is not None:
        pos = text.find("[", pos)
        if pos < 0:
            return None
        dec = json.JSONDecoder()
        pos += 1
        for _ in range(index + 1):
            while pos < len(text) and text[pos] in " \t\r\n,":
                pos += 1
            start = pos
            try:
                _, pos = dec.raw_decode(text, pos)
            except json.JSONDecodeError:
                return None
        pos = start
    return text.count("\n", 0, pos) + 1

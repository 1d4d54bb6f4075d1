"""Instance generators and CSV dataset ingestion."""

from __future__ import annotations

import csv
import itertools
import math

import numpy as np

from ..domain import Domain, HypothesisClass
from ..errors import DegenerateClass, InvalidInput, ParseError, SizeLimit

SHATTER_LIMIT = 16


def gen_shattered(n):
    """Example 0 is a group-0 point mass, examples 1..n are uniform over group 1.

    The class is every labeling with ``h(0) = -1``; hypothesis ``i`` labels
    example ``j`` positive iff bit ``j-1`` of ``i`` is set.  Returns the class
    and the index of the all-negative hypothesis (always 0).
    """
    if n < 1:
        raise InvalidInput("n must be at least 1")
    if n > SHATTER_LIMIT:
        raise SizeLimit(f"shattered class enumerates 2^n hypotheses; n <= {SHATTER_LIMIT}")
    groups = [0] + [1] * n
    p = [1.0] + [1.0 / n] * n
    D = Domain.from_groups(groups, p, 0.5)
    bits = (np.arange(2**n)[:, None] >> np.arange(n)[None, :]) & 1
    labels = np.hstack([-np.ones((2**n, 1), dtype=np.int8), np.where(bits == 1, 1, -1).astype(np.int8)])
    return HypothesisClass(labels, D), 0


def _dedup(labels):
    _, first = np.unique(labels, axis=0, return_index=True)
    out = labels[np.sort(first)]
    if len(out) < 2:
        raise DegenerateClass(f"only {len(out)} distinct labeling(s)")
    return out


def random_domain(m, rng):
    """Both groups nonempty, Dirichlet masses within each group, pi1 in [0.2, 0.8]."""
    if m < 2:
        raise InvalidInput("a domain needs at least one example per group")
    groups = rng.integers(0, 2, size=m)
    groups[rng.choice(m, size=2, replace=False)] = (0, 1)
    p = np.empty(m)
    for g in (0, 1):
        idx = np.flatnonzero(groups == g)
        p[idx] = rng.dirichlet(np.ones(len(idx)))
    return Domain.from_groups(groups, p, float(rng.uniform(0.2, 0.8)))


def gen_random_class(m, k, seed):
    """Random domain on ``m`` examples and ``k`` random labelings, deduplicated."""
    if k < 2:
        raise InvalidInput("k must be at least 2")
    rng = np.random.default_rng(seed)
    D = random_domain(m, rng)
    labels = np.where(rng.random((k, m)) < 0.5, 1, -1).astype(np.int8)
    return HypothesisClass(_dedup(labels), D)


def gen_local_class(m, radius, seed):
    """A random base labeling together with every labeling within ``radius`` flips of it.

    Models a company that may swap its model for any near neighbour; learning
    the target takes about ``m`` queries while pinning mu needs only the
    heavy examples.  The base labeling is hypothesis 0.
    """
    if radius < 1:
        raise InvalidInput("radius must be at least 1")
    rng = np.random.default_rng(seed)
    D = random_domain(m, rng)
    base = np.where(rng.random(m) < 0.5, 1, -1).astype(np.int8)
    rows = [base]
    for r in range(1, radius + 1):
        for S in itertools.combinations(range(m), r):
            h = base.copy()
            h[list(S)] *= -1
            rows.append(h)
    return HypothesisClass(np.array(rows), D)


def gen_threshold_class(dataset, k, seed):
    """``k`` random hyperplanes through random data rows, thresholded on the features.

    ``dataset`` is the ``(Domain, feature matrix)`` pair from :func:`ingest_csv`
    or :func:`synthetic_dataset`.
    """
    if k < 2:
        raise InvalidInput("k must be at least 2")
    D, X = dataset
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) != D.m:
        raise InvalidInput("feature matrix must have one row per example")
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((k, X.shape[1]))
    anchors = X[rng.integers(0, len(X), size=k)]
    b = -np.einsum("kd,kd->k", W, anchors) + 0.1 * rng.standard_normal(k)
    labels = np.where(X @ W.T + b[None, :] >= 0, 1, -1).T.astype(np.int8)
    return HypothesisClass(_dedup(labels), D)


def synthetic_dataset(n, d, seed, pi1=0.4, shift=0.75):
    """Gaussian features with group 1 shifted along the first axis; uniform masses within groups."""
    rng = np.random.default_rng(seed)
    groups = (rng.random(n) < pi1).astype(int)
    groups[:2] = (0, 1)
    X = rng.standard_normal((n, d))
    X[:, 0] += shift * groups
    return _uniform_domain(groups), X


def _uniform_domain(groups):
    groups = np.asarray(groups)
    counts = np.bincount(groups, minlength=2)
    if counts.min() == 0:
        raise InvalidInput("data contains a single group; both groups need at least one row")
    p = 1.0 / counts[groups]
    return Domain.from_groups(groups, p, counts[1] / len(groups))


def ingest_csv(path, group_column, feature_columns):
    """Read a CSV into ``(Domain, features)``; masses are uniform over each group's rows.

    Row numbers in errors count the header as row 1.
    """
    groups, rows = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in [group_column, *feature_columns]:
            if col not in header:
                raise ParseError(f"missing column {col!r}", location=f"{path}:1")
        for rowno, rec in enumerate(reader, start=2):
            where = f"{path}:row {rowno}"
            try:
                g = rec[group_column]
                if g is None or g.strip() not in ("0", "1"):
                    raise ParseError(f"group value {g!r} is not 0 or 1", location=where)
                vals = []
                for col in feature_columns:
                    raw = rec[col]
                    if raw is None or raw.strip() == "":
                        raise ParseError(f"missing value in column {col!r}", location=where)
                    v = float(raw)
                    if not math.isfinite(v):
                        raise ParseError(f"non-finite value in column {col!r}", location=where)
                    vals.append(v)
            except ValueError as exc:
                if isinstance(exc, ParseError):
                    raise
                raise ParseError(str(exc), location=where) from None
            groups.append(int(g))
            rows.append(vals)
    if not rows:
        raise InvalidInput(f"{path}: no data rows")
    return _uniform_domain(groups), np.array(rows, dtype=float).reshape(len(rows), len(feature_columns))


def build_class(spec, seed=0):
    """Class from a generator spec dict; returns ``(C, designated target or None)``.

    Kinds: ``shattered`` (n), ``random`` (m, k), ``local`` (m, radius),
    ``threshold`` (n, d, k, pi1, shift) and ``csv`` (path, group_column, feature_columns, k).  A ``seed`` key in
    the dict overrides the argument.
    """
    spec = dict(spec)
    kind = spec.pop("kind", None)
    seed = spec.pop("seed", seed)
    if kind == "shattered":
        return gen_shattered(int(spec["n"]))
    if kind == "random":
        return gen_random_class(int(spec["m"]), int(spec["k"]), seed), None
    if kind == "local":
        return gen_local_class(int(spec["m"]), int(spec.get("radius", 2)), seed), None
    if kind == "threshold":
        ss = np.random.SeedSequence(seed).spawn(2)
        data = synthetic_dataset(
            int(spec["n"]), int(spec.get("d", 2)), ss[0], spec.get("pi1", 0.4), spec.get("shift", 0.75)
        )
        return gen_threshold_class(data, int(spec["k"]), ss[1]), None
    if kind == "csv":
        data = ingest_csv(spec["path"], spec["group_column"], spec["feature_columns"])
        return gen_threshold_class(data, int(spec["k"]), seed), None
    raise InvalidInput(f"unknown generator kind {kind!r}")


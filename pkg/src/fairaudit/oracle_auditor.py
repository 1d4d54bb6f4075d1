"""Oracle-efficient randomized auditor.

Each outer round asks a halving learner for a (possibly improper) guess
``hhat``, grows an approximate minimum specifying set ``T`` for it by online
set cover with exponentially distributed thresholds, and queries the target on
``T``.  Agreement on all of ``T`` certifies the estimate; any disagreement is a
counterexample that at least halves the learner's version space.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .domain import VersionSpace, within_2eps
from .errors import Infeasible, InvalidInput, NonRealizableOracle
from .session import AuditResult, BudgetExhausted, QuerySession


@dataclass
class OnlineLearnerState:
    version_space: VersionSpace
    mistakes: int = 0

    @classmethod
    def start(cls, C):
        return cls(C.full())

    def observe(self, C, labeled, mistake=False):
        mask = self.version_space.members
        for x, y in labeled:
            mask &= C.label_mask(x, y)
        return OnlineLearnerState(VersionSpace(mask), self.mistakes + int(mistake))


def halving_predict(state, C):
    """Majority vote of the consistent hypotheses, ties to +1."""
    members = state.version_space.indices()
    if not members:
        raise NonRealizableOracle("no hypothesis is consistent with the labels seen so far")
    votes = C.labels[members].sum(axis=0, dtype=np.int64)
    return np.where(votes >= 0, 1, -1).astype(np.int8)


def c_erm(A, B, C):
    """Index minimizing weighted error on ``A`` among hypotheses with zero error on ``B``.

    ``A`` holds ``(x, y, weight)`` triples, ``B`` holds ``(x, y)`` pairs.
    Ties go to the smallest index.
    """
    feasible = np.ones(len(C), dtype=bool)
    for x, y in B:
        feasible &= C.labels[:, x] == y
    if not feasible.any():
        raise Infeasible("no hypothesis has zero error on the constraint set")
    err = np.zeros(len(C))
    if A:
        xs = np.array([a[0] for a in A])
        ys = np.array([a[1] for a in A])
        ws = np.array([a[2] for a in A], dtype=float)
        err = ((C.labels[:, xs] != ys[None, :]) * ws[None, :]).sum(axis=1)
    return int(np.argmin(np.where(feasible, err, np.inf)))


def mu_erm_dataset(D, direction):
    """Weighted labeled set whose error is ``1 - mu`` (max) or ``1 + mu`` (min).

    Labelling group-1 examples +1 and group-0 examples -1 with their
    conditional masses as weights makes error minimization equivalent to
    maximizing mu; flipping both labels gives the minimizing program.
    """
    sign = {"max": 1, "min": -1}[direction]
    A = []
    for ex in D.examples:
        if ex.group == 1 and ex.p1 > 0:
            A.append((ex.id, sign, ex.p1))
        elif ex.group == 0 and ex.p0 > 0:
            A.append((ex.id, -sign, ex.p0))
    return A


def _consistent(C, T, hhat):
    cons = np.ones(len(C), dtype=bool)
    for x in T:
        cons &= C.labels[:, x] == hhat[x]
    return cons


def _extremes(C, cons):
    if not cons.any():
        return None
    hi = int(np.argmax(np.where(cons, C.mus, -np.inf)))
    lo = int(np.argmin(np.where(cons, C.mus, np.inf)))
    return hi, lo


def extremal_constrained(C, T, hhat, direction):
    """Index of the max- or min-mu hypothesis agreeing with ``hhat`` on ``T``; ``None`` if none does."""
    ext = _extremes(C, _consistent(C, T, np.asarray(hhat)))
    if ext is None:
        return None
    return ext[0] if direction == "max" else ext[1]


@dataclass
class SetCoverState:
    """Weights, exponential thresholds and the selected set for one outer round."""

    weights: np.ndarray
    thresholds: np.ndarray
    selected: list = field(default_factory=list)
    doublings: int = 0
    stall_adds: int = 0
    solves: int = 0
    max_weight: float = 0.0
    max_total_weight: float = 0.0
    min_weight: float = 0.0

    @classmethod
    def fresh(cls, C, rng, delta=0.1, M=None):
        """Uniform weights ``1/m``; thresholds with rate ``ln(|H|^2 M / delta)`` drawn in id order."""
        if not 0 < delta < 1:
            raise InvalidInput("delta must lie in (0, 1)")
        m = C.m
        if M is None:
            M = mistake_bound(len(C))
        rate = math.log(len(C) ** 2 * M / delta)
        u = 1.0 - rng.random(m)
        w = np.full(m, 1.0 / m)
        return cls(
            weights=w,
            thresholds=-np.log(u) / rate,
            max_weight=w.max(),
            max_total_weight=w.sum(),
            min_weight=w.min(),
        )


def mistake_bound(n_hypotheses):
    return max(1, math.ceil(math.log2(n_hypotheses)))


def online_specifying_set(hhat, C, eps, state):
    """Grow ``state.selected`` into a specifying set for ``hhat``.

    Returns ``(T, pair)`` where ``T`` is the ordered selection and ``pair`` the
    final ``(argmax, argmin)`` hypotheses agreeing with ``hhat`` on ``T``, or
    ``None`` when no hypothesis agrees with ``hhat`` on ``T``.
    """
    hhat = np.asarray(hhat)
    w, tau = state.weights, state.thresholds
    in_T = np.zeros(C.m, dtype=bool)
    in_T[state.selected] = True
    cons = _consistent(C, state.selected, hhat)
    last = None
    while True:
        state.solves += 1
        pair = _extremes(C, cons)
        if pair is None:
            return list(state.selected), None
        h1, h2 = pair
        if within_2eps(C.mus[h1] - C.mus[h2], eps):
            return list(state.selected), pair
        delta_set = (C.labels[h1] != hhat) | (C.labels[h2] != hhat)
        added = []
        if last == (h1, h2, len(state.selected)):
            # same uncovered pair and no growth: the doubling loop cannot fire again
            cand = np.flatnonzero(delta_set & ~in_T)
            x = int(cand[np.argmax(w[cand])])
            added.append(x)
            state.stall_adds += 1
        last = (h1, h2, len(state.selected))
        while w[delta_set].sum() <= 1.0:
            w[delta_set] *= 2.0
            state.doublings += 1
            state.max_weight = max(state.max_weight, float(w.max()))
            state.max_total_weight = max(state.max_total_weight, float(w.sum()))
            added.extend(int(x) for x in np.flatnonzero((w >= tau) & ~in_T) if x not in added)
        for x in added:
            in_T[x] = True
            state.selected.append(x)
            cons &= C.labels[:, x] == hhat[x]


def _hash_labels(h):
    return hashlib.blake2b(np.asarray(h, dtype=np.int8).tobytes(), digest_size=8).hexdigest()


def oracle_audit(oracle, C, eps, delta=0.1, seed=None, budget=None, trace=None, eager=False):
    """Oracle-efficient randomized audit; ``trace`` (a text stream) receives one JSON line per round.

    With ``eager`` each round seeds ``T`` with the examples
    already labeled, which cost nothing and on which ``hhat`` is necessarily
    right, and stops querying ``T`` at the first counterexample.  Neither
    change affects the mistake bound: every counterexample is still a mistake
    of the majority vote.
    """
    if eps <= 0:
        raise InvalidInput("eps must be positive")
    rng = np.random.default_rng(seed)
    M = mistake_bound(len(C))
    session = QuerySession(oracle, budget)
    learner = OnlineLearnerState.start(C)
    rounds = []
    estimate = None
    truncated = False
    while True:
        hhat = halving_predict(learner, C)
        state = SetCoverState.fresh(C, rng, delta, M)
        if eager:
            state.selected = list(session.order)
        T, pair = online_specifying_set(hhat, C, eps, state)
        gap = None if pair is None else float(C.mus[pair[0]] - C.mus[pair[1]])
        mistake = False
        try:
            for x in T:
                if session.ask(x) != hhat[x]:
                    mistake = True
                    if eager:
                        break
        except BudgetExhausted:
            truncated = True
        answered = [(x, session.answers[x]) for x in T if x in session.answers]
        learner = learner.observe(C, answered, mistake)
        rec = {
            "round": len(rounds) + 1,
            "hhat_hash": _hash_labels(hhat),
            "T_size": len(T),
            "doublings": state.doublings,
            "mistake": mistake,
            "gap": gap,
        }
        if trace is not None:
            trace.write(json.dumps(rec) + "\n")
        rec.update(
            hhat=hhat,
            T=T,
            stall_adds=state.stall_adds,
            max_weight=state.max_weight,
            max_total_weight=state.max_total_weight,
            min_weight=state.min_weight,
        )
        rounds.append(rec)
        if not learner.version_space.members:
            raise NonRealizableOracle("oracle answers are inconsistent with every hypothesis")
        if truncated:
            break
        if not mistake:
            if pair is None:
                raise NonRealizableOracle("oracle agrees with a labeling no hypothesis realizes")
            estimate = 0.5 * float(C.mus[pair[0]] + C.mus[pair[1]])
            break
    vs = learner.version_space
    if estimate is None:
        estimate = C.midpoint(vs.members)
    return AuditResult(
        method="oracle",
        estimate=estimate,
        queries=session.queries,
        transcript=session.transcript(),
        truncated=truncated,
        version_space=vs,
        details={
            "rounds": rounds,
            "mistakes": learner.mistakes,
            "T_sizes": [r["T_size"] for r in rounds],
            "mistake_bound": M,
        },
    )

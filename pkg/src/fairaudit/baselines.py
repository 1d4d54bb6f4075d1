"""Passive i.i.d. sampling and Phased CAL auditors."""

from __future__ import annotations

import math

import numpy as np

from .domain import VersionSpace
from .errors import FeasibilityTimeout, InvalidInput, NonRealizableOracle
from .session import AuditResult, BudgetExhausted, QuerySession


IID_CHUNK = 4096


def iid_sample_size(eps, delta):
    """Per-group sample size from two-sided Hoeffding at (eps/2, delta/2)."""
    return math.ceil(2.0 * math.log(4.0 / delta) / eps**2)


def iid_audit(oracle, D, eps, delta, seed=None, budget=None, C=None):
    """Difference of positive rates over i.i.d. draws from each group's conditional.

    Draws are queried interleaved (group 1, group 0, ...) so a budget cuts both
    groups evenly; repeated draws reuse the cached answer.  When truncated, the
    estimate is the midpoint of the version space if ``C`` is given, otherwise
    the empirical gap over the draws answered so far.
    """
    if not (0 < eps < 1 and 0 < delta < 1):
        raise InvalidInput("eps and delta must lie in (0, 1)")
    n = iid_sample_size(eps, delta)
    rng = np.random.default_rng(seed)
    g1 = np.flatnonzero(D.group == 1)
    g0 = np.flatnonzero(D.group == 0)
    w1 = D.p1[g1] / D.p1[g1].sum()
    w0 = D.p0[g0] / D.p0[g0].sum()
    session = QuerySession(oracle, budget)
    answered = pos1 = pos0 = 0
    truncated = False
    try:
        # drawn in chunks so a small budget does not pay for all n draws
        while answered < n:
            size = min(IID_CHUNK, n - answered)
            s1 = rng.choice(g1, size=size, p=w1)
            s0 = rng.choice(g0, size=size, p=w0)
            for a, b in zip(s1, s0):
                ya = session.ask(a)
                yb = session.ask(b)
                answered += 1
                pos1 += ya == 1
                pos0 += yb == 1
    except BudgetExhausted:
        truncated = True
    ans = session.answers
    estimate = (pos1 - pos0) / answered if answered else 0.0
    vs = None
    if C is not None:
        mask = C.full_mask
        for x, y in ans.items():
            mask &= C.label_mask(x, y)
        if not mask:
            raise NonRealizableOracle("oracle answers are inconsistent with every hypothesis")
        vs = VersionSpace(mask)
        if truncated:
            estimate = C.midpoint(mask)
    return AuditResult(
        method="iid",
        estimate=float(estimate),
        queries=session.queries,
        transcript=session.transcript(),
        truncated=truncated,
        version_space=vs,
        details={"per_group": n, "draws_answered": answered},
    )


def feasibility_check(S_n, V_n, C, m_n):
    """Whether a sample satisfies both selection conditions of a Phased CAL round.

    1. The sample's fraction inside DIS(V_n) is at most twice the true mass
       of DIS(V_n) plus ln 8 / m_n.
    2. Any two hypotheses of the class that agree on every sampled example
       disagree on at most 16 ln|H| / m_n of the marginal mass.
    """
    S_n = np.asarray(S_n)
    if len(S_n) != m_n:
        raise InvalidInput(f"sample has {len(S_n)} points, expected {m_n}")
    D = C.domain
    in_dis = np.zeros(C.m, dtype=bool)
    in_dis[C.dis_mask_examples(V_n.members)] = True
    if in_dis[S_n].mean() > 2.0 * D.marginal[in_dis].sum() + math.log(8) / m_n + 1e-12:
        return False
    bound = 16.0 * math.log(len(C)) / m_n
    if bound >= 1.0:
        return True
    ids = np.unique(S_n)
    _, inv = np.unique(C.labels[:, ids], axis=0, return_inverse=True)
    inv = inv.ravel()
    order = np.argsort(inv, kind="stable")
    cuts = np.flatnonzero(np.diff(inv[order])) + 1
    marg = D.marginal
    for block in np.split(order, cuts):
        if len(block) < 2:
            continue
        L = C.labels[block].astype(float)
        dis = 0.5 * (1.0 - (L * marg[None, :]) @ L.T)
        if dis.max() > bound + 1e-12:
            return False
    return True


def cal_rounds(C, eps):
    if len(C) < 2:
        return 0
    return math.ceil(math.log2(16.0 * math.log(len(C)) / (C.domain.p_min * eps)))


def phased_cal_audit(oracle, C, eps, seed=None, mode="checked", budget=None, max_attempts=1000):
    """Phased CAL: round n draws 2^n points from the marginal and queries those in DIS(V_n).

    ``checked`` mode resamples until :func:`feasibility_check` passes,
    standing in for the lexicographically smallest feasible sample.
    """
    if mode not in ("checked", "sampled"):
        raise InvalidInput(f"unknown mode {mode!r}")
    if eps <= 0:
        raise InvalidInput("eps must be positive")
    D = C.domain
    rng = np.random.default_rng(seed)
    session = QuerySession(oracle, budget)
    N = cal_rounds(C, eps)
    mask = C.full_mask
    rounds = []
    truncated = False
    for n in range(1, N + 1):
        m_n = 2**n
        attempts = 0
        while True:
            attempts += 1
            S = rng.choice(C.m, size=m_n, p=D.marginal)
            if mode == "sampled" or feasibility_check(S, VersionSpace(mask), C, m_n):
                break
            if attempts >= max_attempts:
                raise FeasibilityTimeout(f"round {n}: no feasible sample in {max_attempts} attempts")
        dis = np.zeros(C.m, dtype=bool)
        dis[C.dis_mask_examples(mask)] = True
        _, first = np.unique(S, return_index=True)
        T = [int(S[i]) for i in sorted(first) if dis[S[i]]]
        rounds.append({"round": n, "m_n": m_n, "T_size": len(T), "attempts": attempts})
        try:
            for x in T:
                mask &= C.label_mask(x, session.ask(x))
        except BudgetExhausted:
            truncated = True
        if not mask:
            raise NonRealizableOracle("oracle answers are inconsistent with every hypothesis")
        if truncated:
            break
    if truncated:
        estimate = C.midpoint(mask)
    else:
        estimate = float(C.mus[VersionSpace(mask).indices()[0]])
    return AuditResult(
        method="cal",
        estimate=estimate,
        queries=session.queries,
        transcript=session.transcript(),
        truncated=truncated,
        version_space=VersionSpace(mask),
        details={"rounds": rounds, "n_rounds": N},
    )

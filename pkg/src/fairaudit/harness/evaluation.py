"""Exact version-space evaluators and the disagreement coefficient."""

from __future__ import annotations

import numpy as np

from ..domain import version_space
from ..errors import EmptyVersionSpace, InvalidInput


def _members(C, T):
    V = version_space(C, T)
    if not V.members:
        raise EmptyVersionSpace("transcript is inconsistent with every hypothesis")
    return V


def mp_diameter(C, T):
    """mu-diameter of the hypotheses consistent with transcript ``T``."""
    return C.diam(_members(C, T).members)


def avg_error(C, T, true_mu):
    """Mean ``|mu(h) - true_mu|`` over the consistent hypotheses, uniformly weighted."""
    idx = _members(C, T).indices()
    return float(np.mean(np.abs(C.mus[idx] - true_mu)))


def disagreement_coefficient(C, r):
    """``sup_{h, r' >= r} Pr(DIS(B(h, r'))) / r'``, exact over the finite class.

    For a fixed center the numerator is a step function of ``r'``, so the
    supremum is attained at ``r`` itself or at an achieved radius above it.
    """
    if r <= 0:
        raise InvalidInput("radius must be positive")
    dist = C.pairwise_disagreement()
    marg = C.domain.marginal
    labels = C.labels
    tol = 1e-12
    best = 0.0
    for h in range(len(C)):
        radii = dist[h]
        order = np.argsort(radii, kind="stable")
        pos = np.zeros(C.m, dtype=bool)
        neg = np.zeros(C.m, dtype=bool)
        j = 0

        def absorb(limit):
            nonlocal j
            while j < len(order) and radii[order[j]] <= limit + tol:
                row = labels[order[j]]
                pos[row == 1] = True
                neg[row == -1] = True
                j += 1

        absorb(r)
        best = max(best, float(marg[pos & neg].sum()) / r)
        for rp in np.unique(radii[radii > r + tol]):
            absorb(rp)
            best = max(best, float(marg[pos & neg].sum()) / rp)
    return best

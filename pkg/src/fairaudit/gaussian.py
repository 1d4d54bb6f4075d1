"""Auditing non-homogeneous linear classifiers under Gaussian subpopulations.

For ``h(x) = sign(<a, x> + b)`` and ``x ~ N(0, I)`` the positive rate is
``Phi(b / ||a||) = Phi(s r)`` with ``s = sign(b)`` and
``r = (sum_i m_i^-2)^-1/2`` where ``m_i = -b / a_i`` is where ``h`` changes
sign along coordinate axis ``i``.  Each ``m_i`` that matters is found by
bisection along the axis, so the positive rate costs O(d log(d/eps)) queries.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, NoCrossing, NotPSD

log = logging.getLogger(__name__)

BETA_CAP = 1e12
ZERO_CROSSING = 1e-12


def normal_cdf(z):
    """Standard normal CDF via the complementary error function."""
    z = float(z)
    if math.isnan(z):
        raise InvalidInput("normal_cdf of NaN")
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def cholesky(S):
    """Lower-triangular ``L`` with ``L @ L.T == S``; PSD input gets at most 1e-10 diagonal jitter."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InvalidInput("covariance must be a square matrix")
    if not np.allclose(S, S.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(S).max())):
        raise NotPSD("covariance matrix is not symmetric")
    for jitter in (0.0, 1e-12, 1e-10):
        try:
            return np.linalg.cholesky(S + jitter * np.eye(len(S)))
        except np.linalg.LinAlgError:
            continue
    raise NotPSD("covariance matrix is not positive semidefinite")


def sign(v):
    return 1 if v >= 0 else -1


@dataclass(frozen=True)
class LinearModel:
    a: np.ndarray
    b: float

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        if a.ndim != 1 or not np.any(a != 0):
            raise InvalidInput("a must be a nonzero vector")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))

    @property
    def d(self):
        return len(self.a)

    def query(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise InvalidInput(f"query must be a vector of length {self.d}")
        return sign(float(self.a @ x) + self.b)

    def gamma(self):
        """Positive rate under the standard Gaussian."""
        return normal_cdf(self.b / np.linalg.norm(self.a))


@dataclass
class GaussianPopulations:
    m0: np.ndarray
    m1: np.ndarray
    S0: np.ndarray
    S1: np.ndarray
    L0: np.ndarray = field(init=False, repr=False)
    L1: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.m0 = np.atleast_1d(np.asarray(self.m0, dtype=float))
        self.m1 = np.atleast_1d(np.asarray(self.m1, dtype=float))
        d = len(self.m0)
        if self.m1.shape != (d,):
            raise InvalidInput("group means must have the same dimension")
        self.S0 = np.atleast_2d(np.asarray(self.S0, dtype=float))
        self.S1 = np.atleast_2d(np.asarray(self.S1, dtype=float))
        if self.S0.shape != (d, d) or self.S1.shape != (d, d):
            raise InvalidInput(f"covariances must be {d}x{d}")
        self.L0 = cholesky(self.S0)
        self.L1 = cholesky(self.S1)

    @property
    def d(self):
        return len(self.m0)

    def group(self, b):
        return (self.m0, self.L0) if b == 0 else (self.m1, self.L1)

    @classmethod
    def from_dict(cls, data):
        return cls(data["m0"], data["m1"], data["S0"], data["S1"])


class _AffineOracle:
    """Queries ``inner`` at ``mean + L @ z``; the composition stays a linear classifier."""

    def __init__(self, inner, mean, L):
        self.inner, self.mean, self.L = inner, mean, L

    def query(self, z):
        return self.inner.query(self.mean + self.L @ np.asarray(z, dtype=float))


class _Tally:
    def __init__(self, oracle):
        self.oracle = oracle
        self.calls = 0

    def query(self, v):
        self.calls += 1
        return self.oracle.query(v)


def _axis(d, i, t):
    v = np.zeros(d)
    v[i] = t
    return v


def binary_search(oracle, i, beta, eps, d=1, endpoint_labels=None):
    """Locate the sign change of ``t -> oracle(t e_i)`` in ``[-beta, beta]`` to within ``eps``.

    ``endpoint_labels`` are the known labels at ``-beta e_i`` and ``+beta e_i``;
    when omitted they are queried first.  The loop itself issues exactly
    ``ceil(log2(2 beta / eps))`` queries.
    """
    if endpoint_labels is None:
        endpoint_labels = (oracle.query(_axis(d, i, -beta)), oracle.query(_axis(d, i, beta)))
    lo_label, hi_label = endpoint_labels
    if lo_label == hi_label:
        raise NoCrossing(f"no sign change along axis {i} within +-{beta}")
    u, l = beta, -beta
    m = 0.0
    # strict '>' keeps the count at ceil(log2(2 beta/eps)) even when 2 beta/eps is a power of two
    while u - l > eps:
        m = 0.5 * (u + l)
        if oracle.query(_axis(d, i, m)) == lo_label:
            l = m
        else:
            u = m
    return m


def radius_from_crossings(ms):
    """``(sum m_i^-2)^-1/2``; any crossing at zero gives radius 0."""
    ms = np.asarray(ms, dtype=float)
    if len(ms) == 0:
        return math.inf
    if np.any(np.abs(ms) < ZERO_CROSSING):
        return 0.0
    return float(1.0 / math.sqrt(np.sum(ms**-2.0)))


def search_radii(d, eps):
    """``(alpha, beta)``: the early-exit test radius and the bisection range."""
    ln = math.log(1.0 / eps)
    alpha = math.sqrt(2.0 * d * ln)
    beta = 2.0 * d**2.5 * ln**0.75 * eps**-0.5
    if beta > BETA_CAP:
        log.warning("bisection range %.3g capped at %.0g", beta, BETA_CAP)
        beta = BETA_CAP
    return alpha, beta


def query_bound(d, eps):
    _, beta = search_radii(d, eps)
    return 1 + 4 * d + d * math.ceil(math.log2(2.0 * beta / eps))


@dataclass
class GammaEstimate:
    gamma_hat: float
    queries_used: int
    branch: str
    S: list
    m_hat: dict
    sign_tests: list = field(default_factory=list)


def estimate_positive(oracle, d, eps):
    """Estimate ``Pr_{x ~ N(0, I_d)}(h(x) = +1)`` to within ``eps`` for a linear ``h`` behind ``oracle``.

    ``sign_tests`` records every ``(i, xi, same_label)`` axis test performed.
    """
    if not 0 < eps < 0.5:
        raise InvalidInput("eps must lie in (0, 1/2)")
    alpha, beta = search_radii(d, eps)
    q = _Tally(oracle)
    tests = []
    s = q.query(np.zeros(d))
    same_alpha = []
    for i in range(d):
        plus, minus = q.query(_axis(d, i, alpha)), q.query(_axis(d, i, -alpha))
        tests.append((i, alpha, plus == minus))
        same_alpha.append(plus == minus)
    if all(same_alpha):
        return GammaEstimate(1.0 if s == 1 else 0.0, q.calls, "early-return", [], {}, tests)
    S, m_hat = [], {}
    for i in range(d):
        plus, minus = q.query(_axis(d, i, beta)), q.query(_axis(d, i, -beta))
        tests.append((i, beta, plus == minus))
        if plus != minus:
            S.append(i)
            m_hat[i] = binary_search(q, i, beta, eps, d, endpoint_labels=(minus, plus))
    r_hat = radius_from_crossings([m_hat[i] for i in S])
    return GammaEstimate(normal_cdf(s * r_hat), q.calls, "full", S, m_hat, tests)


def gaussian_audit(oracle, pops, eps, paper_sign=False):
    """Demographic parity of a linear classifier under known Gaussian groups.

    Returns ``gamma_1 - gamma_0``, each positive rate estimated to ``eps/2``
    through the whitened oracle ``z -> oracle(m_b + L_b z)``.  ``paper_sign``
    returns ``gamma_0 - gamma_1`` instead.
    """
    gammas = []
    for b in (0, 1):
        mean, L = pops.group(b)
        gammas.append(estimate_positive(_AffineOracle(oracle, mean, L), pops.d, eps / 2).gamma_hat)
    return gammas[0] - gammas[1] if paper_sign else gammas[1] - gammas[0]


def analytic_gamma(model, mean, L):
    """Exact positive rate of ``model`` on ``N(mean, L L^T)``."""
    v = np.asarray(L).T @ model.a
    c = float(model.a @ np.asarray(mean)) + model.b
    nrm = float(np.linalg.norm(v))
    if nrm == 0.0:
        return 1.0 if c >= 0 else 0.0
    return normal_cdf(c / nrm)


def analytic_mu(model, pops):
    return analytic_gamma(model, pops.m1, pops.L1) - analytic_gamma(model, pops.m0, pops.L0)

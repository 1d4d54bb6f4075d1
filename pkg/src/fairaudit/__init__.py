"""Query-efficient, manipulation-proof auditing of demographic parity."""

from .baselines import iid_audit, phased_cal_audit
from .domain import (
    Domain,
    Example,
    HypothesisClass,
    Transcript,
    VersionSpace,
    diam_mu,
    disagreement_mass,
    disagreement_region,
    load_class,
    mu,
    restrict,
    version_space,
)
from .errors import *  # noqa: F401,F403
from .gaussian import GaussianPopulations, LinearModel, estimate_positive, gaussian_audit, normal_cdf
from .minimax import best_query, cost, min_specifying_set, minimax_audit, tree_depth_bruteforce, xtd
from .oracle_auditor import oracle_audit
from .session import AuditResult

__version__ = "0.1.0"

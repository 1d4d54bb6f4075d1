"""Audit results and the per-run query session shared by the finite-class auditors."""

from __future__ import annotations

from dataclasses import dataclass, field

from .domain import Transcript, VersionSpace
from .errors import InvalidInput


class BudgetExhausted(Exception):
    """Internal signal: the next distinct query would exceed the label budget."""


@dataclass
class AuditResult:
    method: str
    estimate: float
    queries: int
    transcript: Transcript
    truncated: bool = False
    version_space: VersionSpace | None = None
    details: dict = field(default_factory=dict)


class QuerySession:
    """Caches oracle answers so each distinct example costs one query, and enforces a budget."""

    def __init__(self, oracle, budget=None):
        if budget is not None and budget < 0:
            raise InvalidInput("budget must be nonnegative")
        self.oracle = oracle
        self.budget = budget
        self.answers = {}
        self.order = []

    @property
    def queries(self):
        return len(self.order)

    def exhausted(self):
        return self.budget is not None and self.queries >= self.budget

    def ask(self, x):
        x = int(x)
        y = self.answers.get(x)
        if y is not None:
            return y
        if self.exhausted():
            raise BudgetExhausted
        y = int(self.oracle.query(x))
        if y not in (1, -1):
            raise InvalidInput(f"oracle returned {y!r} for example {x}; expected ±1")
        self.answers[x] = y
        self.order.append(x)
        return y

    def transcript(self):
        return Transcript(tuple((x, self.answers[x]) for x in self.order))

"""Black-box label oracles with query accounting."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInput
from ..gaussian import LinearModel


class CountingOracle:
    """Wraps a finite label vector or a :class:`LinearModel`; each distinct query is counted once."""

    def __init__(self, model):
        if isinstance(model, LinearModel):
            self.kind = "linear"
            self.model = model
        else:
            labels = np.asarray(model, dtype=np.int8)
            if labels.ndim != 1 or not np.all(np.abs(labels) == 1):
                raise InvalidInput("finite model must be a vector of ±1 labels")
            self.kind = "finite"
            self.model = labels
        self.count = 0
        self.transcript = []
        self._cache = {}

    @classmethod
    def from_class(cls, C, index):
        return cls(C.labels[index])

    @property
    def m(self):
        return len(self.model) if self.kind == "finite" else None

    @property
    def d(self):
        return self.model.d if self.kind == "linear" else None

    def _key(self, x):
        if self.kind == "finite":
            if isinstance(x, (bool, float)) or not 0 <= int(x) < len(self.model):
                raise InvalidInput(f"example id {x!r} out of range")
            return int(x)
        x = np.asarray(x, dtype=float)
        if x.shape != (self.model.d,):
            raise InvalidInput(f"query must be a vector of length {self.model.d}")
        return tuple(x.tolist())

    def answer(self, key):
        if self.kind == "finite":
            return int(self.model[key])
        return self.model.query(np.array(key))

    def query(self, x):
        key = self._key(x)
        y = self._cache.get(key)
        if y is None:
            y = self.answer(key)
            self._cache[key] = y
            self.count += 1
            self.transcript.append((key, y))
        return y

    def replay(self, model=None):
        """True when every recorded answer matches ``model`` (default: the wrapped one)."""
        ref = self if model is None else CountingOracle(model)
        return all(ref.answer(k) == y for k, y in self.transcript)

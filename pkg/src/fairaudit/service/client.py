"""Auditor-side client for a remote model server."""

from __future__ import annotations

import time

import httpx
import numpy as np

from ..errors import InvalidInput, TransportError


class RemoteOracle:
    """Same contract as :class:`~fairaudit.harness.oracles.CountingOracle`, over HTTP.

    Transport failures and 5xx replies are retried ``retries`` times with
    exponential backoff; after that the failure is fatal.
    """

    def __init__(self, base_url="http://127.0.0.1:8000", client=None, retries=3, backoff=0.1, timeout=10.0):
        self.client = client or httpx.Client(base_url=base_url, timeout=timeout)
        self.retries = retries
        self.backoff = backoff
        self.count = 0
        self.transcript = []
        self._cache = {}
        self._meta = None

    def _request(self, method, path, **kw):
        last = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self.client.request(method, path, **kw)
            except httpx.TransportError as exc:
                last = exc
                continue
            if resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise InvalidInput(f"server rejected {path}: {resp.text}")
            return resp.json()
        raise TransportError(f"{method} {path} failed after {self.retries} retries: {last}")

    def meta(self):
        if self._meta is None:
            self._meta = self._request("GET", "/meta")
        return self._meta

    @property
    def kind(self):
        return self.meta()["kind"]

    def query(self, x):
        if isinstance(x, (int, np.integer)):
            key, payload = int(x), int(x)
        else:
            payload = [float(v) for v in np.asarray(x, dtype=float).ravel()]
            key = tuple(payload)
        y = self._cache.get(key)
        if y is None:
            y = int(self._request("POST", "/query", json={"x": payload})["label"])
            self._cache[key] = y
            self.count += 1
            self.transcript.append((key, y))
        return y

    def close(self):
        self.client.close()

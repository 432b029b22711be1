"""Counter-based deterministic randomness.

Every draw is a pure function of (key parts, draw counter), hashed with
blake2b.  Answers therefore never depend on evaluation order, wall clock,
or thread scheduling, and the same key yields the same stream on every
platform.
"""

from __future__ import annotations

import hashlib
import math
from statistics import NormalDist

_NORMAL = NormalDist()


def derive_seed(*parts):
    """Stable 64-bit seed derived from arbitrary string/int parts."""
    h = hashlib.blake2b("\x1f".join(str(p) for p in parts).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "big")


class CounterRNG:
    """Deterministic uniform stream keyed by (key parts, counter)."""

    def __init__(self, *key_parts):
        self._key = "\x1f".join(str(p) for p in key_parts)
        self._counter = 0

    def uniform(self):
        """Next float in [0, 1)."""
        h = hashlib.blake2b(f"{self._key}\x1f{self._counter}".encode(), digest_size=8)
        self._counter += 1
        return int.from_bytes(h.digest(), "big") / 2**64

    def randint(self, n):
        """Uniform int in [0, n)."""
        if n <= 0:
            raise ValueError("randint needs n >= 1")
        return int(self.uniform() * n) if n > 1 else 0

    def choice(self, seq):
        return seq[self.randint(len(seq))]

    def normal(self, mu, sigma):
        u = self.uniform()
        # clamp away from 0/1 so the inverse CDF stays finite
        u = min(max(u, 1e-12), 1 - 1e-12)
        return mu + sigma * _NORMAL.inv_cdf(u)

    def truncated_normal(self, mu, sigma, minimum):
        v = self.normal(mu, sigma)
        return max(v, minimum)

    def geometric(self, p):
        """Number of unit intervals until first success with probability p."""
        if p <= 0:
            return math.inf
        if p >= 1:
            return 1
        u = min(max(self.uniform(), 1e-12), 1 - 1e-12)
        return math.ceil(math.log1p(-u) / math.log1p(-p))

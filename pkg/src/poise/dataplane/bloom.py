"""Source-IP blacklist Bloom filter."""
from __future__ import annotations

import math

import numpy as np

from .crc import BUYPASS, CCITT_FALSE, CDMA2000, DECT_R, T10_DIF

# independent hash family: distinct generator polynomials, each input salted
HASHES = (CCITT_FALSE, T10_DIF, CDMA2000, BUYPASS, DECT_R)
SALTS = (0x5A, 0xC3, 0x3C, 0xA5, 0x69)


def analytic_fp_rate(n, m, h):
    return (1.0 - math.exp(-h * n / m)) ** h


class BloomFilter:
    def __init__(self, m=1 << 16, h=3):
        if not 1 <= h <= len(HASHES):
            raise ValueError(f"h must be in [1, {len(HASHES)}]")
        if m <= 0:
            raise ValueError("m must be positive")
        self.m = m
        self.h = h
        self.bits = np.zeros(m, dtype=bool)
        self.count = 0

    def _positions(self, sip):
        data = sip.to_bytes(4, "big")
        return [HASHES[i](bytes((SALTS[i],)) + data) % self.m for i in range(self.h)]

    def positions_many(self, sips):
        """Bit positions for an array of source IPs, shape (len(sips), h)."""
        sips = np.asarray(sips, dtype=np.uint32)
        raw = sips.astype(">u4").view(np.uint8).reshape(-1, 4)
        cols = []
        for i in range(self.h):
            rows = np.hstack([np.full((raw.shape[0], 1), SALTS[i], dtype=np.uint8), raw])
            cols.append(HASHES[i].many(rows).astype(np.int64) % self.m)
        return np.stack(cols, axis=1)

    def add(self, sip):
        for p in self._positions(sip):
            self.bits[p] = True
        self.count += 1

    def query(self, sip):
        return all(self.bits[p] for p in self._positions(sip))

    def add_many(self, sips):
        self.bits[self.positions_many(sips).ravel()] = True
        self.count += len(sips)

    def query_many(self, sips):
        return self.bits[self.positions_many(sips)].all(axis=1)

    def clear(self):
        self.bits[:] = False
        self.count = 0

    def __contains__(self, sip):
        return self.query(sip)


"""Table-driven CRC-16 in the Rocksoft parameter model, scalar and vectorized."""
from __future__ import annotations

import binascii
from dataclasses import dataclass, field

import numpy as np


def _reflect(v, width):
    out = 0
    for _ in range(width):
        out = (out << 1) | (v & 1)
        v >>= 1
    return out


@dataclass(frozen=True)
class Crc16:
    poly: int
    init: int = 0
    refin: bool = False
    refout: bool = False
    xorout: int = 0
    name: str = ""
    _table: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        table = []
        if self.refin:
            rpoly = _reflect(self.poly, 16)
            for b in range(256):
                c = b
                for _ in range(8):
                    c = (c >> 1) ^ rpoly if c & 1 else c >> 1
                table.append(c)
        else:
            for b in range(256):
                c = b << 8
                for _ in range(8):
                    c = ((c << 1) ^ self.poly) & 0xFFFF if c & 0x8000 else (c << 1) & 0xFFFF
                table.append(c)
        object.__setattr__(self, "_table", tuple(table))

    def _start(self):
        return _reflect(self.init, 16) if self.refin else self.init

    def _finish(self, crc):
        if self.refin != self.refout:
            crc = _reflect(crc, 16)
        return crc ^ self.xorout

    def __call__(self, data: bytes) -> int:
        t = self._table
        crc = self._start()
        if self.refin:
            for b in data:
                crc = (crc >> 8) ^ t[(crc ^ b) & 0xFF]
        else:
            for b in data:
                crc = ((crc << 8) & 0xFFFF) ^ t[(crc >> 8) ^ b]
        return self._finish(crc)

    def many(self, rows: np.ndarray) -> np.ndarray:
        """CRC of each row of a uint8 matrix, vectorized over rows."""
        rows = np.asarray(rows, dtype=np.uint8)
        t = np.array(self._table, dtype=np.uint16)
        crc = np.full(rows.shape[0], self._start(), dtype=np.uint16)
        for j in range(rows.shape[1]):
            b = rows[:, j].astype(np.uint16)
            if self.refin:
                crc = (crc >> 8) ^ t[(crc ^ b) & 0xFF]
            else:
                crc = (crc << 8) ^ t[(crc >> 8) ^ b]
        if self.refin != self.refout:
            crc = np.array([_reflect(int(c), 16) for c in crc], dtype=np.uint16)
        return crc ^ np.uint16(self.xorout)


def crc16_bitwise(data: bytes, poly=0x1021, init=0xFFFF, refin=False, refout=False, xorout=0):
    """Bit-at-a-time reference, kept deliberately naive."""
    crc = init
    for b in data:
        if refin:
            b = _reflect(b, 8)
        crc ^= b << 8
        for _ in range(8):
            crc = ((crc << 1) ^ poly) if crc & 0x8000 else (crc << 1)
            crc &= 0xFFFF
    if refout:
        crc = _reflect(crc, 16)
    return crc ^ xorout


CCITT_FALSE = Crc16(0x1021, 0xFFFF, name="CRC-16/CCITT-FALSE")
BUYPASS = Crc16(0x8005, 0x0000, name="CRC-16/BUYPASS")
T10_DIF = Crc16(0x8BB7, 0x0000, name="CRC-16/T10-DIF")
DNP = Crc16(0x3D65, 0x0000, True, True, 0xFFFF, name="CRC-16/DNP")
CDMA2000 = Crc16(0xC867, 0xFFFF, name="CRC-16/CDMA2000")
DECT_R = Crc16(0x0589, 0x0000, xorout=0x0001, name="CRC-16/DECT-R")
ARC = Crc16(0x8005, 0x0000, True, True, name="CRC-16/ARC")

CATALOG = (CCITT_FALSE, BUYPASS, T10_DIF, DNP, CDMA2000, DECT_R, ARC)


def crc16(data: bytes) -> int:
    """CRC-16/CCITT-FALSE, the flow-cache index hash."""
    return binascii.crc_hqx(data, 0xFFFF)

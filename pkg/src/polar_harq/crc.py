"""Cyclic redundancy checks for the polar payload.

Generator polynomials are the ones 5G NR uses for polar-coded control
information (zero initial state, no reflection, no final XOR).  The CRC is
appended MSB-first after the message.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

POLYNOMIALS = {
    8: 0x19B,  # D^8 + D^7 + D^4 + D^3 + D + 1
    16: 0x11021,  # D^16 + D^12 + D^5 + 1
    24: 0x1B2B117,  # CRC24C
}


def _poly(crc_len: int) -> int:
    try:
        return POLYNOMIALS[crc_len]
    except KeyError:
        raise ValueError(f"unsupported CRC length {crc_len}; "
                         f"choose 0 or one of {sorted(POLYNOMIALS)}") from None


@lru_cache(maxsize=64)
def _parity_matrix(k: int, crc_len: int) -> np.ndarray:
    """Row i holds the remainder contributed by message bit i."""
    poly = _poly(crc_len)
    rows = np.zeros((k, crc_len), dtype=np.uint8)
    r = 1  # x^0 mod g
    # remainder of x^(crc_len + j) for j = 0 .. k-1, filled from the last message bit
    for j in range(k):
        r = r << 1 if j else 1 << crc_len
        if r >> crc_len & 1:
            r ^= poly
        for b in range(crc_len):
            rows[k - 1 - j, b] = r >> (crc_len - 1 - b) & 1
    rows.setflags(write=False)
    return rows


def crc_remainder(msg, crc_len: int) -> np.ndarray:
    """CRC bits of ``msg`` (last axis), MSB first."""
    msg = np.asarray(msg, dtype=np.uint8)
    if crc_len == 0:
        return np.zeros(msg.shape[:-1] + (0,), dtype=np.uint8)
    P = _parity_matrix(msg.shape[-1], crc_len)
    return (msg.astype(np.int64) @ P % 2).astype(np.uint8)


def crc_attach(msg, crc_len: int) -> np.ndarray:
    msg = np.asarray(msg, dtype=np.uint8)
    return np.concatenate([msg, crc_remainder(msg, crc_len)], axis=-1)


def crc_check(payload, crc_len: int):
    """True where the trailing ``crc_len`` bits match the CRC of the rest.

    Works on the last axis, so a stack of candidate payloads can be checked
    in one call.
    """
    payload = np.asarray(payload, dtype=np.uint8)
    if crc_len == 0:
        return np.ones(payload.shape[:-1], dtype=bool) if payload.ndim > 1 else True
    k = payload.shape[-1] - crc_len
    ok = np.all(crc_remainder(payload[..., :k], crc_len) == payload[..., k:], axis=-1)
    return ok if payload.ndim > 1 else bool(ok)

"""Polar transform, Gaussian-approximation construction and bit-type masks.

Indices are 0-based and in natural (non bit-reversed) order throughout.
Mask vectors use 1 to flag membership, e.g. ``fr[i] == 1`` for a frozen
input position.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def log2_int(n: int) -> int:
    if not is_power_of_two(n):
        raise ValueError(f"{n} is not a power of two")
    return n.bit_length() - 1


def next_power_of_two(n: int) -> int:
    if n < 1:
        raise ValueError("length must be positive")
    return 1 << (n - 1).bit_length()


def encode(u, m: int | None = None) -> np.ndarray:
    """Multiply ``u`` by the m-fold Kronecker power of ``[[1, 0], [1, 1]]``.

    The transform works on the last axis, so a stack of vectors can be
    encoded at once.  It is its own inverse over GF(2).

    Parameters
    ----------
    u : array_like of {0, 1}
        Input bits, last axis of length ``2**m``.
    m : int, optional
        Stage count; checked against the length when given.
    """
    u = np.asarray(u)
    n = u.shape[-1]
    if not is_power_of_two(n):
        raise ValueError(f"length {n} is not a power of two")
    if m is not None and n != 1 << m:
        raise ValueError(f"length {n} does not match m={m}")
    lead = u.shape[:-1]
    x = (u.astype(np.uint8) & 1).copy()
    h = 1
    while h < n:
        v = x.reshape(*lead, n // (2 * h), 2, h)
        v[..., 0, :] ^= v[..., 1, :]
        h *= 2
    return x


@dataclass(frozen=True)
class CodeConfig:
    """Dimensions of one (possibly punctured) polar code.

    ``n`` is the mother length, ``N`` the transmitted length after
    puncturing and ``k`` the message length before the CRC is attached.
    """

    n: int
    N: int
    k: int
    crc_len: int = 0
    design_snr_db: float = 2.0

    def __post_init__(self):
        if not is_power_of_two(self.n) or self.n < 2:
            raise ValueError(f"mother length n={self.n} must be a power of two >= 2")
        if self.crc_len < 0 or self.k < 0:
            raise ValueError("k and crc_len must be non-negative")
        if not (self.K <= self.N <= self.n):
            raise ValueError(
                f"need k + crc_len <= N <= n, got {self.K}, {self.N}, {self.n}")

    @property
    def K(self) -> int:
        return self.k + self.crc_len

    @property
    def m(self) -> int:
        return log2_int(self.n)

    @property
    def rate(self) -> float:
        return self.K / self.N

    @classmethod
    def for_length(cls, N: int, k: int, crc_len: int = 0,
                   design_snr_db: float = 2.0) -> "CodeConfig":
        """Build a config whose mother length is the smallest power of two >= N."""
        return cls(next_power_of_two(max(N, 2)), N, k, crc_len, design_snr_db)


def _as_bits(v) -> np.ndarray:
    return (np.asarray(v).astype(np.uint8) & 1)


@dataclass(frozen=True, eq=False)
class BitTypeMask:
    """Per-index role flags: frozen (any kind), punctured, PC-frozen."""

    fr: np.ndarray
    rm: np.ndarray
    pc: np.ndarray

    def __post_init__(self):
        fr, rm, pc = _as_bits(self.fr), _as_bits(self.rm), _as_bits(self.pc)
        if not (fr.shape == rm.shape == pc.shape) or fr.ndim != 1:
            raise ValueError("mask vectors must be 1-D and of equal length")
        if np.any(rm & ~fr & 1) or np.any(pc & ~fr & 1):
            raise ValueError("punctured and PC-frozen positions must be frozen")
        if np.any(rm & pc):
            raise ValueError("a position cannot be both punctured and PC-frozen")
        for name, v in (("fr", fr), ("rm", rm), ("pc", pc)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    def __len__(self):
        return len(self.fr)

    def __eq__(self, other):
        if not isinstance(other, BitTypeMask):
            return NotImplemented
        return (np.array_equal(self.fr, other.fr) and np.array_equal(self.rm, other.rm)
                and np.array_equal(self.pc, other.pc))

    @property
    def iv(self) -> np.ndarray:
        return 1 - self.fr

    @property
    def fr_z(self) -> np.ndarray:
        """Frozen positions fixed to zero (punctured ones included)."""
        return self.fr & (1 - self.pc)

    def to_strings(self) -> dict[str, str]:
        return {name: bits_to_str(getattr(self, name)) for name in ("fr", "rm", "pc")}

    @classmethod
    def from_strings(cls, fr: str, rm: str | None = None,
                     pc: str | None = None) -> "BitTypeMask":
        f = str_to_bits(fr)
        zeros = np.zeros_like(f)
        return cls(f, str_to_bits(rm) if rm else zeros, str_to_bits(pc) if pc else zeros)


def bits_to_str(bits) -> str:
    return "".join("1" if b else "0" for b in np.asarray(bits))


def str_to_bits(s: str) -> np.ndarray:
    s = s.strip()
    if set(s) - {"0", "1"}:
        raise ValueError(f"not a bit string: {s!r}")
    return np.frombuffer(s.encode(), dtype=np.uint8) - ord("0")


def derive_bit_types(mask: BitTypeMask, N1: int):
    """Return ``(iv, fr_z, id)`` for a mask.

    The first transmission occupies the rightmost ``N1`` positions of the
    mother code (earlier codes are nested in the high-index block), so an
    information position counts as a newly added one when it lies left of
    that block.
    """
    n = len(mask)
    iv = mask.iv
    fr_z = mask.fr_z
    new = np.zeros(n, dtype=np.uint8)
    new[: max(n - N1, 0)] = 1
    return iv, fr_z, iv & new


# --------------------------------------------------------------------------- GA construction

_PHI_SPLIT = 10.0
_A, _B, _C = -0.4527, 0.86, 0.0218
_LOG_PHI_SPLIT = _A * _PHI_SPLIT ** _B + _C


def _log_phi(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    lo = x < _PHI_SPLIT
    out[lo] = np.minimum(_A * x[lo] ** _B + _C, 0.0)
    hi = ~lo
    xh = x[hi]
    out[hi] = 0.5 * np.log(np.pi / xh) - xh / 4 + np.log1p(-10.0 / (7.0 * xh))
    return out


def _log_phi_inv(y: np.ndarray) -> np.ndarray:
    """Inverse of the piecewise log-phi; the low branch is inverted in closed form."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    lo = (y >= _LOG_PHI_SPLIT) & (y < 0)
    out[lo] = ((_C - y[lo]) / -_A) ** (1.0 / _B)
    hi = y < _LOG_PHI_SPLIT
    if np.any(hi):
        t = y[hi]
        a = np.full_like(t, _PHI_SPLIT)
        b = -8.0 * t + 50.0
        for _ in range(80):
            mid = 0.5 * (a + b)
            above = _log_phi(mid) > t
            a = np.where(above, mid, a)
            b = np.where(above, b, mid)
        out[hi] = 0.5 * (a + b)
    return out


def ga_check_node(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Mean LLR at the output of a check node fed by means ``a`` and ``b``."""
    la, lb = _log_phi(a), _log_phi(b)
    hi, lo = np.maximum(la, lb), np.minimum(la, lb)
    y = hi + np.log1p(np.exp(lo - hi) - np.exp(lo))
    # two inputs off the phi = 1 plateau always give y < 0; keep rounding from hiding that
    out = _log_phi_inv(np.minimum(y, -np.finfo(float).tiny))
    out[hi >= 0] = 0.0
    return out


def ga_means(channel_means: np.ndarray) -> np.ndarray:
    """Propagate per-coded-bit mean LLRs down to the input positions."""
    mu = np.array(channel_means, dtype=float)
    n = mu.size
    size = n
    while size > 1:
        h = size // 2
        blocks = mu.reshape(-1, 2, h)
        a, b = blocks[:, 0, :].copy(), blocks[:, 1, :].copy()
        blocks[:, 0, :] = ga_check_node(a.ravel(), b.ravel()).reshape(a.shape)
        blocks[:, 1, :] = a + b
        mu = blocks.reshape(n)
        size = h
    return mu


@dataclass(frozen=True, eq=False)
class ReliabilityOrder:
    """Input positions sorted from least to most reliable, with their GA means."""

    order: np.ndarray
    mean_llr: np.ndarray


def construct_reliability(config: CodeConfig) -> ReliabilityOrder:
    """Gaussian-approximation density evolution for a leftmost-punctured code.

    ``design_snr_db`` is read as Eb/N0, so the channel mean LLR is
    ``4 * R * 10**(snr/10)`` with ``R = (k + crc_len) / N``.  Punctured coded
    bits start with mean zero.
    """
    n, N = config.n, config.N
    mu0 = 4.0 * config.rate * 10 ** (config.design_snr_db / 10)
    channel = np.full(n, mu0)
    channel[: n - N] = 0.0
    means = ga_means(channel)
    punctured = np.zeros(n, dtype=bool)
    punctured[: n - N] = True
    # punctured first, then ascending mean, ties by index
    order = np.lexsort((np.arange(n), means, ~punctured))
    return ReliabilityOrder(order=order, mean_llr=means)


def select_frozen(rel: ReliabilityOrder, config: CodeConfig) -> BitTypeMask:
    """Puncture the leftmost ``n - N`` positions and freeze the weakest of the rest."""
    n, N, K = config.n, config.N, config.K
    if K > N:
        raise ValueError(f"infeasible rate: {K} information bits in {N} coded bits")
    rm = np.zeros(n, dtype=np.uint8)
    rm[: n - N] = 1
    fr = rm.copy()
    candidates = [i for i in rel.order if not rm[i]]
    fr[candidates[: N - K]] = 1
    return BitTypeMask(fr, rm, np.zeros(n, dtype=np.uint8))


def build_code(config: CodeConfig) -> BitTypeMask:
    return select_frozen(construct_reliability(config), config)

"""QPSK over AWGN and the incremental-redundancy HARQ session loop.

Every frame draws its randomness from its own counter-based substream keyed
by ``(seed, point, frame)``, so results do not depend on how frames are
split across batches or worker processes.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from statistics import NormalDist
from typing import Iterable

import numpy as np

from .crc import crc_attach
from .harq_scheduler import HarqPlan, initial_plan, input_vector, next_transmission
from .nodes import NodePartition
from .polar_core import CodeConfig, encode
from .scl_decoder import QuantSpec, SCLDecoder

CSV_COLUMNS = ("esn0_db", "tx_index", "rate", "frames", "errors", "fer", "ci_halfwidth")
TRUNCATION_MARKER = "# truncated"


# --------------------------------------------------------------------------- channel

def qpsk_modulate(bits) -> np.ndarray:
    """Gray-mapped unit-energy QPSK; bit pairs go to (I, Q), bit 0 maps to +."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size % 2:
        raise ValueError(f"QPSK needs an even number of bits, got {bits.size}")
    amp = (1.0 - 2.0 * bits.astype(float)) / math.sqrt(2.0)
    return amp[0::2] + 1j * amp[1::2]


def noise_sigma2(esn0_db: float) -> float:
    """Noise variance per real dimension for unit symbol energy."""
    return 1.0 / (2.0 * 10 ** (esn0_db / 10))


def awgn(symbols, esn0_db: float, rng: np.random.Generator) -> np.ndarray:
    symbols = np.asarray(symbols, dtype=complex)
    sigma = math.sqrt(noise_sigma2(esn0_db))
    noise = rng.standard_normal((2,) + symbols.shape)
    return symbols + sigma * (noise[0] + 1j * noise[1])


def qpsk_llr(symbols, esn0_db: float, quant: QuantSpec | None = None) -> np.ndarray:
    """Exact per-bit LLRs (positive means bit 0), optionally quantized to Qe bits."""
    symbols = np.asarray(symbols, dtype=complex)
    scale = math.sqrt(2.0) / noise_sigma2(esn0_db)
    llr = np.empty(2 * symbols.size)
    llr[0::2] = scale * symbols.real
    llr[1::2] = scale * symbols.imag
    return quant.quantize(llr) if quant is not None else llr


def uncoded_ber(esn0_db: float) -> float:
    """Bit error probability of Gray QPSK, ``Q(sqrt(Es/N0))``."""
    return 1.0 - NormalDist().cdf(math.sqrt(10 ** (esn0_db / 10)))


# --------------------------------------------------------------------------- LLR buffer

@dataclass
class LlrBuffer:
    """Channel LLRs gathered over all transmissions, in the current mother-code frame."""

    llr: np.ndarray
    filled: np.ndarray

    @classmethod
    def empty(cls, n: int, dtype=float) -> "LlrBuffer":
        return cls(np.zeros(n, dtype=dtype), np.zeros(n, dtype=bool))


def assemble_llr_buffer(buf: LlrBuffer | None, new_llrs, plan: HarqPlan,
                        prev: HarqPlan | None = None) -> LlrBuffer:
    """Grow ``buf`` to ``plan``'s mother length and drop in the newest LLRs.

    Earlier observations move with the previous code into the high-index
    block; the new ones fill the slice first sent at ``plan.t``.
    """
    new_llrs = np.asarray(new_llrs)
    sl = plan.transmitted_slice()
    if new_llrs.size != sl.stop - sl.start:
        raise ValueError(f"expected {sl.stop - sl.start} new LLRs, got {new_llrs.size}")
    out = LlrBuffer.empty(plan.n_t, new_llrs.dtype)
    if buf is not None:
        n_prev = prev.n_t if prev is not None else buf.llr.size
        if buf.llr.size != n_prev:
            raise ValueError("buffer length does not match the previous plan")
        out.llr[plan.n_t - n_prev:] = buf.llr
        out.filled[plan.n_t - n_prev:] = buf.filled
    if np.any(out.filled[sl]):
        raise RuntimeError("transmission overlaps positions that were already received")
    out.llr[sl] = new_llrs
    out.filled[sl] = True
    return out


# --------------------------------------------------------------------------- configs

@dataclass(frozen=True)
class DecoderConfig:
    """Receiver settings; ``quant=None`` decodes in floating point."""

    list_size: int = 8
    quant: QuantSpec | None = field(default_factory=lambda: QuantSpec(5, 8, 11, 2.0))
    min_node_size: int = 1
    crc_select: bool = True

    @property
    def partition(self) -> NodePartition:
        return NodePartition(self.min_node_size)


@dataclass(frozen=True)
class SessionConfig:
    """One Monte-Carlo point of a HARQ session.

    ``schedule`` lists the cumulative transmitted length after each
    transmission; ``stop_errors`` ends the run early once the error count
    after transmission ``stop_tx`` (default: the last) reaches it.
    """

    esn0_db: float
    schedule: tuple
    seed: int = 0
    frames: int = 1000
    stop_errors: int | None = None
    max_tx: int | None = None
    stop_tx: int | None = None
    batch_size: int = 50
    point_index: int = 0

    def __post_init__(self):
        sched = tuple(int(x) for x in self.schedule)
        object.__setattr__(self, "schedule", sched)
        if not sched or any(b <= a for a, b in zip(sched, sched[1:])):
            raise ValueError("schedule must be non-empty and strictly increasing")
        steps = (sched[0],) + tuple(b - a for a, b in zip(sched, sched[1:]))
        if any(s % 2 for s in steps):
            raise ValueError("every transmission must carry an even number of bits for QPSK")
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if self.max_tx is None:
            object.__setattr__(self, "max_tx", len(sched))
        if not 1 <= self.max_tx <= len(sched):
            raise ValueError("max_tx must be between 1 and the schedule length")
        if self.stop_tx is None:
            object.__setattr__(self, "stop_tx", self.max_tx)
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


# --------------------------------------------------------------------------- results

@dataclass
class SessionResult:
    """Outcome of a run.

    ``errors[t-1]`` counts frames not correctly delivered after ``t``
    transmissions (still pending, or accepted with a wrong message).
    ``attempted[t-1]`` counts frames for which transmission ``t`` happened.
    """

    errors: np.ndarray
    attempted: np.ndarray
    frames: int
    delivered_at: np.ndarray  # per frame: tx index of the ACK, 0 if never
    match: np.ndarray  # per frame: final decoded message equals the sent one
    undetected: int = 0

    @classmethod
    def empty(cls, max_tx: int) -> "SessionResult":
        return cls(np.zeros(max_tx, dtype=np.int64), np.zeros(max_tx, dtype=np.int64), 0,
                   np.zeros(0, dtype=np.int64), np.zeros(0, dtype=bool))

    @property
    def avg_transmissions(self) -> float:
        return float(self.attempted.sum() / self.frames) if self.frames else 0.0

    def merge(self, other: "SessionResult") -> "SessionResult":
        return SessionResult(self.errors + other.errors, self.attempted + other.attempted,
                             self.frames + other.frames,
                             np.concatenate([self.delivered_at, other.delivered_at]),
                             np.concatenate([self.match, other.match]),
                             self.undetected + other.undetected)


@dataclass(frozen=True)
class FerEstimate:
    fer: float
    low: float
    high: float

    @property
    def halfwidth(self) -> float:
        return (self.high - self.low) / 2


def wilson_interval(errors: int, frames: int, confidence: float = 0.95) -> FerEstimate:
    if frames <= 0:
        raise ValueError("frames must be positive")
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    p = errors / frames
    denom = 1 + z * z / frames
    centre = (p + z * z / (2 * frames)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / frames + z * z / (4 * frames * frames))
    return FerEstimate(p, max(0.0, centre - half), min(1.0, centre + half))


def estimate_fer(result: SessionResult, confidence: float = 0.95) -> list[FerEstimate]:
    """Per-transmission FER over all frames with Wilson confidence bounds."""
    return [wilson_interval(int(e), result.frames, confidence) for e in result.errors]


# --------------------------------------------------------------------------- session

def frame_rng(seed: int, point: int, frame: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, point, frame])))


class HarqLink:
    """Plans and decoders for every transmission of one schedule."""

    def __init__(self, code: CodeConfig, schedule, dec: DecoderConfig | None = None):
        dec = dec or DecoderConfig()
        schedule = tuple(schedule)
        if schedule[0] != code.N:
            raise ValueError("schedule must start with the first-transmission length")
        self.code = code
        self.dec = dec
        plans = [initial_plan(code, partition=dec.partition)]
        for N_t in schedule[1:]:
            plans.append(next_transmission(plans[-1], N_t))
        self.plans = plans
        self.decoders = [SCLDecoder(p, dec.list_size, dec.quant, crc_select=dec.crc_select)
                         for p in plans]

    def run_frame(self, msg, esn0_db: float, rng: np.random.Generator, max_tx: int,
                  check_consistency: bool = False):
        """Transmit until ACK or ``max_tx``; returns (ack tx or 0, final message)."""
        code = self.code
        payload = crc_attach(msg, code.crc_len)
        buf, prev, x_prev = None, None, None
        decoded = None
        for t in range(1, max_tx + 1):
            plan = self.plans[t - 1]
            x = encode(input_vector(plan, payload))
            if check_consistency and x_prev is not None:
                if not np.array_equal(x[plan.n_t - x_prev.size:], x_prev):
                    raise RuntimeError("extended codeword changed previously sent bits")
            sl = plan.transmitted_slice()
            y = awgn(qpsk_modulate(x[sl]), esn0_db, rng)
            buf = assemble_llr_buffer(buf, qpsk_llr(y, esn0_db, self.dec.quant), plan, prev)
            res = self.decoders[t - 1].decode(buf.llr)
            decoded = res.message
            ack = res.crc_ok if code.crc_len else np.array_equal(decoded, msg)
            if ack:
                return t, decoded
            prev, x_prev = plan, x
        return 0, decoded


@lru_cache(maxsize=8)
def _link(code: CodeConfig, schedule: tuple, dec: DecoderConfig) -> HarqLink:
    return HarqLink(code, schedule, dec)


def run_frames(cfg: SessionConfig, code: CodeConfig, dec: DecoderConfig | None,
               frames: Iterable[int]) -> SessionResult:
    """Simulate the given frame indices of one point."""
    link = _link(code, cfg.schedule, dec or DecoderConfig())
    T = cfg.max_tx
    errors = np.zeros(T, dtype=np.int64)
    attempted = np.zeros(T, dtype=np.int64)
    delivered, match = [], []
    undetected = 0
    count = 0
    for f in frames:
        rng = frame_rng(cfg.seed, cfg.point_index, f)
        msg = rng.integers(0, 2, code.k, dtype=np.uint8)
        t_ack, decoded = link.run_frame(msg, cfg.esn0_db, rng, T)
        ok = decoded is not None and np.array_equal(decoded, msg)
        last = t_ack if t_ack else T
        attempted[:last] += 1
        if t_ack and ok:
            errors[:t_ack - 1] += 1
        else:
            errors += 1
            undetected += bool(t_ack)
        delivered.append(t_ack)
        match.append(ok)
        count += 1
    return SessionResult(errors, attempted, count, np.array(delivered, dtype=np.int64),
                         np.array(match, dtype=bool), undetected)


def _batch_job(args):
    return run_frames(*args)


def run_harq_session(cfg: SessionConfig, code: CodeConfig, dec: DecoderConfig | None = None,
                     workers: int = 1, executor=None) -> SessionResult:
    """Run up to ``cfg.frames`` frames in fixed-size batches.

    Batches are reduced in order and the run stops after the first batch
    that reaches ``stop_errors``, so the outcome is the same for any worker
    count.
    """
    dec = dec or DecoderConfig()
    starts = list(range(0, cfg.frames, cfg.batch_size))
    jobs = [(cfg, code, dec, range(s, min(s + cfg.batch_size, cfg.frames))) for s in starts]
    total = SessionResult.empty(cfg.max_tx)

    def done(res):
        return cfg.stop_errors is not None and res.errors[cfg.stop_tx - 1] >= cfg.stop_errors

    if workers <= 1 and executor is None:
        for job in jobs:
            total = total.merge(_batch_job(job))
            if done(total):
                break
        return total

    own = executor is None
    pool = executor or ProcessPoolExecutor(max_workers=workers)
    try:
        window = max(1, 2 * workers)
        pending = [pool.submit(_batch_job, j) for j in jobs[:window]]
        nxt = len(pending)
        while pending:
            total = total.merge(pending.pop(0).result())
            if done(total):
                for p in pending:
                    p.cancel()
                break
            if nxt < len(jobs):
                pending.append(pool.submit(_batch_job, jobs[nxt]))
                nxt += 1
    finally:
        if own:
            pool.shutdown(cancel_futures=True)
    return total


# --------------------------------------------------------------------------- reporting

def fer_rows(esn0_db: float, code: CodeConfig, cfg: SessionConfig, result: SessionResult):
    rows = []
    for t, est in enumerate(estimate_fer(result), start=1):
        rows.append({
            "esn0_db": f"{esn0_db:g}",
            "tx_index": t,
            "rate": f"{code.k / cfg.schedule[t - 1]:.6f}",
            "frames": result.frames,
            "errors": int(result.errors[t - 1]),
            "fer": f"{est.fer:.6e}",
            "ci_halfwidth": f"{est.halfwidth:.6e}",
        })
    return rows


def write_fer_csv(rows, path, truncated: bool = False) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        w.writerows(rows)
        if truncated:
            fh.write(TRUNCATION_MARKER + "\n")
        fh.flush()
        os.fsync(fh.fileno())

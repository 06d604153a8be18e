"""Incremental-redundancy HARQ bit-type scheduling.

Each retransmission extends the polar code.  The previous code is nested in
the high-index block of the new mother code, because the Kronecker structure
gives ``x[n:2n] = u[n:2n] G`` and so leaves every previously sent coded bit
untouched.  Puncturing stays on the leftmost positions, the newly added
input positions sit just left of the previous code, and they are decoded
before the old positions whose values they duplicate.

Two equivalent schedulers live here: the vector pipeline used at run time
(:func:`next_transmission`) and a literal set-based version
(:func:`reference_update_sets`) kept as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .nodes import NodePartition, decompose_tree
from .polar_core import (BitTypeMask, CodeConfig, ReliabilityOrder,
                         construct_reliability, derive_bit_types, is_power_of_two,
                         next_power_of_two, select_frozen)

__all__ = [
    "HarqPlan", "NodePartition", "input_vector", "ReferenceSets", "build_lut", "compute_fr_mask",
    "compute_pc_mask", "extend_masks", "initial_plan", "masks_from_sets",
    "next_transmission", "plan_schedule", "reference_initial", "reference_update_sets",
    "resolve_intra_node", "to_manifest", "parse_manifest",
]


@dataclass(frozen=True, eq=False)
class HarqPlan:
    """Bit roles and PC routing for the code after ``t`` transmissions.

    ``lut[i] = j`` means the decoded value of new information bit ``i`` is
    the value of PC-frozen bit ``j``; unmapped entries hold -1.
    ``msg_positions`` are the first-transmission information positions, in
    the current index frame, carrying message and CRC.
    """

    t: int
    lengths: tuple[int, ...]
    n_t: int
    masks: BitTypeMask
    lut: np.ndarray
    id_new: np.ndarray
    msg_positions: np.ndarray
    k: int
    crc_len: int = 0
    design_snr_db: float = 2.0
    partition: NodePartition = field(default_factory=NodePartition)

    @property
    def N_t(self) -> int:
        return self.lengths[-1]

    @property
    def N1(self) -> int:
        return self.lengths[0]

    @property
    def K(self) -> int:
        return self.k + self.crc_len

    @property
    def id(self) -> np.ndarray:
        """Every information position added after the first transmission."""
        return derive_bit_types(self.masks, self.N1)[2]

    @property
    def code(self) -> CodeConfig:
        return CodeConfig(self.n_t, self.N_t, self.k, self.crc_len, self.design_snr_db)

    def transmitted_slice(self, t: int | None = None) -> slice:
        """Coded positions first sent in transmission ``t`` (default: latest)."""
        t = self.t if t is None else t
        if not 1 <= t <= self.t:
            raise ValueError(f"transmission {t} outside 1..{self.t}")
        prev = self.lengths[t - 2] if t > 1 else 0
        return slice(self.n_t - self.lengths[t - 1], self.n_t - prev)


def input_vector(plan: HarqPlan, payload) -> np.ndarray:
    """Encoder input ``u`` carrying ``payload`` (message plus CRC) under ``plan``.

    Each routed information bit takes the value of its PC-frozen partner.
    Sources are filled from the highest index down so chains resolve.
    """
    payload = np.asarray(payload, dtype=np.uint8)
    if payload.shape[-1] != plan.K:
        raise ValueError(f"payload length {payload.shape[-1]} != {plan.K}")
    u = np.zeros(payload.shape[:-1] + (plan.n_t,), dtype=np.uint8)
    u[..., plan.msg_positions] = payload
    for i in np.flatnonzero(plan.lut >= 0)[::-1]:
        u[..., i] = u[..., plan.lut[i]]
    return u


def initial_plan(code: CodeConfig, rel: ReliabilityOrder | None = None,
                 partition: NodePartition | None = None) -> HarqPlan:
    rel = rel if rel is not None else construct_reliability(code)
    masks = select_frozen(rel, code)
    n = code.n
    return HarqPlan(
        t=1, lengths=(code.N,), n_t=n, masks=masks,
        lut=np.full(n, -1, dtype=np.int64),
        id_new=np.zeros(n, dtype=np.uint8),
        msg_positions=np.flatnonzero(masks.iv),
        k=code.k, crc_len=code.crc_len, design_snr_db=code.design_snr_db,
        partition=partition or NodePartition(),
    )


def extend_masks(prev: HarqPlan, n_t: int) -> BitTypeMask:
    """Grow the previous masks to mother length ``n_t``.

    The added block goes in front (low indices) and is marked frozen and
    punctured.
    """
    if not is_power_of_two(n_t):
        raise ValueError(f"mother length {n_t} is not a power of two")
    if n_t < prev.n_t:
        raise ValueError(f"cannot shrink mother code from {prev.n_t} to {n_t}")
    pad = n_t - prev.n_t
    ones = np.ones(pad, dtype=np.uint8)
    m = prev.masks
    return BitTypeMask(np.concatenate([ones, m.fr]), np.concatenate([ones, m.rm]),
                       np.concatenate([np.zeros(pad, dtype=np.uint8), m.pc]))


def compute_pc_mask(fr_prev, pc_prev, fr_star, id_t) -> np.ndarray:
    """Turn the first ``popcount(id_t)`` demoted information bits into PC-frozen bits.

    A bit is demoted when it carried information before but is frozen in the
    stand-alone code of the new length.  Scanning runs left to right.
    """
    fr_prev, pc_prev = np.asarray(fr_prev, np.uint8), np.asarray(pc_prev, np.uint8)
    cand = (1 - fr_prev) & np.asarray(fr_star, np.uint8)
    budget = int(np.sum(id_t))
    take = cand & (np.cumsum(cand) <= budget)
    return (pc_prev | take).astype(np.uint8)


def compute_fr_mask(fr_prev, pc_t, pc_prev, id_t, N_prev: int) -> np.ndarray:
    """Frozen flags after the update.

    Positions already sent (the rightmost ``N_prev``) keep their flags plus
    the newly PC-frozen ones; everything to their left is frozen except the
    new information bits.
    """
    fr_prev, pc_t, pc_prev, id_t = (np.asarray(v, np.uint8) for v in (fr_prev, pc_t, pc_prev, id_t))
    n = fr_prev.size
    fr = (1 - id_t).astype(np.uint8)
    old = slice(n - N_prev, n)
    fr[old] = fr_prev[old] | (pc_t[old] & (1 - pc_prev[old]))
    return fr


def build_lut(lut, new_pc, new_id) -> np.ndarray:
    """Pair new information bits with new PC-frozen bits, both in ascending order."""
    new_pc, new_id = np.sort(np.asarray(new_pc, int)), np.sort(np.asarray(new_id, int))
    if new_pc.size != new_id.size:
        raise RuntimeError(
            f"scheduler produced {new_id.size} new information bits but {new_pc.size} "
            "PC-frozen partners")
    lut = np.array(lut, dtype=np.int64, copy=True)
    if np.any(lut[new_id] >= 0):
        raise RuntimeError("new information bit already routed")
    lut[new_id] = new_pc
    return lut


def resolve_intra_node(masks: BitTypeMask, lut, partition: NodePartition | None = None):
    """Remove routing pairs that fall inside one decodable node.

    The decoder cannot use a PC value produced inside the node it is still
    deciding, so such a pair is swapped: the new information bit becomes a
    zero-frozen bit and its PC-frozen partner carries the information again.
    Pairs whose source is itself PC-frozen are left alone: the decoder fills
    a whole chain as soon as its information bit is decided.  Fast nodes never hold such a pair, so only enumerated generic nodes can
    trigger the swap.
    """
    partition = partition or NodePartition()
    fr, pc = masks.fr.copy(), masks.pc.copy()
    lut = np.array(lut, dtype=np.int64, copy=True)
    while True:
        nodes = decompose_tree(fr, partition)
        owner = np.empty(fr.size, dtype=np.int64)
        for idx, node in enumerate(nodes):
            owner[node.sp:node.sp + node.size] = idx
        changed = False
        for i in np.flatnonzero((lut >= 0) & (pc == 0)):
            j = lut[i]
            if owner[i] == owner[j] and i < j:
                fr[i], fr[j], pc[j], lut[i] = 1, 0, 0, -1
                changed = True
        if not changed:
            return BitTypeMask(fr, masks.rm, pc), lut


def next_transmission(plan: HarqPlan, N_t: int,
                      rel: ReliabilityOrder | None = None) -> HarqPlan:
    """Masks and routing table once ``N_t - N_{t-1}`` more coded bits are sent."""
    N_prev = plan.N_t
    if N_t <= N_prev:
        raise ValueError(f"transmission length must grow: {N_t} <= {N_prev}")
    n_t = next_power_of_two(N_t)
    cfg = CodeConfig(n_t, N_t, plan.k, plan.crc_len, plan.design_snr_db)
    rel = rel if rel is not None else construct_reliability(cfg)
    star = select_frozen(rel, cfg)

    ext = extend_masks(plan, n_t)
    shift = n_t - plan.n_t

    id_t = np.zeros(n_t, dtype=np.uint8)
    new = slice(n_t - N_t, n_t - N_prev)
    id_t[new] = 1 - star.fr[new]

    pc_t = compute_pc_mask(ext.fr, ext.pc, star.fr, id_t)
    new_pc = np.flatnonzero(pc_t & (1 - ext.pc))
    lut_prev = np.concatenate([np.full(shift, -1, dtype=np.int64),
                               np.where(plan.lut >= 0, plan.lut + shift, -1)])
    lut = build_lut(lut_prev, new_pc, np.flatnonzero(id_t))
    fr_t = compute_fr_mask(ext.fr, pc_t, ext.pc, id_t, N_prev)

    masks, lut = resolve_intra_node(BitTypeMask(fr_t, star.rm, pc_t), lut, plan.partition)
    if int(np.sum(masks.iv)) != plan.K:
        raise RuntimeError("information length not conserved across transmissions")
    return replace(plan, t=plan.t + 1, lengths=plan.lengths + (N_t,), n_t=n_t,
                   masks=masks, lut=lut, id_new=id_t,
                   msg_positions=plan.msg_positions + shift)


def plan_schedule(code: CodeConfig, lengths, partition: NodePartition | None = None) -> list[HarqPlan]:
    """Plans for every transmission of a length schedule starting at ``code.N``."""
    lengths = list(lengths)
    if not lengths or lengths[0] != code.N:
        raise ValueError("schedule must start with the first transmission length")
    if any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise ValueError("schedule must be strictly increasing")
    plans = [initial_plan(code, partition=partition)]
    for N_t in lengths[1:]:
        plans.append(next_transmission(plans[-1], N_t))
    return plans


# --------------------------------------------------------------------------- set-based reference

@dataclass(frozen=True)
class ReferenceSets:
    """Literal set bookkeeping of the original scheme, in the same index frame."""

    n: int
    lengths: tuple[int, ...]
    I: frozenset
    F: frozenset
    PF_delta: frozenset
    I_delta: frozenset
    RM: frozenset
    pairs: tuple = ()

    @property
    def S(self) -> frozenset:
        return frozenset(range(self.n))


def _shift(s, d):
    return frozenset(i + d for i in s)


def reference_initial(code: CodeConfig, rel: ReliabilityOrder | None = None) -> ReferenceSets:
    rel = rel if rel is not None else construct_reliability(code)
    n, N, K = code.n, code.N, code.K
    RM = frozenset(range(n - N))
    usable = [int(i) for i in rel.order if i not in RM]
    I = frozenset(usable[N - K:])
    return ReferenceSets(n, (N,), I, frozenset(range(n)) - I - RM,
                         frozenset(), frozenset(), RM)


def reference_update_sets(sets: ReferenceSets, N_t: int, k: int, crc_len: int = 0,
                          design_snr_db: float = 2.0,
                          rel: ReliabilityOrder | None = None) -> ReferenceSets:
    n_t = next_power_of_two(N_t)
    N_prev = sets.lengths[-1]
    d = n_t - sets.n
    I_prev, PF_prev = _shift(sets.I, d), _shift(sets.PF_delta, d)
    cfg = CodeConfig(n_t, N_t, k, crc_len, design_snr_db)
    I_star = reference_initial(cfg, rel).I

    new_region = frozenset(range(n_t - N_t, n_t - N_prev))
    I_delta = (I_star & new_region) - (I_prev & new_region)
    PF_new = frozenset(sorted(I_prev - I_star)[:len(I_delta)])
    pairs = tuple((i + d, j + d) for i, j in sets.pairs)
    pairs += tuple(zip(sorted(I_delta), sorted(PF_new)))

    I_t = I_delta | (I_prev - PF_new)
    PF_t = PF_prev | PF_new
    RM = frozenset(range(n_t - N_t))
    F = frozenset(range(n_t)) - I_t - PF_t - RM
    return ReferenceSets(n_t, sets.lengths + (N_t,), I_t, F, PF_t, I_delta, RM, pairs)


def masks_from_sets(sets: ReferenceSets):
    """Map the set view onto ``(BitTypeMask, lut)``."""
    n = sets.n
    fr = np.ones(n, dtype=np.uint8)
    fr[sorted(sets.I)] = 0
    rm = np.zeros(n, dtype=np.uint8)
    rm[sorted(sets.RM)] = 1
    pc = np.zeros(n, dtype=np.uint8)
    pc[sorted(sets.PF_delta)] = 1
    lut = np.full(n, -1, dtype=np.int64)
    for i, j in sets.pairs:
        lut[i] = j
    return BitTypeMask(fr, rm, pc), lut


# --------------------------------------------------------------------------- manifest

def to_manifest(plan: HarqPlan) -> str:
    """One line per index: ``index type target`` with type in IV/FRZ/PC/RM/ID."""
    m = plan.masks
    idv = plan.id
    lines = [f"# t={plan.t} n={plan.n_t} lengths={','.join(map(str, plan.lengths))}"]
    for i in range(plan.n_t):
        if m.rm[i]:
            kind = "RM"
        elif m.pc[i]:
            kind = "PC"
        elif m.fr[i]:
            kind = "FRZ"
        elif idv[i]:
            kind = "ID"
        else:
            kind = "IV"
        target = str(plan.lut[i]) if plan.lut[i] >= 0 else "-"
        lines.append(f"{i} {kind} {target}")
    return "\n".join(lines) + "\n"


def parse_manifest(text: str):
    """Inverse of :func:`to_manifest` for the mask and routing parts."""
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    n = len(rows)
    fr, rm, pc = (np.zeros(n, dtype=np.uint8) for _ in range(3))
    lut = np.full(n, -1, dtype=np.int64)
    for pos, (idx, kind, target) in enumerate(rows):
        if int(idx) != pos:
            raise ValueError(f"manifest line {pos + 1}: expected index {pos}, got {idx}")
        if kind not in {"IV", "ID", "FRZ", "PC", "RM"}:
            raise ValueError(f"manifest line {pos + 1}: unknown bit type {kind!r}")
        fr[pos] = kind in {"FRZ", "PC", "RM"}
        rm[pos] = kind == "RM"
        pc[pos] = kind == "PC"
        if target != "-":
            lut[pos] = int(target)
    return BitTypeMask(fr, rm, pc), lut

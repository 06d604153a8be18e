"""LLR-based successive-cancellation list decoding with HARQ-aware fast nodes.

All live paths are stacked along axis 0 and advance together.  Fast nodes
(Rate-0, Rate-1, repetition, single-parity-check) are decoded from their
stage LLRs without visiting the leaves.  PC-frozen inputs are handled by
linearity: each path encodes its own PC-frozen values over the node and XORs
the result onto the candidates of the plain node, so no new node kinds are
needed.  Decoded new-information bits are copied into their PC-frozen
partners through the routing table once the node is finished.

Arithmetic is min-sum.  With a :class:`QuantSpec` the decoder works on
saturating integers, otherwise on float64.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

from .crc import crc_check
from .harq_scheduler import HarqPlan, initial_plan
from .nodes import NodeDescriptor, NodeKind, NodePartition, classify_node, decompose_tree
from .polar_core import CodeConfig, encode

__all__ = [
    "QuantSpec", "PathState", "DecodeResult", "SCLDecoder", "NodeKind", "classify_node",
    "llr_f", "llr_g", "combine_beta", "update_pm", "base_candidates",
    "shifted_candidates", "encode_pc_subtree", "fork_and_select", "descend_and_route",
    "decode_frame",
    "SPEC_BUDGET",
]

# per-node candidate budgets of classic fast-SSCL hardware
SPEC_BUDGET = {NodeKind.RATE0: 1, NodeKind.REP: 2, NodeKind.RATE1: 4, NodeKind.SPC: 8}


@dataclass(frozen=True)
class QuantSpec:
    """Bit widths of channel LLRs, internal LLRs and path metrics.

    Channel LLRs are scaled by ``llr_scale``, truncated toward zero and
    clipped symmetrically; internal LLRs and metrics saturate.
    """

    Qe: int = 5
    Qi: int = 8
    Qm: int = 11
    llr_scale: float = 1.0

    def __post_init__(self):
        if min(self.Qe, self.Qi, self.Qm) < 2:
            raise ValueError("all quantization widths must be >= 2")
        if self.Qi < self.Qe:
            raise ValueError("internal LLRs need at least as many bits as channel LLRs")
        if self.llr_scale <= 0:
            raise ValueError("llr_scale must be positive")

    @property
    def ext_max(self) -> int:
        return (1 << (self.Qe - 1)) - 1

    @property
    def int_max(self) -> int:
        return (1 << (self.Qi - 1)) - 1

    @property
    def pm_max(self) -> int:
        return (1 << self.Qm) - 1

    def quantize(self, llr) -> np.ndarray:
        q = np.trunc(np.asarray(llr, dtype=float) * self.llr_scale)
        return np.clip(q, -self.ext_max, self.ext_max).astype(np.int64)


# --------------------------------------------------------------------------- kernels

def llr_f(a, b):
    """Min-sum check-node update ``sgn(a) sgn(b) min(|a|, |b|)``."""
    a, b = np.asarray(a), np.asarray(b)
    m = np.minimum(np.abs(a), np.abs(b))
    if np.issubdtype(m.dtype, np.integer):
        return np.where((a ^ b) < 0, -m, m)
    return np.where((a < 0) != (b < 0), -m, m)


def llr_g(a, b, partial, quant: QuantSpec | None = None):
    """Variable-node update ``b + (1 - 2 partial) a``, saturated to Qi bits."""
    a, b = np.asarray(a), np.asarray(b)
    out = np.where(np.asarray(partial, dtype=bool), b - a, b + a)
    if quant is not None:
        np.minimum(out, quant.int_max, out=out)
        np.maximum(out, -quant.int_max, out=out)
    return out


def combine_beta(left, right):
    """Partial sums of a parent from the partial sums of its two children."""
    left, right = np.asarray(left, np.uint8), np.asarray(right, np.uint8)
    return np.concatenate([left ^ right, right], axis=-1)


def update_pm(pm, alpha, bit, quant: QuantSpec | None = None):
    """Add ``|alpha|`` when ``bit`` disagrees with the hard decision of ``alpha``."""
    alpha = np.asarray(alpha)
    penalty = np.where((alpha < 0) != np.asarray(bit, dtype=bool), np.abs(alpha), 0)
    out = pm + penalty
    if quant is not None:
        out = np.minimum(out, quant.pm_max)
    return out


def encode_pc_subtree(pc_values, node: NodeDescriptor) -> np.ndarray:
    """Ascend the PC-frozen values of a node to its stage."""
    pc_values = np.asarray(pc_values, np.uint8)
    return encode(pc_values[..., node.sp:node.sp + node.size])


def shifted_candidates(base, pc_code) -> np.ndarray:
    """XOR every base candidate with each path's encoded PC-frozen bits.

    ``base`` has shape (C, Nv); ``pc_code`` has shape (Nv,) or (P, Nv).
    """
    base = np.asarray(base, np.uint8)
    pc_code = np.asarray(pc_code, np.uint8)
    if pc_code.ndim == 1:
        return base ^ pc_code
    return base[None, :, :] ^ pc_code[:, None, :]


@lru_cache(maxsize=None)
def _subsets(q: int) -> np.ndarray:
    if q == 0:
        return np.zeros((1, 0), dtype=np.uint8)
    idx = np.arange(1 << q)
    return ((idx[:, None] >> np.arange(q)) & 1).astype(np.uint8)


def base_candidates(kind: NodeKind, size: int, alpha=None, budget: int | None = None) -> np.ndarray:
    """Candidate codewords of an unshifted node, best first.

    Rate-0 and repetition nodes have fixed candidates.  Rate-1 and SPC
    candidates start from the hard decision of ``alpha`` (a single path's
    node LLRs) and flip its least reliable positions; ``budget`` caps how
    many are kept.
    """
    kind = NodeKind(kind)
    if kind is NodeKind.RATE0:
        return np.zeros((1, size), dtype=np.uint8)
    if kind is NodeKind.REP:
        out = np.zeros((2, size), dtype=np.uint8)
        out[1] = 1
        return out[:budget] if budget else out
    if kind is NodeKind.GENERIC:
        raise ValueError("generic nodes have no fixed candidate list")
    if alpha is None:
        raise ValueError(f"{kind.value} candidates depend on the node LLRs")
    alpha = np.asarray(alpha)[None, :]
    budget = budget or 4
    hd = (alpha < 0).astype(np.uint8)
    flips, _ = _flip_sets(kind, alpha, hd, budget)
    return hd[0] ^ flips[0]


def _flip_sets(kind, alpha, hdp, budget):
    """Cheapest flip patterns per path for Rate-1 / SPC nodes.

    Returns the flip vectors (P, C, Nv) and their costs (P, C), best first.
    Only the ``budget - 1`` (Rate-1) or ``budget`` (SPC) least reliable
    positions are considered, which is enough for the ``budget`` best
    candidates.
    """
    P, Nv = alpha.shape
    mag = np.abs(alpha)
    q = min(budget - 1 if kind is NodeKind.RATE1 else budget, Nv)
    pos = np.argsort(mag, axis=1, kind="stable")[:, :q]
    sub = _subsets(q)
    costs = np.take_along_axis(mag, pos, axis=1) @ sub.T.astype(mag.dtype)
    if kind is NodeKind.SPC:
        need = hdp.sum(axis=1) & 1
        bad = (sub.sum(axis=1) & 1)[None, :] != need[:, None]
        costs = np.where(bad, np.iinfo(np.int64).max // 4 if np.issubdtype(costs.dtype, np.integer)
                         else np.inf, costs)
        width = min(budget, sub.shape[0] // 2)
    else:
        width = min(budget, sub.shape[0])
    order = np.argsort(costs, axis=1, kind="stable")[:, :width]
    cost = np.take_along_axis(costs, order, axis=1)
    flips = np.zeros((P, width, Nv), dtype=np.uint8)
    chosen = sub[order]  # (P, width, q)
    rows = np.arange(P)[:, None, None]
    cols = np.arange(width)[None, :, None]
    flips[rows, cols, pos[:, None, :]] = chosen
    return flips, cost


def fork_and_select(pm, add, list_size: int, quant: QuantSpec | None = None):
    """Keep the ``list_size`` cheapest (parent, candidate) forks.

    Ties resolve by parent index, then candidate index.  Returns the parent
    and candidate index of each survivor and its new path metric, sorted by
    metric.
    """
    pm = np.asarray(pm)
    forks = pm[:, None] + add
    if quant is not None:
        forks = np.minimum(forks, quant.pm_max)
    flat = forks.ravel()
    keep = np.argsort(flat, kind="stable")[:list_size]
    width = add.shape[1]
    return keep // width, keep % width, flat[keep]


def descend_and_route(beta, pc_values, node: NodeDescriptor, lut):
    """Recover the leaf bits of a decided node and route new information bits.

    ``beta`` holds the node's stage-``s`` codeword for each path (P, Nv) and
    ``pc_values`` the per-path PC-frozen store (P, n), updated in place.
    Returns the leaf bits (P, Nv).
    """
    u = encode(beta)
    lut = np.asarray(lut)
    local = lut[node.sp:node.sp + node.size]
    src = np.flatnonzero(local >= 0)
    dst, vals = local[src], u[:, src]
    # a PC-frozen partner may itself feed a later partner: fill the whole chain now
    while dst.size:
        pc_values[:, dst] = vals
        nxt = lut[dst]
        keep = nxt >= 0
        dst, vals = nxt[keep], vals[:, keep]
    return u


# --------------------------------------------------------------------------- decoder

@dataclass
class PathState:
    """State of every live path, stacked along axis 0.

    ``alpha[s]`` and the partial-sum buffers ``beta_l[s]`` / ``beta_r[s]``
    hold one row per path for stage ``s``; ``pc_values`` is the per-path
    PC-frozen value store.
    """

    pm: np.ndarray
    alpha: list
    beta_l: list
    beta_r: list
    pc_values: np.ndarray
    u_hat: np.ndarray

    def select(self, parents: np.ndarray, stage: int = 0) -> None:
        """Keep the rows of ``parents``; buffers below ``stage`` are dead and dropped."""
        for buf, lo in ((self.alpha, stage + 1), (self.beta_l, stage)):
            buf[:lo] = [None] * lo
            for s in range(lo, len(buf)):
                a = buf[s]
                if a is not None:
                    buf[s] = a[parents] if a.shape[0] > 1 else np.repeat(a, parents.size, axis=0)
        self.pc_values = self.pc_values[parents]
        self.u_hat = self.u_hat[parents]


@dataclass
class DecodeResult:
    message: np.ndarray
    crc_ok: bool
    pm: float
    u_hat: np.ndarray
    payloads: np.ndarray  # per surviving path, best metric first
    pms: np.ndarray


@dataclass
class _Leaf:
    node: NodeDescriptor
    pc_local: np.ndarray  # PC-frozen offsets inside the node
    frz_local: np.ndarray  # zero-frozen offsets inside the node
    generic_base: np.ndarray | None = None


class SCLDecoder:
    """List decoder bound to one HARQ plan.

    Parameters
    ----------
    plan : HarqPlan
        Bit roles and routing for the current transmission.
    list_size : int
        Number of surviving paths ``L``.
    quant : QuantSpec, optional
        Fixed-point widths; float64 min-sum when omitted.
    partition : NodePartition, optional
        Node split used for decoding; defaults to the plan's.  Use
        :meth:`NodePartition.full_tree` for plain bit-by-bit SCL.
    crc_select : bool
        Output the best path that passes the CRC instead of the best path.
    budget : dict, optional
        Candidates kept per parent for each node kind.  By default Rate-1
        and SPC nodes keep ``list_size`` candidates, which makes fast-node
        decoding select the same paths as bit-by-bit decoding.
    """

    def __init__(self, plan: HarqPlan, list_size: int = 8, quant: QuantSpec | None = None,
                 partition: NodePartition | None = None, crc_select: bool = True,
                 budget: dict | None = None, debug: bool = False, trace: bool = False):
        if list_size < 1:
            raise ValueError("list_size must be >= 1")
        self.plan = plan
        self.L = list_size
        self.quant = quant
        self.partition = partition or plan.partition
        self.crc_select = crc_select
        self.budget = {NodeKind.RATE0: 1, NodeKind.REP: 2,
                       NodeKind.RATE1: list_size, NodeKind.SPC: list_size}
        if budget:
            self.budget.update({NodeKind(k): int(v) for k, v in budget.items()})
        self.debug = debug
        self.trace = [] if trace else None
        self.n = plan.n_t
        self.m = self.n.bit_length() - 1
        self._check_plan()
        self.nodes = decompose_tree(plan.masks.fr, self.partition)
        self._ops = self._compile()

    @classmethod
    def for_code(cls, code: CodeConfig, **kwargs) -> "SCLDecoder":
        return cls(initial_plan(code, partition=kwargs.get("partition")), **kwargs)

    def _check_plan(self):
        plan, n = self.plan, self.n
        m = plan.masks
        if len(m) != n or plan.lut.shape != (n,):
            raise ValueError("plan vectors do not match the mother length")
        src = np.flatnonzero(plan.lut >= 0)
        dst = plan.lut[src]
        if np.any(dst >= n) or np.any(m.pc[dst] == 0):
            raise ValueError("routing table points at a position that is not PC-frozen")
        if np.unique(dst).size != dst.size:
            raise ValueError("routing table is not one-to-one")
        if np.any(dst <= src):
            raise ValueError("a routed bit must be decoded before its PC-frozen partner")
        if np.any(src >= n - plan.N1) or np.any((m.iv[src] | m.pc[src]) == 0):
            raise ValueError("routing source is not a later-transmission information bit")
        if plan.msg_positions.size != plan.K:
            raise ValueError("message positions do not match k + crc_len")

    def _compile(self):
        plan = self.plan
        fr, pc = plan.masks.fr, plan.masks.pc
        lut = plan.lut
        owner = np.empty(self.n, dtype=np.int64)
        leaves = {}
        for idx, node in enumerate(self.nodes):
            span = slice(node.sp, node.sp + node.size)
            owner[span] = idx
            leaf = _Leaf(node,
                         pc_local=np.flatnonzero(pc[span]),
                         frz_local=np.flatnonzero(fr[span] & (1 - pc[span])))
            if node.kind is NodeKind.GENERIC:
                info = np.flatnonzero(fr[span] == 0)
                if info.size > 12:
                    raise ValueError(f"generic node at {node.sp} has {info.size} information bits")
                U = np.zeros((1 << info.size, node.size), dtype=np.uint8)
                U[:, info] = np.array(list(product((0, 1), repeat=info.size)), dtype=np.uint8)
                leaf.generic_base = encode(U)
            leaves[(node.sp, node.s)] = leaf
        src = np.flatnonzero((lut >= 0) & (pc == 0))
        if np.any(owner[src] == owner[lut[src]]):
            raise ValueError("plan has an unresolved intra-node dependency for this partition")

        ops = []

        def build(sp, s, slot):
            leaf = leaves.get((sp, s))
            if leaf is not None:
                ops.append(("leaf", s, slot, leaf))
                return
            h = 1 << (s - 1)
            ops.append(("f", s, None, None))
            build(sp, s - 1, 0)
            ops.append(("g", s, None, None))
            build(sp + h, s - 1, 1)
            ops.append(("up", s, slot, None))

        build(0, self.m, 2)
        return ops

    # ------------------------------------------------------------------ decoding

    def decode(self, llr) -> DecodeResult:
        llr = np.asarray(llr)
        if llr.shape != (self.n,):
            raise ValueError(f"expected {self.n} channel LLRs, got shape {llr.shape}")
        q = self.quant
        if q is not None:
            if np.issubdtype(llr.dtype, np.floating):
                llr = q.quantize(llr)
            llr = llr.astype(np.int64)
            if self.debug:
                assert np.all(np.abs(llr) <= q.ext_max), "channel LLR outside Qe range"
        else:
            llr = llr.astype(float)
        m = self.m
        st = PathState(
            pm=np.zeros(1, dtype=llr.dtype),
            alpha=[None] * m + [llr[None, :]],
            beta_l=[None] * (m + 1), beta_r=[None] * (m + 1),
            pc_values=np.zeros((1, self.n), dtype=np.uint8),
            u_hat=np.zeros((1, self.n), dtype=np.uint8),
        )
        if self.trace is not None:
            self.trace.clear()
        root = None
        for op, s, slot, leaf in self._ops:
            if op == "f":
                a = st.alpha[s]
                h = a.shape[1] // 2
                st.alpha[s - 1] = llr_f(a[:, :h], a[:, h:])
            elif op == "g":
                a = st.alpha[s]
                h = a.shape[1] // 2
                st.alpha[s - 1] = llr_g(a[:, :h], a[:, h:], st.beta_l[s - 1], q)
            elif op == "up":
                beta = combine_beta(st.beta_l[s - 1], st.beta_r[s - 1])
                root = self._store(st, s, slot, beta)
            else:
                beta = self._process_leaf(st, leaf)
                root = self._store(st, s, slot, beta)
            if self.debug and op in ("f", "g") and q is not None:
                assert np.all(np.abs(st.alpha[s - 1]) <= q.int_max), "internal LLR overflow"
        return self._finish(st, root)

    @staticmethod
    def _store(st, s, slot, beta):
        if slot == 0:
            st.beta_l[s] = beta
        elif slot == 1:
            st.beta_r[s] = beta
        return beta

    def _process_leaf(self, st: PathState, leaf: _Leaf) -> np.ndarray:
        node = leaf.node
        a = st.alpha[node.s]
        if a.shape[0] != st.pm.shape[0]:
            a = np.repeat(a, st.pm.shape[0], axis=0)
        P, Nv = a.shape
        if leaf.pc_local.size:
            c = encode_pc_subtree(st.pc_values, node)
        else:
            c = np.zeros((P, Nv), dtype=np.uint8)
        hd = (a < 0).astype(np.uint8)
        hdp = hd ^ c
        mag = np.abs(a)
        kind = node.kind

        flips = None
        if kind is NodeKind.RATE0:
            add = np.sum(mag * hdp, axis=1, keepdims=True)
        elif kind is NodeKind.REP:
            cost0 = np.sum(mag * hdp, axis=1)
            add = np.stack([cost0, np.sum(mag, axis=1) - cost0], axis=1)
            add = add[:, :max(1, min(2, self.budget[kind]))]
        elif kind in (NodeKind.RATE1, NodeKind.SPC):
            flips, add = _flip_sets(kind, a, hdp, self.budget[kind])
        else:
            shifted = shifted_candidates(leaf.generic_base, c)
            add = np.sum(mag[:, None, :] * (shifted != hd[:, None, :]), axis=2)
            b = self.budget.get(NodeKind.GENERIC)
            if b:
                order = np.argsort(add, axis=1, kind="stable")[:, :b]
                shifted = np.take_along_axis(shifted, order[:, :, None], axis=1)
                add = np.take_along_axis(add, order, axis=1)

        if add.shape[1] == 1:
            parents = np.arange(P)
            cand = np.zeros(P, dtype=np.int64)
            pm = st.pm + add[:, 0]
            if self.quant is not None:
                pm = np.minimum(pm, self.quant.pm_max)
        else:
            parents, cand, pm = fork_and_select(st.pm, add, self.L, self.quant)

        if kind is NodeKind.RATE0:
            beta = c[parents]
        elif kind is NodeKind.REP:
            beta = c[parents] ^ cand[:, None].astype(np.uint8)
        elif flips is not None:
            beta = hd[parents] ^ flips[parents, cand]
        else:
            beta = shifted[parents, cand]

        if parents.size != P or np.any(parents != np.arange(P)):
            st.select(parents, node.s)
        st.pm = pm
        u = descend_and_route(beta, st.pc_values, node, self.plan.lut)
        if self.debug:
            sl = st.pc_values[:, node.sp:node.sp + Nv]
            assert not np.any(u[:, leaf.frz_local]), "zero-frozen leaf decoded as 1"
            assert np.array_equal(u[:, leaf.pc_local], sl[:, leaf.pc_local]), \
                "PC-frozen leaf disagrees with its stored value"
        st.u_hat[:, node.sp:node.sp + Nv] = u
        if self.trace is not None:
            pms = " ".join(str(v) for v in (pm if self.quant else np.round(pm, 4)))
            self.trace.append(f"{node.sp} {node.s} {kind.value} {pms}")
        return beta

    def _finish(self, st: PathState, root) -> DecodeResult:
        order = np.argsort(st.pm, kind="stable")
        pos = self.plan.msg_positions
        payloads = st.u_hat[order][:, pos]
        ok = np.atleast_1d(crc_check(payloads, self.plan.crc_len)) if self.plan.crc_len \
            else np.ones(len(order), dtype=bool)
        pick = 0
        if self.crc_select and self.plan.crc_len:
            passing = np.flatnonzero(ok)
            if passing.size:
                pick = int(passing[0])
        best = order[pick]
        return DecodeResult(
            message=payloads[pick, :self.plan.k].copy(),
            crc_ok=bool(ok[pick]),
            pm=st.pm[best].item(),
            u_hat=st.u_hat[best].copy(),
            payloads=payloads,
            pms=st.pm[order],
        )


def decode_frame(llr, plan: HarqPlan, L: int = 8, quant: QuantSpec | None = None, **kwargs):
    """One-shot decode; returns ``(message, crc_ok, pm)``."""
    res = SCLDecoder(plan, L, quant, **kwargs).decode(llr)
    return res.message, res.crc_ok, res.pm

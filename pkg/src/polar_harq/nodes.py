"""Decoding-tree node kinds and the split of a code into decodable nodes.

Shared by the decoder (which walks the nodes) and the HARQ scheduler (which
must know node boundaries to resolve intra-node dependencies).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class NodeKind(str, Enum):
    RATE0 = "Rate0"
    RATE1 = "Rate1"
    REP = "REP"
    SPC = "SPC"
    GENERIC = "Generic"


FAST_KINDS = (NodeKind.RATE0, NodeKind.RATE1, NodeKind.REP, NodeKind.SPC)


@dataclass(frozen=True)
class NodeDescriptor:
    sp: int  # first leaf index, 0-based
    s: int  # stage; the node spans 2**s leaves
    kind: NodeKind

    @property
    def size(self) -> int:
        return 1 << self.s

    @property
    def span(self) -> range:
        return range(self.sp, self.sp + self.size)


@dataclass(frozen=True)
class NodePartition:
    """How the decoder cuts the tree.

    ``supported`` maps each fast kind to the largest node size decoded
    directly.  Nodes that fit no supported kind are split until they reach
    ``min_node_size``, where they are decoded by enumerating all their
    information bits.
    """

    min_node_size: int = 1
    supported: dict = field(default_factory=lambda: {k: 1 << 30 for k in FAST_KINDS})

    def __post_init__(self):
        m = self.min_node_size
        if m < 1 or m & (m - 1):
            raise ValueError("min_node_size must be a power of two >= 1")
        object.__setattr__(self, "supported",
                           {NodeKind(k): int(v) for k, v in dict(self.supported).items()})

    @classmethod
    def full_tree(cls) -> "NodePartition":
        """Bit-by-bit traversal down to single leaves."""
        return cls(1, {})

    def accepts(self, kind: NodeKind, size: int) -> bool:
        return size <= self.supported.get(kind, 0)


def classify_node(fr) -> NodeKind:
    """Node kind from its frozen flags; PC-frozen leaves count as frozen."""
    fr = np.asarray(fr)
    if fr.all():
        return NodeKind.RATE0
    if not fr.any():
        return NodeKind.RATE1
    if fr[:-1].all():
        return NodeKind.REP
    if fr[0] and not fr[1:].any():
        return NodeKind.SPC
    return NodeKind.GENERIC


def decompose_tree(fr, partition: NodePartition | None = None) -> list[NodeDescriptor]:
    """Leaf nodes of the decoding tree in decoding (left-to-right) order."""
    fr = np.asarray(fr)
    partition = partition or NodePartition()
    n = fr.size
    m = n.bit_length() - 1
    out: list[NodeDescriptor] = []

    def visit(sp: int, s: int):
        size = 1 << s
        kind = classify_node(fr[sp:sp + size])
        if size == 1:
            out.append(NodeDescriptor(sp, 0, kind))
        elif kind is not NodeKind.GENERIC and partition.accepts(kind, size):
            out.append(NodeDescriptor(sp, s, kind))
        elif size <= partition.min_node_size:
            out.append(NodeDescriptor(sp, s, NodeKind.GENERIC))
        else:
            visit(sp, s - 1)
            visit(sp + size // 2, s - 1)

    visit(0, m)
    return out

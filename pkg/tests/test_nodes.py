import numpy as np
import pytest
from hypothesis import given, strategies as st

from polar_harq.nodes import NodeKind, NodePartition, classify_node, decompose_tree
from polar_harq.polar_core import str_to_bits


@pytest.mark.parametrize("fr,kind", [
    ("1111", NodeKind.RATE0), ("1110", NodeKind.REP), ("0000", NodeKind.RATE1),
    ("1000", NodeKind.SPC), ("0111", NodeKind.GENERIC), ("1100", NodeKind.GENERIC),
    ("10", NodeKind.REP), ("1", NodeKind.RATE0), ("0", NodeKind.RATE1),
])
def test_classify(fr, kind):
    assert classify_node(str_to_bits(fr)) is kind


def test_pc_frozen_counts_as_frozen():
    # a node with a PC-frozen first leaf and information elsewhere is still SPC
    assert classify_node(str_to_bits("10000000")) is NodeKind.SPC


fr_vectors = st.integers(0, 7).flatmap(
    lambda m: st.lists(st.integers(0, 1), min_size=1 << m, max_size=1 << m))
partitions = st.builds(NodePartition, st.sampled_from([1, 2, 4, 8]),
                       st.dictionaries(st.sampled_from(list(NodeKind)[:4]),
                                       st.sampled_from([2, 4, 8, 1 << 20])))


@given(fr_vectors, partitions)
def test_decomposition_tiles_the_code(fr, part):
    fr = np.array(fr)
    nodes = decompose_tree(fr, part)
    covered = [i for nd in nodes for i in nd.span]
    assert covered == list(range(fr.size))
    for nd in nodes:
        assert nd.sp % nd.size == 0
        seg = fr[nd.sp:nd.sp + nd.size]
        if nd.kind is not NodeKind.GENERIC:
            assert classify_node(seg) is nd.kind
        else:
            assert nd.size <= part.min_node_size


def test_full_tree_gives_single_leaves():
    nodes = decompose_tree(np.array([1, 0, 1, 1, 0, 0, 1, 0]), NodePartition.full_tree())
    assert [nd.size for nd in nodes] == [1] * 8


def test_partition_validation():
    with pytest.raises(ValueError):
        NodePartition(3)

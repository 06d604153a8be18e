import math

import pytest
from hypothesis import given, strategies as st

from polar_harq.complexity_model import (GateModel, ceil_log2, complexity_report, format_table,
                                         gate_accumulator, gate_costs_node, gate_sorter,
                                         latency_node, mem_scl, mem_scl_harq, memory_overhead,
                                         overhead_ratio, report_csv, routing_sum)


def test_memory_examples():
    assert mem_scl(1024, 8, 5, 6, 8) == 72712
    assert memory_overhead(1024, 8) == 19456
    assert round(100 * overhead_ratio(1024, 8, 5, 6, 8)) == 27
    assert overhead_ratio(1024, 8, 5, 6, 8) == pytest.approx(0.26757, abs=1e-5)
    assert round(100 * overhead_ratio(8192, 8, 5, 8, 11)) == 25
    with pytest.raises(ValueError):
        mem_scl(0, 8, 5, 6, 8)


@given(st.integers(0, 14), st.integers(1, 64), st.integers(2, 8), st.integers(2, 10),
       st.integers(2, 14))
def test_overhead_identity(m, L, Qe, Qi, Qm):
    N = 1 << m
    assert mem_scl_harq(N, L, Qe, Qi, Qm) - mem_scl(N, L, Qe, Qi, Qm) == memory_overhead(N, L)


@given(st.integers(1, 13), st.integers(1, 32))
def test_overhead_monotone(m, L):
    N = 1 << m
    assert memory_overhead(2 * N, L) > memory_overhead(N, L)
    assert memory_overhead(N, L + 1) > memory_overhead(N, L)


def test_ceil_log2():
    assert [ceil_log2(x) for x in (1, 2, 3, 4, 5, 1024, 1025)] == [0, 1, 2, 2, 3, 10, 11]
    with pytest.raises(ValueError):
        ceil_log2(0)


@given(st.integers(1, 300), st.integers(0, 6))
def test_routing_sum_matches_float_log(sp, s):
    def term(i):
        c = math.ceil(math.log2(i)) if i > 1 else 0
        return 2 ** c * c
    assert routing_sum(sp, s) == sum(term(i) for i in range(sp, sp + 2 ** s + 1))
    assert routing_sum(sp, s, "zero") == sum(term(i) for i in range(sp, sp + 2 ** s))


def test_routing_and_node_costs():
    assert routing_sum(1, 2) == 42
    with pytest.raises(ValueError):
        routing_sum(1, 2, "other")
    c = gate_costs_node(16, 8, 4, 1)
    assert c == {"ascend": 128, "descend": 128, "candidates": 128, "routing": 3144}
    with pytest.raises(ValueError):
        gate_costs_node(12, 8, 4, 1, s=4)


def test_sorter():
    assert gate_sorter(2, 2, 1) == 270
    assert gate_sorter(1, 4, 1) == 270
    assert gate_sorter(8, 4, 8) == 86400
    for bad in ((3, 1), (1, 1), (3, 4)):
        with pytest.raises(ValueError):
            gate_sorter(*bad, 8)


@given(st.integers(1, 12), st.integers(1, 16))
def test_sorter_linear_in_metric_width(p, q):
    P = 1 << p
    assert gate_sorter(P, 1, q) * 2 == gate_sorter(P, 1, 2 * q)


def test_accumulator_and_latency():
    assert gate_accumulator(3) == 18
    assert gate_accumulator(1024) == 55356
    with pytest.raises(ValueError):
        gate_accumulator(2)
    assert latency_node(16, 1024) == {"ascend": 16, "descend": 16, "candidates": 16, "routing": 30}


def test_gate_model_rejects_nonpositive():
    with pytest.raises(ValueError):
        GateModel(mux2_cost=0)
    assert GateModel().gate_cost("XOR") == 4


def test_report_formats():
    rows = complexity_report(1024, 8, 5, 6, 8)
    byop = {r.operation: r for r in rows}
    assert byop["memory_overhead_percent"].nand_cost == "27%"
    assert byop["accumulator"].nand_cost == 55356
    table = format_table(rows)
    assert "27%" in table and table.splitlines()[0].split() == ["operation", "parameters",
                                                                 "nand_cost", "latency"]
    csv_text = report_csv(rows)
    assert csv_text.count("\n") == len(rows) + 1

"""Closed-form memory, gate-count and latency model of the HARQ decoder additions.

Costs are in NAND-gate equivalents, latencies in NAND-gate delays.  Logs
are base two.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

__all__ = [
    "GateModel", "ceil_log2", "mem_scl", "mem_scl_harq", "memory_overhead", "overhead_ratio",
    "gate_costs_node", "routing_sum", "gate_sorter", "gate_accumulator", "latency_node",
    "ReportRow", "complexity_report", "format_table", "report_csv", "PRESETS",
]


@dataclass(frozen=True)
class GateModel:
    """Unit costs and delays of the primitives, in NAND equivalents."""

    cost: tuple = (("NOT", 1), ("AND", 2), ("OR", 3), ("NOR", 4), ("XOR", 4))
    latency: tuple = (("NOT", 1), ("AND", 2), ("OR", 2), ("NOR", 3), ("XOR", 3))
    mux2_cost: int = 4
    mux2_latency: int = 3
    comparator_cost: int = 45  # 6-input comparator
    half_adder_cost: int = 6
    xor_stage_latency: int = 4  # per stage of an XOR array or candidate generator
    c_nand: int = 1

    def __post_init__(self):
        vals = [v for _, v in self.cost + self.latency]
        vals += [self.mux2_cost, self.mux2_latency, self.comparator_cost,
                 self.half_adder_cost, self.xor_stage_latency, self.c_nand]
        if min(vals) <= 0:
            raise ValueError("gate costs and latencies must be positive")

    def gate_cost(self, gate: str) -> int:
        return dict(self.cost)[gate]

    def gate_latency(self, gate: str) -> int:
        return dict(self.latency)[gate]


DEFAULT = GateModel()


def ceil_log2(x: int) -> int:
    """``ceil(log2 x)`` for integers ``x >= 1``."""
    if x < 1:
        raise ValueError("ceil_log2 needs x >= 1")
    return (x - 1).bit_length()


def _check_positive(**kw):
    for name, v in kw.items():
        if v <= 0:
            raise ValueError(f"{name} must be positive")


# --------------------------------------------------------------------------- memory

def mem_scl(N: int, L: int, Qe: int, Qi: int, Qm: int) -> int:
    """Bits of LLR, partial-sum, metric and control storage of a plain SCL decoder."""
    _check_positive(N=N, L=L, Qe=Qe, Qi=Qi, Qm=Qm)
    return N * Qe + (N - 1) * L * Qi + L * Qm + (2 * N - 1) * L + 2 * N


def memory_overhead(N: int, L: int) -> int:
    """Extra bits: PC-frozen mask, per-path PC values and the routing table."""
    _check_positive(N=N, L=L)
    return (L + 1 + ceil_log2(N)) * N


def mem_scl_harq(N: int, L: int, Qe: int, Qi: int, Qm: int) -> int:
    return mem_scl(N, L, Qe, Qi, Qm) + N + L * N + N * ceil_log2(N)


def overhead_ratio(N: int, L: int, Qe: int, Qi: int, Qm: int) -> float:
    return memory_overhead(N, L) / mem_scl(N, L, Qe, Qi, Qm)


# --------------------------------------------------------------------------- gates

def routing_sum(sp: int, s: int, origin: str = "printed") -> int:
    """``sum 2**ceil(log2 i) * ceil(log2 i)`` over the node's leaf indices.

    ``sp`` is 1-based.  The default takes the bounds as printed,
    ``i = sp .. sp + 2**s`` inclusive; ``origin="zero"`` sums over the
    ``2**s`` leaves ``i = sp .. sp + 2**s - 1`` instead.  An ``i = 0`` term
    contributes nothing.
    """
    if origin == "printed":
        idx = range(sp, sp + (1 << s) + 1)
    elif origin == "zero":
        idx = range(sp, sp + (1 << s))
    else:
        raise ValueError(f"unknown routing origin {origin!r}")
    total = 0
    for i in idx:
        if i >= 1:
            c = ceil_log2(i)
            total += (1 << c) * c
    return total


def gate_costs_node(N_v: int, L: int, L_a: int, sp: int, s: int | None = None,
                    model: GateModel = DEFAULT, origin: str = "printed") -> dict:
    """NAND cost of the per-node HARQ operations."""
    if s is None:
        s = ceil_log2(N_v)
    if N_v != 1 << s:
        raise ValueError("N_v must equal 2**s")
    _check_positive(L=L, L_a=L_a)
    xor = model.gate_cost("XOR")
    xor_array = xor * (N_v // 2) * s * model.c_nand
    return {
        "ascend": xor_array,
        "descend": xor_array,
        "candidates": xor * L_a * L * model.c_nand,
        "routing": model.mux2_cost * routing_sum(sp, s, origin) * model.c_nand,
    }


def gate_sorter(L: int, L_a: int, Q_pm: int, model: GateModel = DEFAULT) -> int:
    """Bitonic sorter over ``L * L_a`` forks with ``Q_pm``-bit metrics."""
    P = L * L_a
    if P < 2 or P & (P - 1):
        raise ValueError(f"bitonic sorting needs a power-of-two input count >= 2, got {P}")
    _check_positive(Q_pm=Q_pm)
    lg = P.bit_length() - 1
    return P * lg * (lg + 1) * Q_pm * model.comparator_cost // 4


def gate_accumulator(N: int, model: GateModel = DEFAULT) -> int:
    """Cascaded half adders counting PC-frozen positions."""
    if N < 3:
        raise ValueError("accumulator model needs N >= 3")
    h = model.half_adder_cost
    return (sum(ceil_log2(i + 1) * h for i in range(3, N + 1)) + h) * model.c_nand


def latency_node(N_v: int, N: int, model: GateModel = DEFAULT) -> dict:
    xor_array = model.xor_stage_latency * ceil_log2(N_v)
    return {
        "ascend": xor_array,
        "descend": xor_array,
        "candidates": xor_array,
        "routing": model.mux2_latency * ceil_log2(N),
    }


# --------------------------------------------------------------------------- report

PRESETS = {
    "n1024": dict(N=1024, L=8, Qe=5, Qi=6, Qm=8),
    "n8192": dict(N=8192, L=8, Qe=5, Qi=8, Qm=11),
}


@dataclass(frozen=True)
class ReportRow:
    operation: str
    parameters: str
    nand_cost: int | str
    latency: int | str


def complexity_report(N: int, L: int, Qe: int, Qi: int, Qm: int, N_v: int = 16,
                      L_a: int = 4, sp: int = 1, model: GateModel = DEFAULT) -> list[ReportRow]:
    base = mem_scl(N, L, Qe, Qi, Qm)
    extra = memory_overhead(N, L)
    p = f"N={N} L={L} Qe={Qe} Qi={Qi} Qm={Qm}"
    rows = [
        ReportRow("memory_scl_bits", p, base, "-"),
        ReportRow("memory_harq_bits", p, mem_scl_harq(N, L, Qe, Qi, Qm), "-"),
        ReportRow("memory_overhead_bits", p, extra, "-"),
        ReportRow("memory_overhead_percent", p, f"{round(100 * extra / base)}%", "-"),
    ]
    s = ceil_log2(N_v)
    costs = gate_costs_node(N_v, L, L_a, sp, s, model)
    lat = latency_node(N_v, N, model)
    q = f"N_v={N_v} L={L} L_a={L_a} sp={sp}"
    for op in ("ascend", "descend", "candidates", "routing"):
        rows.append(ReportRow(op, q, costs[op], lat[op]))
    rows.append(ReportRow("sorter", f"L={L} L_a={L_a} Q_pm={Qm}", gate_sorter(L, L_a, Qm, model), "-"))
    rows.append(ReportRow("accumulator", f"N={N}", gate_accumulator(N, model), "-"))
    return rows


def format_table(rows: list[ReportRow]) -> str:
    header = ("operation", "parameters", "nand_cost", "latency")
    cells = [header] + [(r.operation, r.parameters, str(r.nand_cost), str(r.latency)) for r in rows]
    widths = [max(len(c[i]) for c in cells) for i in range(4)]
    lines = ["  ".join(c[i].ljust(widths[i]) for i in range(4)).rstrip() for c in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def report_csv(rows: list[ReportRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("operation", "parameters", "nand_cost", "latency"))
    for r in rows:
        w.writerow((r.operation, r.parameters, r.nand_cost, r.latency))
    return buf.getvalue()

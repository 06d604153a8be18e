"""Incremental-redundancy HARQ for polar codes with a fast list decoder."""

from .crc import crc_attach, crc_check
from .harq_scheduler import HarqPlan, initial_plan, input_vector, next_transmission, plan_schedule
from .nodes import NodeKind, NodePartition, classify_node, decompose_tree
from .polar_core import BitTypeMask, CodeConfig, build_code, construct_reliability, encode
from .scl_decoder import QuantSpec, SCLDecoder, decode_frame

__version__ = "0.1.0"

__all__ = [
    "BitTypeMask", "CodeConfig", "HarqPlan", "NodeKind", "NodePartition", "QuantSpec",
    "SCLDecoder", "build_code", "classify_node", "construct_reliability", "crc_attach",
    "crc_check", "decode_frame", "decompose_tree", "encode", "initial_plan", "input_vector",
    "next_transmission", "plan_schedule",
]

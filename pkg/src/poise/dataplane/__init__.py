"""Discrete-event model of the switch data plane."""
from .bloom import BloomFilter, analytic_fp_rate
from .config import PipelineConfig
from .crc import CCITT_FALSE, Crc16, crc16
from .evaluator import Decision, Evaluator, MonitorRegisters, eval_policy
from .packet import CONTEXT, DATA, FlowKey, Packet
from .sim import SimResult, Simulator, simulate
from .switch import BaselineSwitch, PoiseSwitch, SwitchState

__all__ = [
    "BaselineSwitch", "BloomFilter", "CCITT_FALSE", "CONTEXT", "Crc16", "DATA", "Decision",
    "Evaluator", "FlowKey", "MonitorRegisters", "Packet", "PipelineConfig", "PoiseSwitch",
    "SimResult", "Simulator", "SwitchState", "analytic_fp_rate", "crc16", "eval_policy", "simulate",
]

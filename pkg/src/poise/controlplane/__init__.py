"""Switch-local control plane and the reactive baseline controller."""
from .baseline import BaselineConfig, BaselineController
from .local import ZERO_LATENCY, LatencyModel, LocalControlPlane, PendingInsert
from .logger import LogSink, logger_sink

__all__ = [
    "BaselineConfig", "BaselineController", "LatencyModel", "LocalControlPlane", "LogSink",
    "PendingInsert", "ZERO_LATENCY", "logger_sink",
]

from .compose import compose
from .errors import CompositionError, PolicyError, PolicySyntaxError, ValidationError
from .interp import Interpreter, MonitorOracle
from .parser import parse, parse_file, parse_file_text
from .pretty import pretty
from .validate import ValidatedPolicy, validate

__all__ = [
    "compose", "parse", "parse_file", "parse_file_text", "pretty", "validate",
    "Interpreter", "MonitorOracle", "ValidatedPolicy",
    "CompositionError", "PolicyError", "PolicySyntaxError", "ValidationError",
]

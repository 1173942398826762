"""Symbolic flatness analysis for two-input nonlinear control systems."""
from .expr import Expr, Symbol, UnknownFunction, differentiate, substitute, to_string
from .parsing import parse, parse_function
from .vfields import (Chart, Distribution, SamplePlan, VectorField, generic_rank,
                      is_involutive, lie_bracket)
from .sysmodel import (ControlSystem, InputTransform, apply_input_transform, brunovsky,
                       prolong, relative_degree, time_derivative)
from .flatness import (FlatCertificate, SflReport, check_sfl, linearizing_output_check,
                       prolongation_procedure, verify_certificate_numeric,
                       verify_certificate_symbolic)
from .obstructions import extract_obstructions, obstruction_chain
from .numerics import PolySignal, integrate_rk4
from .fileformat import (format_system, load_certificate, load_system, load_transform,
                         parse_certificate, parse_system, parse_transform)
from .repro import repro_counterexample

__all__ = [
    "Chart",
    "ControlSystem",
    "Distribution",
    "Expr",
    "FlatCertificate",
    "InputTransform",
    "PolySignal",
    "SamplePlan",
    "SflReport",
    "Symbol",
    "UnknownFunction",
    "VectorField",
    "apply_input_transform",
    "brunovsky",
    "check_sfl",
    "differentiate",
    "extract_obstructions",
    "format_system",
    "generic_rank",
    "integrate_rk4",
    "is_involutive",
    "lie_bracket",
    "linearizing_output_check",
    "load_certificate",
    "load_system",
    "load_transform",
    "obstruction_chain",
    "parse",
    "parse_certificate",
    "parse_function",
    "parse_system",
    "parse_transform",
    "prolong",
    "prolongation_procedure",
    "relative_degree",
    "repro_counterexample",
    "substitute",
    "time_derivative",
    "to_string",
    "verify_certificate_numeric",
    "verify_certificate_symbolic",
]

__version__ = "0.1.0"

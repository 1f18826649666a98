from . import analyze_control, analyze_pencil, reduce, reproduce, solve, turnpike, validate

__all__ = ["analyze_control", "analyze_pencil", "reduce", "reproduce", "solve", "turnpike", "validate"]

from dataclasses import dataclass, fields, is_dataclass
from typing import Any, Dict, List

import numpy as np


def to_plain(value: Any) -> Any:
    """numpy-aware conversion to JSON-friendly Python values"""
    if isinstance(value, Base):
        return value.to_dict()
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return [[float(z.real), float(z.imag)] for z in value.reshape(-1)]
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if is_dataclass(value) and not isinstance(value, type):
        return {f.name: to_plain(getattr(value, f.name)) for f in fields(value)}
    if hasattr(value, "to_list"):
        return value.to_list()
    return value


class Base:
    """Shared behaviour of the immutable domain records"""

    def to_dict(self) -> Dict[str, Any]:
        """Convert record to a dictionary of plain values"""
        return {f.name: to_plain(getattr(self, f.name)) for f in fields(self)}

    def __repr__(self) -> str:
        shown: List[str] = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, np.ndarray):
                shown.append(f"{f.name}=<{'x'.join(map(str, value.shape))}>")
            elif isinstance(value, (int, float, str, bool)) or value is None:
                shown.append(f"{f.name}={value!r}")
        return f"<{self.__class__.__name__}({', '.join(shown)})>"


@dataclass(frozen=True)
class Violation(Base):
    condition: str
    residual: float

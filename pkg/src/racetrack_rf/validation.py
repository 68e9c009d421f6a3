"""Input checks shared by the estimator wrappers and the command line."""

from __future__ import annotations

from typing import Mapping, Sequence

from .geometry import (
    DEFAULT_GEOMETRY,
    RegisterFileGeometry,
    ValidatedGeometry,
    load_geometry,
    validate_geometry,
)
from .trace import TraceInstruction

__all__ = ["check_geometry", "check_trace", "check_window"]


def check_geometry(geometry) -> ValidatedGeometry:
    """Coerce ``geometry`` to a :class:`ValidatedGeometry`.

    Accepts ``None`` (default geometry), a geometry dataclass, a mapping of
    field names, a 5-tuple ``(N, W, n_ap, R, B)``, or a ``key=value`` string
    or file path.
    """
    if geometry is None:
        return DEFAULT_GEOMETRY
    if isinstance(geometry, ValidatedGeometry):
        return geometry
    if isinstance(geometry, RegisterFileGeometry):
        return validate_geometry(geometry)
    if isinstance(geometry, str):
        return load_geometry(geometry)
    if isinstance(geometry, Mapping):
        return validate_geometry(RegisterFileGeometry(**geometry))
    if isinstance(geometry, Sequence) and len(geometry) == 5:
        return validate_geometry(RegisterFileGeometry(*geometry))
    raise TypeError(f"cannot interpret {type(geometry).__name__} as a register file geometry")


def check_window(window) -> int:
    if isinstance(window, bool) or not isinstance(window, int):
        raise TypeError(f"window must be an int, got {type(window).__name__}")
    if window < 1:
        raise ValueError(f"window must be at least 1, got {window}")
    return window


def check_trace(trace: Sequence[TraceInstruction], geom: ValidatedGeometry) -> list[TraceInstruction]:
    """Make sure every operand fits ``geom``; returns the trace as a list."""
    out = list(trace)
    for pos, ins in enumerate(out):
        if not isinstance(ins, TraceInstruction):
            raise TypeError(f"trace position {pos}: expected TraceInstruction, got {type(ins).__name__}")
        for op in (*ins.sources, *ins.destinations):
            if not 0 <= op.reg < geom.num_regs:
                raise ValueError(f"trace position {pos}: register {op.reg} outside 0..{geom.num_regs - 1}")
            if not 1 <= op.width <= geom.reg_bits:
                raise ValueError(f"trace position {pos}: width {op.width} exceeds {geom.reg_bits} bits")
    return out

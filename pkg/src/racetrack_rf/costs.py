"""Shift, energy and latency cost equations for single register accesses.

Every access is first broken down into integer operation counts
(:class:`OpCounts`); energy and latency follow by weighting those counts with
:class:`~racetrack_rf.geometry.CostParams`. Keeping counts integral makes long
simulations exact and lets the simulator accumulate with plain integers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

from .geometry import AllocationMode, CostParams, ValidatedGeometry

__all__ = [
    "AccessKind",
    "CostTriple",
    "OpCounts",
    "RegisterValue",
    "WriteDelta",
    "access_cost",
    "access_ops",
    "energy_access",
    "latency_access",
    "shift_cost_h",
    "shift_cost_v",
    "write_delta",
]

DEFAULT_PARAMS = CostParams()


class AccessKind(enum.Enum):
    READ = "read"
    WRITE = "write"


@dataclass(frozen=True)
class RegisterValue:
    """Fixed-width register content."""

    bits: int
    width: int

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("width must be positive")
        if not 0 <= self.bits < (1 << self.width):
            raise ValueError(f"value {self.bits:#x} does not fit in {self.width} bits")

    @property
    def popcount(self) -> int:
        return self.bits.bit_count()


@dataclass(frozen=True)
class WriteDelta:
    """Skyrmion bookkeeping for overwriting one pattern with another.

    ``q``/``qp`` are the set-bit counts of the old/new value, ``j`` the
    surplus skyrmions to remove and ``k`` the missing ones to insert.
    """

    q: int
    qp: int
    j: int
    k: int

    @classmethod
    def from_popcounts(cls, q: int, qp: int) -> "WriteDelta":
        return cls(q, qp, max(q - qp, 0), max(qp - q, 0))


def write_delta(old: RegisterValue, new: RegisterValue) -> WriteDelta:
    if old.width != new.width:
        raise ValueError(f"width mismatch: {old.width} vs {new.width}")
    return WriteDelta.from_popcounts(old.popcount, new.popcount)


@dataclass(frozen=True)
class CostTriple:
    shifts: int = 0
    energy: Fraction = Fraction(0)
    latency: Fraction = Fraction(0)

    def __add__(self, other: "CostTriple") -> "CostTriple":
        return CostTriple(self.shifts + other.shifts, self.energy + other.energy, self.latency + other.latency)


@dataclass(frozen=True)
class OpCounts:
    """Operation counts behind one or more accesses.

    ``shifts`` counts positioning shifts only. The ``e_*`` counts are the
    operations charged for energy, the ``l_*`` counts those charged for
    latency; they differ because parallel operations cost latency once.
    """

    shifts: int = 0
    e_shift: int = 0
    e_detect: int = 0
    e_remove: int = 0
    e_insert: int = 0
    l_shift: int = 0
    l_detect: int = 0
    l_remove: int = 0
    l_insert: int = 0

    def __add__(self, other: "OpCounts") -> "OpCounts":
        return OpCounts(*(a + b for a, b in zip(self.as_tuple(), other.as_tuple())))

    def as_tuple(self) -> tuple[int, ...]:
        return (
            self.shifts,
            self.e_shift, self.e_detect, self.e_remove, self.e_insert,
            self.l_shift, self.l_detect, self.l_remove, self.l_insert,
        )

    def energy(self, params: CostParams = DEFAULT_PARAMS) -> Fraction:
        return (
            self.e_shift * params.e_shift
            + self.e_detect * params.e_detect
            + self.e_remove * params.e_remove
            + self.e_insert * params.e_insert
        )

    def latency(self, params: CostParams = DEFAULT_PARAMS) -> Fraction:
        return (
            self.l_shift * params.l_shift
            + self.l_detect * params.l_detect
            + self.l_remove * params.l_remove
            + self.l_insert * params.l_insert
        )

    def triple(self, params: CostParams = DEFAULT_PARAMS) -> CostTriple:
        return CostTriple(self.shifts, self.energy(params), self.latency(params))


def shift_cost_h(geom: ValidatedGeometry) -> int:
    """Shifts per access in horizontal mode; independent of the registers involved."""
    spread = max(Fraction(1), Fraction(geom.reg_bits, geom.track_length))
    cost = (Fraction(geom.track_length, geom.num_aps) - 1) * 2 * spread
    assert cost.denominator == 1
    return int(cost)


def _check_reg(geom: ValidatedGeometry, reg: int) -> None:
    if not 0 <= reg < geom.num_regs:
        raise IndexError(f"register index {reg} out of range 0..{geom.num_regs - 1}")


def shift_cost_v(geom: ValidatedGeometry, reg_old: int, reg: int) -> int:
    """Synchronous shifts to move from the offset of ``reg_old`` to that of ``reg``."""
    _check_reg(geom, reg_old)
    _check_reg(geom, reg)
    return abs(geom.vertical_offset(reg) - geom.vertical_offset(reg_old)) * geom.num_tracks


def _horizontal_write_shift_factor(geom: ValidatedGeometry) -> int:
    # n_ap * min(1, B/W); an integer for every feasible geometry
    factor = geom.num_aps * min(Fraction(1), Fraction(geom.reg_bits, geom.track_length))
    assert factor.denominator == 1
    return int(factor)


def access_ops(
    geom: ValidatedGeometry,
    mode: AllocationMode,
    kind: AccessKind,
    shift_count: int,
    delta: WriteDelta | None = None,
) -> OpCounts:
    """Operation counts for one access given its positioning shifts."""
    if kind is AccessKind.WRITE and delta is None:
        raise ValueError("a write access needs a WriteDelta")
    b = geom.reg_bits
    if mode is AllocationMode.HORIZONTAL:
        if kind is AccessKind.READ:
            return OpCounts(shift_count, shift_count, b, 0, 0, shift_count, b, 0, 0)
        j, k = delta.j, delta.k
        return OpCounts(
            shifts=shift_count,
            e_shift=shift_count * _horizontal_write_shift_factor(geom) + j,
            e_detect=b,
            e_remove=j,
            e_insert=k,
            l_shift=shift_count + j,
            l_detect=b,
            l_remove=j,
            l_insert=k,
        )
    if kind is AccessKind.READ:
        return OpCounts(shift_count, shift_count, b, 0, 0, shift_count, 1, 0, 0)
    # naive write: clear all B positions, then insert the new ones
    return OpCounts(shift_count, shift_count, 0, b, delta.qp, shift_count, 0, 1, 1)


def energy_access(
    geom: ValidatedGeometry,
    params: CostParams,
    mode: AllocationMode,
    kind: AccessKind,
    shift_count: int,
    delta: WriteDelta | None = None,
) -> Fraction:
    """Energy in fJ of one access."""
    return access_ops(geom, mode, kind, shift_count, delta).energy(params)


def latency_access(
    geom: ValidatedGeometry,
    params: CostParams,
    mode: AllocationMode,
    kind: AccessKind,
    shift_count: int,
    delta: WriteDelta | None = None,
) -> Fraction:
    """Latency in ns of one access."""
    return access_ops(geom, mode, kind, shift_count, delta).latency(params)


def positioning_shifts(geom: ValidatedGeometry, mode: AllocationMode, reg_old: int, reg: int) -> int:
    if mode is AllocationMode.HORIZONTAL:
        _check_reg(geom, reg)
        return shift_cost_h(geom)
    return shift_cost_v(geom, reg_old, reg)


def access_cost(
    geom: ValidatedGeometry,
    params: CostParams,
    mode: AllocationMode,
    kind: AccessKind,
    reg_old: int,
    reg: int,
    old_value: RegisterValue,
    new_value: RegisterValue | None = None,
) -> CostTriple:
    """Full cost of one access; ``new_value`` is ignored for reads."""
    if old_value.width != geom.reg_bits:
        raise ValueError(f"value width {old_value.width} != register width {geom.reg_bits}")
    shifts = positioning_shifts(geom, mode, reg_old, reg)
    delta = None
    if kind is AccessKind.WRITE:
        if new_value is None:
            raise ValueError("a write access needs new_value")
        delta = write_delta(old_value, new_value)
    return access_ops(geom, mode, kind, shifts, delta).triple(params)

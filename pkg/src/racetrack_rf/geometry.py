"""Register file geometry, allocation modes and per-operation cost constants."""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path

__all__ = [
    "AllocationMode",
    "CostParams",
    "DerivedLayout",
    "GeometryError",
    "RegisterFileGeometry",
    "ValidatedGeometry",
    "DEFAULT_GEOMETRY",
    "geometry_fingerprint",
    "load_geometry",
    "parse_geometry",
    "validate_geometry",
]


class AllocationMode(enum.IntEnum):
    """Global register allocation selected by the mode bit."""

    HORIZONTAL = 0
    VERTICAL = 1

    @property
    def short(self) -> str:
        return "H" if self is AllocationMode.HORIZONTAL else "V"


class GeometryError(ValueError):
    """Raised for an infeasible register file configuration.

    ``code`` is one of the ``GeometryError.*`` class constants so callers can
    branch on the failure kind without parsing messages.
    """

    NOT_INTEGER = "not-integer"
    NON_POSITIVE = "non-positive"
    NOT_POWER_OF_TWO = "not-power-of-two"
    CAPACITY = "capacity-shortfall"
    HORIZONTAL_PORTS = "horizontal-port-shortfall"
    VERTICAL_PORTS = "vertical-port-shortfall"
    TOO_MANY_PORTS = "ports-exceed-width"

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass(frozen=True)
class RegisterFileGeometry:
    """Physical configuration of a racetrack register file.

    Attributes
    ----------
    num_tracks : number of nanotracks (N)
    track_length : usable positions per nanotrack, in bits (W)
    num_aps : access ports per nanotrack (n_ap)
    num_regs : architectural registers (R)
    reg_bits : bits per register (B)
    """

    num_tracks: int = 32
    track_length: int = 64
    num_aps: int = 2
    num_regs: int = 32
    reg_bits: int = 64

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (self.num_tracks, self.track_length, self.num_aps, self.num_regs, self.reg_bits)


@dataclass(frozen=True)
class DerivedLayout:
    regs_per_track: Fraction
    positions_per_register_v: int
    overflow: Fraction


@dataclass(frozen=True)
class ValidatedGeometry(RegisterFileGeometry):
    """A geometry that passed :func:`validate_geometry`, plus derived layout."""

    layout: DerivedLayout | None = None

    @property
    def segment(self) -> int:
        """Positions served by one access port (W / n_ap)."""
        return self.track_length // self.num_aps

    def vertical_offset(self, reg: int) -> int:
        """Aligned offset of ``reg`` in vertical mode, floor(reg*B / (N*n_ap))."""
        return (reg * self.reg_bits) // (self.num_tracks * self.num_aps)

    @property
    def fingerprint(self) -> str:
        return geometry_fingerprint(self)


def _is_pow2(x: int) -> bool:
    return x > 0 and (x & (x - 1)) == 0


def validate_geometry(geom: RegisterFileGeometry) -> ValidatedGeometry:
    """Check every feasibility constraint and attach the derived layout.

    Raises :class:`GeometryError` with a distinct ``code`` per violated rule;
    any input (including non-integers) yields either a result or that error.
    """
    values = {f.name: getattr(geom, f.name) for f in fields(RegisterFileGeometry)}
    for name, value in values.items():
        if isinstance(value, bool) or not isinstance(value, int):
            raise GeometryError(GeometryError.NOT_INTEGER, f"{name}={value!r} is not an integer")
        if value <= 0:
            raise GeometryError(GeometryError.NON_POSITIVE, f"{name}={value} must be positive")
    n, w, n_ap, r, b = (values[k] for k in ("num_tracks", "track_length", "num_aps", "num_regs", "reg_bits"))

    # reg_bits is held to a power of two as well so every B/W, B/N ratio is exact
    for name in ("num_tracks", "track_length", "num_aps", "reg_bits"):
        if not _is_pow2(values[name]):
            raise GeometryError(GeometryError.NOT_POWER_OF_TWO, f"{name}={values[name]} is not a power of two")
    if n_ap > w:
        raise GeometryError(GeometryError.TOO_MANY_PORTS, f"num_aps={n_ap} exceeds track_length={w}")
    if w > b and n_ap < w // b:
        raise GeometryError(
            GeometryError.HORIZONTAL_PORTS, f"horizontal mode needs num_aps >= W/B = {w // b}, got {n_ap}"
        )
    if b > n and n_ap < -(-b // n):
        raise GeometryError(
            GeometryError.VERTICAL_PORTS, f"vertical mode needs num_aps >= ceil(B/N) = {-(-b // n)}, got {n_ap}"
        )
    if n * w < r * b:
        raise GeometryError(GeometryError.CAPACITY, f"N*W={n * w} < R*B={r * b}")

    layout = DerivedLayout(
        regs_per_track=Fraction(r * b, n * w),
        positions_per_register_v=max(1, b // n),
        overflow=Fraction(w, 2 * n_ap),
    )
    return ValidatedGeometry(n, w, n_ap, r, b, layout=layout)


DEFAULT_GEOMETRY = validate_geometry(RegisterFileGeometry())


def geometry_fingerprint(geom: RegisterFileGeometry) -> str:
    key = ",".join(str(v) for v in RegisterFileGeometry.as_tuple(geom))
    return hashlib.sha256(key.encode()).hexdigest()[:16]


_GEOMETRY_KEYS = ("num_tracks", "track_length", "num_aps", "num_regs", "reg_bits")


def parse_geometry(text: str, base: RegisterFileGeometry | None = None) -> ValidatedGeometry:
    """Parse ``key=value`` pairs separated by commas or newlines.

    Unspecified keys fall back to ``base`` (the default geometry if omitted).
    ``#`` starts a comment.
    """
    base = base or RegisterFileGeometry()
    values = {k: getattr(base, k) for k in _GEOMETRY_KEYS}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        for item in line.split(","):
            item = item.strip()
            if not item:
                continue
            key, sep, value = item.partition("=")
            key = key.strip()
            if not sep or key not in values:
                raise ValueError(f"line {lineno}: bad geometry entry {item!r}; keys are {', '.join(_GEOMETRY_KEYS)}")
            try:
                values[key] = int(value.strip(), 0)
            except ValueError:
                raise ValueError(f"line {lineno}: {key} expects an integer, got {value.strip()!r}") from None
    return validate_geometry(RegisterFileGeometry(**values))


def load_geometry(spec: str | None) -> ValidatedGeometry:
    """Geometry from a config file path, an inline ``k=v,...`` string, or the default."""
    if not spec:
        return DEFAULT_GEOMETRY
    path = Path(spec)
    if "=" not in spec and path.exists():
        return parse_geometry(path.read_text())
    if "=" not in spec:
        raise FileNotFoundError(f"geometry file not found: {spec}")
    return parse_geometry(spec)


def _exact(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class CostParams:
    """Per-operation energy (fJ) and latency (ns) of skyrmion racetrack memory.

    Values are stored as exact fractions; floats are converted through their
    shortest decimal representation, so ``0.1`` means exactly 1/10.
    """

    e_detect: Fraction = Fraction(2)
    e_shift: Fraction = Fraction(20)
    e_remove: Fraction = Fraction(20)
    e_insert: Fraction = Fraction(200)
    l_detect: Fraction = Fraction(1, 10)
    l_shift: Fraction = Fraction(1, 2)
    l_remove: Fraction = Fraction(4, 5)
    l_insert: Fraction = Fraction(1)

    def __post_init__(self):
        for f in fields(self):
            value = _exact(getattr(self, f.name))
            if value <= 0:
                raise ValueError(f"{f.name} must be strictly positive, got {value}")
            object.__setattr__(self, f.name, value)

    @property
    def energy_vector(self) -> tuple[Fraction, Fraction, Fraction, Fraction]:
        return (self.e_shift, self.e_detect, self.e_remove, self.e_insert)

    @property
    def latency_vector(self) -> tuple[Fraction, Fraction, Fraction, Fraction]:
        return (self.l_shift, self.l_detect, self.l_remove, self.l_insert)

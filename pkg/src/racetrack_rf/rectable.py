"""Recommendation table: one allocation-mode bit per instruction address.

File format::

    RECBITS window=<n> geomfp=<hex>
    <addr:hex> <0|1>
    ...

``0`` is horizontal, ``1`` vertical.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

from .geometry import AllocationMode, RegisterFileGeometry, geometry_fingerprint

__all__ = ["FingerprintMismatch", "MissingRecommendation", "RecommendationTable"]

_HEADER = re.compile(r"RECBITS\s+window=(\d+)\s+geomfp=([0-9a-fA-F]+)\s*\Z")


class FingerprintMismatch(ValueError):
    pass


class MissingRecommendation(KeyError):
    pass


@dataclass(frozen=True)
class RecommendationTable:
    modes: Mapping[int, AllocationMode]
    window: int
    geomfp: str

    def __len__(self) -> int:
        return len(self.modes)

    def __getitem__(self, address: int) -> AllocationMode:
        try:
            return self.modes[address]
        except KeyError:
            raise MissingRecommendation(f"no recommendation for address {address:#x}") from None

    def check_geometry(self, geom: RegisterFileGeometry) -> None:
        fp = geometry_fingerprint(geom)
        if fp != self.geomfp:
            raise FingerprintMismatch(
                f"recommendation table was built for geometry {self.geomfp}, simulating {fp}"
            )

    def serialize(self) -> str:
        lines = [f"RECBITS window={self.window} geomfp={self.geomfp}"]
        lines.extend(f"{a:x} {int(m)}" for a, m in sorted(self.modes.items()))
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "RecommendationTable":
        lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
        lines = [(i, ln) for i, ln in enumerate(lines, 1) if ln]
        if not lines:
            raise ValueError("empty recommendation table")
        m = _HEADER.match(lines[0][1])
        if not m:
            raise ValueError(f"line {lines[0][0]}: expected 'RECBITS window=<n> geomfp=<hex>'")
        modes: dict[int, AllocationMode] = {}
        for lineno, ln in lines[1:]:
            parts = ln.split()
            if len(parts) != 2 or parts[1] not in ("0", "1"):
                raise ValueError(f"line {lineno}: expected '<addr:hex> <0|1>', got {ln!r}")
            try:
                addr = int(parts[0], 16)
            except ValueError:
                raise ValueError(f"line {lineno}: bad hex address {parts[0]!r}") from None
            if addr in modes:
                raise ValueError(f"line {lineno}: duplicate address {addr:x}")
            modes[addr] = AllocationMode(int(parts[1]))
        return cls(modes, int(m.group(1)), m.group(2).lower())

    @classmethod
    def read(cls, path) -> "RecommendationTable":
        with open(path) as fh:
            return cls.parse(fh.read())

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.serialize())

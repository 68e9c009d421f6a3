"""Portable register-access trace format.

One executed instruction per line::

    I <addr:hex> <mnemonic> S <src-list|-> D <dst-list|->

A source item is ``reg:width:value`` and a destination item is
``reg:width:before:after`` (register and width decimal, values hex). Lists are
comma separated, ``-`` marks an empty list and ``#`` starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, TextIO

from .costs import AccessKind

__all__ = [
    "DestOperand",
    "RegisterAccess",
    "SourceOperand",
    "TraceInstruction",
    "TraceParseError",
    "access_sequence",
    "format_instruction",
    "parse_trace",
    "read_trace",
    "serialize_trace",
    "write_trace",
]


class TraceParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class SourceOperand:
    reg: int
    width: int
    value: int


@dataclass(frozen=True)
class DestOperand:
    reg: int
    width: int
    before: int
    after: int


@dataclass(frozen=True)
class TraceInstruction:
    address: int
    mnemonic: str
    sources: tuple[SourceOperand, ...] = ()
    destinations: tuple[DestOperand, ...] = ()


@dataclass(frozen=True)
class RegisterAccess:
    reg: int
    kind: AccessKind
    value_before: int
    value_after: int


def access_sequence(instr: TraceInstruction) -> list[RegisterAccess]:
    """Register accesses of one instruction: every source read, then every destination write."""
    seq = [RegisterAccess(s.reg, AccessKind.READ, s.value, s.value) for s in instr.sources]
    seq.extend(RegisterAccess(d.reg, AccessKind.WRITE, d.before, d.after) for d in instr.destinations)
    return seq


_HEX = re.compile(r"[0-9a-fA-F]+\Z")
_DEC = re.compile(r"[0-9]+\Z")


class _LineParser:
    def __init__(self, text: str, lineno: int, reg_bits: int, num_regs: int | None):
        self.text = text
        self.lineno = lineno
        self.reg_bits = reg_bits
        self.num_regs = num_regs

    def fail(self, message: str, column: int):
        raise TraceParseError(message, self.lineno, column)

    def tokens(self) -> list[tuple[str, int]]:
        return [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", self.text)]

    def hex(self, field: str, col: int, what: str) -> int:
        if not _HEX.match(field):
            self.fail(f"bad hex {what} {field!r}", col)
        return int(field, 16)

    def dec(self, field: str, col: int, what: str) -> int:
        if not _DEC.match(field):
            self.fail(f"bad decimal {what} {field!r}", col)
        return int(field)

    def value(self, field: str, col: int, what: str) -> int:
        v = self.hex(field, col, what)
        if v >> self.reg_bits:
            self.fail(f"{what} {field} exceeds {self.reg_bits} bits", col)
        return v

    def operands(self, token: str, col: int, nfields: int) -> list[tuple[int, ...]]:
        if token == "-":
            return []
        items = []
        offset = 0
        for item in token.split(","):
            icol = col + offset
            offset += len(item) + 1
            parts = item.split(":")
            if len(parts) != nfields:
                self.fail(f"register spec {item!r} needs {nfields} ':'-separated fields", icol)
            reg = self.dec(parts[0], icol, "register")
            if self.num_regs is not None and reg >= self.num_regs:
                self.fail(f"register {reg} out of range (R={self.num_regs})", icol)
            width = self.dec(parts[1], icol, "width")
            if not 0 < width <= self.reg_bits:
                self.fail(f"width {width} outside 1..{self.reg_bits}", icol)
            vals = tuple(self.value(p, icol, "value") for p in parts[2:])
            items.append((reg, width) + vals)
        return items

    def parse(self) -> TraceInstruction | None:
        toks = self.tokens()
        if not toks:
            return None
        if len(toks) != 7:
            self.fail(f"expected 7 fields 'I addr mnemonic S srcs D dsts', got {len(toks)}", toks[0][1])
        (tag, c0), (addr, c1), (mnem, _), (s, cs), (srcs, c4), (d, cd), (dsts, c6) = toks
        if tag != "I":
            self.fail(f"expected record tag 'I', got {tag!r}", c0)
        if s != "S":
            self.fail(f"expected 'S', got {s!r}", cs)
        if d != "D":
            self.fail(f"expected 'D', got {d!r}", cd)
        return TraceInstruction(
            address=self.hex(addr, c1, "address"),
            mnemonic=mnem,
            sources=tuple(SourceOperand(*o) for o in self.operands(srcs, c4, 3)),
            destinations=tuple(DestOperand(*o) for o in self.operands(dsts, c6, 4)),
        )


def iter_trace(lines: Iterable[str], reg_bits: int = 64, num_regs: int | None = None) -> Iterator[TraceInstruction]:
    for lineno, raw in enumerate(lines, 1):
        text = raw.split("#", 1)[0]
        instr = _LineParser(text, lineno, reg_bits, num_regs).parse()
        if instr is not None:
            yield instr


def parse_trace(
    stream: str | TextIO | Iterable[str], reg_bits: int = 64, num_regs: int | None = None
) -> list[TraceInstruction]:
    """Parse trace text (a string, file object or iterable of lines)."""
    if isinstance(stream, str):
        stream = stream.splitlines()
    return list(iter_trace(stream, reg_bits, num_regs))


def _fmt_src(s: SourceOperand) -> str:
    return f"{s.reg}:{s.width}:{s.value:x}"


def _fmt_dst(d: DestOperand) -> str:
    return f"{d.reg}:{d.width}:{d.before:x}:{d.after:x}"


def format_instruction(instr: TraceInstruction) -> str:
    srcs = ",".join(map(_fmt_src, instr.sources)) or "-"
    dsts = ",".join(map(_fmt_dst, instr.destinations)) or "-"
    return f"I {instr.address:x} {instr.mnemonic} S {srcs} D {dsts}"


def serialize_trace(instrs: Iterable[TraceInstruction]) -> str:
    return "".join(format_instruction(i) + "\n" for i in instrs)


def write_trace(path, instrs: Iterable[TraceInstruction]) -> None:
    with open(path, "w") as fh:
        for instr in instrs:
            fh.write(format_instruction(instr))
            fh.write("\n")


def read_trace(path, reg_bits: int = 64, num_regs: int | None = None) -> list[TraceInstruction]:
    with open(path) as fh:
        return list(iter_trace(fh, reg_bits, num_regs))

"""Program listings, control flow graphs and branch-probability profiling.

Listing grammar, one instruction per line::

    <addr:hex> <mnemonic> ; S=<r,..|-> D=<r,..|-> K=<seq|br|cbr|call|ret> [T=<addr:hex>]

``br`` and ``call`` without ``T=`` are indirect; their successor is unknown
and path enumeration stops there.
"""

from __future__ import annotations

import enum
import json
import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .trace import TraceInstruction

__all__ = [
    "Block",
    "BranchProfile",
    "Cfg",
    "Edge",
    "EdgeKind",
    "InstrKind",
    "ListingError",
    "ListingInstruction",
    "ProgramListing",
    "annotate_probabilities",
    "build_cfg",
    "parse_listing",
    "profile_trace",
]

PROFILE_LIMIT = 1_000_000


class ListingError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = "" if line is None else f"line {line}" + ("" if column is None else f", column {column}") + ": "
        super().__init__(where + message)
        self.line = line
        self.column = column


class InstrKind(enum.Enum):
    SEQ = "seq"
    BRANCH = "br"
    COND_BRANCH = "cbr"
    CALL = "call"
    RET = "ret"

    @property
    def terminates_block(self) -> bool:
        return self is not InstrKind.SEQ


@dataclass(frozen=True)
class ListingInstruction:
    address: int
    mnemonic: str
    sources: tuple[int, ...] = ()
    destinations: tuple[int, ...] = ()
    kind: InstrKind = InstrKind.SEQ
    target: int | None = None

    @property
    def accessed_registers(self) -> tuple[int, ...]:
        """Registers touched in access order (sources, then destinations)."""
        return self.sources + self.destinations

    def format(self) -> str:
        src = ",".join(map(str, self.sources)) or "-"
        dst = ",".join(map(str, self.destinations)) or "-"
        line = f"{self.address:x} {self.mnemonic} ; S={src} D={dst} K={self.kind.value}"
        if self.target is not None:
            line += f" T={self.target:x}"
        return line


@dataclass(frozen=True)
class ProgramListing:
    instructions: tuple[ListingInstruction, ...]
    index: Mapping[int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {ins.address: i for i, ins in enumerate(self.instructions)})

    def __len__(self) -> int:
        return len(self.instructions)

    def __getitem__(self, i: int) -> ListingInstruction:
        return self.instructions[i]

    def index_of(self, address: int) -> int:
        try:
            return self.index[address]
        except KeyError:
            raise KeyError(f"address {address:#x} not in listing") from None

    def serialize(self) -> str:
        return "".join(ins.format() + "\n" for ins in self.instructions)


_KINDS = {k.value: k for k in InstrKind}


def _parse_regs(text: str, line: int, col: int) -> tuple[int, ...]:
    if text == "-":
        return ()
    try:
        return tuple(int(r) for r in text.split(","))
    except ValueError:
        raise ListingError(f"bad register list {text!r}", line, col) from None


def parse_listing(text: str | Iterable[str], num_regs: int | None = None) -> ProgramListing:
    """Parse and validate a program listing."""
    lines = text.splitlines() if isinstance(text, str) else list(text)
    instrs: list[ListingInstruction] = []
    positions: list[tuple[int, int]] = []
    for lineno, raw in enumerate(lines, 1):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        head, sep, tail = body.partition(";")
        if not sep:
            raise ListingError("missing ';' between mnemonic and operands", lineno, 1)
        head_toks = head.split()
        if len(head_toks) != 2:
            raise ListingError("expected '<addr> <mnemonic>' before ';'", lineno, 1)
        try:
            addr = int(head_toks[0], 16)
        except ValueError:
            raise ListingError(f"bad hex address {head_toks[0]!r}", lineno, 1) from None
        fields_: dict[str, str] = {}
        for m in re.finditer(r"\S+", tail):
            col = len(head) + 1 + m.start() + 1
            key, eq, value = m.group().partition("=")
            if not eq or key not in ("S", "D", "K", "T") or key in fields_:
                raise ListingError(f"unexpected field {m.group()!r}", lineno, col)
            fields_[key] = value
            if key in ("S", "D"):
                regs = _parse_regs(value, lineno, col)
                if num_regs is not None and any(not 0 <= r < num_regs for r in regs):
                    raise ListingError(f"register out of range in {m.group()!r}", lineno, col)
        for key in ("S", "D", "K"):
            if key not in fields_:
                raise ListingError(f"missing {key}= field", lineno)
        kind = _KINDS.get(fields_["K"])
        if kind is None:
            raise ListingError(f"unknown kind {fields_['K']!r}", lineno)
        target = None
        if "T" in fields_:
            try:
                target = int(fields_["T"], 16)
            except ValueError:
                raise ListingError(f"bad hex target {fields_['T']!r}", lineno) from None
        if kind in (InstrKind.SEQ, InstrKind.RET) and target is not None:
            raise ListingError(f"kind {kind.value} takes no target", lineno)
        if kind is InstrKind.COND_BRANCH and target is None:
            raise ListingError("cbr needs a target", lineno)
        if instrs and addr <= instrs[-1].address:
            raise ListingError(f"address {addr:x} not strictly increasing", lineno, 1)
        instrs.append(
            ListingInstruction(
                addr, head_toks[1], _parse_regs(fields_["S"], lineno, 0), _parse_regs(fields_["D"], lineno, 0), kind, target
            )
        )
        positions.append((lineno, addr))
    listing = ProgramListing(tuple(instrs))
    for ins, (lineno, _) in zip(instrs, positions):
        if ins.target is not None and ins.target not in listing.index:
            raise ListingError(f"unresolved target {ins.target:x}", lineno)
    return listing


class EdgeKind(enum.Enum):
    FALLTHROUGH = "fallthrough"
    TAKEN = "taken"
    NOT_TAKEN = "not-taken"
    JUMP = "jump"
    CALL = "call"
    RETURN = "return"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Block:
    start: int  # instruction index, inclusive
    end: int  # instruction index, inclusive


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int | None  # None: unknown successor or fall-off-the-end
    kind: EdgeKind
    prob: float


@dataclass
class BranchProfile:
    """Observed conditional-branch outcomes and return targets."""

    taken: dict[int, int] = field(default_factory=dict)
    not_taken: dict[int, int] = field(default_factory=dict)
    returns: dict[int, dict[int, int]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "taken": {f"{a:x}": n for a, n in sorted(self.taken.items())},
            "not_taken": {f"{a:x}": n for a, n in sorted(self.not_taken.items())},
            "returns": {
                f"{a:x}": {f"{t:x}": n for t, n in sorted(c.items())} for a, c in sorted(self.returns.items())
            },
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "BranchProfile":
        return cls(
            {int(a, 16): n for a, n in d.get("taken", {}).items()},
            {int(a, 16): n for a, n in d.get("not_taken", {}).items()},
            {int(a, 16): {int(t, 16): n for t, n in c.items()} for a, c in d.get("returns", {}).items()},
        )


@dataclass(frozen=True)
class Cfg:
    """Basic blocks over a listing with typed, probability-weighted edges.

    ``ret_targets`` maps each return instruction to the continuations of
    every call site whose callee can reach it.
    """

    listing: ProgramListing
    blocks: tuple[Block, ...]
    edges: tuple[Edge, ...]
    call_linkage: Mapping[int, int]
    ret_targets: Mapping[int, tuple[int, ...]]
    profile: BranchProfile | None = None

    def __post_init__(self):
        block_of = [0] * len(self.listing)
        for bi, blk in enumerate(self.blocks):
            for i in range(blk.start, blk.end + 1):
                block_of[i] = bi
        object.__setattr__(self, "_block_of", tuple(block_of))
        out: dict[int, list[Edge]] = defaultdict(list)
        for e in self.edges:
            out[e.src].append(e)
        object.__setattr__(self, "_out", {k: tuple(v) for k, v in out.items()})
        object.__setattr__(self, "_succ", self._instruction_successors())

    @property
    def annotated(self) -> bool:
        return self.profile is not None

    def block_of(self, index: int) -> int:
        return self._block_of[index]

    def out_edges(self, block: int) -> tuple[Edge, ...]:
        return self._out.get(block, ())

    def in_edges(self, block: int) -> tuple[Edge, ...]:
        return tuple(e for e in self.edges if e.dst == block)

    def _instruction_successors(self) -> tuple[tuple[tuple[int, float], ...], ...]:
        succ = []
        for i in range(len(self.listing)):
            blk = self.blocks[self._block_of[i]]
            if i < blk.end:
                succ.append(((i + 1, 1.0),))
                continue
            merged: dict[int, float] = {}
            for e in self.out_edges(self._block_of[i]):
                if e.dst is None or e.prob <= 0.0:
                    continue
                start = self.blocks[e.dst].start
                merged[start] = merged.get(start, 0.0) + e.prob
            succ.append(tuple(merged.items()))
        return tuple(succ)

    def successors(self, index: int) -> tuple[tuple[int, float], ...]:
        """Instruction-level successors ``(index, probability)``; empty ends a path."""
        return self._succ[index]

    def to_listing_text(self) -> str:
        return "".join(
            self.listing[i].format() + "\n" for blk in self.blocks for i in range(blk.start, blk.end + 1)
        )

    def to_dict(self) -> dict:
        return {
            "listing": self.listing.serialize(),
            "profile": None if self.profile is None else self.profile.to_dict(),
            "blocks": [[self.listing[b.start].address, self.listing[b.end].address] for b in self.blocks],
            "edges": [
                {
                    "src": e.src,
                    "dst": e.dst,
                    "kind": e.kind.value,
                    "prob": e.prob,
                }
                for e in self.edges
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping) -> "Cfg":
        """Rebuild from :meth:`to_dict` output (structure is recomputed from the listing)."""
        cfg = build_cfg(parse_listing(d["listing"]))
        if d.get("profile") is not None:
            cfg = apply_profile(cfg, BranchProfile.from_dict(d["profile"]))
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "Cfg":
        return cls.from_dict(json.loads(text))


def _leaders(listing: ProgramListing) -> list[int]:
    n = len(listing)
    leaders = {0} if n else set()
    for i, ins in enumerate(listing.instructions):
        if ins.kind.terminates_block:
            if i + 1 < n:
                leaders.add(i + 1)
            if ins.target is not None:
                leaders.add(listing.index_of(ins.target))
    return sorted(leaders)


def _function_returns(listing: ProgramListing, entry: int) -> set[int]:
    """Return instructions reachable from ``entry`` without leaving the function."""
    n = len(listing)
    seen: set[int] = set()
    rets: set[int] = set()
    stack = [entry]
    while stack:
        i = stack.pop()
        if i in seen or i >= n:
            continue
        seen.add(i)
        ins = listing[i]
        if ins.kind is InstrKind.RET:
            rets.add(i)
        elif ins.kind is InstrKind.SEQ or ins.kind is InstrKind.CALL:
            # a nested call resumes at its continuation
            stack.append(i + 1)
        elif ins.kind is InstrKind.BRANCH:
            if ins.target is not None:
                stack.append(listing.index_of(ins.target))
        else:
            stack.append(listing.index_of(ins.target))
            stack.append(i + 1)
    return rets


def build_cfg(listing: ProgramListing) -> Cfg:
    """Partition a listing into basic blocks and connect them.

    Conditional branches start at 0.5/0.5 and return edges are uniform over
    continuations until :func:`annotate_probabilities` replaces them.
    """
    n = len(listing)
    leaders = _leaders(listing)
    blocks = tuple(Block(s, e - 1) for s, e in zip(leaders, leaders[1:] + [n]))
    block_start = {b.start: bi for bi, b in enumerate(blocks)}

    def block_at(index: int) -> int | None:
        return block_start[index] if index < n else None

    call_linkage: dict[int, int] = {}
    callers: dict[int, list[int]] = defaultdict(list)
    for i, ins in enumerate(listing.instructions):
        if ins.kind is InstrKind.CALL and ins.target is not None and i + 1 < n:
            call_linkage[ins.address] = listing[i + 1].address
            callers[listing.index_of(ins.target)].append(i + 1)

    ret_conts: dict[int, set[int]] = defaultdict(set)
    for entry, conts in sorted(callers.items()):
        for r in _function_returns(listing, entry):
            ret_conts[r].update(conts)
    ret_targets = {listing[r].address: tuple(listing[c].address for c in sorted(cs)) for r, cs in ret_conts.items()}

    edges: list[Edge] = []
    for bi, blk in enumerate(blocks):
        last = listing[blk.end]
        nxt = block_at(blk.end + 1)
        kind = last.kind
        if kind is InstrKind.SEQ:
            if nxt is not None:
                edges.append(Edge(bi, nxt, EdgeKind.FALLTHROUGH, 1.0))
        elif kind is InstrKind.COND_BRANCH:
            edges.append(Edge(bi, block_at(listing.index_of(last.target)), EdgeKind.TAKEN, 0.5))
            edges.append(Edge(bi, nxt, EdgeKind.NOT_TAKEN, 0.5))
        elif kind in (InstrKind.BRANCH, InstrKind.CALL):
            if last.target is None:
                edges.append(Edge(bi, None, EdgeKind.UNKNOWN, 1.0))
            else:
                ek = EdgeKind.JUMP if kind is InstrKind.BRANCH else EdgeKind.CALL
                edges.append(Edge(bi, block_at(listing.index_of(last.target)), ek, 1.0))
        else:
            conts = sorted(ret_conts.get(blk.end, ()))
            for c in conts:
                edges.append(Edge(bi, block_at(c), EdgeKind.RETURN, 1.0 / len(conts)))
    return Cfg(listing, blocks, tuple(edges), call_linkage, ret_targets)


def profile_trace(
    listing: ProgramListing, trace: Sequence[TraceInstruction], limit: int = PROFILE_LIMIT
) -> BranchProfile:
    """Count branch outcomes and return targets over the first ``limit`` instructions."""
    prof = BranchProfile()
    window = trace[:limit]
    for pos, instr in enumerate(window):
        if instr.address not in listing.index:
            raise ListingError(f"trace address {instr.address:x} (trace position {pos}) not in listing")
        ins = listing[listing.index[instr.address]]
        if pos + 1 >= len(trace) or ins.kind not in (InstrKind.COND_BRANCH, InstrKind.RET):
            continue
        nxt = trace[pos + 1].address
        if ins.kind is InstrKind.COND_BRANCH:
            i = listing.index[ins.address]
            fall = listing[i + 1].address if i + 1 < len(listing) else None
            if nxt == ins.target:
                prof.taken[ins.address] = prof.taken.get(ins.address, 0) + 1
            elif nxt == fall:
                prof.not_taken[ins.address] = prof.not_taken.get(ins.address, 0) + 1
            else:
                raise ListingError(
                    f"trace position {pos + 1}: branch at {ins.address:x} continued at {nxt:x}, "
                    "neither its target nor its fallthrough"
                )
        else:
            counts = prof.returns.setdefault(ins.address, {})
            counts[nxt] = counts.get(nxt, 0) + 1
    return prof


def apply_profile(cfg: Cfg, prof: BranchProfile) -> Cfg:
    listing = cfg.listing
    edges = []
    for e in cfg.edges:
        last = listing[cfg.blocks[e.src].end]
        prob = e.prob
        if e.kind in (EdgeKind.TAKEN, EdgeKind.NOT_TAKEN):
            t = prof.taken.get(last.address, 0)
            nt = prof.not_taken.get(last.address, 0)
            if t + nt:
                prob = (t if e.kind is EdgeKind.TAKEN else nt) / (t + nt)
            else:
                prob = 0.5
        elif e.kind is EdgeKind.RETURN:
            counts = prof.returns.get(last.address, {})
            conts = cfg.ret_targets.get(last.address, ())
            total = sum(counts.get(c, 0) for c in conts)
            if total:
                prob = counts.get(listing[cfg.blocks[e.dst].start].address, 0) / total
            else:
                prob = 1.0 / len(conts)
        edges.append(Edge(e.src, e.dst, e.kind, prob))
    return Cfg(listing, cfg.blocks, tuple(edges), cfg.call_linkage, cfg.ret_targets, prof)


def annotate_probabilities(cfg: Cfg, trace: Sequence[TraceInstruction], limit: int = PROFILE_LIMIT) -> Cfg:
    """Replace branch and return probabilities with frequencies from the trace prefix.

    Branches never executed keep 0.5/0.5, returns never executed stay uniform.
    """
    return apply_profile(cfg, profile_trace(cfg.listing, trace, limit))


"""Synthetic workloads: small loop programs plus the traces they execute.

A workload is a :class:`~racetrack_rf.cfg.ProgramListing` together with a
trace obtained by walking that listing, so the recommender can build its CFG
from the listing and the simulator can replay the trace.

Conditional branches are driven by a :class:`BranchBehaviour`: either a loop
trip count (taken ``trips - 1`` times, then not taken once, repeating), a
fixed taken probability, or always taken.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Callable, Mapping, Sequence

import numpy as np

from .cfg import InstrKind, ListingInstruction, ProgramListing, parse_listing
from .trace import DestOperand, SourceOperand, TraceInstruction

__all__ = [
    "BUNDLED",
    "BranchBehaviour",
    "Phase",
    "SyntheticSpec",
    "Workload",
    "build_loop_program",
    "bundled_workload",
    "demo_listing",
    "demo_workload",
    "execute_listing",
    "generate_synthetic",
    "hotcold_workload",
    "phased_workload",
    "synthetic_workload",
]

BASE_ADDRESS = 0x400000
STRIDE = 4


@dataclass(frozen=True)
class BranchBehaviour:
    trips: int | None = None
    taken_prob: float | None = None

    def __post_init__(self):
        if self.trips is not None and self.trips < 1:
            raise ValueError("trips must be >= 1")
        if self.taken_prob is not None and not 0.0 <= self.taken_prob <= 1.0:
            raise ValueError("taken_prob must lie in [0, 1]")


ALWAYS = BranchBehaviour()


@dataclass(frozen=True)
class Workload:
    listing: ProgramListing
    trace: list[TraceInstruction]


class _ValueSource:
    """Random register values with a chosen mean number of set bits."""

    def __init__(self, rng: np.random.Generator, reg_bits: int, value_bits: float, chunk: int = 4096):
        self.rng = rng
        self.reg_bits = reg_bits
        self.p = min(max(value_bits / reg_bits, 0.0), 1.0)
        self.chunk = chunk
        self.buf: list[int] = []

    def next(self) -> int:
        if not self.buf:
            bits = self.rng.random((self.chunk, self.reg_bits)) < self.p
            packed = np.packbits(bits, axis=1, bitorder="little")
            self.buf = [int.from_bytes(row.tobytes(), "little") for row in packed]
            self.buf.reverse()
        return self.buf.pop()


def execute_listing(
    listing: ProgramListing,
    behaviour: Mapping[int, BranchBehaviour],
    count: int,
    seed: int = 0,
    reg_bits: int = 64,
    value_bits: float = 4.0,
    rng: np.random.Generator | None = None,
) -> list[TraceInstruction]:
    """Walk ``listing`` from its first instruction for ``count`` instructions.

    Calls push their continuation and returns pop it; a return with an empty
    stack, an indirect branch or running off the end stops execution early.
    Every destination receives a fresh random value.
    """
    rng = rng if rng is not None else np.random.default_rng(seed)
    values = _ValueSource(rng, reg_bits, value_bits)
    contents: dict[int, int] = {}
    counters: dict[int, int] = {}
    stack: list[int] = []
    trace: list[TraceInstruction] = []
    n = len(listing)
    i = 0
    while len(trace) < count and 0 <= i < n:
        ins = listing[i]
        srcs = tuple(SourceOperand(r, reg_bits, contents.get(r, 0)) for r in ins.sources)
        dsts = []
        for r in ins.destinations:
            new = values.next()
            dsts.append(DestOperand(r, reg_bits, contents.get(r, 0), new))
            contents[r] = new
        trace.append(TraceInstruction(ins.address, ins.mnemonic, srcs, tuple(dsts)))

        kind = ins.kind
        if kind is InstrKind.SEQ:
            i += 1
        elif kind is InstrKind.BRANCH or kind is InstrKind.CALL:
            if ins.target is None:
                break
            if kind is InstrKind.CALL:
                stack.append(i + 1)
            i = listing.index_of(ins.target)
        elif kind is InstrKind.RET:
            if not stack:
                break
            i = stack.pop()
        else:
            b = behaviour.get(ins.address, ALWAYS)
            if b.trips is not None:
                c = counters.get(ins.address, 0) + 1
                taken = c < b.trips
                counters[ins.address] = 0 if not taken else c
            elif b.taken_prob is not None:
                taken = bool(rng.random() < b.taken_prob)
            else:
                taken = True
            i = listing.index_of(ins.target) if taken else i + 1
    return trace


@dataclass(frozen=True)
class Phase:
    """One loop of a synthetic program.

    ``working_set`` consecutive registers starting at ``hot_base`` (chosen
    at random when ``None``) receive ``hot_ratio`` of the loop body's
    register accesses; the remaining accesses go uniformly to the other
    registers. ``iterations`` of ``None`` loops forever. With ``cold_burst``
    the cold accesses are packed at the end of the body in ascending
    register order, like a register save/restore sequence, instead of being
    scattered.
    """

    working_set: int
    hot_ratio: float
    iterations: int | None = None
    body_length: int = 64
    hot_base: int | None = None
    cold_burst: bool = False


def _body(
    rng: np.random.Generator, phase: Phase, num_regs: int, write_fraction: float
) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    if not 0 < phase.working_set <= num_regs:
        raise ValueError(f"working_set must lie in 1..{num_regs}")
    if not 0.0 <= phase.hot_ratio <= 1.0:
        raise ValueError("hot_ratio must lie in [0, 1]")
    if not 0.0 <= write_fraction <= 1.0:
        raise ValueError("write_fraction must lie in [0, 1]")
    base = phase.hot_base
    if base is None:
        base = int(rng.integers(0, num_regs - phase.working_set + 1))
    hot = list(range(base, base + phase.working_set))
    cold = [r for r in range(num_regs) if r not in hot]
    slots = 3 * phase.body_length
    n_hot = round(phase.hot_ratio * slots) if cold else slots
    is_hot = np.zeros(slots, dtype=bool)
    is_hot[:n_hot] = True
    if not phase.cold_burst:
        rng.shuffle(is_hot)
    is_write = np.zeros(slots, dtype=bool)
    is_write[: round(write_fraction * slots)] = True
    rng.shuffle(is_write)
    regs = [int(rng.choice(hot)) if h else int(rng.choice(cold)) for h in is_hot]
    if phase.cold_burst:
        regs[n_hot:] = sorted(regs[n_hot:])
    body = []
    for k in range(phase.body_length):
        sl = range(3 * k, 3 * k + 3)
        body.append(
            (tuple(regs[s] for s in sl if not is_write[s]), tuple(regs[s] for s in sl if is_write[s]))
        )
    return body


def build_loop_program(
    phases: Sequence[Phase],
    outer_iterations: int | None = None,
    num_regs: int = 32,
    write_fraction: float = 1 / 3,
    rng: np.random.Generator | None = None,
    seed: int = 0,
) -> tuple[ProgramListing, dict[int, BranchBehaviour]]:
    """Consecutive loops, one per phase, wrapped in an outer loop, then ``ret``."""
    rng = rng if rng is not None else np.random.default_rng(seed)
    instrs: list[ListingInstruction] = []
    behaviour: dict[int, BranchBehaviour] = {}

    def addr() -> int:
        return BASE_ADDRESS + STRIDE * len(instrs)

    for phase in phases:
        top = addr()
        for srcs, dsts in _body(rng, phase, num_regs, write_fraction):
            instrs.append(ListingInstruction(addr(), "op", srcs, dsts))
        behaviour[addr()] = BranchBehaviour(trips=phase.iterations)
        instrs.append(ListingInstruction(addr(), "cbr", (), (), InstrKind.COND_BRANCH, top))
    if len(phases) > 1:
        behaviour[addr()] = BranchBehaviour(trips=outer_iterations)
        instrs.append(ListingInstruction(addr(), "cbr", (), (), InstrKind.COND_BRANCH, BASE_ADDRESS))
    instrs.append(ListingInstruction(addr(), "ret", (), (), InstrKind.RET))
    return ProgramListing(tuple(instrs)), behaviour


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a single-loop synthetic workload.

    ``value_bits`` is the mean number of set bits in each written value.
    ``cold_burst`` groups the loop body's cold accesses into one ascending
    run (see :class:`Phase`); turn it off to scatter them.
    """

    count: int
    working_set: int = 2
    hot_ratio: float = 0.95
    write_fraction: float = 1 / 3
    value_bits: float = 4.0
    seed: int = 0
    num_regs: int = 32
    reg_bits: int = 64
    body_length: int = 64
    cold_burst: bool = True

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be non-negative")
        for name in ("hot_ratio", "write_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 <= self.value_bits <= self.reg_bits:
            raise ValueError("value_bits must lie in [0, reg_bits]")


def synthetic_workload(spec: SyntheticSpec) -> Workload:
    rng = np.random.default_rng(spec.seed)
    phase = Phase(spec.working_set, spec.hot_ratio, None, spec.body_length, cold_burst=spec.cold_burst)
    listing, behaviour = build_loop_program([phase], None, spec.num_regs, spec.write_fraction, rng)
    trace = execute_listing(listing, behaviour, spec.count, reg_bits=spec.reg_bits, value_bits=spec.value_bits, rng=rng)
    return Workload(listing, trace)


def generate_synthetic(spec: SyntheticSpec) -> list[TraceInstruction]:
    return synthetic_workload(spec).trace


def hotcold_workload(count: int = 40_000, seed: int = 11) -> Workload:
    """Hot/cold mixed loop: two neighbouring hot registers take 95% of accesses."""
    return synthetic_workload(SyntheticSpec(count, working_set=2, hot_ratio=0.95, seed=seed))


def phased_workload(
    phase_length: int = 40_000, repeats: int = 2, seed: int = 7, body_length: int = 64, num_regs: int = 32
) -> Workload:
    """Alternating phases of ``phase_length`` instructions.

    The first loop hammers two neighbouring registers except for a short
    burst touching the others; the second spreads accesses uniformly over all
    registers.
    """
    per_iter = body_length + 1
    trips = max(1, phase_length // per_iter)
    phases = [
        Phase(2, 0.95, trips, body_length, hot_base=num_regs // 2 - 1, cold_burst=True),
        Phase(num_regs, 1.0, trips, body_length, hot_base=0),
    ]
    rng = np.random.default_rng(seed)
    listing, behaviour = build_loop_program(phases, repeats, num_regs, 1 / 3, rng)
    count = repeats * (2 * trips * per_iter + 1) + 1
    trace = execute_listing(listing, behaviour, count, rng=rng)
    return Workload(listing, trace)


def demo_listing() -> ProgramListing:
    """The small hand-written program shipped in ``data/demo.lst``."""
    return parse_listing(resources.files(__package__).joinpath("data/demo.lst").read_text())


DEMO_BEHAVIOUR = {
    0x1010: BranchBehaviour(taken_prob=0.3),
    0x1024: BranchBehaviour(taken_prob=0.75),
    0x1030: BranchBehaviour(trips=200),
}


def demo_workload(count: int = 4000, seed: int = 3) -> Workload:
    listing = demo_listing()
    return Workload(listing, execute_listing(listing, DEMO_BEHAVIOUR, count, seed=seed))


BUNDLED: dict[str, Callable[..., Workload]] = {
    "demo": demo_workload,
    "hotcold": hotcold_workload,
    "phased": phased_workload,
}


def bundled_workload(name: str, seed: int | None = None) -> Workload:
    try:
        make = BUNDLED[name]
    except KeyError:
        raise ValueError(f"unknown workload {name!r}; choose from {', '.join(sorted(BUNDLED))}") from None
    return make() if seed is None else make(seed=seed)

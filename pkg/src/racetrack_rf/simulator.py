"""Trace-driven simulation of the register file under an allocation policy.

Two engines share the cost equations:

* :class:`RegisterFileSim` steps one access at a time and mirrors the
  hardware state (mode, vertical alignment anchor, register contents).
* :func:`simulate` evaluates a whole trace with numpy. Register contents do
  not depend on the policy, so per-access popcounts are computed once in
  :func:`compile_trace` and every policy run reduces to array arithmetic.

Conventions shared by both engines:

* the vertical anchor ``last_reg`` starts at 0 and follows every access in
  either mode;
* a mode switch stores all R registers under the old mode and restores them
  in ascending order under the new mode, leaving ``last_reg = R - 1``;
  restored registers are written over cleared positions (Q = 0);
* a register never written before holds all zeros.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .costs import (
    AccessKind,
    CostTriple,
    OpCounts,
    WriteDelta,
    access_ops,
    positioning_shifts,
    shift_cost_h,
)
from .geometry import AllocationMode, CostParams, ValidatedGeometry
from .rectable import RecommendationTable
from .trace import RegisterAccess, TraceInstruction, access_sequence

__all__ = [
    "ComparisonReport",
    "CompiledTrace",
    "CostReport",
    "LOptPolicy",
    "RecPolicy",
    "RegisterFileSim",
    "SimState",
    "StaticPolicy",
    "STATIC_H",
    "STATIC_V",
    "compile_trace",
    "lopt_schedule",
    "run_versions",
    "simulate",
    "store_restore_shifts",
    "switch_ops",
]

log = logging.getLogger(__name__)

H = AllocationMode.HORIZONTAL
V = AllocationMode.VERTICAL
_OP_FIELDS = ("shifts", "e_shift", "e_detect", "e_remove", "e_insert", "l_shift", "l_detect", "l_remove", "l_insert")


# ---------------------------------------------------------------------------
# policies


@dataclass(frozen=True)
class StaticPolicy:
    mode: AllocationMode


@dataclass(frozen=True)
class RecPolicy:
    table: RecommendationTable


@dataclass(frozen=True)
class LOptPolicy:
    schedule: tuple[AllocationMode, ...]


Policy = Union[StaticPolicy, RecPolicy, LOptPolicy]
STATIC_H = StaticPolicy(H)
STATIC_V = StaticPolicy(V)


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class CostReport:
    ops: OpCounts
    totals: CostTriple
    reads: int
    writes: int
    switches: int
    final_contents: tuple[int, ...] = field(repr=False, default=())

    @property
    def accesses(self) -> int:
        return self.reads + self.writes

    def _avg(self, total) -> Fraction:
        return Fraction(total) / self.accesses if self.accesses else Fraction(0)

    @property
    def avg_shifts(self) -> Fraction:
        return self._avg(self.totals.shifts)

    @property
    def avg_energy(self) -> Fraction:
        return self._avg(self.totals.energy)

    @property
    def avg_latency(self) -> Fraction:
        return self._avg(self.totals.latency)


METRICS = ("shifts", "energy", "latency")


@dataclass(frozen=True)
class ComparisonReport:
    rec: CostReport
    lopt: CostReport
    static_h: CostReport
    static_v: CostReport

    def static_best(self, metric: str):
        return min(getattr(self.static_h.totals, metric), getattr(self.static_v.totals, metric))

    def static_worst(self, metric: str):
        return max(getattr(self.static_h.totals, metric), getattr(self.static_v.totals, metric))


# ---------------------------------------------------------------------------
# switching


def switch_ops(
    geom: ValidatedGeometry,
    old_mode: AllocationMode,
    new_mode: AllocationMode,
    anchor: int,
    popcounts: Sequence[int],
) -> OpCounts:
    """Operations of the store/restore sequence that flips the mode bit."""
    if old_mode == new_mode:
        return OpCounts()
    total = OpCounts()
    last = anchor
    for r in range(geom.num_regs):
        total += access_ops(geom, old_mode, AccessKind.READ, positioning_shifts(geom, old_mode, last, r))
        last = r
    for r in range(geom.num_regs):
        delta = WriteDelta.from_popcounts(0, popcounts[r])
        total += access_ops(geom, new_mode, AccessKind.WRITE, positioning_shifts(geom, new_mode, last, r), delta)
        last = r
    return total


def store_restore_shifts(geom: ValidatedGeometry) -> int:
    """Positioning shifts of one mode switch entered with the anchor at R-1."""
    return switch_ops(geom, H, V, geom.num_regs - 1, [0] * geom.num_regs).shifts


# ---------------------------------------------------------------------------
# stepwise engine


@dataclass
class SimState:
    mode: AllocationMode
    last_reg: int
    contents: list[int]
    ops: OpCounts = field(default_factory=OpCounts)
    instructions: int = 0
    reads: int = 0
    writes: int = 0
    switches: int = 0


class RegisterFileSim:
    """Access-by-access register file model."""

    def __init__(self, geom: ValidatedGeometry, params: CostParams | None = None, mode: AllocationMode = H):
        self.geom = geom
        self.params = params or CostParams()
        self.state = SimState(mode, 0, [0] * geom.num_regs)

    def _charge(self, ops: OpCounts) -> CostTriple:
        self.state.ops += ops
        return ops.triple(self.params)

    def step(self, access: RegisterAccess) -> CostTriple:
        st, geom = self.state, self.geom
        if not 0 <= access.reg < geom.num_regs:
            raise IndexError(f"register index {access.reg} out of range 0..{geom.num_regs - 1}")
        shifts = positioning_shifts(geom, st.mode, st.last_reg, access.reg)
        delta = None
        if access.kind is AccessKind.WRITE:
            delta = WriteDelta.from_popcounts(st.contents[access.reg].bit_count(), access.value_after.bit_count())
            st.contents[access.reg] = access.value_after
            st.writes += 1
        else:
            st.reads += 1
        st.last_reg = access.reg
        return self._charge(access_ops(geom, st.mode, access.kind, shifts, delta))

    def switch_mode(self, new_mode: AllocationMode, charge: bool = True) -> CostTriple:
        st = self.state
        if new_mode == st.mode:
            return CostTriple()
        ops = OpCounts()
        if charge:
            ops = switch_ops(self.geom, st.mode, new_mode, st.last_reg, [c.bit_count() for c in st.contents])
            st.last_reg = self.geom.num_regs - 1
        st.mode = new_mode
        st.switches += 1
        return self._charge(ops)

    def execute(self, instr: TraceInstruction) -> CostTriple:
        total = CostTriple()
        for acc in access_sequence(instr):
            total += self.step(acc)
        self.state.instructions += 1
        return total

    def report(self) -> CostReport:
        st = self.state
        return CostReport(st.ops, st.ops.triple(self.params), st.reads, st.writes, st.switches, tuple(st.contents))


# ---------------------------------------------------------------------------
# vectorised engine


@dataclass(frozen=True)
class CompiledTrace:
    """Policy-independent per-access view of a trace."""

    addresses: tuple[int, ...]  # per instruction
    acc_start: np.ndarray  # per instruction, first access index; length n_instr + 1
    reg: np.ndarray
    is_write: np.ndarray
    q_old: np.ndarray  # popcount of the register before a write (0 for reads)
    q_new: np.ndarray  # popcount written (0 for reads)
    final_contents: tuple[int, ...]

    @property
    def n_instructions(self) -> int:
        return len(self.addresses)

    @property
    def n_accesses(self) -> int:
        return len(self.reg)


def compile_trace(trace: Sequence[TraceInstruction], geom: ValidatedGeometry) -> CompiledTrace:
    contents = [0] * geom.num_regs
    regs: list[int] = []
    writes: list[bool] = []
    q_old: list[int] = []
    q_new: list[int] = []
    starts = [0]
    addresses = []
    for pos, instr in enumerate(trace):
        addresses.append(instr.address)
        for s in instr.sources:
            if not 0 <= s.reg < geom.num_regs:
                raise IndexError(f"trace position {pos}: register {s.reg} out of range")
            regs.append(s.reg)
            writes.append(False)
            q_old.append(0)
            q_new.append(0)
        for d in instr.destinations:
            if not 0 <= d.reg < geom.num_regs:
                raise IndexError(f"trace position {pos}: register {d.reg} out of range")
            regs.append(d.reg)
            writes.append(True)
            q_old.append(contents[d.reg].bit_count())
            q_new.append(d.after.bit_count())
            contents[d.reg] = d.after
        starts.append(len(regs))
    return CompiledTrace(
        addresses=tuple(addresses),
        acc_start=np.array(starts, dtype=np.int64),
        reg=np.array(regs, dtype=np.int64),
        is_write=np.array(writes, dtype=bool),
        q_old=np.array(q_old, dtype=np.int64),
        q_new=np.array(q_new, dtype=np.int64),
        final_contents=tuple(contents),
    )


def _ensure_compiled(trace, geom) -> CompiledTrace:
    return trace if isinstance(trace, CompiledTrace) else compile_trace(trace, geom)


def _offsets(geom: ValidatedGeometry) -> np.ndarray:
    return np.array([geom.vertical_offset(r) for r in range(geom.num_regs)], dtype=np.int64)


def _chained_anchor(ct: CompiledTrace) -> np.ndarray:
    prev = np.empty_like(ct.reg)
    if len(prev):
        prev[0] = 0
        prev[1:] = ct.reg[:-1]
    return prev


def _mode_ops(ct: CompiledTrace, geom: ValidatedGeometry, mode: AllocationMode, anchor: np.ndarray) -> dict[str, np.ndarray]:
    """Per-access operation counts if every access ran in ``mode``."""
    b = geom.reg_bits
    w = ct.is_write
    n = ct.n_accesses
    if mode is H:
        sh = shift_cost_h(geom)
        f = int(access_ops(geom, H, AccessKind.WRITE, 1, WriteDelta(0, 0, 0, 0)).e_shift)
        j = np.where(w, np.maximum(ct.q_old - ct.q_new, 0), 0)
        k = np.where(w, np.maximum(ct.q_new - ct.q_old, 0), 0)
        shifts = np.full(n, sh, dtype=np.int64)
        return {
            "shifts": shifts,
            "e_shift": np.where(w, sh * f + j, sh),
            "e_detect": np.full(n, b, dtype=np.int64),
            "e_remove": j,
            "e_insert": k,
            "l_shift": shifts + j,
            "l_detect": np.full(n, b, dtype=np.int64),
            "l_remove": j,
            "l_insert": k,
        }
    off = _offsets(geom)
    sv = np.abs(off[ct.reg] - off[anchor]) * geom.num_tracks
    return {
        "shifts": sv,
        "e_shift": sv,
        "e_detect": np.where(w, 0, b),
        "e_remove": np.where(w, b, 0),
        "e_insert": np.where(w, ct.q_new, 0),
        "l_shift": sv,
        "l_detect": np.where(w, 0, 1),
        "l_remove": np.where(w, 1, 0),
        "l_insert": np.where(w, 1, 0),
    }


def _n_windows(n_instr: int, window: int) -> int:
    return -(-n_instr // window) if n_instr else 0


def _window_modes(ct: CompiledTrace, policy: Policy, window: int) -> list[AllocationMode]:
    nw = _n_windows(ct.n_instructions, window)
    if isinstance(policy, StaticPolicy):
        return [policy.mode] * nw
    if isinstance(policy, LOptPolicy):
        if len(policy.schedule) < nw:
            raise ValueError(f"LOPT schedule covers {len(policy.schedule)} windows, trace needs {nw}")
        return list(policy.schedule[:nw])
    table = policy.table
    return [table[ct.addresses[w * window]] for w in range(nw)]


def simulate(
    trace: Sequence[TraceInstruction] | CompiledTrace,
    geom: ValidatedGeometry,
    params: CostParams | None = None,
    policy: Policy = STATIC_H,
    window: int = 100,
    charge_switches: bool = True,
) -> CostReport:
    """Run ``trace`` under ``policy``, consulting it every ``window`` instructions.

    The first window starts in the policy's mode without a switch. At each
    later boundary a differing mode triggers a store/restore switch, charged
    unless ``charge_switches`` is False.
    """
    if window < 1:
        raise ValueError("window must be at least one instruction")
    params = params or CostParams()
    if isinstance(policy, RecPolicy):
        policy.table.check_geometry(geom)
        if policy.table.window != window:
            log.warning("recommendation table built for window %d, simulating window %d", policy.table.window, window)
    ct = _ensure_compiled(trace, geom)
    modes = _window_modes(ct, policy, window)
    n = ct.n_accesses
    last_r = geom.num_regs - 1

    # per-access mode and anchor
    win_of_access = np.repeat(np.arange(ct.n_instructions) // window, np.diff(ct.acc_start))
    vert = np.array([m is V for m in modes], dtype=bool)[win_of_access] if n else np.zeros(0, dtype=bool)
    anchor = _chained_anchor(ct)

    switch_total = OpCounts()
    switches = 0
    popcounts = [0] * geom.num_regs
    applied = 0  # accesses whose writes are reflected in popcounts
    reset_at = -1  # access index at which the last charged switch left the anchor at R-1
    for w in range(1, len(modes)):
        if modes[w] == modes[w - 1]:
            continue
        switches += 1
        if not charge_switches:
            continue
        boundary = int(ct.acc_start[w * window])
        for a in range(applied, boundary):
            if ct.is_write[a]:
                popcounts[ct.reg[a]] = int(ct.q_new[a])
        applied = boundary
        if reset_at == boundary:
            before = last_r
        else:
            before = int(ct.reg[boundary - 1]) if boundary > 0 else 0
        switch_total += switch_ops(geom, modes[w - 1], modes[w], before, popcounts)
        reset_at = boundary
        if boundary < n:
            anchor[boundary] = last_r

    totals = {}
    h_ops = _mode_ops(ct, geom, H, anchor)
    v_ops = _mode_ops(ct, geom, V, anchor)
    for name in _OP_FIELDS:
        totals[name] = int(np.where(vert, v_ops[name], h_ops[name]).sum()) + getattr(switch_total, name)
    ops = OpCounts(**totals)
    writes = int(ct.is_write.sum())
    return CostReport(ops, ops.triple(params), n - writes, writes, switches, ct.final_contents)


def _window_ops(ct: CompiledTrace, window: int, ops: dict[str, np.ndarray]) -> list[OpCounts]:
    nw = _n_windows(ct.n_instructions, window)
    win_of_access = np.repeat(np.arange(ct.n_instructions) // window, np.diff(ct.acc_start))
    cols = []
    for name in _OP_FIELDS:
        sums = np.zeros(nw, dtype=np.int64)
        np.add.at(sums, win_of_access, ops[name])
        cols.append(sums)
    return [OpCounts(*(int(c[w]) for c in cols)) for w in range(nw)]


def lopt_schedule(
    trace: Sequence[TraceInstruction] | CompiledTrace,
    geom: ValidatedGeometry,
    window: int,
    objective: str = "shifts",
    params: CostParams | None = None,
) -> list[AllocationMode]:
    """Per-window mode with the lower cost for that window alone.

    Switch overhead is left out of the choice. The vertical cost of a window
    starts from the register accessed just before it (register 0 for the
    first window). Ties keep the previous window's mode, horizontal first.
    """
    if objective not in METRICS:
        raise ValueError(f"objective must be one of {METRICS}")
    params = params or CostParams()
    ct = _ensure_compiled(trace, geom)
    anchor = _chained_anchor(ct)
    h = _window_ops(ct, window, _mode_ops(ct, geom, H, anchor))
    v = _window_ops(ct, window, _mode_ops(ct, geom, V, anchor))
    schedule = []
    prev = H
    for hw, vw in zip(h, v):
        ch = getattr(hw.triple(params), objective)
        cv = getattr(vw.triple(params), objective)
        mode = prev if ch == cv else (H if ch < cv else V)
        schedule.append(mode)
        prev = mode
    return schedule


def run_versions(
    trace: Sequence[TraceInstruction] | CompiledTrace,
    geom: ValidatedGeometry,
    params: CostParams | None,
    rec_table: RecommendationTable,
    window: int,
    lopt_objective: str = "shifts",
) -> ComparisonReport:
    """REC, LOPT and both static allocations on the same trace."""
    params = params or CostParams()
    ct = _ensure_compiled(trace, geom)
    schedule = tuple(lopt_schedule(ct, geom, window, lopt_objective, params))
    return ComparisonReport(
        rec=simulate(ct, geom, params, RecPolicy(rec_table), window),
        lopt=simulate(ct, geom, params, LOptPolicy(schedule), window),
        static_h=simulate(ct, geom, params, STATIC_H, window),
        static_v=simulate(ct, geom, params, STATIC_V, window),
    )

"""Independent reference implementations used by the tests.

Shift oracles lay out every register bit in explicit (track, position)
cells and count shifts by moving tracks one position at a time. The path
oracle enumerates CFG paths recursively with exact rational weights.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import product

from racetrack_rf.cfg import InstrKind


def pow2_range(lo, hi):
    x = 1
    while x <= hi:
        if x >= lo:
            yield x
        x *= 2


# ---------------------------------------------------------------------------
# shift oracles


def horizontal_cells(N, W, n_ap, B, reg):
    """Cells of ``reg`` when registers are laid out along the tracks."""
    cells = []
    for b in range(B):
        g = reg * B + b
        cells.append((g // W, g % W))
    return cells


def horizontal_shift_oracle(N, W, n_ap, B, reg=0):
    """Shifts to pass every bit of ``reg`` under some port and return home.

    Ports sit at the start of each of the n_ap equal segments. Each track
    holding part of the register is moved forward one step at a time until
    every one of its cells has been under a port, then moved back.
    """
    seg = W // n_ap
    ports = {p * seg for p in range(n_ap)}
    by_track = {}
    for t, pos in horizontal_cells(N, W, n_ap, B, reg):
        by_track.setdefault(t, set()).add(pos)
    total = 0
    for cells in by_track.values():
        offset = 0
        pending = set(cells)
        while True:
            pending -= {pos for pos in pending if pos - offset in ports}
            if not pending:
                break
            offset += 1
            total += 1
            assert offset < W, "cell never reaches a port"
        total += offset  # walk back home
    return total


def vertical_cells(N, W, n_ap, B, reg):
    """Cells of ``reg`` when each register is spread across the tracks.

    Bits are filled track by track, then port segment by port segment, then
    row by row, so a register occupies one row in as many segments as needed.
    """
    seg = W // n_ap
    cells = []
    for b in range(B):
        g = reg * B + b
        row, k = divmod(g, N * n_ap)
        port, track = divmod(k, N)
        cells.append((track, port * seg + row))
    return cells


def vertical_alignment(N, W, n_ap, B, reg):
    """Track offset at which every cell of ``reg`` sits under a port."""
    seg = W // n_ap
    ports = [p * seg for p in range(n_ap)]
    cells = vertical_cells(N, W, n_ap, B, reg)
    good = [o for o in range(seg) if all(pos - o in ports for _, pos in cells)]
    assert len(good) == 1, (N, W, n_ap, B, reg, good)
    return good[0]


def vertical_shift_oracle(N, W, n_ap, B, reg_old, reg, align=None):
    """Move all tracks synchronously from reg_old's alignment to reg's; N shifts per step."""
    if align is None:
        src = vertical_alignment(N, W, n_ap, B, reg_old)
        dst = vertical_alignment(N, W, n_ap, B, reg)
    else:
        src, dst = align[reg_old], align[reg]
    pos = src
    shifts = 0
    while pos != dst:
        pos += 1 if dst > pos else -1
        shifts += N
    return shifts


# ---------------------------------------------------------------------------
# path oracle


def oracle_successors(listing, cbr_prob, ret_prob):
    """Per-instruction successor distributions straight from the listing.

    ``cbr_prob`` maps a cbr address to its taken probability and ``ret_prob``
    maps a ret address to ``{continuation address: probability}``. A missing
    destination ends the path.
    """
    n = len(listing)
    succ = []
    for i, ins in enumerate(listing.instructions):
        nxt = i + 1 if i + 1 < n else None
        k = ins.kind
        if k is InstrKind.SEQ:
            succ.append([(nxt, Fraction(1))])
        elif k in (InstrKind.BRANCH, InstrKind.CALL):
            tgt = None if ins.target is None else listing.index_of(ins.target)
            succ.append([(tgt, Fraction(1))])
        elif k is InstrKind.COND_BRANCH:
            p = Fraction(cbr_prob.get(ins.address, 0.5))
            succ.append([(listing.index_of(ins.target), p), (nxt, 1 - p)])
        else:
            succ.append([(listing.index_of(a), Fraction(p)) for a, p in ret_prob.get(ins.address, {}).items()])
    return succ


def oracle_paths(succ, start, window):
    """Every path of up to ``window`` instructions with its exact weight."""
    out = []

    def walk(path, w):
        if len(path) == window:
            out.append((tuple(path), w))
            return
        live = [(j, p) for j, p in succ[path[-1]] if p > 0]
        ended = sum((p for j, p in live if j is None), Fraction(0))
        ended += 1 - sum((p for _, p in live), Fraction(0))
        if ended:
            out.append((tuple(path), w * ended))
        for j, p in live:
            if j is not None:
                walk(path + [j], w * p)

    if window > 0:
        walk([start], Fraction(1))
    return out


def oracle_scores(listing, paths, N, n_ap, B, sh):
    """Exact weighted H and V shift scores over ``paths``."""
    h = v = Fraction(0)
    for path, w in paths:
        regs = [r for i in path for r in listing[i].sources + listing[i].destinations]
        h += w * sh * len(regs)
        offs = [r * B // (N * n_ap) for r in regs]
        v += w * sum(abs(a - b) for a, b in zip(offs, offs[1:])) * N
    return h, v


def oracle_decision(h, v, margin):
    return 1 if v + margin < h else 0


def all_register_pairs(R):
    return product(range(R), repeat=2)

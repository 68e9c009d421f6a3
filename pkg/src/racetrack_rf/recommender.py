"""Offline derivation of per-instruction allocation recommendation bits.

For each instruction the recommender looks at the paths a ``window``-long
execution starting there can take through the CFG, scores each path by the
positioning shifts it would cause under either allocation and weights it by
the product of its edge probabilities.

Two ways of evaluating the weighted scores are provided:

``method="paths"``
    explicit breadth-first enumeration with pruning (:func:`enumerate_paths`);
``method="dp"``
    a backward recursion over (instruction, vertical anchor) that yields the
    exact unpruned expectation for every start instruction at once.

With ``aggregate="score"`` the mode with the lower probability-weighted shift
score wins. ``aggregate="vote"`` instead lets every path vote for its own
cheaper mode with its weight; only explicit enumeration can do that.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse

from .cfg import Cfg, ListingInstruction
from .costs import shift_cost_h
from .geometry import AllocationMode, ValidatedGeometry, geometry_fingerprint
from .rectable import RecommendationTable
from .simulator import store_restore_shifts

__all__ = [
    "PathSet",
    "PruneOptions",
    "build_table",
    "enumerate_paths",
    "expected_scores",
    "recommend_bit",
    "score_path",
]

H = AllocationMode.HORIZONTAL
V = AllocationMode.VERTICAL
_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class PruneOptions:
    """Bounds on path enumeration and the decision margin.

    ``hysteresis`` is in shifts; ``None`` means the shift cost of one
    store/restore sequence for the geometry at hand. Pass ``0`` for a plain
    argmin.
    """

    max_paths: int = 4096
    min_weight: float = 1e-6
    hysteresis: float | None = None

    def __post_init__(self):
        if self.max_paths < 1:
            raise ValueError("max_paths must be positive")
        if not 0 <= self.min_weight < 1:
            raise ValueError("min_weight must lie in [0, 1)")
        if self.hysteresis is not None and self.hysteresis < 0:
            raise ValueError("hysteresis must be non-negative")

    def margin(self, geom: ValidatedGeometry) -> float:
        return float(store_restore_shifts(geom)) if self.hysteresis is None else float(self.hysteresis)


NO_PRUNING = PruneOptions(max_paths=2**62, min_weight=0.0)


@dataclass(frozen=True)
class PathSet:
    paths: list[tuple[tuple[ListingInstruction, ...], float]]
    pruned_mass: float = 0.0
    pruned_paths: int = 0
    truncated: int = field(default=0)  # paths that ended before the window was full

    @property
    def total_weight(self) -> float:
        return sum(w for _, w in self.paths)


def _enumerate_raw(cfg: Cfg, start: int, window: int, prune: PruneOptions):
    """Beam enumeration returning node tables instead of materialised paths."""
    parent = [-1]
    node_instr = [start]
    frontier = [(0, 1.0)] if window > 0 else []
    done: list[tuple[int, float]] = []
    pruned_mass = 0.0
    pruned_paths = 0
    truncated = 0
    for _ in range(1, window):
        nxt: list[tuple[int, float]] = []
        for node, w in frontier:
            succ = cfg.successors(node_instr[node])
            if not succ:
                done.append((node, w))
                truncated += 1
                continue
            rest = 1.0 - sum(p for _, p in succ)  # mass of edges leaving the listing
            if rest > 1e-12:
                done.append((node, w * rest))
                truncated += 1
            for idx, p in succ:
                wp = w * p
                if wp < prune.min_weight:
                    pruned_mass += wp
                    pruned_paths += 1
                    continue
                parent.append(node)
                node_instr.append(idx)
                nxt.append((len(node_instr) - 1, wp))
        if len(nxt) > prune.max_paths:
            order = sorted(range(len(nxt)), key=lambda k: (-nxt[k][1], k))
            keep = sorted(order[: prune.max_paths])
            dropped = order[prune.max_paths :]
            pruned_mass += sum(nxt[k][1] for k in dropped)
            pruned_paths += len(dropped)
            nxt = [nxt[k] for k in keep]
        frontier = nxt
        if not frontier:
            break
    done.extend(frontier)
    return parent, node_instr, done, pruned_mass, pruned_paths, truncated


def _materialise(parent, node_instr, node) -> list[int]:
    out = []
    while node >= 0:
        out.append(node_instr[node])
        node = parent[node]
    out.reverse()
    return out


def enumerate_paths(cfg: Cfg, start_address: int, window: int, prune: PruneOptions | None = None) -> PathSet:
    """All paths of up to ``window`` instructions beginning at ``start_address``.

    Paths that hit a return with no known caller or an unknown successor end
    early and keep their weight. Weights of the surviving paths are
    renormalised to the mass that was not pruned.
    """
    prune = prune or PruneOptions()
    start = cfg.listing.index_of(start_address)
    parent, node_instr, done, pruned_mass, pruned_paths, truncated = _enumerate_raw(cfg, start, window, prune)
    kept = sum(w for _, w in done)
    scale = 1.0 / kept if kept > 0 else 0.0
    listing = cfg.listing
    paths = [
        (tuple(listing[i] for i in _materialise(parent, node_instr, node)), w * scale) for node, w in done
    ]
    return PathSet(paths, pruned_mass, pruned_paths, truncated)


def score_path(path: Sequence[ListingInstruction], mode: AllocationMode, geom: ValidatedGeometry) -> int:
    """Positioning shifts of the path's access sequence under ``mode``.

    Vertical scoring assumes the tracks start aligned with the first
    register the path touches.
    """
    regs = [r for ins in path for r in ins.accessed_registers]
    if mode is H:
        return shift_cost_h(geom) * len(regs)
    total = 0
    for a, b in zip(regs, regs[1:]):
        total += abs(geom.vertical_offset(b) - geom.vertical_offset(a))
    return total * geom.num_tracks


def _decide(h_score: float, v_score: float, margin: float) -> AllocationMode:
    eps = _TIE_RTOL * max(1.0, abs(h_score), abs(v_score))
    return V if v_score + margin < h_score - eps else H


def _decide_by_paths(
    cfg: Cfg, index: int, window: int, geom: ValidatedGeometry, prune: PruneOptions, aggregate: str
) -> AllocationMode:
    pset = enumerate_paths(cfg, cfg.listing[index].address, window, prune)
    margin = prune.margin(geom)
    if aggregate == "score":
        h = sum(w * score_path(p, H, geom) for p, w in pset.paths)
        v = sum(w * score_path(p, V, geom) for p, w in pset.paths)
        return _decide(h, v, margin)
    vote_v = vote_h = 0.0
    for p, w in pset.paths:
        if _decide(score_path(p, H, geom), score_path(p, V, geom), margin) is V:
            vote_v += w
        else:
            vote_h += w
    return V if vote_v > vote_h + _TIE_RTOL else H


def expected_scores(cfg: Cfg, geom: ValidatedGeometry, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact probability-weighted H and V shift scores for every start instruction."""
    listing = cfg.listing
    n = len(listing)
    nr = geom.num_regs
    none = nr  # anchor column for "nothing accessed yet"
    off = np.array([geom.vertical_offset(r) for r in range(nr)], dtype=np.float64)

    n_acc = np.zeros(n)
    cost = np.zeros((n, nr + 1))
    nxt_anchor = np.tile(np.arange(nr + 1), (n, 1))
    for i, ins in enumerate(listing.instructions):
        regs = ins.accessed_registers
        if not regs:
            continue
        n_acc[i] = len(regs)
        inner = sum(abs(off[b] - off[a]) for a, b in zip(regs, regs[1:])) * geom.num_tracks
        cost[i, :nr] = inner + np.abs(off - off[regs[0]]) * geom.num_tracks
        cost[i, none] = inner
        nxt_anchor[i, :] = regs[-1]

    rows, cols, vals = [], [], []
    for i in range(n):
        for j, p in cfg.successors(i):
            rows.append(i)
            cols.append(j)
            vals.append(p)
    trans = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))

    rows_idx = np.arange(n)[:, None]
    v_val = np.zeros((n, nr + 1))
    h_cnt = np.zeros(n)
    for _ in range(window):
        ahead = trans @ v_val
        v_val = cost + ahead[rows_idx, nxt_anchor]
        h_cnt = n_acc + trans @ h_cnt
    return h_cnt * shift_cost_h(geom), v_val[:, none]


def _check_args(aggregate: str, method: str, window: int) -> None:
    if aggregate not in ("score", "vote"):
        raise ValueError("aggregate must be 'score' or 'vote'")
    if method not in ("dp", "paths"):
        raise ValueError("method must be 'dp' or 'paths'")
    if aggregate == "vote" and method == "dp":
        raise ValueError("vote aggregation needs explicit paths (method='paths')")
    if window < 0:
        raise ValueError("window must be non-negative")


def recommend_bit(
    cfg: Cfg,
    address: int,
    window: int,
    geom: ValidatedGeometry,
    prune: PruneOptions | None = None,
    aggregate: str = "score",
    method: str = "dp",
) -> AllocationMode:
    """Recommended allocation for an interval starting at ``address``.

    Vertical wins only if its score beats horizontal by more than the
    hysteresis margin; ties go to horizontal.
    """
    prune = prune or PruneOptions()
    _check_args(aggregate, method, window)
    index = cfg.listing.index_of(address)
    if method == "paths":
        return _decide_by_paths(cfg, index, window, geom, prune, aggregate)
    h, v = expected_scores(cfg, geom, window)
    return _decide(float(h[index]), float(v[index]), prune.margin(geom))


def build_table(
    cfg: Cfg,
    geom: ValidatedGeometry,
    window: int,
    prune: PruneOptions | None = None,
    aggregate: str = "score",
    method: str = "dp",
) -> RecommendationTable:
    """One recommendation bit for every instruction in the listing."""
    prune = prune or PruneOptions()
    _check_args(aggregate, method, window)
    listing = cfg.listing
    if method == "dp":
        h, v = expected_scores(cfg, geom, window)
        margin = prune.margin(geom)
        modes = {ins.address: _decide(float(h[i]), float(v[i]), margin) for i, ins in enumerate(listing.instructions)}
    else:
        modes = {
            ins.address: _decide_by_paths(cfg, i, window, geom, prune, aggregate)
            for i, ins in enumerate(listing.instructions)
        }
    return RecommendationTable(modes, window, geometry_fingerprint(geom))

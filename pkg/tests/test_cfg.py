import pytest
from hypothesis import given, settings, strategies as st

from racetrack_rf.cfg import (
    BranchProfile,
    Cfg,
    EdgeKind,
    InstrKind,
    ListingError,
    ListingInstruction,
    ProgramListing,
    annotate_probabilities,
    apply_profile,
    build_cfg,
    parse_listing,
    profile_trace,
)
from racetrack_rf.synthetic import demo_listing, demo_workload
from racetrack_rf.trace import TraceInstruction

STRAIGHT = """\
10 mov ; S=- D=1 K=seq
14 add ; S=1,2 D=3 K=seq
18 sub ; S=3 D=3 K=seq
"""

DIAMOND = """\
0 cmp ; S=1,2 D=- K=seq
4 bge ; S=1 D=- K=cbr T=10
8 add ; S=1 D=1 K=seq
c b ; S=- D=- K=br T=14
10 sub ; S=2 D=2 K=seq
14 mul ; S=1,2 D=3 K=seq
18 ret ; S=- D=- K=ret
"""

CALL = """\
0 mov ; S=- D=0 K=seq
4 bl ; S=- D=- K=call T=20
8 add ; S=0 D=0 K=seq
c bl ; S=- D=- K=call T=20
10 ret ; S=- D=- K=ret
20 ld ; S=- D=5 K=seq
24 ret ; S=- D=- K=ret
"""


def test_straight_line():
    lst = parse_listing(STRAIGHT)
    assert [i.kind for i in lst.instructions] == [InstrKind.SEQ] * 3
    cfg = build_cfg(lst)
    assert len(cfg.blocks) == 1 and cfg.edges == ()


def test_cbr_fallthrough_and_target():
    cfg = build_cfg(parse_listing(DIAMOND))
    cbr = cfg.block_of(1)
    outs = {e.kind: e for e in cfg.out_edges(cbr)}
    assert set(outs) == {EdgeKind.TAKEN, EdgeKind.NOT_TAKEN}
    assert cfg.blocks[outs[EdgeKind.NOT_TAKEN].dst].start == 2
    assert cfg.blocks[outs[EdgeKind.TAKEN].dst].start == 4


def test_diamond_structure():
    cfg = build_cfg(parse_listing(DIAMOND))
    assert len(cfg.blocks) == 4
    join = cfg.block_of(5)
    assert len(cfg.in_edges(join)) == 2
    assert len(cfg.out_edges(cfg.block_of(1))) == 2


def test_call_return_linkage():
    lst = parse_listing(CALL)
    cfg = build_cfg(lst)
    assert cfg.call_linkage == {0x4: 0x8, 0xC: 0x10}
    assert cfg.ret_targets[0x24] == (0x8, 0x10)
    ret = lst.index_of(0x24)
    assert dict(cfg.successors(ret)) == {2: 0.5, 4: 0.5}
    assert cfg.successors(1) == ((5, 1.0),)
    # the program's own ret has no caller and ends paths
    assert cfg.successors(4) == ()


@pytest.mark.parametrize(
    "text, msg",
    [
        ("0 b ; S=- D=- K=br T=40\n", "unresolved target"),
        ("0 add S=- D=- K=seq\n", "missing ';'"),
        ("0 add ; S=- K=seq\n", "missing D="),
        ("4 a ; S=- D=- K=seq\n0 b ; S=- D=- K=seq\n", "strictly increasing"),
        ("0 bge ; S=- D=- K=cbr\n", "cbr needs a target"),
        ("0 ret ; S=- D=- K=ret T=0\n", "takes no target"),
        ("0 x ; S=a D=- K=seq\n", "bad register list"),
        ("0 x ; S=- D=- K=jmp\n", "unknown kind"),
    ],
)
def test_listing_errors(text, msg):
    with pytest.raises(ListingError, match=msg):
        parse_listing(text)


def test_listing_error_position():
    with pytest.raises(ListingError) as exc:
        parse_listing("0 a ; S=- D=- K=seq\n4 b ; S=- D=- Q=1 K=seq\n")
    assert exc.value.line == 2 and exc.value.column == 15


def test_listing_register_range():
    with pytest.raises(ListingError):
        parse_listing("0 a ; S=40 D=- K=seq\n", num_regs=32)


def _trace_of(addresses):
    return [TraceInstruction(a, "x") for a in addresses]


def test_branch_probabilities():
    lst = parse_listing("0 a ; S=- D=- K=seq\n4 bne ; S=- D=- K=cbr T=0\n8 ret ; S=- D=- K=ret\n")
    addrs = []
    for taken in [True] * 70 + [False] * 30:
        addrs += [0, 4] + ([] if taken else [8])
    cfg = annotate_probabilities(build_cfg(lst), _trace_of(addrs))
    probs = {e.kind: e.prob for e in cfg.out_edges(cfg.block_of(1))}
    assert probs[EdgeKind.TAKEN] == pytest.approx(0.7)
    assert probs[EdgeKind.NOT_TAKEN] == pytest.approx(0.3)


def test_unexecuted_branch_default():
    cfg = annotate_probabilities(build_cfg(parse_listing(DIAMOND)), _trace_of([0]))
    assert sorted(e.prob for e in cfg.out_edges(cfg.block_of(1))) == [0.5, 0.5]


def test_unconditional_single_edge():
    cfg = build_cfg(parse_listing(DIAMOND))
    (e,) = cfg.out_edges(cfg.block_of(3))
    assert e.kind is EdgeKind.JUMP and e.prob == 1.0


def test_profile_limit():
    lst = parse_listing("0 bne ; S=- D=- K=cbr T=0\n4 ret ; S=- D=- K=ret\n")
    prof = profile_trace(lst, _trace_of([0, 0, 0, 4]), limit=2)
    assert prof.taken == {0: 2} and prof.not_taken == {}


def test_profile_mismatch():
    lst = parse_listing(STRAIGHT)
    with pytest.raises(ListingError):
        profile_trace(lst, _trace_of([0x10, 0x99]))


def test_return_probabilities_from_profile():
    lst = parse_listing(CALL)
    trace = _trace_of([0, 4, 0x20, 0x24, 8, 0xC, 0x20, 0x24, 0x10])
    cfg = annotate_probabilities(build_cfg(lst), trace)
    assert dict(cfg.successors(lst.index_of(0x24))) == {2: 0.5, 4: 0.5}
    trace = _trace_of([0, 4, 0x20, 0x24, 8])
    cfg = annotate_probabilities(build_cfg(lst), trace)
    assert dict(cfg.successors(lst.index_of(0x24))) == {2: 1.0}


def test_indirect_branch_unknown():
    lst = parse_listing("0 a ; S=- D=- K=seq\n4 br ; S=1 D=- K=br\n8 b ; S=- D=- K=seq\n")
    cfg = build_cfg(lst)
    (e,) = cfg.out_edges(cfg.block_of(1))
    assert e.kind is EdgeKind.UNKNOWN and e.dst is None
    assert cfg.successors(1) == ()


def test_demo_listing_cfg_stochastic():
    work = demo_workload()
    cfg = annotate_probabilities(build_cfg(work.listing), work.trace)
    for bi in range(len(cfg.blocks)):
        outs = cfg.out_edges(bi)
        if outs:
            assert sum(e.prob for e in outs) == pytest.approx(1.0, abs=1e-9)


def test_json_round_trip():
    work = demo_workload()
    cfg = annotate_probabilities(build_cfg(work.listing), work.trace)
    again = Cfg.from_json(cfg.to_json())
    assert again.to_json() == cfg.to_json()
    assert again.edges == cfg.edges and again.blocks == cfg.blocks


def test_listing_serialize_round_trip():
    lst = demo_listing()
    assert parse_listing(lst.serialize()) == lst
    assert parse_listing(lst.serialize()).serialize() == lst.serialize()


kinds = st.sampled_from(list(InstrKind))


@st.composite
def listings(draw):
    n = draw(st.integers(1, 12))
    out = []
    for i in range(n):
        k = draw(kinds)
        target = None
        if k in (InstrKind.COND_BRANCH, InstrKind.BRANCH, InstrKind.CALL):
            if k is InstrKind.COND_BRANCH or draw(st.booleans()):
                target = 4 * draw(st.integers(0, n - 1))
        regs = st.lists(st.integers(0, 31), max_size=3).map(tuple)
        out.append(ListingInstruction(4 * i, "op", draw(regs), draw(regs), k, target))
    return ProgramListing(tuple(out))


@settings(max_examples=200, deadline=None)
@given(listings())
def test_cfg_invariants(lst):
    cfg = build_cfg(lst)
    covered = sorted(i for b in cfg.blocks for i in range(b.start, b.end + 1))
    assert covered == list(range(len(lst)))
    for b in cfg.blocks[1:]:
        prev = lst[b.start - 1]
        starts_here = any(ins.target == lst[b.start].address for ins in lst.instructions)
        assert prev.kind.terminates_block or starts_here
    for bi, blk in enumerate(cfg.blocks):
        outs = [e for e in cfg.out_edges(bi)]
        if lst[blk.end].kind is InstrKind.COND_BRANCH:
            assert len(outs) == 2
        if outs and any(e.kind is not EdgeKind.NOT_TAKEN or e.dst is not None for e in outs):
            assert sum(e.prob for e in outs) == pytest.approx(1.0, abs=1e-9)
    assert build_cfg(lst) == cfg
    rebuilt = build_cfg(parse_listing(cfg.to_listing_text()))
    assert rebuilt.blocks == cfg.blocks and rebuilt.edges == cfg.edges


def test_profile_dict_round_trip():
    prof = BranchProfile({4: 3}, {4: 1}, {0x24: {8: 2}})
    assert BranchProfile.from_dict(prof.to_dict()) == prof
    cfg = apply_profile(build_cfg(parse_listing(CALL)), prof)
    assert cfg.profile == prof

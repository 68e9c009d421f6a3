import numpy as np
import pytest

from racetrack_rf.cfg import InstrKind, parse_listing
from racetrack_rf.synthetic import (
    BranchBehaviour,
    Phase,
    SyntheticSpec,
    build_loop_program,
    bundled_workload,
    execute_listing,
    phased_workload,
)
from racetrack_rf.trace import access_sequence


def test_branch_behaviour_checks():
    with pytest.raises(ValueError):
        BranchBehaviour(trips=0)
    with pytest.raises(ValueError):
        BranchBehaviour(taken_prob=1.5)


def test_spec_checks():
    with pytest.raises(ValueError):
        SyntheticSpec(-1)
    with pytest.raises(ValueError):
        SyntheticSpec(10, hot_ratio=2)
    with pytest.raises(ValueError):
        SyntheticSpec(10, value_bits=65)


def test_execute_follows_calls_and_trips():
    lst = parse_listing(
        "0 a ; S=- D=1 K=seq\n4 bl ; S=- D=- K=call T=10\n8 bne ; S=1 D=- K=cbr T=0\nc ret ; S=- D=- K=ret\n"
        "10 f ; S=2 D=3 K=seq\n14 ret ; S=- D=- K=ret\n"
    )
    trace = execute_listing(lst, {8: BranchBehaviour(trips=3)}, 100)
    assert [t.address for t in trace] == [0, 4, 0x10, 0x14, 8] * 3 + [0xC]


def test_execute_values_consistent():
    lst = parse_listing("0 a ; S=1 D=1 K=seq\n4 b ; S=- D=- K=br T=0\n")
    trace = execute_listing(lst, {}, 50, seed=1)
    assert len(trace) == 50
    cur = 0
    for ins in trace:
        if ins.sources:
            assert ins.sources[0].value == cur
        if ins.destinations:
            assert ins.destinations[0].before == cur
            cur = ins.destinations[0].after


def test_loop_program_layout():
    lst, beh = build_loop_program([Phase(2, 1.0, 5), Phase(4, 0.5, 5)], 2, rng=np.random.default_rng(0))
    kinds = [i.kind for i in lst.instructions]
    assert kinds.count(InstrKind.COND_BRANCH) == 3 and kinds[-1] is InstrKind.RET
    assert len(beh) == 3


def test_cold_burst_sorted():
    lst, _ = build_loop_program([Phase(2, 0.5, 1, body_length=20, hot_base=0, cold_burst=True)], rng=np.random.default_rng(0))
    regs = [a for ins in lst.instructions for a in ins.sources + ins.destinations]
    cold = [r for r in regs if r > 1]
    assert len(cold) == 30


def test_phased_half_and_half():
    work = phased_workload(phase_length=2600, repeats=2)
    regs = [[a.reg for a in access_sequence(i)] for i in work.trace]
    first = work.listing[0].address
    assert work.trace[0].address == first
    n = len(work.trace)
    assert 4 * 2600 * 0.95 <= n <= 4 * 2600 + 10
    # the hot half concentrates on two registers, the cycling half on all of them
    half = [r for rr in regs[: n // 4] for r in rr]
    assert len(set(half)) < 32 and max(np.bincount(half)) > 0.4 * len(half)


@pytest.mark.parametrize("name", ["demo", "hotcold", "phased"])
def test_bundled_deterministic(name):
    a = bundled_workload(name)
    b = bundled_workload(name)
    assert a.trace == b.trace and a.listing == b.listing


def test_bundled_unknown():
    with pytest.raises(ValueError):
        bundled_workload("nope")

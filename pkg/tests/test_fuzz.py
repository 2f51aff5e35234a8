"""Schedule fuzzing: under synchrony, honest-only runs keep safety no
matter how participation fluctuates (liveness may stall, safety may not).
Every awake-at-round-end process holds the complete message history, so
all same-round tallies agree; sleep and wake patterns only delay people."""

from fractions import Fraction

from hypothesis import given, settings
from hypothesis import strategies as st

from sleepy_tob.model_checks import ModelParams
from sleepy_tob.oracle import Verdict, check_safety_after, check_trace_wellformed
from sleepy_tob.world import Schedule, null_strategy, run

THIRD = Fraction(1, 3)


@st.composite
def honest_schedules(draw):
    n = draw(st.integers(3, 7))
    horizon = draw(st.integers(6, 12))
    eta = draw(st.sampled_from([0, 1, 2, 4, None]))
    awake = []
    for _ in range(horizon + 1):
        members = draw(
            st.sets(st.integers(0, n - 1), min_size=0, max_size=n)
        )
        awake.append(frozenset(members))
    params = ModelParams(
        tau=eta if eta is not None else 4,
        eta=eta,
        pi=0,
        gamma=Fraction(1, 4),
        beta=THIRD,
    )
    return Schedule(
        n=n,
        horizon=horizon,
        awake_honest=tuple(awake),
        byzantine=tuple([frozenset()] * (horizon + 1)),
        synchronous=tuple([True] * horizon),
        r_a=None,
        pi=0,
        params=params,
    )


@settings(max_examples=120, deadline=None)
@given(honest_schedules(), st.integers(0, 2**32 - 1))
def test_honest_synchronous_runs_are_always_safe(schedule, seed):
    trace = run(schedule, null_strategy(), seed)
    assert check_safety_after(trace, 0).verdict is Verdict.PASS
    assert check_trace_wellformed(trace).verdict is Verdict.PASS


@settings(max_examples=60, deadline=None)
@given(honest_schedules(), st.integers(0, 2**32 - 1))
def test_honest_runs_decide_only_extensions_per_process(schedule, seed):
    trace = run(schedule, null_strategy(), seed)
    last = {}
    for e in trace.decide_events():
        prev = last.get(e.pid)
        if prev is not None:
            from sleepy_tob.core import compatible

            assert compatible(prev, e.log)
        last[e.pid] = e.log

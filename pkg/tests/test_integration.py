"""End-to-end runs exercising paths the module tests touch only in
isolation: churn with sleep/wake cycles, corruption inside the window,
never-expiring votes, and adversarial proposal ties."""

from fractions import Fraction

from sleepy_tob.core import Log, ProposeMsg, Value, vrf_eval
from sleepy_tob.ga import GaOutput
from sleepy_tob.model_checks import ModelParams, check_all, check_async_conditions
from sleepy_tob.oracle import (
    Verdict,
    check_async_resilience,
    check_healing,
    check_liveness_after,
    check_safety_after,
)
from sleepy_tob.tob import ProcessState, step_round1
from sleepy_tob.world import (
    Schedule,
    constant_schedule,
    generate_schedule,
    null_strategy,
    run,
    strategy_prop1,
)

THIRD = Fraction(1, 3)


def test_churny_faultfree_run_stays_safe_and_live():
    sched = generate_schedule(
        n=16, horizon=20, tau=4, gamma=Fraction(1, 10), beta=THIRD,
        pi=0, r_a=None, seed=21, n_byz=0,
    )
    assert check_all(sched).all_pass
    trace = run(sched, null_strategy(), seed=21)
    assert check_safety_after(trace, 0).verdict is Verdict.PASS
    assert check_liveness_after(trace, 0, 10).verdict is Verdict.PASS
    # someone actually slept and woke again, so queued delivery was exercised
    slept = any(
        p not in sched.honest(r) and p in sched.honest(r + 1)
        for r in range(sched.horizon)
        for p in range(sched.n)
    )
    assert slept


def test_corruption_inside_window_still_resilient():
    # two Byzantine from the start, one clique member corrupted mid-window;
    # the survivors still outnumber everyone whose votes count
    n, horizon, r_a, pi = 12, 18, 6, 2
    awake, byz = [], []
    for r in range(horizon + 1):
        if r <= r_a + 1:
            awake.append(frozenset(range(10)))
            byz.append(frozenset({10, 11}))
        else:
            awake.append(frozenset(range(9)))
            byz.append(frozenset({9, 10, 11}))
    params = ModelParams(tau=4, eta=4, pi=pi, gamma=Fraction(1, 10), beta=THIRD)
    sched = Schedule(
        n=n,
        horizon=horizon,
        awake_honest=tuple(awake),
        byzantine=tuple(byz),
        synchronous=tuple(not (r_a + 1 <= r <= r_a + pi) for r in range(horizon)),
        r_a=r_a,
        pi=pi,
        params=params,
    )
    sched.validate()
    assert check_async_conditions(sched, r_a, pi, 4, THIRD).passed
    trace = run(sched, strategy_prop1(), seed=13)
    assert check_async_resilience(trace, r_a, pi).verdict is Verdict.PASS
    assert check_healing(trace, r_a + pi, liveness_window=8).verdict is Verdict.PASS


def test_infinite_expiration_faultfree():
    params = ModelParams(tau=2, eta=None, pi=0, gamma=Fraction(0), beta=THIRD)
    sched = constant_schedule(n=6, horizon=12, n_byz=0, params=params)
    trace = run(sched, null_strategy(), seed=4)
    assert check_safety_after(trace, 0).verdict is Verdict.PASS
    assert check_liveness_after(trace, 0, 10).verdict is Verdict.PASS


def test_proposal_equivocation_resolved_by_smallest_log():
    # one sender, one view, two different logs under the same lottery ticket:
    # the tie breaks to the lexicographically smaller log
    state = ProcessState(pid=0, vrf_seed=9)
    tag = vrf_eval(9, 5, 2)
    small = Log((Value(1, 5, 2),))
    large = Log((Value(8, 5, 2),))
    pa = ProposeMsg(sender=5, view=2, log=large, vrf=tag)
    pb = ProposeMsg(sender=5, view=2, log=small, vrf=tag)
    for ordering in ([pa, pb], [pb, pa]):
        _, vote = step_round1(state, 2, GaOutput(), ordering)
        assert vote.log == small

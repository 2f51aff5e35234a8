"""Round-based sleepy-model environment.

A schedule fixes, per round, which well-behaved processes are awake and
which processes are Byzantine, plus a synchrony flag per round.  Execution
of round r is a send phase (everyone awake at the beginning of r sends,
Byzantine messages come from the adversary strategy) followed by a receive
phase: every process awake at the end of r (equivalently, at the beginning
of r+1) receives queued messages.  Under synchrony that is every message
not yet received; in an asynchronous round the strategy picks an arbitrary
subset, except that a process's own messages always reach it.  Messages
for sleeping processes stay queued until their first awake receive phase.

Runs are deterministic functions of (schedule, strategy, seed) and record
a full trace: sends, deliveries, decisions, and one agreement record per
round for the oracles.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from . import model_checks
from .core import (
    Log,
    ProcessId,
    ProposeMsg,
    Value,
    VoteMsg,
    vrf_eval,
)
from .ga import ForgeryError, GaOutput, GaRecord, ReceiverView, grade, merge_latest
from .model_checks import ModelParams
from .tob import (
    ExpirationWindow,
    Phase,
    ProcessState,
    ViewClock,
    latest_unexpired,
    step_round1,
    step_round2,
    step_view0,
)

Msg = VoteMsg | ProposeMsg


class ScheduleError(Exception):
    """Schedule violates a structural invariant."""


class InfeasibleScheduleError(Exception):
    """No schedule satisfying the requested constraints was found."""


@dataclass(frozen=True)
class Schedule:
    """Adversary-chosen environment for one run.

    ``awake_honest`` and ``byzantine`` hold beginning-of-round sets for
    rounds 0..horizon (one extra entry: who is awake at the end of the last
    executed round).  ``synchronous`` has one flag per executed round; the
    asynchronous rounds are exactly [r_a+1, r_a+pi] when a window exists.
    """

    n: int
    horizon: int
    awake_honest: tuple[frozenset[ProcessId], ...]
    byzantine: tuple[frozenset[ProcessId], ...]
    synchronous: tuple[bool, ...]
    r_a: int | None
    pi: int
    params: ModelParams

    def honest(self, r: int) -> frozenset[ProcessId]:
        return self.awake_honest[r]

    def byz(self, r: int) -> frozenset[ProcessId]:
        return self.byzantine[r]

    def awake(self, r: int) -> frozenset[ProcessId]:
        return self.awake_honest[r] | self.byzantine[r]

    def sync(self, r: int) -> bool:
        return self.synchronous[r]

    def validate(self) -> None:
        if self.horizon < 1:
            raise ScheduleError("horizon must be at least 1 round")
        if len(self.awake_honest) != self.horizon + 1:
            raise ScheduleError("awake sets must cover rounds 0..horizon inclusive")
        if len(self.byzantine) != self.horizon + 1:
            raise ScheduleError("byzantine sets must cover rounds 0..horizon inclusive")
        if len(self.synchronous) != self.horizon:
            raise ScheduleError("need one synchrony flag per executed round")
        for r in range(self.horizon + 1):
            ids = self.awake_honest[r] | self.byzantine[r]
            if ids and (min(ids) < 0 or max(ids) >= self.n):
                raise ScheduleError(f"round {r} names a process outside [0, {self.n})")
            if self.awake_honest[r] & self.byzantine[r]:
                raise ScheduleError(f"round {r} marks a process both honest and Byzantine")
        for r in range(self.horizon):
            if not self.byzantine[r] <= self.byzantine[r + 1]:
                raise ScheduleError("Byzantine sets must be constant or growing")
        if self.r_a is None:
            if self.pi != 0:
                raise ScheduleError("a window length needs a last synchronous round r_a")
            expected_async: set[int] = set()
        else:
            if self.pi < 1:
                raise ScheduleError("a window at r_a must have positive length")
            if self.r_a + self.pi + 1 >= self.horizon:
                raise ScheduleError("window must end before the final round")
            expected_async = set(range(self.r_a + 1, self.r_a + self.pi + 1))
        actual_async = {r for r in range(self.horizon) if not self.synchronous[r]}
        if actual_async != expected_async:
            raise ScheduleError(
                f"asynchronous rounds {sorted(actual_async)} do not match the "
                f"declared window {sorted(expected_async)}"
            )

    @property
    def window_rounds(self) -> range:
        if self.r_a is None:
            return range(0)
        return range(self.r_a + 1, self.r_a + self.pi + 1)


def constant_schedule(
    n: int,
    horizon: int,
    n_byz: int,
    params: ModelParams,
    *,
    r_a: int | None = None,
    pi: int = 0,
    honest_awake: Iterable[ProcessId] | None = None,
) -> Schedule:
    """Full-participation schedule: fixed honest awake set, fixed Byzantine
    set (the top ids), single optional window."""
    byz = frozenset(range(n - n_byz, n))
    honest = (
        frozenset(honest_awake) if honest_awake is not None else frozenset(range(n - n_byz))
    )
    sync = tuple(
        not (r_a is not None and r_a + 1 <= r <= r_a + pi) for r in range(horizon)
    )
    return Schedule(
        n=n,
        horizon=horizon,
        awake_honest=tuple([honest] * (horizon + 1)),
        byzantine=tuple([byz] * (horizon + 1)),
        synchronous=sync,
        r_a=r_a,
        pi=pi,
        params=params,
    )


@dataclass(frozen=True)
class SendEvent:
    round: int
    msg: Msg


@dataclass(frozen=True)
class DeliverEvent:
    round: int
    receiver: ProcessId
    msg: Msg


@dataclass(frozen=True)
class DecideEvent:
    round: int
    pid: ProcessId
    log: Log


@dataclass(frozen=True)
class GaRecordEvent:
    round: int
    record: GaRecord


Event = SendEvent | DeliverEvent | DecideEvent | GaRecordEvent


@dataclass(frozen=True)
class Trace:
    """Append-only event log of one run plus the context to interpret it."""

    schedule: Schedule
    strategy_name: str
    seed: int
    events: tuple[Event, ...]
    final_logs: dict[ProcessId, Log]

    @property
    def horizon(self) -> int:
        return self.schedule.horizon

    def decide_events(self) -> list[DecideEvent]:
        return [e for e in self.events if isinstance(e, DecideEvent)]

    def send_events(self) -> list[SendEvent]:
        return [e for e in self.events if isinstance(e, SendEvent)]

    def vote_sends(self) -> list[SendEvent]:
        return [e for e in self.send_events() if isinstance(e.msg, VoteMsg)]

    def propose_sends(self) -> list[SendEvent]:
        return [e for e in self.send_events() if isinstance(e.msg, ProposeMsg)]

    def ga_records(self) -> dict[int, GaRecord]:
        return {e.round: e.record for e in self.events if isinstance(e, GaRecordEvent)}

    def decided_up_to(self, r: int) -> list[Log]:
        """Distinct logs decided by well-behaved processes in rounds <= r."""
        seen: dict[Log, None] = {}
        for e in self.decide_events():
            if e.round <= r:
                seen.setdefault(e.log, None)
        return list(seen)

    def first_input_round(self, value: Value) -> int | None:
        """Round in which ``value`` was introduced: its first appearance as
        the fresh tip of a proposal from a well-behaved process."""
        for e in self.events:
            if isinstance(e, SendEvent) and isinstance(e.msg, ProposeMsg):
                if e.msg.sender in self.schedule.honest(e.round) and e.msg.log.values:
                    if e.msg.log.values[-1] == value:
                        return e.round
        return None


StrategyMessages = Callable[["World", int], Sequence[Msg]]
StrategyFilter = Callable[["World", int, ProcessId, Sequence[Msg]], Iterable[Msg]]


@dataclass(frozen=True)
class AdversaryStrategy:
    """Byzantine behavior: a per-round message generator plus a delivery
    filter consulted only in asynchronous rounds."""

    name: str
    messages: StrategyMessages
    delivery_filter: StrategyFilter
    validate: Callable[["World"], None] | None = None


def null_strategy() -> AdversaryStrategy:
    return AdversaryStrategy(
        name="none",
        messages=lambda world, r: [],
        delivery_filter=lambda world, r, q, cand: cand,
    )


class World:
    """Deterministic single-run event loop."""

    def __init__(self, schedule: Schedule, strategy: AdversaryStrategy, seed: int):
        schedule.validate()
        self.schedule = schedule
        self.strategy = strategy
        self.seed = seed
        self.window = ExpirationWindow(schedule.params.eta)
        self.states: dict[ProcessId, ProcessState] = {
            p: ProcessState(pid=p, vrf_seed=seed) for p in range(schedule.n)
        }
        self.pending: dict[ProcessId, list[Msg]] = {p: [] for p in range(schedule.n)}
        self.events: list[Event] = []
        self.round: int = 0
        if strategy.validate is not None:
            strategy.validate(self)

    def _broadcast(self, msg: Msg, r: int) -> None:
        self.events.append(SendEvent(round=r, msg=msg))
        for q in range(self.schedule.n):
            self.pending[q].append(msg)

    def step_round(self, r: int) -> None:
        """Execute the send and receive phases of round ``r``."""
        sched = self.schedule
        inputs: dict[ProcessId, Log] = {}

        for p in sorted(sched.honest(r)):
            state = self.states[p]
            state.awake = True
            clock = ViewClock(r)
            if clock.phase is Phase.VIEW0:
                for pm in step_view0(state):
                    self._broadcast(pm, r)
            elif clock.phase is Phase.ROUND1:
                outputs = (
                    state.pending_output
                    if state.pending_output_round == r - 1
                    else GaOutput()
                )
                proposals = state.proposals_seen.get(clock.view, set())
                decisions, vote = step_round1(state, clock.view, outputs, proposals)
                for log in decisions:
                    self.events.append(DecideEvent(round=r, pid=p, log=log))
                inputs[p] = vote.log
                self._broadcast(vote, r)
            else:
                outputs = (
                    state.pending_output
                    if state.pending_output_round == r - 1
                    else GaOutput()
                )
                vote, proposal = step_round2(state, clock.view, outputs)
                inputs[p] = vote.log
                self._broadcast(vote, r)
                self._broadcast(proposal, r)

        for asleep in sorted(set(range(sched.n)) - sched.awake(r)):
            self.states[asleep].awake = False

        for msg in self.strategy.messages(self, r):
            if msg.sender not in sched.byz(r):
                raise ForgeryError(
                    f"strategy authored a message for {msg.sender}, not Byzantine in round {r}"
                )
            if isinstance(msg, VoteMsg) and msg.round != r:
                raise ForgeryError(
                    f"strategy vote claims round {msg.round} during round {r}"
                )
            self._broadcast(msg, r)

        receivers = sorted(sched.honest(r + 1))
        views: dict[ProcessId, ReceiverView] = {}
        for q in receivers:
            state = self.states[q]
            queued = self.pending[q]
            if sched.sync(r):
                kept = list(queued)
            else:
                chosen = set(self.strategy.delivery_filter(self, r, q, tuple(queued)))
                kept = [m for m in queued if m in chosen or m.sender == q]
            kept_set = set(kept)
            self.pending[q] = [m for m in queued if m not in kept_set]
            for m in kept:
                self.events.append(DeliverEvent(round=r, receiver=q, msg=m))
                state.absorb(m)
            initial, current = latest_unexpired(state.votes_seen, r, self.window, q)
            merged = merge_latest(initial, current)
            output = grade(merged)
            state.pending_output = output
            state.pending_output_round = r
            views[q] = ReceiverView(
                initial=initial,
                received=current,
                output=output,
                m=len(merged),
            )

        if r >= 1:
            record = GaRecord(
                round=r,
                synchronous=sched.sync(r),
                inputs=inputs,
                byzantine=sched.byz(r),
                receivers=views,
            )
            self.events.append(GaRecordEvent(round=r, record=record))
        self.round = r + 1

    def run(self) -> Trace:
        for r in range(self.schedule.horizon):
            self.step_round(r)
        final = {
            p: self.states[p].delivered
            for p in range(self.schedule.n)
            if p not in self.schedule.byz(self.schedule.horizon)
        }
        return Trace(
            schedule=self.schedule,
            strategy_name=self.strategy.name,
            seed=self.seed,
            events=tuple(self.events),
            final_logs=final,
        )


def step_round(world: World, r: int) -> World:
    world.step_round(r)
    return world


def run(schedule: Schedule, strategy: AdversaryStrategy, seed: int) -> Trace:
    """Run one complete, deterministic simulation."""
    return World(schedule, strategy, seed).run()


def _window_target(world: World) -> Log:
    """Adversarial log conflicting with every honest chain (honest logs all
    start from the shared genesis value)."""
    sched = world.schedule
    assert sched.r_a is not None
    first_byz = min(sched.byz(sched.r_a + 1))
    view = ViewClock(sched.r_a + 1).view
    return Log((Value(id=10_000 + view, proposer=first_byz, view=view),))


def strategy_prop1() -> AdversaryStrategy:
    """Window attack: suppress all honest-to-honest delivery and push votes
    (and proposals, on proposal rounds) for one conflicting log."""

    def messages(world: World, r: int) -> list[Msg]:
        sched = world.schedule
        if sched.r_a is None or r not in sched.window_rounds:
            return []
        target = _window_target(world)
        out: list[Msg] = []
        for b in sorted(sched.byz(r)):
            out.append(VoteMsg(sender=b, round=r, log=target))
            if r % 2 == 0 and r >= 2:
                next_view = r // 2 + 1
                out.append(
                    ProposeMsg(
                        sender=b,
                        view=next_view,
                        log=target,
                        vrf=vrf_eval(world.seed, b, next_view),
                    )
                )
        return out

    def delivery_filter(
        world: World, r: int, q: ProcessId, cand: Sequence[Msg]
    ) -> list[Msg]:
        byz = world.schedule.byz(r)
        return [m for m in cand if m.sender in byz]

    def validate(world: World) -> None:
        sched = world.schedule
        for r in sched.window_rounds:
            if len(sched.byz(r)) < 2:
                raise ValueError(
                    "the suppression attack needs at least two Byzantine processes"
                )

    return AdversaryStrategy("prop1", messages, delivery_filter, validate)


def strategy_split_decision() -> AdversaryStrategy:
    """Window attack: show one half of the honest receivers unanimous votes
    for one value and the other half votes for a different value."""

    def _targets(world: World) -> tuple[Log, Log]:
        sched = world.schedule
        assert sched.r_a is not None
        byz = sched.byz(sched.r_a + 1)
        first_byz = min(byz) if byz else 0  # placeholder; nothing is sent without Byzantine ids
        view = ViewClock(sched.r_a + 1).view
        return (
            Log((Value(id=20_000 + view, proposer=first_byz, view=view),)),
            Log((Value(id=20_001 + view, proposer=first_byz, view=view),)),
        )

    def messages(world: World, r: int) -> list[Msg]:
        sched = world.schedule
        if sched.r_a is None or r not in sched.window_rounds:
            return []
        left, right = _targets(world)
        out: list[Msg] = []
        for b in sorted(sched.byz(r)):
            out.append(VoteMsg(sender=b, round=r, log=left))
            out.append(VoteMsg(sender=b, round=r, log=right))
        return out

    def delivery_filter(
        world: World, r: int, q: ProcessId, cand: Sequence[Msg]
    ) -> list[Msg]:
        byz = world.schedule.byz(r)
        left, right = _targets(world)
        mine = left if q % 2 == 0 else right
        return [
            m
            for m in cand
            if m.sender in byz and isinstance(m, VoteMsg) and m.log == mine
        ]

    return AdversaryStrategy("split_decision", messages, delivery_filter)


STRATEGIES: dict[str, Callable[[], AdversaryStrategy]] = {
    "none": null_strategy,
    "prop1": strategy_prop1,
    "split_decision": strategy_split_decision,
}


def generate_schedule(
    n: int,
    horizon: int,
    tau: int,
    gamma: Fraction,
    beta: Fraction,
    pi: int,
    r_a: int | None,
    seed: int,
    *,
    eta: int | None = None,
    beta_tilde: Fraction | None = None,
    n_byz: int | None = None,
    max_attempts: int = 50,
) -> Schedule:
    """Sample a schedule satisfying every model constraint, or raise
    ``InfeasibleScheduleError`` after bounded attempts.

    Churn moves are rejected locally whenever they would break the churn or
    failure-ratio bounds, the awake set is frozen around any asynchronous
    window so the window support conditions hold, and the result is passed
    through the full validator before being returned.
    """
    gamma, beta = Fraction(gamma), Fraction(beta)
    if not 0 <= gamma < beta:
        raise ValueError(f"gamma must be < beta (gamma={gamma}, beta={beta})")
    if pi >= 1:
        if r_a is None:
            raise ValueError("a window length needs r_a")
        if tau <= pi:
            raise ValueError(f"window must be shorter than the churn window (pi={pi}, tau={tau})")
        if r_a + pi + 1 >= horizon:
            raise ValueError("window must end before the final round")
    if eta is None:
        eta = tau
    bt = beta_tilde if beta_tilde is not None else model_checks.beta_tilde(beta, gamma)
    params = ModelParams(
        tau=tau, eta=eta, pi=pi, gamma=gamma, beta=beta, beta_tilde=beta_tilde
    )

    rng = random.Random(seed)
    if r_a is not None and pi >= 1:
        freeze_lo, freeze_hi = max(0, r_a - tau), r_a + pi + 1
    else:
        freeze_lo, freeze_hi = horizon + 2, horizon + 2  # never

    for _ in range(max_attempts):
        if n_byz is not None:
            k = n_byz
        else:
            # largest Byzantine set the failure ratio tolerates at 3/4 turnout
            k = 0
            while bt < 1 and (k + 1) * (1 - bt) < bt * (((n - k - 1) * 3) // 4):
                k += 1
        pool = list(range(n - k))
        if not pool:
            raise InfeasibleScheduleError("no honest processes left after corruption")
        byz = frozenset(range(n - k, n))

        start = max(1, (len(pool) * 3) // 4)
        awake: list[frozenset[ProcessId]] = [frozenset(rng.sample(pool, start))]
        for r in range(1, horizon + 1):
            prev = set(awake[r - 1])
            if freeze_lo <= r <= freeze_hi:
                awake.append(frozenset(prev))
                continue
            cur = set(prev)
            for p in pool:
                if p not in cur and rng.random() < 0.25:
                    cur.add(p)
            if gamma > 0:
                droppable = sorted(cur)
                rng.shuffle(droppable)
                recent: set[ProcessId] = set()
                if tau > 0:
                    recent = set().union(*awake[max(0, r - tau) : r])
                for p in droppable[: rng.randint(0, 2)]:
                    trial = cur - {p}
                    churn_ok = not recent or len(recent - trial) <= gamma * len(recent)
                    ratio_ok = k < bt * (len(trial) + k)
                    if churn_ok and ratio_ok and trial:
                        cur = trial
            if not (k < bt * (len(cur) + k)):
                cur |= set(pool)  # wake everyone rather than break the ratio
            awake.append(frozenset(cur))

        sync = tuple(
            not (r_a is not None and pi >= 1 and r_a + 1 <= r <= r_a + pi)
            for r in range(horizon)
        )
        schedule = Schedule(
            n=n,
            horizon=horizon,
            awake_honest=tuple(awake),
            byzantine=tuple([byz] * (horizon + 1)),
            synchronous=sync,
            r_a=r_a if pi >= 1 else None,
            pi=pi if pi >= 1 else 0,
            params=params,
        )
        try:
            schedule.validate()
        except ScheduleError:
            continue
        if model_checks.check_all(schedule).all_pass:
            return schedule

    raise InfeasibleScheduleError(
        f"no schedule satisfying the model constraints after {max_attempts} attempts"
    )

"""One-shot weak graded agreement over a single send/receive round.

Each awake process multicasts a vote for a log; each receiver tallies the
votes it holds and outputs graded logs:

* grade 1 for any log backed by more than two thirds of its tally,
* grade 0 for any log backed by more than one third (but at most two thirds).

A vote for a log counts as a vote for every prefix of that log.  Receivers
may additionally start from an *initial set* of older votes (at most one
per sender); a sender's current-round vote takes precedence over its entry
in the initial set, and a sender caught voting two different logs in one
round contributes nothing at all.  With empty initial sets the primitive
reduces to the plain single-round form.

Thresholds use exact integer cross-multiplication (3*count > 2*m), never
floating point, so runs are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .core import Log, ProcessId, VoteMsg


class ForgeryError(Exception):
    """A message claims a sender that is not allowed to author it."""


@dataclass(frozen=True)
class InitialVoteSet:
    """A receiver's carried-over votes from earlier rounds: at most one
    message per sender, all from rounds strictly before the instance's."""

    owner: ProcessId
    messages: frozenset[VoteMsg] = frozenset()

    def __post_init__(self) -> None:
        senders = [m.sender for m in self.messages]
        if len(senders) != len(set(senders)):
            raise ValueError("initial vote set holds more than one message per sender")

    @property
    def senders(self) -> frozenset[ProcessId]:
        return frozenset(m.sender for m in self.messages)


def empty_initial(owner: ProcessId) -> InitialVoteSet:
    return InitialVoteSet(owner=owner)


def merge_latest(
    initial: InitialVoteSet, round_msgs: Iterable[VoteMsg]
) -> frozenset[VoteMsg]:
    """Combine an initial vote set with the current round's votes.

    Current-round votes supersede initial-set entries from the same sender,
    equivocators (two differing logs from one sender in the round) are
    dropped entirely, and the result holds at most one message per sender.
    """
    seen_this_round: set[ProcessId] = set()
    poisoned: set[ProcessId] = set()
    current: dict[ProcessId, VoteMsg] = {}
    for msg in round_msgs:
        seen_this_round.add(msg.sender)
        prior = current.get(msg.sender)
        if msg.sender in poisoned:
            continue
        if prior is not None and prior.log != msg.log:
            poisoned.add(msg.sender)
            del current[msg.sender]
            continue
        current[msg.sender] = msg

    merged = dict(current)
    for msg in initial.messages:
        if msg.sender not in seen_this_round:
            merged[msg.sender] = msg
    return frozenset(merged.values())


def tally(msgs: Iterable[VoteMsg]) -> dict[Log, int]:
    """Vote count for every prefix of every voted log.

    ``count(L)`` is the number of senders whose vote extends (or equals) L;
    the input must hold at most one message per sender.
    """
    counts: dict[Log, int] = {}
    for msg in msgs:
        for p in msg.log.prefixes():
            counts[p] = counts.get(p, 0) + 1
    return counts


@dataclass(frozen=True)
class GaOutput:
    """Graded logs emitted by one receiver: log -> grade, keeping only the
    maximal grade per log."""

    grades: dict[Log, int] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return bool(self.grades)

    def grade_of(self, log: Log) -> int | None:
        return self.grades.get(log)

    def grade1_logs(self) -> list[Log]:
        return [log for log, g in self.grades.items() if g == 1]

    def longest_grade1(self) -> Log | None:
        """Longest grade-1 log.  Grade-1 logs of a single tally are always
        pairwise compatible, so the longest one is unique."""
        best = None
        for log in self.grade1_logs():
            if best is None or (len(log), log.lex_key) > (len(best), best.lex_key):
                best = log
        return best

    def longest_any(self) -> Log | None:
        """Longest output at any grade.  Equal-length conflicts prefer the
        grade-1 log if there is one, then the smallest by value ids."""
        best: tuple[int, int, tuple, Log] | None = None
        for log, g in self.grades.items():
            key = (-len(log), -g, log.lex_key)
            if best is None or key < best[:3]:
                best = (*key, log)
        return None if best is None else best[3]


def grade(msgs: Iterable[VoteMsg]) -> GaOutput:
    """Grade a merged vote set (at most one message per sender)."""
    msgs = list(msgs)
    m = len(msgs)
    grades: dict[Log, int] = {}
    for log, count in tally(msgs).items():
        if 3 * count > 2 * m:
            grades[log] = 1
        elif 3 * count > m:
            grades[log] = 0
    return GaOutput(grades)


@dataclass(frozen=True)
class ReceiverView:
    """What one receiver held and produced in an instance."""

    initial: InitialVoteSet
    received: frozenset[VoteMsg]
    output: GaOutput
    m: int  # perceived participation: distinct non-equivocating senders


@dataclass(frozen=True)
class GaRecord:
    """Full evidence of one instance, consumed by the trace oracles."""

    round: int
    synchronous: bool
    inputs: dict[ProcessId, Log]
    byzantine: frozenset[ProcessId]
    receivers: dict[ProcessId, ReceiverView]

    @property
    def initial_senders(self) -> frozenset[ProcessId]:
        out: set[ProcessId] = set()
        for view in self.receivers.values():
            out |= view.initial.senders
        return frozenset(out)


DeliveryFilter = Callable[[ProcessId, Sequence[VoteMsg]], Iterable[VoteMsg]]


def run_instance(
    round: int,
    inputs: Mapping[ProcessId, Log],
    byz_msgs: Sequence[VoteMsg] = (),
    initial_sets: Mapping[ProcessId, InitialVoteSet] | None = None,
    *,
    receivers: Iterable[ProcessId] | None = None,
    byzantine: Iterable[ProcessId] | None = None,
    synchronous: bool = True,
    delivery: DeliveryFilter | None = None,
) -> GaRecord:
    """Run one instance end to end and return its full record.

    ``inputs`` maps each well-behaved sender to its input log; ``byz_msgs``
    are adversarial votes for this round; ``initial_sets`` carry each
    receiver's older votes.  Under synchrony every sent message reaches
    every receiver; otherwise ``delivery`` picks the subset each receiver
    sees (a receiver's own vote is always delivered to itself).
    """
    initial_sets = dict(initial_sets or {})
    byz_set = (
        frozenset(byzantine)
        if byzantine is not None
        else frozenset(m.sender for m in byz_msgs)
    )
    for msg in byz_msgs:
        if msg.sender in inputs or msg.sender not in byz_set:
            raise ForgeryError(
                f"byzantine vote from {msg.sender} which is not Byzantine this round"
            )
        if msg.round != round:
            raise ValueError(f"byzantine vote for round {msg.round} in round {round}")

    sent: list[VoteMsg] = [
        VoteMsg(sender=p, round=round, log=log) for p, log in sorted(inputs.items())
    ]
    sent.extend(byz_msgs)

    if receivers is None:
        receiver_ids = sorted(set(inputs) | set(initial_sets))
    else:
        receiver_ids = sorted(set(receivers))

    views: dict[ProcessId, ReceiverView] = {}
    for q in receiver_ids:
        initial = initial_sets.get(q, empty_initial(q))
        if initial.owner != q:
            raise ValueError(f"initial set owned by {initial.owner} assigned to {q}")
        if any(m.round >= round for m in initial.messages):
            raise ValueError("initial set contains messages not strictly older than the round")
        if synchronous or delivery is None:
            got = set(sent)
        else:
            got = set(delivery(q, tuple(sent))) & set(sent)
            # self-delivery is never adversarially suppressed
            got |= {m for m in sent if m.sender == q and q in inputs}
        merged = merge_latest(initial, got)
        views[q] = ReceiverView(
            initial=initial,
            received=frozenset(got),
            output=grade(merged),
            m=len(merged),
        )

    return GaRecord(
        round=round,
        synchronous=synchronous,
        inputs=dict(sorted(inputs.items())),
        byzantine=byz_set,
        receivers=views,
    )

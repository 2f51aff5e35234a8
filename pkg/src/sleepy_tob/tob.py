"""Per-process state machine for the total-order broadcast.

View 0 occupies round 0 and only multicasts a proposal for the genesis log.
Every later view v >= 1 spans rounds 2v-1 and 2v:

* round 2v-1: compute the outputs of the previous round's agreement
  instance, decide every grade-1 log (delivering the longest), set the
  candidate to the longest output at any grade, then vote for the log of
  the highest-scoring valid proposal that does not conflict with the
  candidate;
* round 2v: vote for the longest grade-1 output of the current view's
  first instance, set the chain head to the longest output at any grade,
  and multicast a proposal extending the chain head with a fresh value.

Votes feeding an instance are the *latest unexpired* messages: for each
sender, the single newest vote sent within the expiration window, with a
sender whose newest votes disagree contributing nothing.  A window of zero
rounds reproduces the plain current-round-only protocol.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .core import (
    EMPTY_LOG,
    GENESIS,
    Log,
    ProcessId,
    ProposeMsg,
    Value,
    VoteMsg,
    compatible,
    vrf_eval,
    vrf_verify,
)
from .ga import GaOutput, InitialVoteSet, grade, merge_latest


class Phase(Enum):
    VIEW0 = "view0"
    ROUND1 = "round1"
    ROUND2 = "round2"


@dataclass(frozen=True, slots=True)
class ViewClock:
    """Maps a round number onto its view and phase: view 0 lasts one round,
    view v >= 1 occupies rounds 2v-1 and 2v."""

    round: int

    @property
    def view(self) -> int:
        return 0 if self.round == 0 else (self.round + 1) // 2

    @property
    def phase(self) -> Phase:
        if self.round == 0:
            return Phase.VIEW0
        return Phase.ROUND1 if self.round % 2 == 1 else Phase.ROUND2

    @staticmethod
    def proposal_round(view: int) -> int:
        """Round in which proposals for ``view`` are multicast."""
        return 2 * (view - 1)


@dataclass(frozen=True, slots=True)
class ExpirationWindow:
    """Number of past rounds whose latest votes still count; ``None`` never
    expires anything."""

    eta: int | None

    def start(self, r: int) -> int:
        if self.eta is None:
            return 0
        return max(0, r - self.eta)


#: Marker for a (sender, round) slot whose votes disagreed.
EQUIVOCATED = object()


@dataclass
class ProcessState:
    """Mutable per-process protocol state plus its message store."""

    pid: ProcessId
    vrf_seed: int
    awake: bool = False
    candidate: Log = EMPTY_LOG  # longest any-grade output seen at the last round-1 step
    chain_head: Log = EMPTY_LOG  # base of this process's next proposal
    delivered: Log = EMPTY_LOG  # longest decided log
    # votes_seen[sender][send_round] is the log voted, or EQUIVOCATED
    votes_seen: dict[ProcessId, dict[int, object]] = field(default_factory=dict)
    proposals_seen: dict[int, set[ProposeMsg]] = field(default_factory=dict)
    pending_output: GaOutput = field(default_factory=GaOutput)
    pending_output_round: int = -1

    def absorb(self, msg: VoteMsg | ProposeMsg) -> None:
        if isinstance(msg, VoteMsg):
            by_round = self.votes_seen.setdefault(msg.sender, {})
            prior = by_round.get(msg.round)
            if prior is None:
                by_round[msg.round] = msg.log
            elif prior is not EQUIVOCATED and prior != msg.log:
                by_round[msg.round] = EQUIVOCATED
        else:
            self.proposals_seen.setdefault(msg.view, set()).add(msg)


def latest_unexpired(
    votes_seen: dict[ProcessId, dict[int, object]],
    r: int,
    window: ExpirationWindow,
    owner: ProcessId,
) -> tuple[InitialVoteSet, frozenset[VoteMsg]]:
    """Split a vote store into (older latest votes, current-round votes) for
    the instance at round ``r``.

    For each sender only the vote with the greatest send round inside the
    window survives; a sender whose votes at that round disagree is dropped.
    The pair feeds ``ga.merge_latest``, which gives current-round votes
    precedence over the carried-over set.
    """
    lo = window.start(r)
    initial: list[VoteMsg] = []
    current: list[VoteMsg] = []
    for sender, by_round in votes_seen.items():
        entry = by_round.get(r)
        if entry is not None:
            if entry is not EQUIVOCATED:
                current.append(VoteMsg(sender=sender, round=r, log=entry))
            continue  # a round-r entry (clean or not) supersedes older votes
        for past in range(r - 1, lo - 1, -1):
            entry = by_round.get(past)
            if entry is None:
                continue
            if entry is not EQUIVOCATED:
                initial.append(VoteMsg(sender=sender, round=past, log=entry))
            break
    return (
        InitialVoteSet(owner=owner, messages=frozenset(initial)),
        frozenset(current),
    )


def compute_instance_output(
    state: ProcessState, r: int, window: ExpirationWindow
) -> tuple[InitialVoteSet, frozenset[VoteMsg], GaOutput]:
    """Grade the instance of round ``r`` from this process's store."""
    initial, current = latest_unexpired(state.votes_seen, r, window, state.pid)
    merged = merge_latest(initial, current)
    return initial, current, grade(merged)


def step_view0(state: ProcessState) -> list[ProposeMsg]:
    """Round 0: propose the genesis log with a lottery ticket for view 1."""
    return [
        ProposeMsg(
            sender=state.pid,
            view=1,
            log=Log((GENESIS,)),
            vrf=vrf_eval(state.vrf_seed, state.pid, 1),
        )
    ]


def _valid_proposals(
    state: ProcessState, view: int, proposals: Iterable[ProposeMsg]
) -> list[ProposeMsg]:
    out = []
    for pm in proposals:
        if pm.view != view:
            continue
        if pm.vrf.sender != pm.sender or pm.vrf.view != view:
            continue
        if not vrf_verify(pm.vrf, state.vrf_seed):
            continue
        out.append(pm)
    return out


def step_round1(
    state: ProcessState,
    view: int,
    outputs: GaOutput,
    proposals: Iterable[ProposeMsg],
) -> tuple[list[Log], VoteMsg]:
    """Round 2v-1: decide, refresh the candidate, and vote a proposal.

    Returns the decisions made (empty or the longest grade-1 log) and the
    vote this process multicasts.  With no valid, candidate-compatible
    proposal at hand the process falls back to voting its own candidate,
    which keeps its vote extending anything it has decided.
    """
    decisions: list[Log] = []
    decided = outputs.longest_grade1()
    if decided is not None:
        decisions.append(decided)
        if not compatible(decided, state.delivered) or len(decided) > len(
            state.delivered
        ):
            state.delivered = decided

    longest = outputs.longest_any()
    if longest is not None:
        state.candidate = longest

    best: ProposeMsg | None = None
    for pm in _valid_proposals(state, view, proposals):
        if not compatible(pm.log, state.candidate):
            continue
        if best is None:
            best = pm
            continue
        key, best_key = (pm.vrf.value, pm.sender), (best.vrf.value, best.sender)
        if key > best_key or (key == best_key and pm.log.lex_key < best.log.lex_key):
            best = pm
    vote_log = best.log if best is not None else state.candidate
    return decisions, VoteMsg(sender=state.pid, round=2 * view - 1, log=vote_log)


def step_round2(
    state: ProcessState, view: int, outputs: GaOutput
) -> tuple[VoteMsg, ProposeMsg]:
    """Round 2v: vote the longest grade-1 output and propose for view v+1.

    An empty tally (possible only for a process that woke mid-view and was
    shown nothing) falls back to the stale candidate for both the vote and
    the proposal base.
    """
    vote_log = outputs.longest_grade1()
    if vote_log is None:
        vote_log = state.candidate
    head = outputs.longest_any()
    state.chain_head = head if head is not None else state.candidate
    fresh = Value(id=view + 1, proposer=state.pid, view=view + 1)
    proposal = ProposeMsg(
        sender=state.pid,
        view=view + 1,
        log=state.chain_head.extended(fresh),
        vrf=vrf_eval(state.vrf_seed, state.pid, view + 1),
    )
    return (
        VoteMsg(sender=state.pid, round=2 * view, log=vote_log),
        proposal,
    )

"""Post-hoc verifiers over traces and agreement records.

Every check here re-derives what it needs from recorded evidence (sent
votes, deliveries, initial sets, decide events) rather than trusting
protocol internals; the tally used for cross-checks is an independent
brute-force reimplementation on exact rationals.  Verdicts are
three-valued -- pass, fail, or not-applicable/inconclusive -- so checks
whose assumptions do not hold in a given run can never produce spurious
failures, and probabilistic liveness can be reported honestly.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping

from .core import (
    EMPTY_LOG,
    Log,
    ProcessId,
    Value,
    VoteMsg,
    compatible,
    conflicts,
    is_prefix,
    longest_common_prefix,
)
from .ga import GaRecord
from .world import SendEvent, Trace


class Verdict(Enum):
    PASS = "pass"
    FAIL = "fail"
    NOT_APPLICABLE = "not_applicable"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class OracleReport:
    name: str
    verdict: Verdict
    detail: str = ""
    witness: dict | None = None

    def to_dict(self) -> dict:
        out = {"name": self.name, "verdict": self.verdict.value, "detail": self.detail}
        if self.witness is not None:
            out["witness"] = self.witness
        return out


# ---------------------------------------------------------------------------
# independent tally


def naive_merged_votes(
    initial_msgs: Iterable[VoteMsg], round_msgs: Iterable[VoteMsg]
) -> dict[ProcessId, Log]:
    """Brute-force merge: round votes beat initial votes, a sender with two
    differing round votes is thrown out wholesale."""
    logs_by_sender: dict[ProcessId, set[Log]] = {}
    for m in round_msgs:
        logs_by_sender.setdefault(m.sender, set()).add(m.log)
    votes: dict[ProcessId, Log] = {}
    for sender, logs in logs_by_sender.items():
        if len(logs) == 1:
            votes[sender] = next(iter(logs))
    for m in initial_msgs:
        if m.sender not in logs_by_sender:
            votes[m.sender] = m.log
    return votes


def naive_outputs(votes: Mapping[ProcessId, Log]) -> dict[Log, int]:
    """Grade a merged vote map by scanning every candidate prefix and
    comparing exact fractions against the 1/3 and 2/3 quorums."""
    m = len(votes)
    candidates: set[Log] = set()
    for log in votes.values():
        candidates.update(log.prefixes())
    out: dict[Log, int] = {}
    for cand in candidates:
        count = sum(1 for log in votes.values() if is_prefix(cand, log))
        if Fraction(count, 1) > Fraction(2 * m, 3):
            out[cand] = 1
        elif Fraction(count, 1) > Fraction(m, 3):
            out[cand] = 0
    return out


def naive_record_outputs(record: GaRecord, receiver: ProcessId) -> dict[Log, int]:
    view = record.receivers[receiver]
    votes = naive_merged_votes(view.initial.messages, view.received)
    return naive_outputs(votes)


# ---------------------------------------------------------------------------
# graded-agreement properties


def _quorum_holds(record: GaRecord) -> bool:
    h_r = set(record.inputs)
    s_r = h_r | set(record.byzantine)
    pool = s_r | set(record.initial_senders)
    return 3 * len(h_r) > 2 * len(pool)


def _find_clique(record: GaRecord, lam: Log) -> frozenset[ProcessId]:
    """Largest natural mutually-informed set for ``lam``: senders whose
    input extends it plus receivers whose initial sets cover every member
    with a vote extending it (computed as a decreasing fixpoint)."""
    receivers = set(record.receivers)
    cover = {
        q: {m.sender for m in record.receivers[q].initial.messages if is_prefix(lam, m.log)}
        for q in receivers
    }
    members: set[ProcessId] = set()
    for p, log in record.inputs.items():
        if is_prefix(lam, log):
            members.add(p)
    for q in receivers:
        if q in record.inputs and not is_prefix(lam, record.inputs[q]):
            continue
        if cover[q]:
            members.add(q)
    while True:
        bad = [q for q in members if q in receivers and not members <= cover[q]]
        if not bad:
            return frozenset(members)
        members -= set(bad)


def check_ga_properties(record: GaRecord) -> dict[str, OracleReport]:
    """Evaluate the agreement properties on one record.

    Graded consistency, integrity, validity, uniqueness, and bounded
    divergence are asserted only for synchronous records whose awake honest
    senders exceed two thirds of every process that can influence a tally;
    clique validity is evaluated whenever its own hypotheses hold, in
    synchronous and asynchronous rounds alike.
    """
    reports: dict[str, OracleReport] = {}
    applicable = record.synchronous and _quorum_holds(record)
    outputs = {q: view.output for q, view in record.receivers.items()}

    def na(name: str, why: str) -> None:
        reports[name] = OracleReport(name, Verdict.NOT_APPLICABLE, detail=why)

    if not applicable:
        why = "round not synchronous" if not record.synchronous else "quorum assumption absent"
        for name in (
            "graded_consistency",
            "integrity",
            "validity",
            "uniqueness",
            "bounded_divergence",
        ):
            na(name, why)
    else:
        fail: dict | None = None
        for i, out_i in outputs.items():
            for lam in out_i.grade1_logs():
                for j, out_j in outputs.items():
                    if out_j.grade_of(lam) is None:
                        fail = {"receiver": i, "log": repr(lam), "missing_at": j}
                        break
                if fail:
                    break
            if fail:
                break
        reports["graded_consistency"] = OracleReport(
            "graded_consistency",
            Verdict.FAIL if fail else Verdict.PASS,
            witness=fail,
        )

        fail = None
        for i, out_i in outputs.items():
            for lam in out_i.grades:
                if not any(is_prefix(lam, inp) for inp in record.inputs.values()):
                    fail = {"receiver": i, "log": repr(lam)}
                    break
            if fail:
                break
        reports["integrity"] = OracleReport(
            "integrity", Verdict.FAIL if fail else Verdict.PASS, witness=fail
        )

        if record.inputs:
            lcp = longest_common_prefix(record.inputs.values())
            fail = None
            for i, out_i in outputs.items():
                if out_i.grade_of(lcp) != 1:
                    fail = {"receiver": i, "log": repr(lcp)}
                    break
            reports["validity"] = OracleReport(
                "validity", Verdict.FAIL if fail else Verdict.PASS, witness=fail
            )
        else:
            na("validity", "no well-behaved inputs")

        fail = None
        grade1_pairs = [
            (i, lam) for i, out_i in outputs.items() for lam in out_i.grade1_logs()
        ]
        for a in range(len(grade1_pairs)):
            for b in range(a + 1, len(grade1_pairs)):
                (i, la), (j, lb) = grade1_pairs[a], grade1_pairs[b]
                if conflicts(la, lb):
                    fail = {"receiver_a": i, "log_a": repr(la), "receiver_b": j, "log_b": repr(lb)}
                    break
            if fail:
                break
        reports["uniqueness"] = OracleReport(
            "uniqueness", Verdict.FAIL if fail else Verdict.PASS, witness=fail
        )

        fail = None
        for i, out_i in outputs.items():
            logs = list(out_i.grades)
            found = False
            for a in range(len(logs)):
                for b in range(a + 1, len(logs)):
                    for c in range(b + 1, len(logs)):
                        if (
                            conflicts(logs[a], logs[b])
                            and conflicts(logs[a], logs[c])
                            and conflicts(logs[b], logs[c])
                        ):
                            fail = {
                                "receiver": i,
                                "logs": [repr(logs[a]), repr(logs[b]), repr(logs[c])],
                            }
                            found = True
                            break
                    if found:
                        break
                if found:
                    break
            if fail:
                break
        reports["bounded_divergence"] = OracleReport(
            "bounded_divergence", Verdict.FAIL if fail else Verdict.PASS, witness=fail
        )

    # clique validity: try every observed log (and prefix) as the common base
    candidates: set[Log] = set()
    for log in record.inputs.values():
        candidates.update(log.prefixes())
    for view in record.receivers.values():
        for m in view.initial.messages:
            candidates.update(m.log.prefixes())
    pool_size = len(set(record.inputs) | set(record.byzantine) | set(record.initial_senders))
    applicable_cliques = 0
    fail = None
    for lam in sorted(candidates, key=lambda l: (len(l), l.lex_key)):
        clique = _find_clique(record, lam)
        clique_receivers = clique & set(record.receivers)
        if not clique_receivers or not 3 * len(clique) > 2 * pool_size:
            continue
        applicable_cliques += 1
        for q in sorted(clique_receivers):
            if outputs[q].grade_of(lam) != 1:
                fail = {"receiver": q, "log": repr(lam), "clique_size": len(clique)}
                break
        if fail:
            break
    if applicable_cliques == 0:
        reports["clique_validity"] = OracleReport(
            "clique_validity", Verdict.NOT_APPLICABLE, detail="no qualifying clique"
        )
    else:
        reports["clique_validity"] = OracleReport(
            "clique_validity",
            Verdict.FAIL if fail else Verdict.PASS,
            detail=f"{applicable_cliques} qualifying base logs",
            witness=fail,
        )
    return reports


def trace_ga_reports(trace: Trace) -> dict[int, dict[str, OracleReport]]:
    return {r: check_ga_properties(rec) for r, rec in sorted(trace.ga_records().items())}


# ---------------------------------------------------------------------------
# trace-level checks


def _decision_timeline(trace: Trace) -> dict[ProcessId, list[tuple[int, Log]]]:
    """Per process, the delivered log after each decide event (latest
    decision wins unless it is a prefix of what is already delivered)."""
    timeline: dict[ProcessId, list[tuple[int, Log]]] = {}
    for e in trace.decide_events():
        points = timeline.setdefault(e.pid, [])
        prev = points[-1][1] if points else EMPTY_LOG
        new = prev if is_prefix(e.log, prev) else e.log
        points.append((e.round, new))
    return timeline


def delivered_at(
    timeline: dict[ProcessId, list[tuple[int, Log]]], pid: ProcessId, r: int
) -> Log:
    log = EMPTY_LOG
    for rd, val in timeline.get(pid, []):
        if rd <= r:
            log = val
        else:
            break
    return log


def check_safety_after(trace: Trace, r: int) -> OracleReport:
    """No two well-behaved awake processes hold incompatible delivered logs
    at any two rounds after ``r`` (the same process at two rounds counts)."""
    timeline = _decision_timeline(trace)
    sched = trace.schedule
    snapshots: list[tuple[ProcessId, int, Log]] = []
    for pid in sorted(timeline):
        last: Log | None = None
        for r2 in range(r + 1, sched.horizon + 1):
            if pid not in sched.honest(r2):
                continue
            log = delivered_at(timeline, pid, r2)
            if last is None or log != last:
                snapshots.append((pid, r2, log))
                last = log
    for a in range(len(snapshots)):
        for b in range(a + 1, len(snapshots)):
            pi_, ri_, li_ = snapshots[a]
            pj_, rj_, lj_ = snapshots[b]
            if not compatible(li_, lj_):
                return OracleReport(
                    "safety_after",
                    Verdict.FAIL,
                    detail=f"conflicting delivered logs after round {r}",
                    witness={
                        "process_a": pi_,
                        "round_a": ri_,
                        "log_a": repr(li_),
                        "process_b": pj_,
                        "round_b": rj_,
                        "log_b": repr(lj_),
                    },
                )
    return OracleReport("safety_after", Verdict.PASS, detail=f"after round {r}")


def check_liveness_after(trace: Trace, r: int, window: int) -> OracleReport:
    """Every well-behaved process awake through [r, r+window] delivers, by
    round r+window, a log containing some value introduced at or after r.

    Values are introduced as the fresh tip of a well-behaved proposal.
    """
    sched = trace.schedule
    if r + window > sched.horizon:
        return OracleReport(
            "liveness_after",
            Verdict.INCONCLUSIVE,
            detail=f"horizon {sched.horizon} shorter than round {r}+{window}",
        )
    rounds = range(r, r + window + 1)
    steady = [
        p
        for p in range(sched.n)
        if all(p in sched.honest(r2) for r2 in rounds)
    ]
    if not steady:
        return OracleReport(
            "liveness_after", Verdict.INCONCLUSIVE, detail="no continuously awake process"
        )
    fresh: set[Value] = set()
    for e in trace.propose_sends():
        if e.round >= r and e.msg.sender in sched.honest(e.round) and e.msg.log.values:
            fresh.add(e.msg.log.values[-1])
    if not fresh:
        return OracleReport(
            "liveness_after", Verdict.INCONCLUSIVE, detail="no value introduced after r"
        )
    timeline = _decision_timeline(trace)
    for p in steady:
        log = delivered_at(timeline, p, r + window)
        if not any(v in fresh for v in log.values):
            return OracleReport(
                "liveness_after",
                Verdict.FAIL,
                detail=f"no post-round-{r} value delivered within {window} rounds",
                witness={"process": p, "delivered": repr(log)},
            )
    return OracleReport(
        "liveness_after", Verdict.PASS, detail=f"window [{r}, {r + window}]"
    )


def check_async_resilience(trace: Trace, r_a: int, pi: int) -> OracleReport:
    """No decision conflicting with the logs decided by round ``r_a``:
    during the window (and one round beyond) for processes awake at r_a,
    and afterwards for every well-behaved process."""
    d_ra = trace.decided_up_to(r_a)
    h_ra = trace.schedule.honest(r_a)
    for e in trace.decide_events():
        if e.round <= r_a:
            continue
        conflicting = [d for d in d_ra if conflicts(e.log, d)]
        if not conflicting:
            continue
        in_window = e.round <= r_a + pi + 1
        if not in_window or e.pid in h_ra:
            return OracleReport(
                "async_resilience",
                Verdict.FAIL,
                detail="decision conflicts with a pre-window decision",
                witness={
                    "process": e.pid,
                    "round": e.round,
                    "log": repr(e.log),
                    "conflicts_with": repr(conflicting[0]),
                },
            )
    return OracleReport(
        "async_resilience", Verdict.PASS, detail=f"window [{r_a + 1}, {r_a + pi}]"
    )


def first_full_view_after(last_async_round: int) -> int:
    """First view both of whose rounds come after ``last_async_round``."""
    return (last_async_round + 1) // 2 + 1


def check_healing(
    trace: Trace, last_async_round: int, *, liveness_window: int = 8
) -> OracleReport:
    """Safety and liveness both hold after the first view that is entirely
    past the window (recovery-after-asynchrony, one-view healing lag)."""
    v = first_full_view_after(last_async_round)
    r_heal = 2 * v
    if r_heal >= trace.horizon:
        return OracleReport(
            "healing", Verdict.INCONCLUSIVE, detail="trace ends inside or at the window"
        )
    safety = check_safety_after(trace, r_heal)
    liveness = check_liveness_after(trace, r_heal, liveness_window)
    if safety.verdict is Verdict.FAIL or liveness.verdict is Verdict.FAIL:
        bad = safety if safety.verdict is Verdict.FAIL else liveness
        return OracleReport(
            "healing",
            Verdict.FAIL,
            detail=f"{bad.name} failed after healing round {r_heal}",
            witness=bad.witness,
        )
    if liveness.verdict is Verdict.INCONCLUSIVE:
        return OracleReport("healing", Verdict.INCONCLUSIVE, detail=liveness.detail)
    return OracleReport("healing", Verdict.PASS, detail=f"healed from round {r_heal}")


def check_decided_implies_voted(trace: Trace, r_a: int) -> OracleReport:
    """Once a log is decided in some round <= r_a, every awake well-behaved
    process votes extensions of it in every later round up to r_a."""
    sched = trace.schedule
    decided = [(e.round, e.log) for e in trace.decide_events() if e.round <= r_a]
    for rd, lam in decided:
        for e in trace.vote_sends():
            if rd <= e.round <= r_a and e.msg.sender in sched.honest(e.round):
                if not is_prefix(lam, e.msg.log):
                    return OracleReport(
                        "decided_implies_voted",
                        Verdict.FAIL,
                        witness={
                            "decided_round": rd,
                            "decided": repr(lam),
                            "voter": e.msg.sender,
                            "vote_round": e.round,
                            "vote": repr(e.msg.log),
                        },
                    )
    return OracleReport(
        "decided_implies_voted",
        Verdict.PASS if decided else Verdict.NOT_APPLICABLE,
        detail=f"{len(decided)} decisions at or before round {r_a}",
    )


def check_window_votes_extend(trace: Trace, r_a: int, pi: int) -> OracleReport:
    """Processes awake at r_a that stay awake and uncorrupted keep voting
    extensions of the common round-r_a log throughout the window and one
    round beyond."""
    sched = trace.schedule
    base_votes = [
        e.msg.log
        for e in trace.vote_sends()
        if e.round == r_a and e.msg.sender in sched.honest(r_a)
    ]
    if not base_votes:
        return OracleReport(
            "window_votes_extend", Verdict.NOT_APPLICABLE, detail="no votes at r_a"
        )
    lam = longest_common_prefix(base_votes)
    guard = sched.honest(r_a)
    for e in trace.vote_sends():
        if r_a + 1 <= e.round <= r_a + pi + 1:
            p = e.msg.sender
            if p in guard and p in sched.honest(e.round):
                if not is_prefix(lam, e.msg.log):
                    return OracleReport(
                        "window_votes_extend",
                        Verdict.FAIL,
                        witness={
                            "process": p,
                            "round": e.round,
                            "vote": repr(e.msg.log),
                            "base": repr(lam),
                        },
                    )
    return OracleReport("window_votes_extend", Verdict.PASS, detail=f"base {lam!r}")


def check_trace_wellformed(trace: Trace) -> OracleReport:
    """Deliveries only reference messages that were actually sent."""
    sent_msgs = set()
    for e in trace.events:
        if isinstance(e, SendEvent):
            sent_msgs.add(e.msg)
        elif hasattr(e, "msg") and e.msg not in sent_msgs:
            return OracleReport(
                "trace_wellformed",
                Verdict.FAIL,
                detail="delivered message was never sent",
                witness={"round": e.round, "msg": repr(e.msg)},
            )
    return OracleReport("trace_wellformed", Verdict.PASS)

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sleepy_tob.core import EMPTY_LOG, Log, Value, VoteMsg, compatible, conflicts, is_prefix
from sleepy_tob.ga import (
    ForgeryError,
    InitialVoteSet,
    empty_initial,
    grade,
    merge_latest,
    run_instance,
    tally,
)

A = Log((Value(1, 0, 1),))
B = Log((Value(2, 0, 1),))
AX = Log((Value(1, 0, 1), Value(3, 1, 2)))


def vote(sender, log, round=5):
    return VoteMsg(sender=sender, round=round, log=log)


def initial(owner, *msgs):
    return InitialVoteSet(owner=owner, messages=frozenset(msgs))


class TestMergeLatest:
    def test_round_vote_supersedes_initial(self):
        merged = merge_latest(initial(9, vote(1, A, round=3)), {vote(1, B)})
        assert merged == frozenset({vote(1, B)})

    def test_round_equivocator_dropped_initial_kept(self):
        merged = merge_latest(
            initial(9, vote(1, A, round=3)), {vote(2, B), vote(2, AX)}
        )
        assert merged == frozenset({vote(1, A, round=3)})

    def test_empty_initial_reduces_to_round_votes(self):
        assert merge_latest(empty_initial(9), {vote(1, A)}) == frozenset({vote(1, A)})

    def test_round_equivocator_loses_initial_entry_too(self):
        merged = merge_latest(initial(9, vote(2, A, round=3)), {vote(2, B), vote(2, AX)})
        assert merged == frozenset()

    def test_initial_set_rejects_duplicate_senders(self):
        with pytest.raises(ValueError):
            initial(9, vote(1, A, round=2), vote(1, B, round=3))


class TestTally:
    def test_extension_counting(self):
        counts = tally({vote(1, AX), vote(2, A)})
        assert counts[A] == 2
        assert counts[AX] == 1
        assert counts[EMPTY_LOG] == 2

    def test_disjoint_heads(self):
        counts = tally({vote(1, A), vote(2, B)})
        assert counts[A] == 1
        assert counts[B] == 1
        assert counts[EMPTY_LOG] == 2

    def test_worked_split_tally(self):
        # 7 honest split 3/4 across two values, 3 byzantine backing the minority
        b, bp = A, B
        msgs = (
            [vote(i, b) for i in range(3)]
            + [vote(i, bp) for i in range(3, 7)]
            + [vote(i, b) for i in range(7, 10)]
        )
        counts = tally(msgs)
        assert counts[b] == 6
        assert counts[bp] == 4
        assert counts[EMPTY_LOG] == 10


class TestGrade:
    def test_split_round_has_no_grade1_value(self):
        msgs = (
            [vote(i, A) for i in range(3)]
            + [vote(i, B) for i in range(3, 7)]
            + [vote(i, A) for i in range(7, 10)]
        )
        out = grade(msgs)
        # m=10: count(A)=6 <= 20/3, count(B)=4 <= 20/3: both grade 0 only
        assert out.grade_of(A) == 0
        assert out.grade_of(B) == 0
        assert out.grade1_logs() == [EMPTY_LOG]

    def test_unanimity_grades_every_prefix(self):
        out = grade([vote(i, AX) for i in range(3)])
        assert out.grade_of(AX) == 1
        assert out.grade_of(A) == 1
        assert out.grade_of(EMPTY_LOG) == 1

    def test_empty_tally_empty_output(self):
        assert not grade([])

    def test_longest_any_prefers_grade1_on_ties(self):
        out = grade([vote(1, AX), vote(2, AX), vote(3, B)])
        # m=3: AX has 2 votes (grade 0: 6 > 3, not > 6), B has 1 (no grade)
        assert out.grade_of(AX) == 0
        assert out.longest_any() == AX


@st.composite
def vote_sets(draw):
    n = draw(st.integers(1, 9))
    values = [Value(id=i, proposer=0, view=0) for i in range(3)]
    msgs = []
    for sender in range(n):
        ids = draw(st.lists(st.integers(0, 2), max_size=4))
        msgs.append(vote(sender, Log(tuple(values[i] for i in ids))))
    return msgs


@given(vote_sets())
def test_grade_thresholds_match_fraction_oracle(msgs):
    m = len(msgs)
    out = grade(msgs)
    for log, count in tally(msgs).items():
        expected = None
        if Fraction(count) > Fraction(2 * m, 3):
            expected = 1
        elif Fraction(count) > Fraction(m, 3):
            expected = 0
        assert out.grade_of(log) == expected


@given(vote_sets())
def test_grade1_logs_form_a_chain(msgs):
    g1 = grade(msgs).grade1_logs()
    for a in g1:
        for b in g1:
            assert compatible(a, b)


@given(vote_sets())
def test_bounded_divergence_structural(msgs):
    logs = list(grade(msgs).grades)
    for i in range(len(logs)):
        for j in range(i + 1, len(logs)):
            for k in range(j + 1, len(logs)):
                assert not (
                    conflicts(logs[i], logs[j])
                    and conflicts(logs[i], logs[k])
                    and conflicts(logs[j], logs[k])
                )


class TestRunInstance:
    def test_synchronous_validity(self):
        # all honest inputs extend A; every receiver outputs (A, 1)
        inputs = {i: AX if i % 2 else A for i in range(5)}
        record = run_instance(round=3, inputs=inputs)
        for view in record.receivers.values():
            assert view.output.grade_of(A) == 1

    def test_adversarial_capture_of_voteless_receivers(self):
        # receivers that sent nothing see only byzantine votes and grade them 1
        inputs = {i: A for i in range(3)}
        byz = [vote(7, B, round=3), vote(8, B, round=3), vote(9, B, round=3)]
        record = run_instance(
            round=3,
            inputs=inputs,
            byz_msgs=byz,
            receivers=[4, 5],
            byzantine={7, 8, 9},
            synchronous=False,
            delivery=lambda q, msgs: [m for m in msgs if m.sender >= 7],
        )
        for q in (4, 5):
            assert record.receivers[q].output.grade_of(B) == 1

    def test_clique_from_initial_sets_under_asynchrony(self):
        # carried-over votes for A from 5 senders dominate an empty round
        old = [vote(i, AX if i % 2 else A, round=2) for i in range(5)]
        sets = {q: InitialVoteSet(owner=q, messages=frozenset(old)) for q in (0, 1)}
        record = run_instance(
            round=3,
            inputs={},
            byz_msgs=[vote(9, B, round=3)],
            initial_sets=sets,
            byzantine={9},
            synchronous=False,
            delivery=lambda q, msgs: [],
        )
        for q in (0, 1):
            assert record.receivers[q].output.grade_of(A) == 1

    def test_forged_byzantine_sender_rejected(self):
        with pytest.raises(ForgeryError):
            run_instance(
                round=3,
                inputs={0: A},
                byz_msgs=[vote(0, B, round=3)],
                byzantine={9},
            )

    def test_own_vote_always_delivered(self):
        record = run_instance(
            round=3,
            inputs={0: A, 1: B},
            synchronous=False,
            delivery=lambda q, msgs: [],
        )
        assert record.receivers[0].output.grade_of(A) == 1
        assert record.receivers[1].output.grade_of(B) == 1

    def test_initial_set_must_be_older_than_round(self):
        with pytest.raises(ValueError):
            run_instance(
                round=3,
                inputs={0: A},
                initial_sets={0: initial(0, vote(1, A, round=3))},
            )

"""Validators for the participation model a schedule must satisfy.

The model bounds four things, all with exact rational arithmetic:

* churn: out of the well-behaved processes awake at some point during the
  last ``tau`` rounds, at most a fraction ``gamma`` may be absent from the
  current round;
* failure ratio: the Byzantine share of each round's awake set stays below
  a reduced bound ``beta_tilde = (beta - gamma) / (gamma * (beta - 2) + 1)``,
  which compensates for the unexpired votes of recently-offline processes;
* asynchrony support: the well-behaved processes awake in the last
  synchronous round before a window, minus any later corruptions, must
  outnumber (by the usual ratio) everyone whose votes may still count
  during the window and the first synchronous round after it, and they
  must all still be awake at the end of that round;
* sleepiness: each round's awake well-behaved processes exceed the usual
  quorum fraction of everyone awake during the trailing window.

No verdict depends on floating point; every comparison is on ``Fraction``s
or integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Sequence

if TYPE_CHECKING:  # only for annotations; schedules are duck-typed here
    from .world import Schedule

Ratio = Fraction


def beta_tilde(beta: Fraction, gamma: Fraction) -> Fraction:
    """Reduced failure ratio (beta - gamma) / (gamma * (beta - 2) + 1).

    Defined for 0 <= gamma <= beta <= 1; at gamma == beta the bound reaches
    exactly 0 (the system may stall even without failures), and any larger
    drop-off rate is a domain error.
    """
    beta, gamma = Fraction(beta), Fraction(gamma)
    if not 0 < beta <= 1:
        raise ValueError(f"beta must be in (0, 1], got {beta}")
    if gamma < 0 or gamma > beta:
        raise ValueError(f"gamma must be < beta (gamma={gamma}, beta={beta})")
    return (beta - gamma) / (gamma * (beta - 2) + 1)


@dataclass(frozen=True)
class ModelParams:
    """Model and protocol parameters for one run.

    ``tau`` (churn window) and ``pi`` (asynchrony window length) belong to
    the model; ``eta`` (vote expiration, ``None`` = never) belongs to the
    protocol.  ``beta`` is the base failure ratio; ``beta_tilde`` defaults
    to the derived reduced ratio and may be overridden.
    """

    tau: int
    eta: int | None
    pi: int
    gamma: Fraction
    beta: Fraction
    beta_tilde: Fraction | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "gamma", Fraction(self.gamma))
        object.__setattr__(self, "beta", Fraction(self.beta))
        if self.tau < 0 or self.pi < 0 or (self.eta is not None and self.eta < 0):
            raise ValueError("tau, eta, and pi must be nonnegative")
        if not 0 < self.beta <= 1:
            raise ValueError(f"beta must be in (0, 1], got {self.beta}")
        if not 0 <= self.gamma < self.beta:
            raise ValueError(
                f"gamma must be < beta (gamma={self.gamma}, beta={self.beta})"
            )
        if self.beta_tilde is None:
            object.__setattr__(self, "beta_tilde", beta_tilde(self.beta, self.gamma))
        else:
            object.__setattr__(self, "beta_tilde", Fraction(self.beta_tilde))

    def async_resilience_gaps(self) -> list[str]:
        """Reasons (empty if none) why the asynchrony-resilience guarantee
        does not apply to these parameters."""
        gaps = []
        if self.pi < 1:
            gaps.append("no asynchronous window (pi < 1)")
        if self.pi >= self.tau:
            gaps.append(f"window not shorter than churn window (pi={self.pi} >= tau={self.tau})")
        if self.eta is not None and self.pi >= self.eta:
            gaps.append(f"window not shorter than expiration (pi={self.pi} >= eta={self.eta})")
        if self.eta != self.tau:
            gaps.append(
                f"churn is bounded over a different span than expiration (tau={self.tau}, eta={self.eta})"
            )
        if self.tau < 2 or (self.eta is not None and self.eta < 2):
            gaps.append("resisting any asynchrony needs tau and eta of at least 2")
        return gaps


@dataclass(frozen=True)
class RoundVerdict:
    round: int
    passed: bool
    vacuous: bool = False
    detail: str = ""


@dataclass(frozen=True)
class CheckResult:
    name: str
    rounds: tuple[RoundVerdict, ...] = ()
    passed: bool = True
    detail: str = ""

    @property
    def failing_rounds(self) -> list[int]:
        return [v.round for v in self.rounds if not v.passed]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "failing_rounds": self.failing_rounds,
            "vacuous_rounds": [v.round for v in self.rounds if v.vacuous],
            "detail": self.detail,
        }


def _union(sets: Sequence[frozenset[int]], lo: int, hi: int) -> frozenset[int]:
    """Union of per-round sets over rounds [max(lo, 0), hi]; empty when the
    range is empty."""
    out: set[int] = set()
    for r in range(max(lo, 0), hi + 1):
        if 0 <= r < len(sets):
            out |= sets[r]
    return frozenset(out)


def check_churn(schedule: "Schedule", tau: int, gamma: Fraction) -> CheckResult:
    """Per round r: |H_[r-tau, r-1] \\ H_r| <= gamma * |H_[r-tau, r-1]|."""
    gamma = Fraction(gamma)
    verdicts = []
    for r in range(schedule.horizon):
        window = _union(schedule.awake_honest, r - tau, r - 1)
        if not window:
            verdicts.append(RoundVerdict(r, True, vacuous=True))
            continue
        absent = len(window - schedule.honest(r))
        ok = absent <= gamma * len(window)
        verdicts.append(
            RoundVerdict(r, ok, detail="" if ok else f"{absent}/{len(window)} dropped off")
        )
    return CheckResult(
        name="churn_bound",
        rounds=tuple(verdicts),
        passed=all(v.passed for v in verdicts),
    )


def check_failure_ratio(schedule: "Schedule", beta_tilde: Fraction) -> CheckResult:
    """Per round r: |B_r| < beta_tilde * |S_r| (strict)."""
    beta_tilde = Fraction(beta_tilde)
    verdicts = []
    for r in range(schedule.horizon):
        nb, ns = len(schedule.byz(r)), len(schedule.awake(r))
        ok = nb < beta_tilde * ns
        verdicts.append(
            RoundVerdict(r, ok, detail="" if ok else f"{nb} Byzantine of {ns} awake")
        )
    return CheckResult(
        name="failure_ratio",
        rounds=tuple(verdicts),
        passed=all(v.passed for v in verdicts),
    )


def check_async_conditions(
    schedule: "Schedule", r_a: int, pi: int, tau: int, beta: Fraction
) -> CheckResult:
    """Support for an asynchronous window [r_a+1, r_a+pi].

    For every round of the window and the first synchronous round after it,
    the survivors of the last-synchronous-round awake set must exceed a
    (1 - beta) fraction of everyone awake over the trailing tau rounds; and
    that awake set must still be intact at the end of round r_a.
    """
    beta = Fraction(beta)
    h_ra = schedule.honest(r_a)
    verdicts = []
    for r in range(r_a + 1, r_a + pi + 2):
        if r >= len(schedule.awake_honest):
            verdicts.append(RoundVerdict(r, False, detail="round beyond schedule"))
            continue
        survivors = len(h_ra - schedule.byz(r))
        pool = len(_union_awake(schedule, r - tau, r))
        ok = survivors > (1 - beta) * pool
        verdicts.append(
            RoundVerdict(r, ok, detail="" if ok else f"{survivors} survivors vs pool {pool}")
        )
    containment = r_a + 1 < len(schedule.awake_honest) and h_ra <= schedule.honest(
        r_a + 1
    )
    passed = all(v.passed for v in verdicts) and containment
    return CheckResult(
        name="async_support",
        rounds=tuple(verdicts),
        passed=passed,
        detail="" if containment else "awake set not contained in the next round",
    )


def _union_awake(schedule: "Schedule", lo: int, hi: int) -> frozenset[int]:
    out: set[int] = set()
    for r in range(max(lo, 0), hi + 1):
        if 0 <= r < len(schedule.awake_honest):
            out |= schedule.awake(r)
    return frozenset(out)


def check_tau_sleepiness(schedule: "Schedule", tau: int, beta: Fraction) -> CheckResult:
    """Per round r: |H_r| > (1 - beta) * |S_[r-tau, r]| (strict)."""
    beta = Fraction(beta)
    verdicts = []
    for r in range(schedule.horizon):
        nh = len(schedule.honest(r))
        pool = len(_union_awake(schedule, r - tau, r))
        ok = nh > (1 - beta) * pool
        verdicts.append(
            RoundVerdict(r, ok, detail="" if ok else f"{nh} awake honest vs pool {pool}")
        )
    return CheckResult(
        name="tau_sleepiness",
        rounds=tuple(verdicts),
        passed=all(v.passed for v in verdicts),
    )


@dataclass(frozen=True)
class ModelReport:
    churn: CheckResult
    failure_ratio: CheckResult
    async_support: CheckResult | None
    tau_sleepiness: CheckResult
    params: ModelParams

    @property
    def all_pass(self) -> bool:
        core = self.churn.passed and self.failure_ratio.passed
        if self.async_support is not None:
            core = core and self.async_support.passed
        return core

    @property
    def sleepy_pass(self) -> bool:
        return self.churn.passed and self.failure_ratio.passed

    def to_dict(self) -> dict:
        out = {
            "churn": self.churn.to_dict(),
            "failure_ratio": self.failure_ratio.to_dict(),
            "tau_sleepiness": self.tau_sleepiness.to_dict(),
            "all_pass": self.all_pass,
            "async_resilience_gaps": self.params.async_resilience_gaps(),
        }
        if self.async_support is not None:
            out["async_support"] = self.async_support.to_dict()
        return out


def check_all(schedule: "Schedule") -> ModelReport:
    """Run every validator with the schedule's own parameters."""
    p = schedule.params
    async_result = None
    if schedule.r_a is not None and schedule.pi > 0:
        async_result = check_async_conditions(
            schedule, schedule.r_a, schedule.pi, p.tau, p.beta
        )
    return ModelReport(
        churn=check_churn(schedule, p.tau, p.gamma),
        failure_ratio=check_failure_ratio(schedule, p.beta_tilde),
        async_support=async_result,
        tau_sleepiness=check_tau_sleepiness(schedule, p.tau, p.beta),
        params=p,
    )

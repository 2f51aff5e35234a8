"""Command-line front end: scenario ingestion, run orchestration, report
and figure-data emission.

Commands: ``run`` (simulate a scenario file, write a JSON-lines trace and
an oracle report, exit nonzero on any applicable oracle failure),
``check`` (model-constraint validation only), ``sweep-beta`` (CSV of the
reduced failure-ratio curve), and ``campaign`` (many randomized
constraint-respecting runs with aggregated verdicts).

Scenario files are JSON with exact ratio strings ("1/3"); traces are
JSON-lines with one event per line (kind, round, actor, payload) under a
header carrying the scenario hash.  Everything is deterministic given the
scenario: the same file and seed produce byte-identical outputs.  The
environment variable ``SLEEPY_TOB_SEED`` overrides the scenario seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from decimal import Decimal, getcontext
from fractions import Fraction
from pathlib import Path
from typing import Any

from .core import Log, ProposeMsg, Value, VoteMsg
from .ga import GaRecord
from .model_checks import ModelParams, beta_tilde, check_all
from .oracle import (
    OracleReport,
    Verdict,
    check_async_resilience,
    check_healing,
    check_liveness_after,
    check_safety_after,
    trace_ga_reports,
)
from .world import (
    DecideEvent,
    DeliverEvent,
    GaRecordEvent,
    STRATEGIES,
    Schedule,
    SendEvent,
    Trace,
    constant_schedule,
    generate_schedule,
    run,
)

getcontext().prec = 50


def parse_ratio(text: str | int | float) -> Fraction:
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, float):
        raise ValueError(f"ratios must be exact strings, got float {text}")
    return Fraction(str(text))


def ratio_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)


def decimal_str(x: Fraction, places: int = 12) -> str:
    q = Decimal(x.numerator) / Decimal(x.denominator)
    return f"{q:.{places}f}"


@dataclass(frozen=True)
class Scenario:
    name: str
    n: int
    horizon: int
    tau: int
    eta: int | None
    pi: int
    gamma: Fraction
    beta: Fraction
    r_a: int | None
    seed: int
    schedule_spec: dict
    adversary: str = "none"
    oracles: dict = field(default_factory=dict)
    beta_tilde_override: Fraction | None = None

    @staticmethod
    def from_dict(data: dict) -> "Scenario":
        p = data["params"]
        return Scenario(
            name=data.get("name", "scenario"),
            n=int(p["n"]),
            horizon=int(p["horizon"]),
            tau=int(p.get("tau", 0)),
            eta=None if p.get("eta") is None else int(p["eta"]),
            pi=int(p.get("pi", 0)),
            gamma=parse_ratio(p.get("gamma", "0")),
            beta=parse_ratio(p.get("beta", "1/3")),
            r_a=None if p.get("r_a") is None else int(p["r_a"]),
            seed=int(p.get("seed", 0)),
            schedule_spec=data.get("schedule", {"constant": {}}),
            adversary=data.get("adversary", {}).get("name", "none"),
            oracles=data.get("oracles", {}),
            beta_tilde_override=(
                None
                if p.get("beta_tilde") is None
                else parse_ratio(p["beta_tilde"])
            ),
        )

    def to_dict(self) -> dict:
        params: dict[str, Any] = {
            "n": self.n,
            "horizon": self.horizon,
            "tau": self.tau,
            "eta": self.eta,
            "pi": self.pi,
            "gamma": ratio_str(self.gamma),
            "beta": ratio_str(self.beta),
            "r_a": self.r_a,
            "seed": self.seed,
        }
        if self.beta_tilde_override is not None:
            params["beta_tilde"] = ratio_str(self.beta_tilde_override)
        return {
            "name": self.name,
            "params": params,
            "schedule": self.schedule_spec,
            "adversary": {"name": self.adversary},
            "oracles": self.oracles,
        }

    def canonical_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def model_params(self) -> ModelParams:
        return ModelParams(
            tau=self.tau,
            eta=self.eta,
            pi=self.pi,
            gamma=self.gamma,
            beta=self.beta,
            beta_tilde=self.beta_tilde_override,
        )

    def with_seed(self, seed: int) -> "Scenario":
        data = self.to_dict()
        data["params"]["seed"] = seed
        return Scenario.from_dict(data)


def load_scenario(path: str | Path) -> Scenario:
    with open(path) as fh:
        return Scenario.from_dict(json.load(fh))


def build_schedule(scenario: Scenario) -> Schedule:
    spec = scenario.schedule_spec
    params = scenario.model_params()
    if "explicit" in spec:
        ex = spec["explicit"]
        schedule = Schedule(
            n=scenario.n,
            horizon=scenario.horizon,
            awake_honest=tuple(frozenset(s) for s in ex["awake_honest"]),
            byzantine=tuple(frozenset(s) for s in ex["byzantine"]),
            synchronous=tuple(
                not (
                    scenario.r_a is not None
                    and scenario.r_a + 1 <= r <= scenario.r_a + scenario.pi
                )
                for r in range(scenario.horizon)
            ),
            r_a=scenario.r_a if scenario.pi else None,
            pi=scenario.pi,
            params=params,
        )
        schedule.validate()
        return schedule
    if "generate" in spec:
        gen = spec["generate"]
        return generate_schedule(
            n=scenario.n,
            horizon=scenario.horizon,
            tau=scenario.tau,
            gamma=scenario.gamma,
            beta=scenario.beta,
            pi=scenario.pi,
            r_a=scenario.r_a,
            seed=scenario.seed,
            eta=scenario.eta,
            beta_tilde=scenario.beta_tilde_override,
            n_byz=gen.get("n_byz"),
        )
    const = spec.get("constant", {})
    return constant_schedule(
        n=scenario.n,
        horizon=scenario.horizon,
        n_byz=int(const.get("n_byz", 0)),
        params=params,
        r_a=scenario.r_a if scenario.pi else None,
        pi=scenario.pi,
    )


# ---------------------------------------------------------------------------
# serialization


def value_to_json(v: Value) -> dict:
    return {"id": v.id, "proposer": v.proposer, "view": v.view}


def log_to_json(log: Log) -> list[dict]:
    return [value_to_json(v) for v in log.values]


def msg_to_json(msg: VoteMsg | ProposeMsg) -> dict:
    if isinstance(msg, VoteMsg):
        return {
            "type": "vote",
            "sender": msg.sender,
            "round": msg.round,
            "log": log_to_json(msg.log),
        }
    return {
        "type": "propose",
        "sender": msg.sender,
        "view": msg.view,
        "log": log_to_json(msg.log),
        "vrf": {"value": msg.vrf.value, "sender": msg.vrf.sender, "view": msg.vrf.view},
    }


def record_to_json(record: GaRecord) -> dict:
    receivers = {}
    for q in sorted(record.receivers):
        view = record.receivers[q]
        grades = sorted(
            ((log_to_json(log), g) for log, g in view.output.grades.items()),
            key=lambda item: json.dumps(item[0], sort_keys=True),
        )
        receivers[str(q)] = {
            "m": view.m,
            "initial": sorted(
                (msg_to_json(m) for m in view.initial.messages),
                key=lambda d: (d["sender"], d["round"]),
            ),
            "received": sorted(
                (msg_to_json(m) for m in view.received),
                key=lambda d: (d["sender"], json.dumps(d, sort_keys=True)),
            ),
            "output": grades,
        }
    return {
        "synchronous": record.synchronous,
        "inputs": {str(p): log_to_json(log) for p, log in sorted(record.inputs.items())},
        "byzantine": sorted(record.byzantine),
        "receivers": receivers,
    }


def trace_lines(trace: Trace, scenario: Scenario) -> list[str]:
    """JSON-lines rendition: a header then one event object per line."""
    lines = [
        json.dumps(
            {
                "kind": "header",
                "scenario_hash": scenario.canonical_hash(),
                "params": scenario.to_dict()["params"],
                "strategy": trace.strategy_name,
            },
            sort_keys=True,
        )
    ]
    for e in trace.events:
        if isinstance(e, SendEvent):
            obj = {
                "kind": "send",
                "round": e.round,
                "actor": e.msg.sender,
                "payload": {"msg": msg_to_json(e.msg)},
            }
        elif isinstance(e, DeliverEvent):
            obj = {
                "kind": "deliver",
                "round": e.round,
                "actor": e.receiver,
                "payload": {"msg": msg_to_json(e.msg)},
            }
        elif isinstance(e, DecideEvent):
            obj = {
                "kind": "decide",
                "round": e.round,
                "actor": e.pid,
                "payload": {"log": log_to_json(e.log)},
            }
        else:
            assert isinstance(e, GaRecordEvent)
            obj = {
                "kind": "ga_record",
                "round": e.round,
                "actor": None,
                "payload": record_to_json(e.record),
            }
        lines.append(json.dumps(obj, sort_keys=True))
    return lines


# ---------------------------------------------------------------------------
# orchestration


def decision_latencies(trace: Trace) -> dict[str, Any]:
    """Per decided value: rounds from its introduction to its first
    appearance in a decided log."""
    first_decided: dict[Value, int] = {}
    for e in trace.decide_events():
        for v in e.log.values:
            first_decided.setdefault(v, e.round)
    latencies = []
    for v, decided_round in sorted(
        first_decided.items(), key=lambda item: (item[1], item[0].sort_key)
    ):
        introduced = trace.first_input_round(v)
        if introduced is not None:
            latencies.append(decided_round - introduced)
    if not latencies:
        return {"decided_values": 0, "mean_decision_latency": None}
    mean = Fraction(sum(latencies), len(latencies))
    return {
        "decided_values": len(latencies),
        "mean_decision_latency": ratio_str(mean),
        "mean_decision_latency_decimal": decimal_str(mean, 4),
    }


def run_scenario(scenario: Scenario) -> tuple[Trace, dict]:
    """Simulate one scenario and assemble its oracle report.

    The exit code in the report is nonzero iff an oracle whose assumptions
    hold in this run fails; out-of-model failures are reported but flagged
    instead of gating.
    """
    schedule = build_schedule(scenario)
    strategy = STRATEGIES[scenario.adversary]()
    trace = run(schedule, strategy, scenario.seed)
    model_report = check_all(schedule)
    toggles = scenario.oracles
    liveness_window = int(toggles.get("liveness_window", 8))

    gates: list[tuple[OracleReport, bool]] = []
    reports: dict[str, dict] = {}

    safety = check_safety_after(trace, 0)
    gates.append((safety, toggles.get("safety", True)))
    reports["safety_after_0"] = safety.to_dict()

    ga_reports = trace_ga_reports(trace)
    ga_failures = []
    applicable_rounds = 0
    for rnd, per_check in ga_reports.items():
        if any(rep.verdict is not Verdict.NOT_APPLICABLE for rep in per_check.values()):
            applicable_rounds += 1
        for rep in per_check.values():
            if rep.verdict is Verdict.FAIL:
                ga_failures.append({"round": rnd, **rep.to_dict()})
    reports["ga_properties"] = {
        "rounds_checked": applicable_rounds,
        "failures": ga_failures,
    }
    if ga_failures and toggles.get("ga_properties", True):
        gates.append(
            (
                OracleReport("ga_properties", Verdict.FAIL, detail="see report"),
                True,
            )
        )

    in_model = model_report.all_pass
    if schedule.r_a is not None and schedule.pi > 0:
        resilience = check_async_resilience(trace, schedule.r_a, schedule.pi)
        resilience_applicable = (
            in_model and not scenario.model_params().async_resilience_gaps()
        )
        reports["async_resilience"] = {
            **resilience.to_dict(),
            "gating": resilience_applicable,
        }
        gates.append((resilience, resilience_applicable and toggles.get("resilience", True)))

        last_async = schedule.r_a + schedule.pi
        healing = check_healing(trace, last_async, liveness_window=liveness_window)
        healing_applicable = model_report.sleepy_pass
        reports["healing"] = {**healing.to_dict(), "gating": healing_applicable}
        gates.append((healing, healing_applicable and toggles.get("healing", True)))
    else:
        liveness = check_liveness_after(trace, 0, liveness_window)
        # probabilistic with Byzantine leaders in play, so only fault-free
        # in-model runs gate on it
        liveness_applicable = (
            model_report.sleepy_pass and len(schedule.byz(schedule.horizon)) == 0
        )
        reports["liveness_after_0"] = {**liveness.to_dict(), "gating": liveness_applicable}
        gates.append((liveness, liveness_applicable and toggles.get("liveness", True)))

    failures = [
        rep.name
        for rep, gating in gates
        if gating and rep.verdict is Verdict.FAIL
    ]
    summary = {
        "decide_events": len(trace.decide_events()),
        "distinct_decided": len(trace.decided_up_to(trace.horizon)),
        **decision_latencies(trace),
    }
    report = {
        "scenario": scenario.to_dict(),
        "scenario_hash": scenario.canonical_hash(),
        "in_model": in_model,
        "model_checks": model_report.to_dict(),
        "oracles": reports,
        "summary": summary,
        "failures": failures,
        "exit_code": 0 if not failures else 1,
    }
    return trace, report


# ---------------------------------------------------------------------------
# commands


def cmd_run(args: argparse.Namespace) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: cannot load scenario: {exc}", file=sys.stderr)
        return 2
    env_seed = os.environ.get("SLEEPY_TOB_SEED")
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    elif env_seed is not None:
        scenario = scenario.with_seed(int(env_seed))
    try:
        trace, report = run_scenario(scenario)
    except Exception as exc:
        print(f"error: run failed: {exc}", file=sys.stderr)
        return 2
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "trace.jsonl").write_text("\n".join(trace_lines(trace, scenario)) + "\n")
    (outdir / "report.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    status = "ok" if report["exit_code"] == 0 else "FAIL"
    print(
        f"{scenario.name}: {status}; decided {report['summary']['distinct_decided']} logs; "
        f"mean latency {report['summary'].get('mean_decision_latency')}"
    )
    if report["failures"]:
        print(json.dumps({"failures": report["failures"], "oracles": report["oracles"]},
                         sort_keys=True))
    return report["exit_code"]


def cmd_check(args: argparse.Namespace) -> int:
    from .world import InfeasibleScheduleError, ScheduleError

    try:
        scenario = load_scenario(args.scenario)
        schedule = build_schedule(scenario)
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: cannot load scenario: {exc}", file=sys.stderr)
        return 2
    except (ScheduleError, InfeasibleScheduleError) as exc:
        print(f"schedule error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 2
    report = check_all(schedule)
    print(json.dumps(report.to_dict(), sort_keys=True, indent=2))
    return 0 if report.all_pass else 1


def cmd_sweep_beta(args: argparse.Namespace) -> int:
    beta = parse_ratio(args.beta)
    steps = args.steps
    if steps < 2:
        print("error: need at least 2 steps", file=sys.stderr)
        return 2
    rows = ["gamma,beta_tilde"]
    for k in range(steps):
        gamma = beta * k / steps
        rows.append(f"{decimal_str(gamma)},{decimal_str(beta_tilde(beta, gamma))}")
    text = "\n".join(rows) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {steps} rows to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def aggregate_runs(reports: list[dict]) -> dict:
    """Fold per-run reports into campaign totals.  A failing run under
    satisfied model assumptions becomes a replayable counterexample; a
    failing run whose assumptions were already broken is only flagged."""
    counts = {"runs": 0, "in_model": 0, "oracle_pass": 0, "out_of_model_failures": 0}
    counterexamples: list[dict] = []
    latencies: list[Fraction] = []
    for report in reports:
        counts["runs"] += 1
        if report["in_model"]:
            counts["in_model"] += 1
        if report["failures"]:
            if report["in_model"]:
                counterexamples.append(report["scenario"])
            else:
                counts["out_of_model_failures"] += 1
        else:
            counts["oracle_pass"] += 1
        lat = report["summary"].get("mean_decision_latency")
        if lat is not None:
            latencies.append(Fraction(lat))
    return {
        "counts": counts,
        "counterexamples": counterexamples,
        "mean_decision_latency": (
            ratio_str(sum(latencies) / len(latencies)) if latencies else None
        ),
    }


def cmd_campaign(args: argparse.Namespace) -> int:
    env_seed = os.environ.get("SLEEPY_TOB_SEED")
    base_seed = args.seed if args.seed is not None else (
        int(env_seed) if env_seed is not None else 0
    )
    strategies = args.strategies.split(",")
    for name in strategies:
        if name not in STRATEGIES:
            print(f"error: unknown strategy {name}", file=sys.stderr)
            return 2
    reports = []
    for i in range(args.seeds):
        scenario = Scenario(
            name=f"campaign-{i}",
            n=args.n,
            horizon=args.horizon,
            tau=args.tau,
            eta=args.eta,
            pi=args.pi,
            gamma=parse_ratio(args.gamma),
            beta=parse_ratio(args.beta),
            r_a=args.r_a if args.pi else None,
            seed=base_seed + i,
            schedule_spec={"generate": {"n_byz": args.n_byz}},
            adversary=strategies[i % len(strategies)],
        )
        _, report = run_scenario(scenario)
        reports.append(report)
    aggregate = aggregate_runs(reports)
    text = json.dumps(aggregate, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 1 if aggregate["counterexamples"] else 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="sleepy-tob",
        description="simulate and verify an asynchrony-resilient dynamically "
        "available total-order broadcast",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario file")
    p_run.add_argument("scenario")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default="out")
    p_run.set_defaults(func=cmd_run)

    p_check = sub.add_parser("check", help="validate a scenario against the model")
    p_check.add_argument("scenario")
    p_check.set_defaults(func=cmd_check)

    p_sweep = sub.add_parser("sweep-beta", help="emit the reduced failure-ratio curve")
    p_sweep.add_argument("--beta", default="1/3")
    p_sweep.add_argument("--steps", type=int, default=100)
    p_sweep.add_argument("--out", default=None)
    p_sweep.set_defaults(func=cmd_sweep_beta)

    p_camp = sub.add_parser("campaign", help="run many randomized scenarios")
    p_camp.add_argument("--seeds", type=int, default=20)
    p_camp.add_argument("--seed", type=int, default=None)
    p_camp.add_argument("--n", type=int, default=20)
    p_camp.add_argument("--n-byz", dest="n_byz", type=int, default=None)
    p_camp.add_argument("--horizon", type=int, default=20)
    p_camp.add_argument("--tau", type=int, default=4)
    p_camp.add_argument("--eta", type=int, default=4)
    p_camp.add_argument("--pi", type=int, default=2)
    p_camp.add_argument("--r-a", dest="r_a", type=int, default=6)
    p_camp.add_argument("--gamma", default="1/10")
    p_camp.add_argument("--beta", default="1/3")
    p_camp.add_argument("--strategies", default="prop1,split_decision")
    p_camp.add_argument("--out", default=None)
    p_camp.set_defaults(func=cmd_campaign)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

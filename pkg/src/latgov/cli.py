"""Command-line front end: simulate, replay, report, slo, fit.

Exit codes are a stable contract for rollout scripting: 0 success,
1 runtime failure (e.g. empty input), 2 usage/config error, 3 SLO
escalation. Human-readable tables go to stdout; machine JSON goes to
``--out`` files.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Dict, List, Optional

from .governor import MODE_ORDER, GovernorState, step
from .model import (
    ModelParams,
    calibrate_lambda0,
    fit_logistic_two_point,
    perceived_latency,
)
from .simulator import (
    OUTCOME_MODEL,
    SimConfig,
    SimResult,
    compare_policies,
    quantile_mode_rows,
    run_simulation,
)
from .telemetry import (
    DEFAULT_WINDOW_CAPACITY,
    LatencyWindow,
    SloConfig,
    SloStatus,
    TelemetryError,
    confirmation_latency,
    iter_events,
    nearest_rank,
    slo_alerts,
    slo_evaluate,
    slo_track,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_SLO_ESCALATED = 3

DEFAULT_SEED = 42
DEFAULT_SESSIONS = 10_000

_MODEL_FIELD_NAMES = (
    "alpha", "beta", "gamma", "k", "eta", "lambda0", "budget_b_l",
    "budget_soft", "hysteresis_h", "theta1", "theta2", "lambda1", "lambda2",
)
_POLICY_ALIASES = {
    "none": "none",
    "static": "static_messaging",
    "static_messaging": "static_messaging",
    "letw": "letw",
}


class UsageError(Exception):
    """Bad flags or bad configuration; maps to exit code 2."""


def _load_json(path: str, what: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {what} {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError(f"{what} {path} must hold a JSON object")
    return doc


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    doc = _load_json(path, "config file")
    # Accept bare model-params documents by nesting them under "params".
    if "params" not in doc:
        loose = {k: doc.pop(k) for k in list(doc) if k in _MODEL_FIELD_NAMES}
        if loose:
            doc["params"] = loose
    return doc


def _params_from_config(doc: dict) -> ModelParams:
    params_doc = doc.get("params", {})
    try:
        return ModelParams(**params_doc)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad model params: {exc}") from exc


def _slo_config(doc: dict) -> SloConfig:
    try:
        return SloConfig(**doc.get("slo", {}))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad SLO config: {exc}") from exc


def _write_out(path: Optional[str], doc: dict) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is None:
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _read_lines(path: str) -> List[str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read telemetry {path}: {exc}") from exc


def _format_table(headers, rows) -> str:
    table = [tuple(str(c) for c in row) for row in [headers, *rows]]
    widths = [max(len(row[i]) for row in table) for i in range(len(headers))]
    lines = []
    for r, row in enumerate(table):
        cells = [
            row[0].ljust(widths[0]),
            *(row[i].rjust(widths[i]) for i in range(1, len(row))),
        ]
        lines.append("  ".join(cells).rstrip())
        if r == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def cmd_simulate(args: argparse.Namespace) -> int:
    doc = _load_config(args.config)
    doc.setdefault("sessions", DEFAULT_SESSIONS)
    doc.setdefault("seed", DEFAULT_SEED)
    if args.sessions is not None:
        doc["sessions"] = args.sessions
    if args.seed is not None:
        doc["seed"] = args.seed

    policy = args.policy
    if policy != "all":
        policy_doc = dict(doc.get("policy", {}))
        policy_doc["kind"] = _POLICY_ALIASES[policy]
        doc["policy"] = policy_doc

    try:
        cfg = SimConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc

    if policy == "all":
        results = compare_policies(cfg)
        rows = [
            (
                kind,
                f"{res.conversion_rate * 100:.1f}",
                f"{res.repeat_rate * 100:.1f}",
                f"{res.mean_trust:.3f}",
            )
            for kind, res in results.items()
        ]
        print(_format_table(("policy", "conversion (%)", "repeat (%)", "trust index"), rows))
        out_doc = {
            "config": cfg.to_dict(),
            "policies": {kind: res.to_dict() for kind, res in results.items()},
            "outcome_model": OUTCOME_MODEL,
        }
    else:
        result = run_simulation(cfg)
        print(
            f"policy={cfg.policy.kind} sessions={cfg.sessions} seed={cfg.seed}\n"
            f"conversion={result.conversion_rate * 100:.2f}% "
            f"abandonment={result.abandonment_rate * 100:.2f}% "
            f"repeat={result.repeat_rate * 100:.2f}% "
            f"trust={result.mean_trust:.4f}\n"
            f"modes: "
            + " ".join(f"{m}={s * 100:.1f}%" for m, s in result.mode_shares.items())
            + "\n"
            f"latency p50={result.latency_p50:.3f}s p90={result.latency_p90:.3f}s "
            f"p99={result.latency_p99:.3f}s"
        )
        out_doc = {
            "config": cfg.to_dict(),
            "result": result.to_dict(),
            "outcome_model": OUTCOME_MODEL,
        }
    _write_out(args.out, out_doc)
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    if args.window < 1:
        raise UsageError("--window must be >= 1")
    doc = _load_config(args.config)
    params = _params_from_config(doc)
    lines = _read_lines(args.telemetry)

    window = LatencyWindow(capacity=args.window)
    state = GovernorState()
    records = []
    mode_counts: Dict[str, int] = {m.value: 0 for m in MODE_ORDER}
    for event in iter_events(lines, skip_bad=args.skip_bad):
        window.push(confirmation_latency(event))
        stats = window.stats()
        lp = perceived_latency(stats.mean_s, stats.std_s, params.k)
        state, decision = step(state, lp, params)
        mode_counts[decision.mode.value] += 1
        records.append(
            {
                "session_id": event.session_id,
                "perceived_latency_s": lp,
                "trust": decision.trust,
                "mode": decision.mode.value,
                "reason": decision.reason.value,
            }
        )

    if not records:
        print("error: no telemetry events to replay", file=sys.stderr)
        return EXIT_RUNTIME

    total = len(records)
    shares = " ".join(f"{m}={c / total * 100:.1f}%" for m, c in mode_counts.items())
    summary = f"events={total} transitions={state.transitions} modes: {shares}"
    jsonl = "".join(
        json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n" for rec in records
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(jsonl)
        print(summary)
    else:
        sys.stdout.write(jsonl)
        print(summary, file=sys.stderr)
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    if bool(args.telemetry) == bool(args.sim):
        raise UsageError("exactly one of --telemetry or --sim is required")
    doc = _load_config(args.config)
    params = _params_from_config(doc)
    slo_cfg = _slo_config(doc)

    behavior_lines = []
    if args.telemetry:
        events = list(iter_events(_read_lines(args.telemetry), skip_bad=args.skip_bad))
        if not events:
            print("error: empty telemetry input", file=sys.stderr)
            return EXIT_RUNTIME
        ordered = sorted(confirmation_latency(e) for e in events)
        quantiles = {
            "p50": nearest_rank(ordered, 0.50),
            "p90": nearest_rank(ordered, 0.90),
            "p99": nearest_rank(ordered, 0.99),
        }
        repeat_rate = sum(e.engaged_60s for e in events) / len(events)
        flag = "  [ALERT: below repeat floor]" if repeat_rate < slo_cfg.repeat_min else ""
        behavior_lines.append(f"repeat engagement: {repeat_rate * 100:.1f}%{flag}")
    else:
        sim_doc = _load_json(args.sim, "simulation output")
        try:
            result = SimResult.from_dict(sim_doc.get("result", sim_doc))
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad simulation output: {exc}") from exc
        quantiles = {
            "p50": result.latency_p50,
            "p90": result.latency_p90,
            "p99": result.latency_p99,
        }
        if result.conversion_rate < slo_cfg.conv_min:
            behavior_lines.append(
                f"conversion {result.conversion_rate * 100:.1f}% [ALERT: below floor]"
            )
        if result.repeat_rate < slo_cfg.repeat_min:
            behavior_lines.append(
                f"repeat engagement {result.repeat_rate * 100:.1f}% [ALERT: below floor]"
            )

    rows = quantile_mode_rows(quantiles, params)
    table_rows = [
        (r.statistic, f"{r.latency_s:.3f}", r.mode.value, f"{r.conversion * 100:.1f}")
        for r in rows
    ]
    print(_format_table(("statistic", "latency (s)", "mode", "model conversion (%)"), table_rows))
    for line in behavior_lines:
        print(line)

    _write_out(
        args.out,
        {
            "rows": [
                {
                    "statistic": r.statistic,
                    "latency_s": r.latency_s,
                    "mode": r.mode.value,
                    "conversion": r.conversion,
                }
                for r in rows
            ]
        },
    )
    return EXIT_OK


def cmd_slo(args: argparse.Namespace) -> int:
    if args.window < 1:
        raise UsageError("--window must be >= 1")
    doc = _load_config(args.config)
    slo_cfg = _slo_config(doc)
    lines = _read_lines(args.telemetry)

    latencies = [
        confirmation_latency(e) for e in iter_events(lines, skip_bad=args.skip_bad)
    ]
    if not latencies:
        print("error: no telemetry events", file=sys.stderr)
        return EXIT_RUNTIME

    status = SloStatus()
    windows = []
    escalations = []
    for index, start in enumerate(range(0, len(latencies), args.window)):
        chunk = latencies[start : start + args.window]
        window = LatencyWindow(capacity=args.window)
        for latency in chunk:
            window.push(latency)
        stats = window.stats()
        breaches = slo_evaluate(stats, slo_cfg)
        alerts = slo_alerts(stats, slo_cfg)
        status = slo_track(status, breaches)
        if status.escalated:
            escalations.append(index)
        windows.append(
            {
                "index": index,
                "count": stats.count,
                "mean_s": stats.mean_s,
                "std_s": stats.std_s,
                "p50_s": stats.p50_s,
                "p90_s": stats.p90_s,
                "p99_s": stats.p99_s,
                "breaches": sorted(breaches),
                "alerts": sorted(alerts),
                "consecutive_breaches": status.consecutive_breaches,
                "escalated": status.escalated,
            }
        )
        line = (
            f"window {index}: n={stats.count} p50={stats.p50_s:.3f} "
            f"p90={stats.p90_s:.3f} p99={stats.p99_s:.3f} jitter={stats.std_s:.3f}"
        )
        if breaches:
            line += f" breaches={','.join(sorted(breaches))}"
        if status.escalated:
            line += " ESCALATED"
        print(line)

    escalated_ever = bool(escalations)
    print(f"windows={len(windows)} escalated={'yes' if escalated_ever else 'no'}")
    _write_out(
        args.out,
        {
            "window_size": args.window,
            "windows": windows,
            "escalated": escalated_ever,
            "escalation_windows": escalations,
        },
    )
    return EXIT_SLO_ESCALATED if escalated_ever else EXIT_OK


def _parse_points(text: str):
    points = []
    for chunk in text.split(","):
        try:
            latency_s, prob_s = chunk.split(":")
            points.append((float(latency_s), float(prob_s)))
        except ValueError as exc:
            raise UsageError(f"could not parse point {chunk!r}; expected L:P") from exc
    if len(points) != 2:
        raise UsageError(f"expected exactly two latency:probability points, got {len(points)}")
    return points


def _parse_anchor(text: str):
    try:
        latency_s, median_s = text.split(":")
        return float(latency_s), float(median_s)
    except ValueError as exc:
        raise UsageError(
            f"could not parse hazard anchor {text!r}; expected latency:median"
        ) from exc


def cmd_fit(args: argparse.Namespace) -> int:
    if not args.points and not args.hazard_anchor:
        raise UsageError("nothing to fit: pass --points and/or --hazard-anchor")
    fitted = {}
    if args.points:
        p1, p2 = _parse_points(args.points)
        try:
            alpha, beta = fit_logistic_two_point(p1, p2)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        fitted["alpha"] = alpha
        fitted["beta"] = beta
    if args.hazard_anchor:
        anchor_latency, anchor_median = _parse_anchor(args.hazard_anchor)
        try:
            fitted["lambda0"] = calibrate_lambda0(anchor_latency, anchor_median, args.gamma)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    for name, value in fitted.items():
        print(f"{name}={value:.6f}")
    _write_out(args.out, fitted)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config (model params and/or simulation scenario)")
    common.add_argument("--seed", type=int, help="RNG seed (default 42)")
    common.add_argument("--out", help="write machine-readable JSON here")

    parser = argparse.ArgumentParser(
        prog="latgov",
        description="Latency governance: simulation, telemetry replay, SLO gating, calibration.",
    )
    sub = parser.add_subparsers(dest="command")

    p_sim = sub.add_parser("simulate", parents=[common], help="run the session simulator")
    p_sim.add_argument("--sessions", type=int, help=f"session count (default {DEFAULT_SESSIONS})")
    p_sim.add_argument(
        "--policy",
        choices=("none", "static", "letw", "all"),
        default="letw",
        help="governance policy, or 'all' for a three-way comparison",
    )
    p_sim.set_defaults(func=cmd_simulate)

    p_replay = sub.add_parser("replay", parents=[common], help="replay telemetry through the governor")
    p_replay.add_argument("--telemetry", required=True, help="JSONL telemetry input")
    p_replay.add_argument("--window", type=int, default=DEFAULT_WINDOW_CAPACITY)
    p_replay.add_argument("--skip-bad", action="store_true", help="skip malformed lines")
    p_replay.set_defaults(func=cmd_replay)

    p_report = sub.add_parser("report", parents=[common], help="quantile/mode table")
    p_report.add_argument("--telemetry", help="JSONL telemetry input")
    p_report.add_argument("--sim", help="simulation output JSON")
    p_report.add_argument("--skip-bad", action="store_true")
    p_report.set_defaults(func=cmd_report)

    p_slo = sub.add_parser("slo", parents=[common], help="windowed SLO check (exit 3 on escalation)")
    p_slo.add_argument("--telemetry", required=True, help="JSONL telemetry input")
    p_slo.add_argument("--window", type=int, default=DEFAULT_WINDOW_CAPACITY, help="events per window")
    p_slo.add_argument("--skip-bad", action="store_true")
    p_slo.set_defaults(func=cmd_slo)

    p_fit = sub.add_parser("fit", parents=[common], help="calibrate model coefficients")
    p_fit.add_argument("--points", help="two conversion points as L1:P1,L2:P2")
    p_fit.add_argument("--hazard-anchor", help="abandonment anchor as latency:median")
    p_fit.add_argument("--gamma", type=float, default=0.38, help="hazard slope for the anchor")
    p_fit.set_defaults(func=cmd_fit)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not hasattr(args, "func"):
        parser.print_help()
        return EXIT_USAGE
    try:
        return int(args.func(args))
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TelemetryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

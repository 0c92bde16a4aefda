"""Telemetry ingestion, sliding-window latency statistics, and SLO tracking.

Wire format is one JSON object per line (JSONL, UTF-8) with snake_case
fields; see :data:`REQUIRED_FIELDS`. Unknown fields are ignored so the
schema can grow without breaking old readers.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from typing import Deque, FrozenSet, Iterable, Iterator, Optional, Sequence

UX_MODES = ("instant", "soft", "deferred")

REQUIRED_FIELDS = (
    "session_id",
    "intent_ts",
    "confirm_ts",
    "media_rtt_ms",
    "media_jitter_ms",
    "ux_mode",
    "engaged_60s",
)
OPTIONAL_FIELDS = ("region", "device")

DEFAULT_WINDOW_CAPACITY = 256

# Metric names used in SLO breach sets.
METRIC_P50 = "p50"
METRIC_P90 = "p90"
METRIC_P99 = "p99"
METRIC_JITTER = "jitter_std"

# Only sustained p90 / jitter violations drive automatic escalation.
ESCALATION_METRICS = frozenset({METRIC_P90, METRIC_JITTER})
ESCALATION_WINDOWS = 3  # escalate on the 3rd consecutive breaching window


class TelemetryError(ValueError):
    """Base error for telemetry ingestion; carries the 1-based line number."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TelemetryParseError(TelemetryError):
    """The line is not valid JSON."""


class TelemetrySchemaError(TelemetryError):
    """The JSON object violates the event schema."""


@dataclass(frozen=True)
class TelemetryEvent:
    """One payment intent -> confirmation record with media stats."""

    session_id: str
    intent_ts: int          # ms since epoch
    confirm_ts: int         # ms since epoch
    media_rtt_ms: float
    media_jitter_ms: float
    ux_mode: str
    engaged_60s: bool
    region: Optional[str] = None
    device: Optional[str] = None

    def to_dict(self) -> dict:
        doc = {
            "session_id": self.session_id,
            "intent_ts": self.intent_ts,
            "confirm_ts": self.confirm_ts,
            "media_rtt_ms": self.media_rtt_ms,
            "media_jitter_ms": self.media_jitter_ms,
            "ux_mode": self.ux_mode,
            "engaged_60s": self.engaged_60s,
        }
        if self.region is not None:
            doc["region"] = self.region
        if self.device is not None:
            doc["device"] = self.device
        return doc


def _require_int(doc: dict, field: str, line: Optional[int]) -> int:
    value = doc[field]
    if isinstance(value, bool) or not isinstance(value, int):
        raise TelemetrySchemaError(
            f"field '{field}' must be an integer millisecond timestamp, got {value!r}",
            line,
        )
    return value


def _require_number(doc: dict, field: str, line: Optional[int]) -> float:
    value = doc[field]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TelemetrySchemaError(f"field '{field}' must be numeric, got {value!r}", line)
    value = float(value)
    if math.isnan(value) or value < 0.0:
        raise TelemetrySchemaError(f"field '{field}' must be >= 0, got {value}", line)
    return value


def event_from_dict(doc: dict, line: Optional[int] = None) -> TelemetryEvent:
    """Validate one decoded JSON object against the event schema."""
    if not isinstance(doc, dict):
        raise TelemetrySchemaError(f"event must be a JSON object, got {type(doc).__name__}", line)
    for field in REQUIRED_FIELDS:
        if field not in doc:
            raise TelemetrySchemaError(f"missing required field '{field}'", line)

    session_id = doc["session_id"]
    if not isinstance(session_id, str):
        raise TelemetrySchemaError(f"field 'session_id' must be a string, got {session_id!r}", line)
    intent_ts = _require_int(doc, "intent_ts", line)
    confirm_ts = _require_int(doc, "confirm_ts", line)
    if confirm_ts < intent_ts:
        raise TelemetrySchemaError(
            f"confirm before intent (confirm_ts={confirm_ts} < intent_ts={intent_ts})", line
        )
    ux_mode = doc["ux_mode"]
    if ux_mode not in UX_MODES:
        raise TelemetrySchemaError(f"field 'ux_mode' must be one of {UX_MODES}, got {ux_mode!r}", line)
    engaged = doc["engaged_60s"]
    if not isinstance(engaged, bool):
        raise TelemetrySchemaError(f"field 'engaged_60s' must be a boolean, got {engaged!r}", line)

    optional = {}
    for field in OPTIONAL_FIELDS:
        value = doc.get(field)
        if value is not None and not isinstance(value, str):
            raise TelemetrySchemaError(f"field '{field}' must be a string, got {value!r}", line)
        optional[field] = value

    return TelemetryEvent(
        session_id=session_id,
        intent_ts=intent_ts,
        confirm_ts=confirm_ts,
        media_rtt_ms=_require_number(doc, "media_rtt_ms", line),
        media_jitter_ms=_require_number(doc, "media_jitter_ms", line),
        ux_mode=ux_mode,
        engaged_60s=engaged,
        **optional,
    )


def parse_event(line: str, lineno: Optional[int] = None) -> TelemetryEvent:
    """Parse one JSONL telemetry line; unknown fields are ignored."""
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise TelemetryParseError(f"malformed JSON: {exc.msg}", lineno) from exc
    return event_from_dict(doc, lineno)


def event_to_json(event: TelemetryEvent) -> str:
    """Serialize an event back to its wire form (lossless round trip)."""
    return json.dumps(event.to_dict(), sort_keys=True, separators=(",", ":"))


def iter_events(lines: Iterable[str], skip_bad: bool = False) -> Iterator[TelemetryEvent]:
    """Yield events from JSONL lines; blank lines are skipped.

    With ``skip_bad`` malformed lines are dropped instead of raising.
    """
    for lineno, raw in enumerate(lines, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            yield parse_event(raw, lineno)
        except TelemetryError:
            if not skip_bad:
                raise


def confirmation_latency(event: TelemetryEvent) -> float:
    """Intent-to-confirmation latency in seconds."""
    return (event.confirm_ts - event.intent_ts) / 1000.0


def nearest_rank(sorted_values: Sequence[float], q: float) -> float:
    """Exact nearest-rank quantile: element at 1-based rank ceil(q * n).

    The small epsilon keeps ranks stable when q * n lands on an integer up
    to floating-point rounding.
    """
    n = len(sorted_values)
    if n == 0:
        raise ValueError("cannot take a quantile of an empty sequence")
    if not (0.0 < q <= 1.0):
        raise ValueError(f"q must be inside (0, 1], got {q}")
    rank = math.ceil(q * n - 1e-9)
    if rank < 1:
        rank = 1
    return float(sorted_values[rank - 1])


@dataclass(frozen=True)
class WindowStats:
    """Summary of the retained window: mean, sample std, nearest-rank quantiles."""

    count: int
    mean_s: float
    std_s: float
    p50_s: float
    p90_s: float
    p99_s: float

    def __post_init__(self) -> None:
        if self.count < 0:
            raise ValueError("count must be >= 0")
        if self.std_s < 0.0:
            raise ValueError("std_s must be >= 0")
        if not (self.p50_s <= self.p90_s <= self.p99_s):
            raise ValueError("quantiles must be ordered p50 <= p90 <= p99")


EMPTY_STATS = WindowStats(count=0, mean_s=0.0, std_s=0.0, p50_s=0.0, p90_s=0.0, p99_s=0.0)


class LatencyWindow:
    """Bounded count-based window of confirmation latencies (seconds).

    Pushing past capacity evicts the oldest value; retained order is
    preserved. Single-writer; distinct sessions get distinct windows.
    """

    def __init__(self, capacity: int = DEFAULT_WINDOW_CAPACITY):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._values: Deque[float] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._values)

    def values(self) -> tuple:
        return tuple(self._values)

    def push(self, latency_s: float) -> "LatencyWindow":
        latency_s = float(latency_s)
        if math.isnan(latency_s) or latency_s < 0.0:
            raise ValueError(f"latency must be non-negative, got {latency_s}")
        self._values.append(latency_s)
        return self

    def stats(self) -> WindowStats:
        n = len(self._values)
        if n == 0:
            return EMPTY_STATS
        values = list(self._values)
        mean = math.fsum(values) / n
        if n > 1:
            ss = math.fsum((v - mean) ** 2 for v in values)
            std = math.sqrt(ss / (n - 1))
        else:
            std = 0.0
        ordered = sorted(values)
        return WindowStats(
            count=n,
            mean_s=mean,
            std_s=std,
            p50_s=nearest_rank(ordered, 0.50),
            p90_s=nearest_rank(ordered, 0.90),
            p99_s=nearest_rank(ordered, 0.99),
        )


@dataclass(frozen=True)
class SloConfig:
    """Latency SLO targets plus dashboard alert thresholds.

    Targets bound the streaming window check; alert thresholds mark the
    more severe dashboard level. ``conv_min`` / ``repeat_min`` are
    behavioral alert floors evaluated only in batch reports because they
    need outcome labels.
    """

    p50_max_s: float = 1.0
    p90_max_s: float = 2.0
    p99_max_s: float = 4.0
    jitter_std_max_s: float = 0.7
    p90_alert_s: float = 2.5
    p99_alert_s: float = 5.0
    jitter_alert_s: float = 1.0
    conv_min: float = 0.08
    repeat_min: float = 0.04

    def __post_init__(self) -> None:
        for name in (
            "p50_max_s", "p90_max_s", "p99_max_s", "jitter_std_max_s",
            "p90_alert_s", "p99_alert_s", "jitter_alert_s", "conv_min", "repeat_min",
        ):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0")
        pairs = (
            ("p90_max_s", "p90_alert_s"),
            ("p99_max_s", "p99_alert_s"),
            ("jitter_std_max_s", "jitter_alert_s"),
        )
        for target, alert in pairs:
            if not getattr(self, target) < getattr(self, alert):
                raise ValueError(f"{target} must be below {alert}")


@dataclass(frozen=True)
class SloStatus:
    """Consecutive-breach tracking state for one telemetry stream."""

    consecutive_breaches: int = 0
    breached_metrics: FrozenSet[str] = frozenset()
    escalated: bool = False


def slo_evaluate(stats: WindowStats, cfg: SloConfig) -> FrozenSet[str]:
    """Names of metrics at or beyond their SLO targets; empty when compliant."""
    breaches = set()
    if stats.p50_s >= cfg.p50_max_s:
        breaches.add(METRIC_P50)
    if stats.p90_s >= cfg.p90_max_s:
        breaches.add(METRIC_P90)
    if stats.p99_s >= cfg.p99_max_s:
        breaches.add(METRIC_P99)
    if stats.std_s >= cfg.jitter_std_max_s:
        breaches.add(METRIC_JITTER)
    return frozenset(breaches)


def slo_alerts(stats: WindowStats, cfg: SloConfig) -> FrozenSet[str]:
    """Metrics strictly beyond the dashboard alert thresholds."""
    alerts = set()
    if stats.p90_s > cfg.p90_alert_s:
        alerts.add(METRIC_P90)
    if stats.p99_s > cfg.p99_alert_s:
        alerts.add(METRIC_P99)
    if stats.std_s > cfg.jitter_alert_s:
        alerts.add(METRIC_JITTER)
    return frozenset(alerts)


def slo_track(status: SloStatus, breaches: FrozenSet[str]) -> SloStatus:
    """Advance consecutive-breach state for one evaluated window.

    Only p90 and jitter breaches count toward escalation; a clean window
    resets the streak. Escalation fires on the 3rd consecutive breaching
    window ("more than two" read strictly).
    """
    if breaches & ESCALATION_METRICS:
        consecutive = status.consecutive_breaches + 1
    else:
        consecutive = 0
    return SloStatus(
        consecutive_breaches=consecutive,
        breached_metrics=frozenset(breaches),
        escalated=consecutive >= ESCALATION_WINDOWS,
    )

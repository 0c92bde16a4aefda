"""Telemetry parsing, window statistics (vs brute-force oracles), SLO tracking."""

import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from latgov.telemetry import (
    EMPTY_STATS,
    LatencyWindow,
    SloConfig,
    SloStatus,
    TelemetryError,
    TelemetryParseError,
    TelemetrySchemaError,
    WindowStats,
    confirmation_latency,
    event_to_json,
    iter_events,
    nearest_rank,
    parse_event,
    slo_alerts,
    slo_evaluate,
    slo_track,
)

GOOD_LINE = json.dumps(
    {
        "session_id": "s1",
        "intent_ts": 1000,
        "confirm_ts": 2400,
        "media_rtt_ms": 80,
        "media_jitter_ms": 12,
        "ux_mode": "instant",
        "engaged_60s": True,
    }
)


def oracle_stats(values):
    """Textbook two-pass mean/std plus exact-rational nearest-rank quantiles."""
    n = len(values)
    mean = sum(values) / n
    std = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1)) if n > 1 else 0.0
    ordered = sorted(values)

    def rank_quantile(q_num, q_den):
        rank = -((-q_num * n) // q_den)  # ceil of the exact rational q * n
        return ordered[rank - 1]

    return mean, std, rank_quantile(1, 2), rank_quantile(9, 10), rank_quantile(99, 100)


class TestParsing:
    def test_good_line(self):
        event = parse_event(GOOD_LINE)
        assert event.session_id == "s1"
        assert confirmation_latency(event) == pytest.approx(1.4, abs=1e-12)
        assert event.ux_mode == "instant"
        assert event.engaged_60s is True
        assert event.region is None

    def test_zero_latency_boundary(self):
        doc = json.loads(GOOD_LINE)
        doc["confirm_ts"] = doc["intent_ts"]
        event = parse_event(json.dumps(doc))
        assert confirmation_latency(event) == 0.0

    def test_confirm_before_intent(self):
        doc = json.loads(GOOD_LINE)
        doc["confirm_ts"] = 900
        with pytest.raises(TelemetrySchemaError, match="confirm before intent"):
            parse_event(json.dumps(doc))

    def test_malformed_json_carries_line(self):
        with pytest.raises(TelemetryParseError, match="line 7"):
            parse_event("{not json", lineno=7)

    @pytest.mark.parametrize("field", ["session_id", "intent_ts", "confirm_ts", "ux_mode", "engaged_60s"])
    def test_missing_field_named(self, field):
        doc = json.loads(GOOD_LINE)
        del doc[field]
        with pytest.raises(TelemetrySchemaError, match=field):
            parse_event(json.dumps(doc))

    def test_unknown_fields_ignored(self):
        doc = json.loads(GOOD_LINE)
        doc["rail"] = "lightning"
        doc["retry_count"] = 3
        assert parse_event(json.dumps(doc)).session_id == "s1"

    @pytest.mark.parametrize(
        "field,value",
        [
            ("intent_ts", 1000.5),
            ("intent_ts", True),
            ("engaged_60s", "yes"),
            ("ux_mode", "urgent"),
            ("media_rtt_ms", -1),
            ("media_jitter_ms", "low"),
            ("session_id", 42),
            ("region", 7),
        ],
    )
    def test_bad_types_rejected(self, field, value):
        doc = json.loads(GOOD_LINE)
        doc[field] = value
        with pytest.raises(TelemetrySchemaError):
            parse_event(json.dumps(doc))

    def test_round_trip_lossless(self):
        event = parse_event(GOOD_LINE)
        assert parse_event(event_to_json(event)) == event
        doc = json.loads(GOOD_LINE)
        doc["region"] = "eu-west"
        doc["device"] = "android"
        event2 = parse_event(json.dumps(doc))
        assert parse_event(event_to_json(event2)) == event2
        assert event2.region == "eu-west"

    def test_iter_events_counts_lines(self):
        lines = [GOOD_LINE, "", "  ", GOOD_LINE, "oops"]
        with pytest.raises(TelemetryError, match="line 5"):
            list(iter_events(lines))
        assert len(list(iter_events(lines, skip_bad=True))) == 2

    def test_eight_second_tail(self):
        doc = json.loads(GOOD_LINE)
        doc["intent_ts"] = 0
        doc["confirm_ts"] = 8000
        assert confirmation_latency(parse_event(json.dumps(doc))) == 8.0


class TestLatencyWindow:
    def test_single_push(self):
        stats = LatencyWindow(capacity=10).push(1.0).stats()
        assert (stats.count, stats.mean_s, stats.std_s) == (1, 1.0, 0.0)

    def test_fills_to_capacity(self):
        window = LatencyWindow(capacity=10)
        for value in range(1, 11):
            window.push(float(value))
        assert window.stats().count == 10

    def test_eviction_matches_list_oracle(self):
        rng = np.random.default_rng(11)
        window = LatencyWindow(capacity=10)
        pushed = []
        for value in rng.uniform(0.0, 5.0, size=200):
            window.push(float(value))
            pushed.append(float(value))
            assert window.values() == tuple(pushed[-10:])

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            LatencyWindow().push(-0.5)
        with pytest.raises(ValueError):
            LatencyWindow().push(float("nan"))

    def test_rejects_bad_capacity(self):
        with pytest.raises(ValueError):
            LatencyWindow(capacity=0)

    def test_empty_stats(self):
        assert LatencyWindow().stats() == EMPTY_STATS

    def test_one_to_ten_quantiles(self):
        window = LatencyWindow(capacity=16)
        for value in range(1, 11):
            window.push(float(value))
        stats = window.stats()
        assert (stats.p50_s, stats.p90_s, stats.p99_s) == (5.0, 9.0, 10.0)

    def test_constant_values(self):
        stats = LatencyWindow().push(2.0).push(2.0).stats()
        assert stats.mean_s == 2.0
        assert stats.std_s == 0.0

    @pytest.mark.parametrize("x", [0.1, 0.5, 1.7])
    def test_two_point_std(self, x):
        stats = LatencyWindow().push(2.0 - x).push(2.0 + x).stats()
        assert stats.mean_s == pytest.approx(2.0, abs=1e-12)
        assert stats.std_s == pytest.approx(x * math.sqrt(2.0), abs=1e-12)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(23)
        for _ in range(300):
            size = int(rng.integers(1, 40))
            capacity = int(rng.integers(1, 40))
            values = rng.uniform(0.0, 30.0, size=size)
            window = LatencyWindow(capacity=capacity)
            for value in values:
                window.push(float(value))
            retained = [float(v) for v in values[-capacity:]]
            mean, std, p50, p90, p99 = oracle_stats(retained)
            stats = window.stats()
            assert stats.count == len(retained)
            assert math.isclose(stats.mean_s, mean, rel_tol=1e-12, abs_tol=1e-12)
            assert math.isclose(stats.std_s, std, rel_tol=1e-12, abs_tol=1e-12)
            assert stats.p50_s == p50
            assert stats.p90_s == p90
            assert stats.p99_s == p99

    @given(st.lists(st.floats(min_value=0.0, max_value=100.0), min_size=1, max_size=50))
    def test_quantile_ordering(self, values):
        window = LatencyWindow(capacity=64)
        for value in values:
            window.push(value)
        stats = window.stats()
        assert stats.p50_s <= stats.p90_s <= stats.p99_s


class TestNearestRank:
    def test_exact_integer_ranks(self):
        values = list(range(1, 11))
        assert nearest_rank(values, 0.5) == 5.0
        assert nearest_rank(values, 0.9) == 9.0
        assert nearest_rank(values, 0.99) == 10.0
        assert nearest_rank(values, 1.0) == 10.0

    def test_matches_fraction_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            n = int(rng.integers(1, 400))
            values = sorted(rng.uniform(0, 10, size=n).tolist())
            for q_num, q_den in ((1, 2), (9, 10), (99, 100), (3, 4)):
                rank = math.ceil(Fraction(q_num, q_den) * n)
                assert nearest_rank(values, q_num / q_den) == values[rank - 1]

    def test_single_element(self):
        assert nearest_rank([3.3], 0.5) == 3.3

    def test_rejects_empty_and_bad_q(self):
        with pytest.raises(ValueError):
            nearest_rank([], 0.5)
        with pytest.raises(ValueError):
            nearest_rank([1.0], 0.0)
        with pytest.raises(ValueError):
            nearest_rank([1.0], 1.5)


def make_stats(p50=0.5, p90=1.0, p99=2.0, std=0.2):
    return WindowStats(count=100, mean_s=p50, std_s=std, p50_s=p50, p90_s=p90, p99_s=p99)


class TestSloEvaluate:
    def test_compliant(self):
        stats = make_stats(p50=0.9, p90=1.8, p99=3.5, std=0.5)
        assert slo_evaluate(stats, SloConfig()) == frozenset()

    def test_p90_breach(self):
        stats = make_stats(p50=0.9, p90=2.2, p99=3.5, std=0.5)
        assert slo_evaluate(stats, SloConfig()) == frozenset({"p90"})

    def test_boundary_is_breach(self):
        stats = make_stats(p50=0.9, p90=2.0, p99=3.5, std=0.5)
        assert slo_evaluate(stats, SloConfig()) == frozenset({"p90"})

    def test_all_zero_stats_compliant(self):
        assert slo_evaluate(EMPTY_STATS, SloConfig()) == frozenset()

    def test_multiple_breaches(self):
        stats = make_stats(p50=1.2, p90=2.6, p99=4.4, std=0.9)
        assert slo_evaluate(stats, SloConfig()) == frozenset(
            {"p50", "p90", "p99", "jitter_std"}
        )

    def test_alerts_are_strict(self):
        cfg = SloConfig()
        assert slo_alerts(make_stats(p90=2.6, p99=3.0), cfg) == frozenset({"p90"})
        assert slo_alerts(make_stats(p90=2.5, p99=3.0), cfg) == frozenset()
        assert slo_alerts(make_stats(p99=5.2, std=1.2), cfg) == frozenset(
            {"p99", "jitter_std"}
        )


class TestSloTrack:
    BREACH = frozenset({"p90"})
    CLEAN = frozenset()

    def test_two_breaches_do_not_escalate(self):
        status = SloStatus()
        for _ in range(2):
            status = slo_track(status, self.BREACH)
        assert status.consecutive_breaches == 2
        assert not status.escalated

    def test_third_breach_escalates(self):
        status = SloStatus()
        for _ in range(3):
            status = slo_track(status, self.BREACH)
        assert status.escalated
        assert status.consecutive_breaches == 3

    def test_stays_escalated_while_breaching(self):
        status = SloStatus()
        for _ in range(4):
            status = slo_track(status, self.BREACH)
        assert status.escalated

    def test_clean_window_resets(self):
        status = SloStatus()
        status = slo_track(status, self.BREACH)
        status = slo_track(status, self.CLEAN)
        status = slo_track(status, self.BREACH)
        assert status.consecutive_breaches == 1
        assert not status.escalated

    def test_reset_clears_escalation(self):
        status = SloStatus()
        for _ in range(3):
            status = slo_track(status, self.BREACH)
        status = slo_track(status, self.CLEAN)
        assert not status.escalated
        assert status.consecutive_breaches == 0

    def test_only_p90_and_jitter_escalate(self):
        status = SloStatus()
        for _ in range(5):
            status = slo_track(status, frozenset({"p50", "p99"}))
        assert status.consecutive_breaches == 0
        assert not status.escalated
        assert status.breached_metrics == frozenset({"p50", "p99"})

    def test_jitter_counts(self):
        status = SloStatus()
        for _ in range(3):
            status = slo_track(status, frozenset({"jitter_std"}))
        assert status.escalated


class TestConfigValidation:
    def test_target_must_be_below_alert(self):
        with pytest.raises(ValueError):
            SloConfig(p90_max_s=2.5, p90_alert_s=2.5)
        with pytest.raises(ValueError):
            SloConfig(jitter_std_max_s=1.5)

    def test_positive_required(self):
        with pytest.raises(ValueError):
            SloConfig(p50_max_s=0.0)

    def test_window_stats_ordering_enforced(self):
        with pytest.raises(ValueError):
            WindowStats(count=3, mean_s=1.0, std_s=0.1, p50_s=2.0, p90_s=1.0, p99_s=3.0)
        with pytest.raises(ValueError):
            WindowStats(count=3, mean_s=1.0, std_s=-0.1, p50_s=1.0, p90_s=1.0, p99_s=1.0)

"""Backend selection plus two equivalence suites: compiled-vs-interpreted
bit equality, and the fused scan against the per-session reference path."""

import numpy as np
import pytest

from latgov import backends
from latgov.governor import GovernorState
from latgov.simulator import (
    Mitigation,
    PolicySpec,
    RailDistribution,
    SimConfig,
    draw_variates,
    simulate_paths,
    simulate_session,
)
from latgov.telemetry import LatencyWindow


class TestResolve:
    def test_numpy_backend(self):
        name, scan = backends.resolve("numpy")
        assert name == "numpy"
        assert scan is backends.kernel.session_scan

    @pytest.mark.skipif(not backends.numba_available(), reason="numba not installed")
    def test_numba_backend(self):
        name, scan = backends.resolve("numba")
        assert name == "numba"
        assert scan is not backends.kernel.session_scan

    def test_env_var_selection(self, monkeypatch):
        monkeypatch.setenv(backends.BACKEND_ENV_VAR, "numpy")
        assert backends.resolve()[0] == "numpy"
        monkeypatch.setenv(backends.BACKEND_ENV_VAR, "auto")
        assert backends.resolve()[0] in ("numba", "numpy")

    def test_explicit_overrides_env(self, monkeypatch):
        monkeypatch.setenv(backends.BACKEND_ENV_VAR, "numpy")
        if backends.numba_available():
            assert backends.resolve("numba")[0] == "numba"

    def test_unknown_backend_rejected(self):
        with pytest.raises(backends.BackendError):
            backends.resolve("fortran")


@pytest.mark.skipif(not backends.numba_available(), reason="numba not installed")
class TestBackendEquivalence:
    @pytest.mark.parametrize("kind", ["none", "static_messaging", "letw"])
    def test_bit_identical_outputs(self, kind):
        cfg = SimConfig(
            sessions=4000,
            seed=77,
            rail=RailDistribution.from_median(1.8, 0.6),
            policy=PolicySpec(kind=kind),
            window_capacity=32,  # small window to exercise eviction
        )
        compiled = simulate_paths(cfg, backend="numba")
        interpreted = simulate_paths(cfg, backend="numpy")
        for name in ("latency_s", "perceived_s", "trust", "mode", "abandoned", "converted", "repeated"):
            assert np.array_equal(getattr(compiled, name), getattr(interpreted, name)), name
        assert compiled.governor_transitions == interpreted.governor_transitions


class _LaneRng:
    """Feeds one session's pre-drawn variates in the documented order."""

    def __init__(self, patience, u_convert, u_repeat):
        self._queue = [patience, u_convert, u_repeat]

    def standard_exponential(self):
        return self._queue.pop(0)

    def random(self):
        return self._queue.pop(0)


@pytest.mark.parametrize("kind", ["none", "static_messaging", "letw"])
def test_scan_matches_session_reference(kind):
    """The fused scan must agree with the documented one-session semantics:
    window stats over prior sessions, then mode, then the outcome draws."""
    cfg = SimConfig(
        sessions=600,
        seed=202,
        rail=RailDistribution.from_median(1.9, 0.7),
        policy=PolicySpec(kind=kind),
        mitigation=Mitigation(rho_soft=0.6, rho_deferred=0.3),
        window_capacity=16,
    )
    trace = simulate_paths(cfg, backend="numpy")

    rng = np.random.default_rng(cfg.seed)
    latency_z, patience, u_convert, u_repeat = draw_variates(rng, cfg.sessions)
    latencies = np.exp(cfg.rail.mu_log + cfg.rail.sigma_log * latency_z) + cfg.rail.shift_s
    assert np.array_equal(latencies, trace.latency_s)

    window = LatencyWindow(capacity=cfg.window_capacity)
    gov = GovernorState()
    for i in range(cfg.sessions):
        lane = _LaneRng(float(patience[i]), float(u_convert[i]), float(u_repeat[i]))
        outcome, gov = simulate_session(lane, float(latencies[i]), window.stats(), gov, cfg)
        assert outcome.mode.index == trace.mode[i], i
        assert outcome.abandoned == trace.abandoned[i], i
        assert outcome.converted == trace.converted[i], i
        assert outcome.repeated == trace.repeated[i], i
        assert outcome.perceived_s == pytest.approx(trace.perceived_s[i], rel=1e-9, abs=1e-12)
        assert outcome.trust == pytest.approx(trace.trust[i], rel=1e-9, abs=1e-12)
        window.push(float(latencies[i]))
    if kind == "letw":
        assert gov.transitions == trace.governor_transitions

"""Seeded Monte-Carlo session simulator.

Confirmation latencies are drawn from a (optionally shifted) log-normal
rail; each session then races an exponential patience clock against its
latency, converts with the jitter-penalized logistic probability, and may
produce a repeat engagement. The per-session loop lives in
:mod:`latgov.kernel`; this module owns configuration, variate layout,
aggregation and the experiment drivers (burst and policy comparison).

Determinism: a run is a pure function of ``(config, seed)``. All random
variates are drawn up front from one seeded generator in four fixed lanes
(latency normals, patience exponentials, conversion uniforms, repeat
uniforms); session ``i`` always consumes slot ``i`` of each lane, so two
policies compared under the same seed see identical per-session draws.

Outcome composition (documented in output metadata): a session first
survives or loses the patience race, then converts via a Bernoulli draw,
and only converted sessions can repeat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from statistics import NormalDist
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import backends
from .governor import MODE_ORDER, GovernorState, Mode, decide_simple, step
from .kernel import POLICY_LETW, POLICY_NONE, POLICY_STATIC
from .model import (
    ContextProfile,
    ModelParams,
    abandonment_hazard,
    context_conversion,
    perceived_latency,
    trust_score,
)
from .telemetry import WindowStats, nearest_rank

OUTCOME_MODEL = "survive-then-convert"

POLICY_KINDS = ("none", "static_messaging", "letw")
_POLICY_CODES = {
    "none": POLICY_NONE,
    "static_messaging": POLICY_STATIC,
    "letw": POLICY_LETW,
}

_STD_NORMAL = NormalDist()


def _from_doc(cls, doc: dict, what: str):
    """Build a dataclass from a plain dict, rejecting unknown keys."""
    if not isinstance(doc, dict):
        raise ValueError(f"{what} must be a JSON object, got {type(doc).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ValueError(f"unknown {what} field(s): {', '.join(unknown)}")
    return cls(**doc)


@dataclass(frozen=True)
class RailDistribution:
    """Log-normal confirmation-time model, optionally shifted by congestion."""

    mu_log: float = math.log(1.4)   # log of the median latency
    sigma_log: float = 0.5207      # log-space std, fit to the p99 tail anchor
    shift_s: float = 0.0           # additive congestion shift, seconds

    def __post_init__(self) -> None:
        if self.sigma_log < 0.0:
            raise ValueError(f"sigma_log must be >= 0, got {self.sigma_log}")
        if self.shift_s < 0.0:
            raise ValueError(f"shift_s must be >= 0, got {self.shift_s}")

    @classmethod
    def from_median(cls, median_s: float, sigma_log: float, shift_s: float = 0.0):
        if not median_s > 0.0:
            raise ValueError(f"median must be > 0, got {median_s}")
        return cls(mu_log=math.log(median_s), sigma_log=sigma_log, shift_s=shift_s)

    def quantile(self, q: float) -> float:
        """Analytic quantile of the latency distribution."""
        if not (0.0 < q < 1.0):
            raise ValueError(f"q must be inside (0, 1), got {q}")
        return math.exp(self.mu_log + self.sigma_log * _STD_NORMAL.inv_cdf(q)) + self.shift_s


@dataclass(frozen=True)
class PolicySpec:
    """Governance policy under simulation."""

    kind: str = "letw"
    static_threshold_s: float = 2.0  # spinner threshold for static_messaging

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"policy kind must be one of {POLICY_KINDS}, got {self.kind!r}")
        if not self.static_threshold_s > 0.0:
            raise ValueError(f"static_threshold_s must be > 0, got {self.static_threshold_s}")


@dataclass(frozen=True)
class Mitigation:
    """Hazard multipliers applied while soft / deferred feedback is shown."""

    rho_soft: float = 0.6
    rho_deferred: float = 0.3

    def __post_init__(self) -> None:
        if not (0.0 < self.rho_deferred <= self.rho_soft <= 1.0):
            raise ValueError(
                "mitigation must satisfy 0 < rho_deferred <= rho_soft <= 1, got "
                f"rho_soft={self.rho_soft}, rho_deferred={self.rho_deferred}"
            )


@dataclass(frozen=True)
class SimConfig:
    """One simulation scenario; JSON documents use these exact field names."""

    sessions: int
    seed: int = 42
    rail: RailDistribution = field(default_factory=RailDistribution)
    policy: PolicySpec = field(default_factory=PolicySpec)
    params: ModelParams = field(default_factory=ModelParams)
    ctx: ContextProfile = field(default_factory=ContextProfile)
    mitigation: Mitigation = field(default_factory=Mitigation)
    engagement_ceiling: float = 0.12
    window_capacity: int = 256

    def __post_init__(self) -> None:
        if self.sessions <= 0:
            raise ValueError("sessions must be positive")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        if not (0.0 < self.engagement_ceiling < 1.0):
            raise ValueError(
                f"engagement_ceiling must be inside (0, 1), got {self.engagement_ceiling}"
            )
        if self.window_capacity < 1:
            raise ValueError(f"window_capacity must be >= 1, got {self.window_capacity}")

    @classmethod
    def from_dict(cls, doc: dict) -> "SimConfig":
        doc = dict(doc)
        for key, sub_cls, what in (
            ("rail", RailDistribution, "rail"),
            ("policy", PolicySpec, "policy"),
            ("params", ModelParams, "params"),
            ("ctx", ContextProfile, "ctx"),
            ("mitigation", Mitigation, "mitigation"),
        ):
            if key in doc and isinstance(doc[key], dict):
                doc[key] = _from_doc(sub_cls, doc[key], what)
        return _from_doc(cls, doc, "simulation config")

    def to_dict(self) -> dict:
        return {
            "sessions": self.sessions,
            "seed": self.seed,
            "rail": {
                "mu_log": self.rail.mu_log,
                "sigma_log": self.rail.sigma_log,
                "shift_s": self.rail.shift_s,
            },
            "policy": {
                "kind": self.policy.kind,
                "static_threshold_s": self.policy.static_threshold_s,
            },
            "params": {
                "alpha": self.params.alpha,
                "beta": self.params.beta,
                "gamma": self.params.gamma,
                "k": self.params.k,
                "eta": self.params.eta,
                "lambda0": self.params.lambda0,
                "budget_b_l": self.params.budget_b_l,
                "budget_soft": self.params.budget_soft,
                "hysteresis_h": self.params.hysteresis_h,
                "theta1": self.params.theta1,
                "theta2": self.params.theta2,
                "lambda1": self.params.lambda1,
                "lambda2": self.params.lambda2,
            },
            "ctx": {"m_c": self.ctx.m_c},
            "mitigation": {
                "rho_soft": self.mitigation.rho_soft,
                "rho_deferred": self.mitigation.rho_deferred,
            },
            "engagement_ceiling": self.engagement_ceiling,
            "window_capacity": self.window_capacity,
        }


@dataclass(frozen=True)
class SimResult:
    """Aggregate outcomes of one run."""

    conversion_rate: float
    abandonment_rate: float
    repeat_rate: float
    mean_trust: float
    mode_shares: Dict[str, float]
    latency_p50: float
    latency_p90: float
    latency_p99: float

    def __post_init__(self) -> None:
        if self.conversion_rate + self.abandonment_rate > 1.0 + 1e-9:
            raise ValueError("conversion and abandonment cannot exceed 1 combined")
        share_sum = sum(self.mode_shares.values())
        if abs(share_sum - 1.0) > 1e-9:
            raise ValueError(f"mode shares must sum to 1, got {share_sum}")

    def to_dict(self) -> dict:
        return {
            "conversion_rate": self.conversion_rate,
            "abandonment_rate": self.abandonment_rate,
            "repeat_rate": self.repeat_rate,
            "mean_trust": self.mean_trust,
            "mode_shares": dict(self.mode_shares),
            "latency_p50": self.latency_p50,
            "latency_p90": self.latency_p90,
            "latency_p99": self.latency_p99,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SimResult":
        return _from_doc(cls, doc, "simulation result")


@dataclass
class SessionTrace:
    """Per-session arrays produced by one scan (for inspection and tests)."""

    latency_s: np.ndarray
    perceived_s: np.ndarray
    trust: np.ndarray
    mode: np.ndarray       # int8 indexes into governor.MODE_ORDER
    abandoned: np.ndarray
    converted: np.ndarray
    repeated: np.ndarray
    governor_transitions: int

    def __len__(self) -> int:
        return int(self.latency_s.shape[0])


@dataclass(frozen=True)
class SessionOutcome:
    """Result of one simulated session (reference path)."""

    latency_s: float
    perceived_s: float
    trust: float
    mode: Mode
    abandoned: bool
    converted: bool
    repeated: bool


def sample_latency(rng: np.random.Generator, rail: RailDistribution) -> float:
    """One confirmation-latency draw: exp(mu + sigma * z) + shift."""
    z = rng.standard_normal()
    return math.exp(rail.mu_log + rail.sigma_log * z) + rail.shift_s


def sample_latencies(
    rng: np.random.Generator, rail: RailDistribution, n: int
) -> np.ndarray:
    z = rng.standard_normal(n)
    return np.exp(rail.mu_log + rail.sigma_log * z) + rail.shift_s


def draw_variates(
    rng: np.random.Generator, n: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """The four per-session variate lanes, in their fixed draw order."""
    latency_z = rng.standard_normal(n)
    patience = rng.standard_exponential(n)
    u_convert = rng.random(n)
    u_repeat = rng.random(n)
    return latency_z, patience, u_convert, u_repeat


def simulate_session(
    rng: np.random.Generator,
    latency: float,
    stats: WindowStats,
    gov: GovernorState,
    cfg: SimConfig,
) -> Tuple[SessionOutcome, GovernorState]:
    """Reference semantics for one kernel iteration.

    Draws exactly three variates in fixed order (patience exponential,
    conversion uniform, repeat uniform) regardless of the outcome, so a
    stream of sessions stays aligned with the vectorized scan.
    """
    patience = rng.standard_exponential()
    u_convert = rng.random()
    u_repeat = rng.random()

    lp = perceived_latency(stats.mean_s, stats.std_s, cfg.params.k)
    if cfg.policy.kind == "none":
        mode = Mode.INSTANT
        next_gov = gov
    elif cfg.policy.kind == "static_messaging":
        mode = Mode.SOFT if latency > cfg.policy.static_threshold_s else Mode.INSTANT
        next_gov = gov
    else:
        next_gov, decision = step(gov, lp, cfg.params)
        mode = decision.mode

    if mode is Mode.SOFT:
        rho = cfg.mitigation.rho_soft
    elif mode is Mode.DEFERRED:
        rho = cfg.mitigation.rho_deferred
    else:
        rho = 1.0
    rate = rho * abandonment_hazard(lp, cfg.params)
    abandoned = patience / rate < latency

    trust = trust_score(lp, cfg.params)
    converted = bool(
        not abandoned and u_convert < context_conversion(lp, cfg.ctx, cfg.params)
    )
    repeated = bool(converted and u_repeat < cfg.engagement_ceiling * trust)
    outcome = SessionOutcome(
        latency_s=latency,
        perceived_s=lp,
        trust=trust,
        mode=mode,
        abandoned=bool(abandoned),
        converted=converted,
        repeated=repeated,
    )
    return outcome, next_gov


def simulate_paths(cfg: SimConfig, backend: Optional[str] = None) -> SessionTrace:
    """Run the full scan and return per-session arrays."""
    n = cfg.sessions
    rng = np.random.default_rng(cfg.seed)
    latency_z, patience, u_convert, u_repeat = draw_variates(rng, n)
    latencies = np.exp(cfg.rail.mu_log + cfg.rail.sigma_log * latency_z) + cfg.rail.shift_s

    mode = np.zeros(n, dtype=np.int8)
    perceived = np.zeros(n)
    trust = np.zeros(n)
    abandoned = np.zeros(n, dtype=np.bool_)
    converted = np.zeros(n, dtype=np.bool_)
    repeated = np.zeros(n, dtype=np.bool_)

    _, scan = backends.resolve(backend)
    transitions = scan(
        latencies,
        patience,
        u_convert,
        u_repeat,
        _POLICY_CODES[cfg.policy.kind],
        cfg.policy.static_threshold_s,
        cfg.params.alpha,
        cfg.params.beta * cfg.ctx.m_c,
        cfg.params.gamma,
        cfg.params.k,
        cfg.params.lambda0,
        cfg.params.eta,
        cfg.params.budget_b_l,
        cfg.params.budget_soft,
        cfg.params.hysteresis_h,
        cfg.mitigation.rho_soft,
        cfg.mitigation.rho_deferred,
        cfg.engagement_ceiling,
        cfg.window_capacity,
        mode,
        perceived,
        trust,
        abandoned,
        converted,
        repeated,
    )
    return SessionTrace(
        latency_s=latencies,
        perceived_s=perceived,
        trust=trust,
        mode=mode,
        abandoned=abandoned,
        converted=converted,
        repeated=repeated,
        governor_transitions=int(transitions),
    )


def summarize_trace(trace: SessionTrace) -> SimResult:
    n = len(trace)
    counts = np.bincount(trace.mode, minlength=3)
    shares = {m.value: float(counts[i]) / n for i, m in enumerate(MODE_ORDER)}
    ordered = np.sort(trace.latency_s)
    return SimResult(
        conversion_rate=float(np.count_nonzero(trace.converted)) / n,
        abandonment_rate=float(np.count_nonzero(trace.abandoned)) / n,
        repeat_rate=float(np.count_nonzero(trace.repeated)) / n,
        mean_trust=float(np.mean(trace.trust)),
        mode_shares=shares,
        latency_p50=nearest_rank(ordered, 0.50),
        latency_p90=nearest_rank(ordered, 0.90),
        latency_p99=nearest_rank(ordered, 0.99),
    )


def run_simulation(cfg: SimConfig, backend: Optional[str] = None) -> SimResult:
    """Simulate ``cfg.sessions`` sessions; deterministic per (config, seed)."""
    return summarize_trace(simulate_paths(cfg, backend))


def run_burst(
    base: SimConfig, burst_rail: RailDistribution, backend: Optional[str] = None
) -> Tuple[SimResult, SimResult]:
    """Run the congested regime ungoverned and governed under the same seed."""
    burst = replace(base, rail=burst_rail)
    ungoverned = run_simulation(replace(burst, policy=replace(burst.policy, kind="none")), backend)
    governed = run_simulation(replace(burst, policy=replace(burst.policy, kind="letw")), backend)
    return ungoverned, governed


def compare_policies(
    cfg: SimConfig, backend: Optional[str] = None
) -> Dict[str, SimResult]:
    """Run all three policies under the same seed; keyed by policy kind."""
    return {
        kind: run_simulation(replace(cfg, policy=replace(cfg.policy, kind=kind)), backend)
        for kind in POLICY_KINDS
    }


@dataclass(frozen=True)
class QuantileModeRow:
    """One row of the quantile -> mode -> expected-conversion report."""

    statistic: str
    latency_s: float
    mode: Mode
    conversion: float


def quantile_mode_rows(
    quantiles: Dict[str, float],
    params: ModelParams,
    ctx: Optional[ContextProfile] = None,
) -> List[QuantileModeRow]:
    """Map given latency quantiles through the budget rule and the
    conversion curve (model-implied, not observed, conversion)."""
    ctx = ctx or ContextProfile()
    rows = []
    for name, latency in quantiles.items():
        rows.append(
            QuantileModeRow(
                statistic=name,
                latency_s=latency,
                mode=decide_simple(latency, 0.0, params),
                conversion=context_conversion(latency, ctx, params),
            )
        )
    return rows


def quantile_mode_report(cfg: SimConfig) -> List[QuantileModeRow]:
    """Analytic rail quantiles mapped to modes and expected conversion."""
    quantiles = {
        "p50": cfg.rail.quantile(0.50),
        "p90": cfg.rail.quantile(0.90),
        "p99": cfg.rail.quantile(0.99),
    }
    return quantile_mode_rows(quantiles, cfg.params, cfg.ctx)

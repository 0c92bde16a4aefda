"""UX mode governance: hysteresis state machine, trust-threshold selection,
the stateless budget rule, SLO escalation, and the sequential rollout guard.

One :class:`GovernorState` per session; steps for a session are strictly
ordered, different sessions are independent. States are immutable values,
so they can be handed between threads freely.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Tuple

from .model import ModelParams, trust_score
from .telemetry import SloStatus

DEFAULT_MAX_CONV_DROP = 0.02


class Mode(enum.Enum):
    """Confirmation UX modes, ordered from least to most protective."""

    INSTANT = "instant"
    SOFT = "soft"
    DEFERRED = "deferred"

    @property
    def index(self) -> int:
        return MODE_ORDER.index(self)


MODE_ORDER = (Mode.INSTANT, Mode.SOFT, Mode.DEFERRED)


class Reason(enum.Enum):
    """Why a decision landed in its mode."""

    WITHIN_BUDGET = "within_budget"
    BUDGET_EXCEEDED = "budget_exceeded"
    SOFT_LIMIT_EXCEEDED = "soft_limit_exceeded"
    HYSTERESIS_HOLD = "hysteresis_hold"
    SLO_ESCALATION = "slo_escalation"


@dataclass(frozen=True)
class GovernorState:
    """Current mode plus bookkeeping; fresh governors start optimistic."""

    mode: Mode = Mode.INSTANT
    last_perceived_latency: float = 0.0
    transitions: int = 0

    def __post_init__(self) -> None:
        if self.transitions < 0:
            raise ValueError("transitions must be >= 0")


@dataclass(frozen=True)
class Decision:
    """One governance outcome: mode, trust, input latency, and the reason."""

    mode: Mode
    trust: float
    perceived_latency: float
    reason: Reason


@dataclass(frozen=True)
class RolloutState:
    """Continue/pause verdict of the sequential rollout guard."""

    stage: str                        # "continue" | "pause"
    forced_mode: Optional[Mode] = None

    def __post_init__(self) -> None:
        if self.stage not in ("continue", "pause"):
            raise ValueError(f"stage must be 'continue' or 'pause', got {self.stage!r}")
        if self.stage == "pause" and self.forced_mode is not Mode.SOFT:
            raise ValueError("a paused rollout must force soft confirmation")


def select_mode_by_trust(trust: float, params: ModelParams) -> Mode:
    """Threshold selection on the trust score; boundaries are inclusive upward."""
    if not (0.0 <= trust <= 1.0):
        raise ValueError(f"trust must be inside [0, 1], got {trust}")
    if trust >= params.theta1:
        return Mode.INSTANT
    if trust >= params.theta2:
        return Mode.SOFT
    return Mode.DEFERRED


def _stateless_mode(perceived: float, params: ModelParams) -> Mode:
    if perceived <= params.budget_b_l:
        return Mode.INSTANT
    if perceived <= params.budget_soft:
        return Mode.SOFT
    return Mode.DEFERRED


def decide_simple(
    mean_latency: float, std_latency: float, params: ModelParams
) -> Mode:
    """Stateless budget rule on perceived latency mean + k * std."""
    if mean_latency < 0.0 or std_latency < 0.0:
        raise ValueError("latency statistics must be non-negative")
    return _stateless_mode(mean_latency + params.k * std_latency, params)


def step(
    state: GovernorState, perceived_latency: float, params: ModelParams
) -> Tuple[GovernorState, Decision]:
    """Advance the hysteresis state machine by one observation.

    Transition rules (strict inequalities, at most one hop per step):
    Instant->Soft when L_p > budget; Soft->Deferred when L_p > soft limit;
    Soft->Instant when L_p < budget - h; Deferred->Soft when
    L_p < soft limit - h.
    """
    lp = float(perceived_latency)
    if math.isnan(lp) or lp < 0.0:
        raise ValueError(f"perceived latency must be non-negative, got {lp}")

    mode = state.mode
    if mode is Mode.INSTANT:
        new_mode = Mode.SOFT if lp > params.budget_b_l else Mode.INSTANT
    elif mode is Mode.SOFT:
        if lp > params.budget_soft:
            new_mode = Mode.DEFERRED
        elif lp < params.budget_b_l - params.hysteresis_h:
            new_mode = Mode.INSTANT
        else:
            new_mode = Mode.SOFT
    else:
        new_mode = Mode.SOFT if lp < params.budget_soft - params.hysteresis_h else Mode.DEFERRED

    if new_mode is Mode.INSTANT:
        reason = Reason.WITHIN_BUDGET
    elif new_mode is Mode.SOFT:
        reason = Reason.BUDGET_EXCEEDED if lp > params.budget_b_l else Reason.HYSTERESIS_HOLD
    else:
        reason = Reason.SOFT_LIMIT_EXCEEDED if lp > params.budget_soft else Reason.HYSTERESIS_HOLD

    next_state = GovernorState(
        mode=new_mode,
        last_perceived_latency=lp,
        transitions=state.transitions + (1 if new_mode is not mode else 0),
    )
    decision = Decision(
        mode=new_mode,
        trust=trust_score(lp, params),
        perceived_latency=lp,
        reason=reason,
    )
    return next_state, decision


def apply_slo_escalation(state: GovernorState, slo: SloStatus) -> GovernorState:
    """Force Instant down to Soft on sustained SLO breach; never relaxes."""
    if slo.escalated and state.mode is Mode.INSTANT:
        return GovernorState(
            mode=Mode.SOFT,
            last_perceived_latency=state.last_perceived_latency,
            transitions=state.transitions + 1,
        )
    return state


def rollout_guard(
    trust: float,
    conv_drop: float,
    theta: float,
    max_drop: float = DEFAULT_MAX_CONV_DROP,
) -> RolloutState:
    """Sequential ramp gate: pause (forcing soft confirmation) when trust
    falls below theta or conversion declines more than max_drop.

    ``conv_drop`` is baseline conversion minus current conversion, in
    absolute probability units; positive means decline.
    """
    for name, value in (("trust", trust), ("conv_drop", conv_drop),
                        ("theta", theta), ("max_drop", max_drop)):
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value!r}")
    if trust < theta or conv_drop > max_drop:
        return RolloutState(stage="pause", forced_mode=Mode.SOFT)
    return RolloutState(stage="continue")

"""Hot per-session simulation loop.

``session_scan`` advances the shared latency window, the mode state
machine and the behavioral outcome draws for every session in one pass.
It is deliberately written in scalar no-Python style with all helpers
inlined, so the exact same source runs either interpreted over numpy
arrays (the fallback backend) or compiled with ``numba.njit`` (the
default); see :mod:`latgov.backends` for selection. Both paths execute
the identical arithmetic, so results agree bit for bit.

Window statistics are running sums over a ring buffer: O(1) per session.
All random variates are drawn ahead of time (one lane per kind, one slot
per session index), which keeps the scan deterministic and couples the
draws per session across policies compared under the same seed.

``simulate_session`` in :mod:`latgov.simulator` is the single-session
reference for the semantics of one loop iteration.
"""

from __future__ import annotations

import math

import numpy as np

POLICY_NONE = 0
POLICY_STATIC = 1
POLICY_LETW = 2

MODE_INSTANT = 0
MODE_SOFT = 1
MODE_DEFERRED = 2


def session_scan(
    latencies,
    patience_std,
    u_convert,
    u_repeat,
    policy_code,
    static_threshold_s,
    alpha,
    beta_eff,
    gamma,
    jitter_k,
    lambda0,
    eta,
    budget_s,
    soft_limit_s,
    hysteresis_s,
    rho_soft,
    rho_deferred,
    engagement_ceiling,
    window_capacity,
    mode_out,
    perceived_out,
    trust_out,
    abandoned_out,
    converted_out,
    repeated_out,
):
    """Run every session through window -> mode -> outcome; fill the out arrays.

    ``beta_eff`` is the latency sensitivity with the context multiplier
    already folded in. ``patience_std`` holds standard-exponential draws,
    ``u_convert`` / ``u_repeat`` uniforms on [0, 1). Returns the number of
    governor transitions (0 for non-adaptive policies).
    """
    buf = np.zeros(window_capacity)
    count = 0
    head = 0
    total = 0.0
    total_sq = 0.0
    gov_mode = MODE_INSTANT
    transitions = 0

    n = latencies.shape[0]
    for i in range(n):
        # Window stats over sessions seen so far (sample std, n-1).
        if count > 0:
            mean = total / count
        else:
            mean = 0.0
        if count > 1:
            var = (total_sq - total * total / count) / (count - 1)
            std = math.sqrt(var) if var > 0.0 else 0.0
        else:
            std = 0.0
        lp = mean + jitter_k * std

        latency = latencies[i]
        if policy_code == POLICY_NONE:
            mode = MODE_INSTANT
        elif policy_code == POLICY_STATIC:
            mode = MODE_SOFT if latency > static_threshold_s else MODE_INSTANT
        else:
            # Hysteresis state machine; at most one hop per step.
            if gov_mode == MODE_INSTANT:
                if lp > budget_s:
                    gov_mode = MODE_SOFT
                    transitions += 1
            elif gov_mode == MODE_SOFT:
                if lp > soft_limit_s:
                    gov_mode = MODE_DEFERRED
                    transitions += 1
                elif lp < budget_s - hysteresis_s:
                    gov_mode = MODE_INSTANT
                    transitions += 1
            else:
                if lp < soft_limit_s - hysteresis_s:
                    gov_mode = MODE_SOFT
                    transitions += 1
            mode = gov_mode

        # Trust: stable logistic of -eta * (lp - budget).
        x = -eta * (lp - budget_s)
        if x >= 0.0:
            trust = 1.0 / (1.0 + math.exp(-x))
        else:
            ez = math.exp(x)
            trust = ez / (1.0 + ez)

        # Patience race: exponential clock at the mode-mitigated hazard.
        if mode == MODE_SOFT:
            rho = rho_soft
        elif mode == MODE_DEFERRED:
            rho = rho_deferred
        else:
            rho = 1.0
        rate = rho * lambda0 * math.exp(gamma * lp)
        abandoned = patience_std[i] / rate < latency

        converted = False
        repeated = False
        if not abandoned:
            s = alpha - beta_eff * lp
            if s >= 0.0:
                p_conv = 1.0 / (1.0 + math.exp(-s))
            else:
                ez = math.exp(s)
                p_conv = ez / (1.0 + ez)
            converted = u_convert[i] < p_conv
            if converted:
                repeated = u_repeat[i] < engagement_ceiling * trust

        mode_out[i] = mode
        perceived_out[i] = lp
        trust_out[i] = trust
        abandoned_out[i] = abandoned
        converted_out[i] = converted
        repeated_out[i] = repeated

        # Admit this session's latency into the shared window.
        if count == window_capacity:
            old = buf[head]
            total -= old
            total_sq -= old * old
        else:
            count += 1
        buf[head] = latency
        total += latency
        total_sq += latency * latency
        head += 1
        if head == window_capacity:
            head = 0

    return transitions

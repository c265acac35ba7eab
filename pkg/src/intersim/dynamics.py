"""Vehicle state evolution: lead-HDV signal response, IDM car following,
merging-zone rules, and the shared discrete-time integrator.

The scalar rules live in numba-compiled functions so that the per-vehicle
prediction integrator and the live simulation stepper share one bit-exact
implementation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from numba import njit

from intersim.core import IntersectionGeometry, KinematicState, VehicleParams


class Phase(Enum):
    RED = 0
    GREEN = 1


class InfeasibleBrake(Exception):
    """Stopping before the merge zone would need more braking than u_min.

    During schedule prediction this marks the candidate order infeasible
    (entry time becomes +inf); it is never expected in a committed schedule.
    """


@dataclass
class LeadContext:
    """Signal context for the foremost control-zone vehicle in a lane.

    ``brake_rate`` is latched at the instant the red is first perceived
    within the visibility distance and held until stop or perceived green.
    """

    phase: Phase
    distance_to_stop_line: float
    v_s: float = 0.0
    brake_rate: float | None = None


@dataclass
class FollowContext:
    """Gap and closing speed relative to the vehicle ahead in the same lane."""

    s: float
    delta_v: float
    leader_v: float


# --- numba scalar cores -----------------------------------------------------

@njit(cache=True, inline="always")
def _idm_u(v, v_max, s, dv, s0, T, u_min, u_max, eps):
    sstar = s0 + T * v + v * dv / (2.0 * math.sqrt(u_max * abs(u_min)))
    u = u_max * (1.0 - (v / v_max) ** 4 - (sstar * sstar) / (s * s + eps * eps))
    if u < u_min:
        u = u_min
    elif u > u_max:
        u = u_max
    return u


@njit(cache=True, inline="always")
def _idm_free_u(v, v_max, u_min, u_max):
    u = u_max * (1.0 - (v / v_max) ** 4)
    if u < u_min:
        u = u_min
    elif u > u_max:
        u = u_max
    return u


@njit(cache=True, inline="always")
def _brake_rate(v_s, s):
    # uniform retardation stopping exactly at the stop line
    if s <= 0.0:
        return math.inf
    return v_s * v_s / (2.0 * s)


@njit(cache=True, inline="always")
def _step_pv(p, v, u, dt, v_min, v_max):
    v_new = v + u * dt
    if v_new < v_min:
        v_new = v_min
    elif v_new > v_max:
        v_new = v_max
    # second-order term uses (delta v)^2, not the trapezoidal u*dt^2/2; kept
    # deliberately to stay consistent with the rest of the discretization
    p_new = p + v * dt + 0.5 * (v_new - v) * (v_new - v) * dt
    return p_new, v_new


# --- python-facing operations ------------------------------------------------

def hdv_lead_accel(
    state: KinematicState,
    ctx: LeadContext,
    params: VehicleParams,
    geometry: IntersectionGeometry,
) -> float:
    """Acceleration of a human-driven lane leader in the control zone.

    Under green: constant ``a_h`` until the speed limit.  Under red: coast
    until within the visibility distance, then brake at the latched uniform
    rate ``v_s^2 / (2 s)``.  Raises :class:`InfeasibleBrake` when that rate
    exceeds ``|u_min|``.
    """
    if ctx.phase is Phase.GREEN:
        return params.a_h if state.v < params.v_max else 0.0
    if state.p <= geometry.L - geometry.l:
        return 0.0
    rate = ctx.brake_rate
    if rate is None:
        rate = _brake_rate(ctx.v_s, ctx.distance_to_stop_line)
        ctx.brake_rate = rate
    if rate > abs(params.u_min):
        raise InfeasibleBrake(
            f"need {rate:.2f} m/s^2 over {ctx.distance_to_stop_line:.1f} m, "
            f"limit is {abs(params.u_min):.2f}"
        )
    return -rate if state.v > 0 else 0.0


def idm_accel(own: KinematicState, ctx: FollowContext, params: VehicleParams) -> float:
    """Intelligent Driver Model acceleration, clamped to [u_min, u_max].

    The desired gap ``s* = s0 + T v + v dv / (2 sqrt(u_max |u_min|))`` may go
    negative at strong opening speeds; it is squared unmodified, which keeps
    the interaction term repulsive.
    """
    if ctx.s <= 0:
        raise ValueError("follower gap must be positive")
    return _idm_u(
        own.v, params.v_max, ctx.s, ctx.delta_v,
        params.s0, params.T, params.u_min, params.u_max, params.idm_eps,
    )


def merge_zone_accel(
    own: KinematicState,
    leader: KinematicState | None,
    params: VehicleParams,
) -> float:
    """Acceleration inside the merging zone (no signal applies there).

    Following another merge-zone vehicle: IDM.  Foremost in the lane's merge
    zone: accelerate at ``a_h`` up to the speed limit, then hold it.
    """
    if leader is not None:
        ctx = FollowContext(
            s=leader.p - own.p, delta_v=own.v - leader.v, leader_v=leader.v
        )
        return idm_accel(own, ctx, params)
    return params.a_h if own.v < params.v_max else 0.0


def step(
    state: KinematicState, u: float, dt: float, params: VehicleParams
) -> KinematicState:
    """One explicit integration step with the velocity clamp applied."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    p_new, v_new = _step_pv(state.p, state.v, u, dt, params.v_min, params.v_max)
    return KinematicState(t=state.t + dt, p=p_new, v=v_new, u=u)


__all__ = [
    "Phase",
    "InfeasibleBrake",
    "LeadContext",
    "FollowContext",
    "hdv_lead_accel",
    "idm_accel",
    "merge_zone_accel",
    "step",
    "_idm_u",
    "_idm_free_u",
    "_brake_rate",
    "_step_pv",
]

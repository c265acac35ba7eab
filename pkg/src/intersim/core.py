"""Domain types shared by every other module: vehicles, geometry, timing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum


#: Sentinel for "this vehicle can never enter under the evaluated order".
#: Compares greater than every finite time, so objective comparisons discard
#: infeasible orders automatically.
INFEASIBLE = math.inf


class VehicleClass(Enum):
    AV = "AV"
    HDV = "HDV"


@dataclass(frozen=True)
class VehicleId:
    """Identity of a vehicle: stable unique id plus (slot, lane) position.

    ``slot`` is the position-from-intersection index within the lane (1 is
    the lead vehicle); it is re-numbered down by one whenever the vehicle
    ahead enters the merging zone.  ``unique_id`` never changes.
    """

    unique_id: int
    lane: int
    slot: int

    def advanced(self) -> "VehicleId":
        """Id after the vehicle ahead left the control zone (slot - 1)."""
        if self.slot <= 1:
            raise ValueError("lead vehicle cannot advance further")
        return VehicleId(self.unique_id, self.lane, self.slot - 1)


@dataclass(frozen=True)
class IntersectionGeometry:
    """Zone lengths and the conflict relation between lanes.

    L: control-zone length (m); S: merging-zone length (m); l: distance from
    the stop line within which a red light is visible to a human driver (m).
    ``conflicts`` maps each lane to the set of lanes whose merging-zone paths
    cross it.
    """

    L: float
    S: float
    l: float
    conflicts: dict[int, frozenset[int]]

    def __post_init__(self):
        if not (0 < self.l <= self.L):
            raise ValueError(f"need 0 < l <= L, got l={self.l}, L={self.L}")
        if self.S <= 0:
            raise ValueError("merge-zone length S must be positive")
        for lane, others in self.conflicts.items():
            if lane in others:
                raise ValueError(f"lane {lane} conflicts with itself")
            for k in others:
                if lane not in self.conflicts.get(k, frozenset()):
                    raise ValueError(f"conflict map not symmetric: {lane} vs {k}")

    @property
    def lanes(self) -> list[int]:
        return sorted(self.conflicts)

    def conflicting(self, lane: int) -> frozenset[int]:
        return self.conflicts[lane]

    @staticmethod
    def four_way(L: float = 300.0, S: float = 100.0, l: float = 100.0) -> "IntersectionGeometry":
        """Standard 4-lane crossing: 1/3 run one axis, 2/4 the other."""
        conflicts = {
            1: frozenset({2, 4}),
            2: frozenset({1, 3}),
            3: frozenset({2, 4}),
            4: frozenset({1, 3}),
        }
        return IntersectionGeometry(L=L, S=S, l=l, conflicts=conflicts)

    @staticmethod
    def two_way(L: float = 300.0, S: float = 100.0, l: float = 100.0) -> "IntersectionGeometry":
        """Two crossing lanes, each conflicting with the other."""
        return IntersectionGeometry(
            L=L, S=S, l=l, conflicts={1: frozenset({2}), 2: frozenset({1})}
        )


@dataclass(frozen=True)
class VehicleParams:
    """Kinematic limits and driver-model parameters for one vehicle."""

    v_min: float = 0.0
    v_max: float = 20.0          # speed limit, the target entry speed
    u_min: float = -10.0
    u_max: float = 10.0
    a_h: float = 2.0             # lead-vehicle acceleration under green
    T: float = 2.5               # IDM safety time gap (1.5 s for AVs)
    s0: float = 2.0              # IDM standstill distance
    t_react: float = 1.0         # reaction delay after a red-to-green switch
    idm_eps: float = 1e-6        # keeps the IDM gap denominator nonzero

    def __post_init__(self):
        if self.v_min < 0 or self.v_max <= self.v_min:
            raise ValueError("need 0 <= v_min < v_max")
        if not (self.u_min < 0 < self.u_max):
            raise ValueError("need u_min < 0 < u_max")
        if self.T <= 0 or self.s0 <= 0:
            raise ValueError("IDM parameters T and s0 must be positive")

    @property
    def v_m(self) -> float:
        return self.v_max


@dataclass
class KinematicState:
    """Snapshot of one vehicle: time, position from control-zone entry,
    velocity, last applied acceleration."""

    t: float
    p: float
    v: float
    u: float = 0.0


@dataclass
class Vehicle:
    """A vehicle in the system with its identity, class and current state."""

    id: VehicleId
    vclass: VehicleClass
    t0: float                    # control-zone entry time
    params: VehicleParams
    state: KinematicState
    v_initial: float
    assigned_entry: float | None = None   # entry time communicated to an AV

    @property
    def is_av(self) -> bool:
        return self.vclass is VehicleClass.AV

    @property
    def lane(self) -> int:
        return self.id.lane


@dataclass(frozen=True)
class CrossingTimes:
    """No-traffic reference times and the (predicted or realized) entry/exit.

    ``t_m`` and ``t_f`` may be ``INFEASIBLE`` (treated as +inf).  Delay is
    ``t_f - t_prime`` and is nonnegative whenever the vehicle entered at the
    speed limit.
    """

    t_prime_m: float
    t_prime: float
    t_m: float = INFEASIBLE
    t_f: float = INFEASIBLE

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.t_m) and math.isfinite(self.t_f)

    @property
    def delay(self) -> float:
        return self.t_f - self.t_prime


def no_traffic_times(
    t0: float, geometry: IntersectionGeometry, v_m: float
) -> tuple[float, float]:
    """Times to reach and to clear the intersection cruising at ``v_m``.

    Returns ``(t0 + L / v_m, t0 + (L + S) / v_m)``: the earliest possible
    merge-zone entry and system exit for a vehicle entering at the speed
    limit with an empty road ahead.
    """
    if v_m <= 0:
        raise ValueError("v_m must be positive")
    return t0 + geometry.L / v_m, t0 + (geometry.L + geometry.S) / v_m


__all__ = [
    "INFEASIBLE",
    "VehicleClass",
    "VehicleId",
    "IntersectionGeometry",
    "VehicleParams",
    "KinematicState",
    "Vehicle",
    "CrossingTimes",
    "no_traffic_times",
    "replace",
    "field",
]

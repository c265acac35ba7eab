"""Mixed-autonomy intersection simulator and crossing-order scheduler.

A single four-way (or two-way) intersection is modelled as per-lane control
zones of length L feeding a shared merging zone of length S.  Autonomous
vehicles receive an entry time from the controller and track a minimum-energy
trajectory; human-driven vehicles respond to per-lane signals and follow the
Intelligent Driver Model.  The crossing order is re-optimized online each time
a vehicle arrives.
"""

from intersim.core import (
    INFEASIBLE,
    IntersectionGeometry,
    KinematicState,
    Vehicle,
    VehicleClass,
    VehicleId,
    VehicleParams,
    CrossingTimes,
    no_traffic_times,
)

__all__ = [
    "INFEASIBLE",
    "IntersectionGeometry",
    "KinematicState",
    "Vehicle",
    "VehicleClass",
    "VehicleId",
    "VehicleParams",
    "CrossingTimes",
    "no_traffic_times",
]

__version__ = "0.1.0"

"""Closed-form minimum-energy trajectory planning for lead AVs.

Given an assigned merge-zone entry time, the vehicle must cover the remaining
control-zone distance and arrive exactly then at the speed limit while
minimizing the integral of squared acceleration.  The optimal control is
piecewise linear in time; acceleration and velocity limits introduce
saturated arcs, a cruise arc at the speed limit, or a slow/stop-and-wait arc
at the minimum speed.  Each candidate structure is solved in closed form (or
with a small root find) and verified against the boundary conditions and
bounds before being accepted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import optimize

from intersim.core import IntersectionGeometry, KinematicState, VehicleParams

#: relative tolerance for boundary-condition verification
BOUNDARY_RTOL = 1e-6
#: absolute slack allowed when checking u/v bounds
BOUND_ATOL = 1e-9
#: tolerance on continuity at segment joins
JOIN_ATOL = 1e-9


class SolverError(Exception):
    """No candidate arc structure produced a verified trajectory."""


@dataclass(frozen=True)
class BvpSpec:
    """Boundary-value problem for one lead AV.

    The vehicle is at ``p_start`` with speed ``v_start`` at ``t_start`` and
    must be at ``p_start + distance`` with speed ``v_end`` at ``t_entry``.
    """

    t_start: float
    t_entry: float
    v_start: float
    v_end: float
    distance: float
    bounds: VehicleParams
    p_start: float = 0.0

    @property
    def horizon(self) -> float:
        return self.t_entry - self.t_start


@dataclass(frozen=True)
class TrajectorySegment:
    """One arc with linear acceleration: u(t) = a (t - t_ref) + b.

    Velocity and position follow by integration from (v_ref, p_ref) at
    t_ref.  Constant-acceleration, constant-velocity and stopped arcs are
    the a = 0 / a = b = 0 special cases.
    """

    kind: str
    t_from: float
    t_to: float
    t_ref: float
    a: float
    b: float
    v_ref: float
    p_ref: float

    def u_at(self, t: float) -> float:
        return self.a * (t - self.t_ref) + self.b

    def v_at(self, t: float) -> float:
        dt = t - self.t_ref
        return self.v_ref + self.b * dt + 0.5 * self.a * dt * dt

    def p_at(self, t: float) -> float:
        dt = t - self.t_ref
        return self.p_ref + self.v_ref * dt + 0.5 * self.b * dt * dt + self.a * dt**3 / 6.0

    def energy(self) -> float:
        d = self.t_to - self.t_from
        s = self.t_from - self.t_ref
        # integral of (a(s+x)+b)^2 dx over [0, d]
        b_eff = self.a * s + self.b
        return (self.a**2) * d**3 / 3.0 + self.a * b_eff * d**2 + b_eff**2 * d


@dataclass
class TrajectoryProfile:
    """Ordered arcs covering [t_start, t_entry] plus the total energy."""

    segments: list[TrajectorySegment]
    energy: float
    spec: BvpSpec | None = None

    @property
    def t_from(self) -> float:
        return self.segments[0].t_from

    @property
    def t_to(self) -> float:
        return self.segments[-1].t_to

    def _segment_at(self, t: float) -> TrajectorySegment:
        for seg in self.segments:
            if t < seg.t_to:
                return seg
        return self.segments[-1]

    def u_at(self, t: float) -> float:
        return self._segment_at(t).u_at(min(t, self.t_to))

    def v_at(self, t: float) -> float:
        return self._segment_at(t).v_at(min(t, self.t_to))

    def p_at(self, t: float) -> float:
        # beyond the final arc the vehicle holds its terminal speed
        if t > self.t_to:
            last = self.segments[-1]
            return last.p_at(self.t_to) + last.v_at(self.t_to) * (t - self.t_to)
        return self._segment_at(t).p_at(t)

    def rows(self, extend_to: float = math.inf) -> np.ndarray:
        """Segment table for the compiled integrators.

        Columns: t_from, t_to, t_ref, a, b, v_ref, p_ref.  A trailing
        constant-speed row extends the profile to ``extend_to`` so sampling
        past the entry time yields the merge-zone cruise.
        """
        rows = [
            (s.t_from, s.t_to, s.t_ref, s.a, s.b, s.v_ref, s.p_ref)
            for s in self.segments
        ]
        last = self.segments[-1]
        rows.append(
            (
                last.t_to,
                extend_to,
                last.t_to,
                0.0,
                0.0,
                last.v_at(last.t_to),
                last.p_at(last.t_to),
            )
        )
        return np.asarray(rows, dtype=np.float64)


@njit(cache=True)
def profile_state(rows: np.ndarray, t: float) -> tuple[float, float, float]:
    """Evaluate (p, v, u) of a segment table at time t."""
    n = rows.shape[0]
    i = n - 1
    for k in range(n):
        if t < rows[k, 1]:
            i = k
            break
    t_ref = rows[i, 2]
    a = rows[i, 3]
    b = rows[i, 4]
    v_ref = rows[i, 5]
    p_ref = rows[i, 6]
    dt = t - t_ref
    u = a * dt + b
    v = v_ref + b * dt + 0.5 * a * dt * dt
    p = p_ref + v_ref * dt + 0.5 * b * dt * dt + a * dt * dt * dt / 6.0
    return p, v, u


def earliest_entry(
    state: KinematicState, geometry: IntersectionGeometry, params: VehicleParams
) -> float:
    """Soonest physically possible merge-zone entry from the current state:
    full acceleration to the speed limit, then cruise to the stop line."""
    remaining = geometry.L - state.p
    return state.t + _min_duration(state.v, params.v_max, remaining, params.u_max)


def _min_duration(v0: float, v_m: float, dist: float, u_max: float) -> float:
    if dist <= 0:
        return 0.0
    t1 = (v_m - v0) / u_max
    d = v0 * t1 + 0.5 * u_max * t1 * t1
    if d >= dist:
        # reaches the stop line before hitting the speed limit
        return (-v0 + math.sqrt(v0 * v0 + 2.0 * u_max * dist)) / u_max
    return t1 + (dist - d) / v_m


# --- arc construction helpers -------------------------------------------------


def _clamped_linear_segments(
    a: float,
    b: float,
    tau_total: float,
    v0: float,
    u_min: float,
    u_max: float,
) -> list[tuple[float, float, float, float]]:
    """Arcs of u(tau) = clip(a tau + b) as (tau_from, tau_to, a_eff, b_eff).

    b_eff is the control value at the arc's own start.
    """
    pieces: list[tuple[float, float, float, float]] = []
    if abs(a) < 1e-300:
        u = min(max(b, u_min), u_max)
        return [(0.0, tau_total, 0.0, u)]
    crossings = sorted(
        x
        for x in ((u_min - b) / a, (u_max - b) / a)
        if 1e-12 < x < tau_total - 1e-12
    )
    edges = [0.0] + crossings + [tau_total]
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        u_mid = a * mid + b
        if u_mid < u_min:
            pieces.append((lo, hi, 0.0, u_min))
        elif u_mid > u_max:
            pieces.append((lo, hi, 0.0, u_max))
        else:
            pieces.append((lo, hi, a, a * lo + b))
    return pieces


def _integrate_pieces(
    pieces: list[tuple[float, float, float, float]], v0: float
) -> tuple[float, float]:
    """Terminal (v, p) of a piecewise-linear-control arc starting at (v0, 0)."""
    v, p = v0, 0.0
    for lo, hi, a, b in pieces:
        d = hi - lo
        p += v * d + 0.5 * b * d * d + a * d**3 / 6.0
        v += b * d + 0.5 * a * d * d
    return v, p


def _pieces_to_segments(
    pieces, v0: float, t0: float, p0: float, kind_main: str
) -> list[TrajectorySegment]:
    segs = []
    v, p = v0, 0.0
    for lo, hi, a, b in pieces:
        kind = kind_main if a != 0.0 else ("CONST_ACCEL" if b != 0.0 else "CONST_VEL")
        segs.append(
            TrajectorySegment(
                kind=kind,
                t_from=t0 + lo,
                t_to=t0 + hi,
                t_ref=t0 + lo,
                a=a,
                b=b,
                v_ref=v,
                p_ref=p0 + p,
            )
        )
        d = hi - lo
        p += v * d + 0.5 * b * d * d + a * d**3 / 6.0
        v += b * d + 0.5 * a * d * d
    return segs


# --- candidate structures ------------------------------------------------------


def _structure_unconstrained(spec: BvpSpec):
    T = spec.horizon
    dv = spec.v_end - spec.v_start
    dp = spec.distance - spec.v_start * T
    if abs(dv) < 1e-12 and abs(dp) < 1e-9 * max(1.0, spec.distance):
        # exact cruise; keeps the zero-energy case exactly zero
        return [
            TrajectorySegment(
                "CONST_VEL", spec.t_start, spec.t_entry, spec.t_start,
                0.0, 0.0, spec.v_start, spec.p_start,
            )
        ]
    a = (6.0 * dv * T - 12.0 * dp) / T**3
    b = (6.0 * dp - 2.0 * T * dv) / T**2
    return [
        TrajectorySegment(
            "CUBIC", spec.t_start, spec.t_entry, spec.t_start,
            a, b, spec.v_start, spec.p_start,
        )
    ]


def _structure_clamped(spec: BvpSpec):
    """Clip the linear control at the acceleration limits and re-match the
    boundary conditions over the clip parameters."""
    T = spec.horizon
    pb = spec.bounds
    dv = spec.v_end - spec.v_start
    dp = spec.distance - spec.v_start * T
    a0 = (6.0 * dv * T - 12.0 * dp) / T**3
    b0 = (6.0 * dp - 2.0 * T * dv) / T**2

    def residual(x):
        a, b = x
        pieces = _clamped_linear_segments(a, b, T, spec.v_start, pb.u_min, pb.u_max)
        v_end, p_end = _integrate_pieces(pieces, spec.v_start)
        return [v_end - spec.v_end, p_end - spec.distance]

    sol = optimize.root(residual, x0=[a0, b0], method="hybr", tol=1e-12)
    if not sol.success:
        return None
    a, b = sol.x
    pieces = _clamped_linear_segments(a, b, T, spec.v_start, pb.u_min, pb.u_max)
    return _pieces_to_segments(pieces, spec.v_start, spec.t_start, spec.p_start, "CUBIC")


def _structure_vmax_cruise(spec: BvpSpec):
    """Rise to the speed limit tangentially, then cruise until the entry time.

    The approach arc is u(tau) = min(u_max, a (tau1 - tau)); when it clips,
    the slope is found by a bracketed 1-D root find on the covered distance.
    """
    T = spec.horizon
    pb = spec.bounds
    v0, vm = spec.v_start, pb.v_max
    dv = vm - v0
    if dv < 1e-12:
        return None

    def arc(a: float):
        """Clipped tangential approach arc for slope a: returns
        (pieces, duration, distance)."""
        tail = pb.u_max / a           # tangential part duration
        dv_tail = pb.u_max**2 / (2.0 * a)
        if dv_tail >= dv:             # never clips
            tau1 = math.sqrt(2.0 * dv / a)
            pieces = [(0.0, tau1, -a, a * tau1)]
        else:
            tau_b = (dv - dv_tail) / pb.u_max
            tau1 = tau_b + tail
            pieces = [(0.0, tau_b, 0.0, pb.u_max), (tau_b, tau1, -a, pb.u_max)]
        v_end, dist = _integrate_pieces(pieces, v0)
        return pieces, tau1, dist

    def residual(a: float) -> float:
        pieces, tau1, dist = arc(a)
        if tau1 > T:
            # arc alone exceeds the horizon: report overshoot of arrival
            return (T - tau1) * vm - 1.0
        return dist + vm * (T - tau1) - spec.distance

    # gentle slopes arrive late (negative residual), steep ones early
    a_lo, a_hi = 1e-6, 1e9
    r_lo, r_hi = residual(a_lo), residual(a_hi)
    if r_lo > 0 or r_hi < 0:
        return None
    a = optimize.brentq(residual, a_lo, a_hi, xtol=1e-12, rtol=1e-15)
    pieces, tau1, _ = arc(a)
    segs = _pieces_to_segments(pieces, v0, spec.t_start, spec.p_start, "CUBIC")
    if T - tau1 > 1e-12:
        last = segs[-1]
        t1_abs = spec.t_start + tau1
        segs.append(
            TrajectorySegment(
                "CONST_VEL", t1_abs, spec.t_entry, t1_abs,
                0.0, 0.0, last.v_at(t1_abs), last.p_at(t1_abs),
            )
        )
    return segs


def _decel_arc(dv: float, a: float, clip: float):
    """Descent arc shedding ``dv`` with slope ``a``, tangential at the end:
    u(tau) = max(-clip, a (tau - tau1)).  Returns control pieces."""
    peak = math.sqrt(2.0 * dv * a)
    if peak <= clip:
        tau1 = math.sqrt(2.0 * dv / a)
        return [(0.0, tau1, a, -a * tau1)]
    taper = clip / a
    tau_c = (dv - clip * clip / (2.0 * a)) / clip
    return [(0.0, tau_c, 0.0, -clip), (tau_c, tau_c + taper, a, -clip)]


def _accel_arc(dv: float, a: float, clip: float):
    """Departure arc gaining ``dv``, tangential at the start:
    u(tau) = min(clip, a tau)."""
    peak = math.sqrt(2.0 * dv * a)
    if peak <= clip:
        tau2 = math.sqrt(2.0 * dv / a)
        return [(0.0, tau2, a, 0.0)]
    taper = clip / a
    tau_c = (dv - clip * clip / (2.0 * a)) / clip
    return [(0.0, taper, a, 0.0), (taper, taper + tau_c, 0.0, clip)]


def _pieces_cost(pieces) -> tuple[float, float]:
    """(duration, energy) of a control-piece list."""
    dur = pieces[-1][1]
    e = 0.0
    for lo, hi, a, b in pieces:
        d = hi - lo
        e += a * a * d**3 / 3.0 + a * b * d * d + b * b * d
    return dur, e


def _structure_vmin_dwell(spec: BvpSpec):
    """Tangential descent to the minimum speed, dwell (creep or stop), then a
    tangential departure arriving at the entry speed exactly on time.

    Unclamped arcs cost (4/3) dv^2 / tau each, so the energy-optimal split
    has tau proportional to sqrt(dv) under the covered-distance constraint.
    When a limit clips an arc, the split is re-optimized numerically.
    """
    T = spec.horizon
    pb = spec.bounds
    v0, ve, vlo = spec.v_start, spec.v_end, pb.v_min
    d1, d2 = v0 - vlo, ve - vlo
    if d1 < 0 or d2 <= 0:
        return None
    R = spec.distance - vlo * T
    if R <= 0:
        return None  # creeping the whole horizon already overshoots

    def assemble(p1, p2, tau1, tau2):
        if tau1 + tau2 > T + 1e-9:
            return None
        segs: list[TrajectorySegment] = []
        t, p = spec.t_start, spec.p_start
        if tau1 > 1e-12:
            segs += _pieces_to_segments(p1, v0, t, p, "CUBIC")
            p = segs[-1].p_at(t + tau1)
            t += tau1
        t_resume = spec.t_entry - tau2
        if t_resume > t + 1e-9:
            kind = "STOPPED" if vlo == 0.0 else "CONST_VEL"
            segs.append(TrajectorySegment(kind, t, t_resume, t, 0.0, 0.0, vlo, p))
            p += vlo * (t_resume - t)
            t = t_resume
        segs += _pieces_to_segments(p2, vlo, t, p, "CUBIC")
        return segs

    denom = d1**1.5 + d2**1.5
    c = 3.0 * R / denom
    tau1, tau2 = c * math.sqrt(d1), c * math.sqrt(d2)
    peak1 = 2.0 * d1 / tau1 if tau1 > 0 else 0.0
    peak2 = 2.0 * d2 / tau2
    if peak1 <= abs(pb.u_min) and peak2 <= pb.u_max:
        if tau1 + tau2 > T + 1e-9:
            # dwell would be negative: pin tau1 + tau2 = T (touch structure)
            if abs(v0 - ve) < 1e-9:
                return None
            tau1 = (3.0 * spec.distance - T * (ve + 2.0 * vlo)) / (v0 - ve)
            tau2 = T - tau1
            if not (0 <= tau1 <= T and tau2 > 0):
                return None
        p1 = [(0.0, tau1, 2.0 * d1 / tau1**2, -2.0 * d1 / tau1)] if tau1 > 1e-12 else []
        p2 = [(0.0, tau2, 2.0 * d2 / tau2**2, 0.0)]
        return assemble(p1, p2, tau1, tau2)

    # a limit clips one of the arcs: split the "progress beyond creep"
    # R = f1 + f2 between the arcs and search the split numerically,
    # where f = covered distance - vlo * duration for an arc
    def progress(build, dv, start_v, clip, a):
        pieces = build(dv, a, clip)
        _, dist = _integrate_pieces(pieces, start_v)
        return dist - vlo * pieces[-1][1]

    a_lo, a_hi = 1e-8, 1e8

    def arc_for_progress(build, dv, start_v, clip, f_target):
        a = optimize.brentq(
            lambda a: progress(build, dv, start_v, clip, a) - f_target,
            a_lo, a_hi, xtol=1e-13,
        )
        return build(dv, a, clip)

    if d1 <= 1e-12:
        # already at the creep speed: no descent arc
        if progress(_accel_arc, d2, vlo, pb.u_max, a_hi) > R:
            return None
        p2 = arc_for_progress(_accel_arc, d2, vlo, pb.u_max, R)
        return assemble([], p2, 0.0, p2[-1][1])

    # each arc's progress decreases in slope; the hardest-braking arc gives
    # the minimum progress it can be assigned
    f1_min = progress(_decel_arc, d1, v0, abs(pb.u_min), a_hi)
    f2_min = progress(_accel_arc, d2, vlo, pb.u_max, a_hi)
    th_lo = f1_min / R + 1e-9
    th_hi = 1.0 - f2_min / R - 1e-9
    if th_lo >= th_hi:
        return None  # distance cannot absorb both transitions

    def total_energy(theta):
        p1 = arc_for_progress(_decel_arc, d1, v0, abs(pb.u_min), theta * R)
        p2 = arc_for_progress(_accel_arc, d2, vlo, pb.u_max, (1.0 - theta) * R)
        e1 = _pieces_cost(p1)[1] if p1 else 0.0
        e2 = _pieces_cost(p2)[1] if p2 else 0.0
        return e1 + e2, p1, p2

    res = optimize.minimize_scalar(
        lambda th: total_energy(th)[0], bounds=(th_lo, th_hi), method="bounded",
        options={"xatol": 1e-10},
    )
    _, p1, p2 = total_energy(res.x)
    if p1 is None or p2 is None:
        return None
    tau1 = p1[-1][1] if p1 else 0.0
    tau2 = p2[-1][1] if p2 else 0.0
    return assemble(p1, p2, tau1, tau2)


def _verify(segs: list[TrajectorySegment], spec: BvpSpec) -> bool:
    pb = spec.bounds
    # continuity across joins
    for s1, s2 in zip(segs[:-1], segs[1:]):
        if abs(s1.t_to - s2.t_from) > JOIN_ATOL:
            return False
        if abs(s1.v_at(s1.t_to) - s2.v_at(s2.t_from)) > 1e-7:
            return False
        if abs(s1.p_at(s1.t_to) - s2.p_at(s2.t_from)) > 1e-7:
            return False
    # boundary conditions
    end = segs[-1]
    if abs(end.p_at(spec.t_entry) - (spec.p_start + spec.distance)) > BOUNDARY_RTOL * max(
        1.0, spec.distance
    ):
        return False
    if abs(end.v_at(spec.t_entry) - spec.v_end) > BOUNDARY_RTOL * max(1.0, spec.v_end):
        return False
    # bounds: u is linear per segment (ends suffice); v is quadratic
    tol = 1e-7
    for seg in segs:
        for tt in (seg.t_from, seg.t_to):
            u = seg.u_at(tt)
            if u < pb.u_min - tol or u > pb.u_max + tol:
                return False
            v = seg.v_at(tt)
            if v < pb.v_min - tol or v > pb.v_max + tol:
                return False
        if seg.a != 0.0:
            t_vert = seg.t_ref - seg.b / seg.a
            if seg.t_from < t_vert < seg.t_to:
                v = seg.v_at(t_vert)
                if v < pb.v_min - tol or v > pb.v_max + tol:
                    return False
    return True


def solve(spec: BvpSpec) -> TrajectoryProfile | None:
    """Minimum-energy trajectory meeting the entry constraints, or None when
    the assigned entry time is unreachable within the kinematic limits."""
    pb = spec.bounds
    T = spec.horizon
    if T <= 0:
        return None
    if not (pb.v_min - 1e-9 <= spec.v_start <= pb.v_max + 1e-9):
        return None
    if spec.distance <= 0:
        return None
    t_min = _min_duration(spec.v_start, pb.v_max, spec.distance, pb.u_max)
    if T < t_min - 1e-9:
        return None
    if pb.v_min > 0 and spec.distance / pb.v_min < T - 1e-9:
        # even creeping at the minimum speed arrives too early
        return None
    if T <= t_min + 1e-9:
        # reachability boundary: full acceleration, then cruise
        t1 = min((pb.v_max - spec.v_start) / pb.u_max, T)
        pieces = [(0.0, t1, 0.0, pb.u_max)]
        if T - t1 > 1e-12:
            pieces.append((t1, T, 0.0, 0.0))
        segs = _pieces_to_segments(pieces, spec.v_start, spec.t_start, spec.p_start, "CUBIC")
        if _verify(segs, spec):
            return TrajectoryProfile(
                segments=segs, energy=sum(s.energy() for s in segs), spec=spec
            )

    for build in (
        _structure_unconstrained,
        _structure_clamped,
        _structure_vmax_cruise,
        _structure_vmin_dwell,
    ):
        segs = build(spec)
        if segs and _verify(segs, spec):
            energy = sum(s.energy() for s in segs)
            return TrajectoryProfile(segments=segs, energy=energy, spec=spec)
    raise SolverError(
        f"no verified structure for v0={spec.v_start:.3f}, D={spec.distance:.3f}, "
        f"T={T:.3f}"
    )


__all__ = [
    "BvpSpec",
    "TrajectorySegment",
    "TrajectoryProfile",
    "SolverError",
    "earliest_entry",
    "profile_state",
    "solve",
]

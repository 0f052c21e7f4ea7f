"""Per-leg trajectory construction between consecutive sensing locations.

A leg is the slot-by-slot path a UAV flies from one sensing location to the
next while uploading the data collected at the leg's start.  Legs are built
at maximum speed (slower speeds never finish earlier) and, when the straight
line does not give enough transmission capacity, are prefixed with a
rate-gradient detour toward the BS: the shortest detour that makes the
upload fit wins.

Masks: planners accept ``is_granted(abs_slot) -> bool`` describing which
slots the caller expects to hold a subcarrier (slot of waypoint k is
``first_slot + k - 1``).  ``None`` means every slot is granted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

from .channel import ChannelParams, Position3, rate_at

__all__ = [
    "KinematicParams",
    "Leg",
    "LegInfeasible",
    "delta_lower_bound",
    "rate_gradient",
    "optimize_leg",
    "drain_leg",
    "initial_leg",
]

GrantFn = Optional[Callable[[int], bool]]

_CEIL_EPS = 1e-9  # guards exact-division distances against float noise
_BS_STANDOFF = 1.0  # m; gradient steps never land closer to the BS than this


class LegInfeasible(RuntimeError):
    """No feasible leg exists within the detour cap."""


@dataclass(frozen=True)
class KinematicParams:
    v_max: float = 50.0  # meters per slot
    h_min: float = 10.0  # minimum altitude, meters

    def __post_init__(self):
        if not (self.v_max > 0 and self.h_min > 0):
            raise ValueError("v_max and h_min must be positive")


@dataclass
class Leg:
    """One planned leg: waypoints occupy the slots after the start's sensing slot.

    ``waypoints[k]`` is the position in leg slot k+1; the last waypoint is
    the leg's end point.  ``rates`` caches the scheduled-rate at each
    waypoint so the simulator and schedulers never re-evaluate the channel.
    ``detour_slots + route_slots == len(waypoints)``.
    """

    start: Position3
    end: Position3
    residual_data: float
    waypoints: list[Position3]
    rates: list[float]
    turning_point: Position3
    detour_slots: int
    route_slots: int
    _suffix: list[float] = field(default_factory=list, repr=False)

    @property
    def slots(self) -> int:
        return len(self.waypoints)

    def suffix_capacity(self) -> list[float]:
        """suffix_capacity()[k] = sum of rates from waypoint k on (all granted)."""
        if len(self._suffix) != len(self.rates) + 1:
            acc = 0.0
            out = [0.0] * (len(self.rates) + 1)
            for k in range(len(self.rates) - 1, -1, -1):
                acc += self.rates[k]
                out[k] = acc
            self._suffix = out
        return self._suffix


def delta_lower_bound(start: Position3, end: Position3, kin: KinematicParams) -> int:
    """Fewest slots to cover the straight line at maximum speed."""
    d = start.dist(end)
    if d <= 0.0:
        return 0
    return max(1, math.ceil(d / kin.v_max - _CEIL_EPS))


def rate_gradient(
    pos: Position3,
    params: ChannelParams,
    kin: KinematicParams,
    step: float = 0.1,
) -> Optional[tuple[float, float, float]]:
    """Unit direction of steepest rate increase at ``pos``.

    Central finite differences with the given step; if a full-speed move
    along the raw direction would sink below the altitude floor, the
    vertical component is dropped and the rest renormalized.  Returns None
    when no ascent direction exists (degenerate gradient); callers fall
    back to a horizontal step toward the BS.
    """
    x, y, z = pos
    gx = rate_at(x + step, y, z, params) - rate_at(x - step, y, z, params)
    gy = rate_at(x, y + step, z, params) - rate_at(x, y - step, z, params)
    zl = max(z - step, 1e-6)  # keep the probe inside the z > 0 domain
    gz = rate_at(x, y, z + step, params) - rate_at(x, y, zl, params)
    norm = math.sqrt(gx * gx + gy * gy + gz * gz)
    if norm <= 0.0 or not math.isfinite(norm):
        return None
    gx, gy, gz = gx / norm, gy / norm, gz / norm
    if z + kin.v_max * gz < kin.h_min:
        h = math.hypot(gx, gy)
        if h <= 1e-12:
            return None
        return (gx / h, gy / h, 0.0)
    return (gx, gy, gz)


def _gradient_step(pos: Position3, speed: float, cp: ChannelParams,
                   kin: KinematicParams) -> Position3:
    """Advance one slot along the rate gradient, respecting floor and BS standoff."""
    g = rate_gradient(pos, cp, kin)
    if g is None:
        # no ascent direction: head horizontally for the BS ground projection
        h = math.hypot(pos.x, pos.y)
        if h <= 1e-9:
            return pos  # right above the BS, nothing better than hovering
        d = min(speed, h)
        g = (-pos.x / h, -pos.y / h, 0.0)
        nxt = Position3(pos.x + d * g[0], pos.y + d * g[1], pos.z)
    else:
        nxt = Position3(
            pos.x + speed * g[0],
            pos.y + speed * g[1],
            max(pos.z + speed * g[2], kin.h_min),
        )
    bs = cp.bs_position
    if nxt.dist(bs) < _BS_STANDOFF:
        # pull back along the step so the link stays out of the singularity
        vx, vy, vz = nxt.x - pos.x, nxt.y - pos.y, nxt.z - pos.z
        span = math.sqrt(vx * vx + vy * vy + vz * vz)
        if span <= 1e-12:
            return pos
        lo, hi = 0.0, 1.0
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            cand = Position3(pos.x + mid * vx, pos.y + mid * vy, pos.z + mid * vz)
            if cand.dist(bs) < _BS_STANDOFF:
                hi = mid
            else:
                lo = mid
        nxt = Position3(pos.x + lo * vx, pos.y + lo * vy, pos.z + lo * vz)
    return nxt


def _even_waypoints(start: Position3, end: Position3, slots: int) -> list[Position3]:
    pts = []
    for k in range(1, slots + 1):
        f = k / slots
        pts.append(Position3(
            start.x + f * (end.x - start.x),
            start.y + f * (end.y - start.y),
            start.z + f * (end.z - start.z),
        ))
    pts[-1] = end
    return pts


def _frontload_waypoints(start: Position3, end: Position3, speed: float,
                         slots: int) -> list[Position3]:
    """Full-speed steps with the remainder on the last one."""
    d = start.dist(end)
    if slots == 0:
        return []
    ux, uy, uz = (end.x - start.x) / d, (end.y - start.y) / d, (end.z - start.z) / d
    pts = [Position3(start.x + min(k * speed, d) * ux,
                     start.y + min(k * speed, d) * uy,
                     start.z + min(k * speed, d) * uz)
           for k in range(1, slots + 1)]
    pts[-1] = end
    return pts


def _masked_capacity(rates: list[float], is_granted: GrantFn, first_slot: int) -> float:
    if is_granted is None:
        return sum(rates)
    total = 0.0
    slot = first_slot
    for r in rates:
        if is_granted(slot):
            total += r
        slot += 1
    return total


def optimize_leg(
    start: Position3,
    end: Position3,
    residual_data: float,
    cp: ChannelParams,
    kin: KinematicParams,
    is_granted: GrantFn = None,
    first_slot: int = 0,
    speed: float | None = None,
    max_detour_factor: int = 10,
) -> Leg:
    """Shortest leg from start to end whose capacity covers the residual data.

    Scans total slot budgets upward from the kinematic minimum.  At every
    budget two families compete: the straight line (full speed at the
    minimum budget, evenly paced when stretched; pacing below full speed is
    legal since the speed cap is an inequality) and the gradient-detour leg
    whose turning point is the detour's endpoint.  The first feasible budget
    wins, with the smallest detour preferred inside a budget, so detours
    are minimal and, by the stretched-line family, a leg built at full
    speed never takes more slots than one built slower.
    """
    if residual_data < 0:
        raise ValueError("residual_data must be non-negative")
    v = speed if speed is not None else kin.v_max
    d = start.dist(end)
    dlb = 0 if d <= 0 else max(1, math.ceil(d / v - _CEIL_EPS))

    def feasible(rates: list[float]) -> bool:
        return _masked_capacity(rates, is_granted, first_slot) >= residual_data

    def rated(pts: list[Position3]) -> list[float]:
        return [rate_at(p.x, p.y, p.z, cp) for p in pts]

    line = _frontload_waypoints(start, end, v, dlb)
    rates = rated(line)
    if residual_data <= 0 or feasible(rates):
        return Leg(start, end, residual_data, line, rates, start, 0, dlb)
    base_line, base_rates = line, rates

    cap = max(max_detour_factor * max(dlb, 1), 20)
    detour: list[Position3] = []
    detour_rates: list[float] = []
    pos = start
    for n in range(dlb, dlb + cap + 1):
        if d > 0 and n > dlb:
            # arrive at full speed and keep transmitting at the destination
            hover_end = n - dlb
            pts = base_line + [end] * hover_end
            pr = base_rates + [base_rates[-1]] * hover_end
            if feasible(pr):
                return Leg(start, end, residual_data, pts, pr, start, 0, n)
        if d > 0 and n >= max(dlb, 1):
            # or spread the slots evenly along the segment
            pts = _even_waypoints(start, end, n)
            pr = rated(pts)
            if feasible(pr):
                return Leg(start, end, residual_data, pts, pr, start, 0, n)
        while len(detour) < n:
            pos = _gradient_step(pos, v, cp, kin)
            detour.append(pos)
            detour_rates.append(rate_at(pos.x, pos.y, pos.z, cp))
        for d1 in range(1, n + 1):
            tp = detour[d1 - 1]
            span = tp.dist(end)
            d2 = 0 if span <= 0 else max(1, math.ceil(span / v - _CEIL_EPS))
            hover = n - d1 - d2  # pause at the detour's endpoint before routing
            if hover < 0:
                continue
            head = detour[:d1] + [tp] * hover
            head_rates = detour_rates[:d1] + [detour_rates[d1 - 1]] * hover
            for route in (_frontload_waypoints(tp, end, v, d2),
                          _even_waypoints(tp, end, d2) if d2 else []):
                if d2 and not route:
                    continue
                pr = head_rates + rated(route)
                if feasible(pr):
                    return Leg(start, end, residual_data, head + route, pr,
                               tp, d1 + hover, d2)
                if not d2:
                    break
    raise LegInfeasible(
        f"no feasible leg from {start} to {end} within {cap} extra slots "
        f"(residual {residual_data:.3g} bits)"
    )


def constant_speed_leg(
    start: Position3,
    end: Position3,
    residual_data: float,
    v: float,
    cp: ChannelParams,
    kin: KinematicParams,
    is_granted: GrantFn = None,
    first_slot: int = 0,
    max_detour_factor: int = 10,
) -> Leg:
    """Reference builder moving at one fixed speed every slot.

    Full-speed steps with the remainder on the final step of each phase;
    the detour grows one slot at a time exactly as in the main planner but
    no sub-speed pacing or pausing is considered.  Exists as the baseline
    the full planner is measured against: a leg built at the speed cap
    never takes more slots than one built at any constant slower speed.
    """

    if residual_data < 0:
        raise ValueError("residual_data must be non-negative")
    d = start.dist(end)
    dlb = 0 if d <= 0 else max(1, math.ceil(d / v - _CEIL_EPS))
    line = _frontload_waypoints(start, end, v, dlb)
    rates = [rate_at(p.x, p.y, p.z, cp) for p in line]
    if residual_data <= 0 or _masked_capacity(rates, is_granted, first_slot) >= residual_data:
        return Leg(start, end, residual_data, line, rates, start, 0, dlb)
    cap = max(max_detour_factor * max(dlb, 1), 20)
    detour: list[Position3] = []
    detour_rates: list[float] = []
    pos = start
    for d1 in range(1, cap + 1):
        pos = _gradient_step(pos, v, cp, kin)
        detour.append(pos)
        detour_rates.append(rate_at(pos.x, pos.y, pos.z, cp))
        span = pos.dist(end)
        d2 = 0 if span <= 0 else max(1, math.ceil(span / v - _CEIL_EPS))
        route = _frontload_waypoints(pos, end, v, d2)
        route_rates = [rate_at(p.x, p.y, p.z, cp) for p in route]
        if _masked_capacity(detour_rates + route_rates, is_granted,
                            first_slot) >= residual_data:
            return Leg(start, end, residual_data, detour + route,
                       detour_rates + route_rates, pos, d1, d2)
    raise LegInfeasible(
        f"no feasible constant-speed leg from {start} to {end} within {cap} detour slots")


def drain_leg(
    start: Position3,
    residual_data: float,
    cp: ChannelParams,
    kin: KinematicParams,
    is_granted: GrantFn = None,
    first_slot: int = 0,
    speed: float | None = None,
    max_slots: int = 10000,
) -> Leg:
    """Pure sending-priority detour: walk the rate gradient until drained.

    Used after a UAV's final sensing slot, when there is no next sensing
    location to reach.  The turning point is the walk's endpoint and the
    route part is empty.
    """
    if residual_data <= 0:
        return Leg(start, start, 0.0, [], [], start, 0, 0)
    v = speed if speed is not None else kin.v_max
    pts: list[Position3] = []
    rates: list[float] = []
    pos = start
    total = 0.0
    for k in range(1, max_slots + 1):
        pos = _gradient_step(pos, v, cp, kin)
        pts.append(pos)
        r = rate_at(pos.x, pos.y, pos.z, cp)
        rates.append(r)
        if is_granted is None or is_granted(first_slot + k - 1):
            total += r
        if total >= residual_data:
            return Leg(start, pos, residual_data, pts, rates, pos, k, 0)
    raise LegInfeasible(
        f"drain from {start} cannot deliver {residual_data:.3g} bits in {max_slots} slots"
    )


def initial_leg(
    start: Position3,
    end: Position3,
    residual_data: float,
    v0: float,
    cp: ChannelParams,
    kin: KinematicParams,
    max_stretch: int = 100000,
) -> Leg:
    """Slow evenly-paced straight leg used by the initial solution.

    The pace starts at v0 and the leg is stretched (more slots along the
    same segment) until the all-granted upload fits, which guarantees the
    data constraint for the initial iterate.
    """
    d = start.dist(end)
    slots = 0 if d <= 0 else max(1, math.ceil(d / v0 - _CEIL_EPS))
    while True:
        line = _even_waypoints(start, end, slots) if slots else []
        rates = [rate_at(p.x, p.y, p.z, cp) for p in line]
        if residual_data <= 0 or sum(rates) >= residual_data:
            return Leg(start, end, residual_data, line, rates, start, 0, slots)
        if slots >= max_stretch:
            raise LegInfeasible(
                f"initial leg from {start} to {end} cannot carry "
                f"{residual_data:.3g} bits even with {slots} slots"
            )
        slots = max(slots + 1, int(slots * 1.5))

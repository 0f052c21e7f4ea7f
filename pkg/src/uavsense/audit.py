"""Independent validator for simulation traces.

Walks the per-slot trace rows and re-derives every protocol constraint from
scratch: altitude floor, speed cap, zero velocity while sensing, cooperative
sensing probability, complete data delivery between sensing slots, the
per-slot subcarrier cap and binary grants, legal slot-type transitions, and
agreement between the reported rates and the channel model.  It shares
nothing with the simulator's bookkeeping except the channel definition
itself.
"""

from __future__ import annotations

import math
from collections import defaultdict
from typing import Mapping, Sequence

from .channel import ChannelParams, Position3, rate_at
from .sensing import SensingParams, Task, sensing_success_coop
from .simulator import EMPTY, SENSING, TRANSMISSION, TraceRow
from .trajectory import KinematicParams

__all__ = ["audit_trace"]

_TOL = 1e-6

_LEGAL_TRANSITIONS = {
    (SENSING, TRANSMISSION),
    (SENSING, EMPTY),
    (TRANSMISSION, TRANSMISSION),
    (TRANSMISSION, SENSING),
    (TRANSMISSION, EMPTY),
    (EMPTY, EMPTY),
    (EMPTY, SENSING),
}


def audit_trace(
    rows: Sequence[TraceRow],
    initial_positions: Mapping[int, Position3],
    routes: Mapping[int, Sequence[int]],
    tasks: Mapping[int, Task],
    cp: ChannelParams,
    kin: KinematicParams,
    sp: SensingParams,
    k_subcarriers: int,
    check_sensing_prob: bool = True,
) -> list[str]:
    """Return a list of constraint violations (empty means the trace passes)."""
    problems: list[str] = []
    by_uav: dict[int, list[TraceRow]] = defaultdict(list)
    by_slot_granted: dict[int, int] = defaultdict(int)
    for r in rows:
        by_uav[r.uav].append(r)
        if r.granted not in (0, 1):
            problems.append(f"slot {r.slot} uav {r.uav}: grant flag {r.granted} not binary")
        by_slot_granted[r.slot] += r.granted

    for slot, n in sorted(by_slot_granted.items()):
        if n > k_subcarriers:
            problems.append(f"slot {slot}: {n} grants exceed the cap {k_subcarriers}")

    for uav, route in sorted(routes.items()):
        if route and uav not in by_uav:
            problems.append(f"uav {uav}: has {len(route)} tasks but no trace rows")

    # sensing-location record per task for the cooperative probability check
    sensing_points: dict[int, list[tuple[int, Position3]]] = defaultdict(list)

    for uav, urows in sorted(by_uav.items()):
        urows.sort(key=lambda r: r.slot)
        prev_pos = initial_positions[uav]
        prev_type = None
        prev_residual = 0.0
        sense_count = 0
        route = list(routes.get(uav, ()))
        last_sense_slot = None
        last_drain_slot = None
        delivered = 0.0
        expected_slot = None
        for r in urows:
            if expected_slot is not None and r.slot != expected_slot:
                problems.append(f"uav {uav}: trace skips from slot {expected_slot - 1} to {r.slot}")
            expected_slot = r.slot + 1
            pos = Position3(r.x, r.y, r.z)
            if pos.z < kin.h_min - _TOL:
                problems.append(f"slot {r.slot} uav {uav}: altitude {pos.z:.3f} below floor")
            step = pos.dist(prev_pos)
            if step > kin.v_max + _TOL:
                problems.append(f"slot {r.slot} uav {uav}: speed {step:.3f} exceeds v_max")
            if prev_type is not None and (prev_type, r.slot_type) not in _LEGAL_TRANSITIONS:
                problems.append(
                    f"slot {r.slot} uav {uav}: illegal transition {prev_type}->{r.slot_type}")

            residual_before = prev_residual
            if r.slot_type == SENSING:
                if step > _TOL:
                    problems.append(f"slot {r.slot} uav {uav}: moved {step:.3f} m while sensing")
                if sense_count >= len(route):
                    problems.append(f"slot {r.slot} uav {uav}: more sensing slots than tasks")
                else:
                    task = tasks[route[sense_count]]
                    sensing_points[task.id].append((uav, pos))
                    residual_before += task.data_size
                    if last_sense_slot is not None and prev_residual > _TOL:
                        problems.append(
                            f"slot {r.slot} uav {uav}: sensed task {task.id} with "
                            f"{prev_residual:.3g} bits still undelivered")
                    delivered = 0.0
                    last_sense_slot = r.slot
                sense_count += 1

            if r.granted:
                model_rate = rate_at(pos.x, pos.y, pos.z, cp)
                expected = min(model_rate, residual_before)
                if abs(r.rate_bits - expected) > max(1e-6 * max(expected, 1.0), 1e-3):
                    problems.append(
                        f"slot {r.slot} uav {uav}: applied rate {r.rate_bits:.6g} "
                        f"!= min(channel {model_rate:.6g}, residual {residual_before:.6g})")
            elif r.rate_bits != 0.0:
                problems.append(f"slot {r.slot} uav {uav}: rate without a grant")

            if abs(residual_before - r.rate_bits - r.residual_bits) > 1e-3:
                problems.append(
                    f"slot {r.slot} uav {uav}: residual bookkeeping off "
                    f"({residual_before:.6g} - {r.rate_bits:.6g} != {r.residual_bits:.6g})")
            if r.slot_type == EMPTY and r.residual_bits > _TOL:
                problems.append(f"slot {r.slot} uav {uav}: empty slot with residual data")
            delivered += r.rate_bits
            if r.rate_bits > 0:
                last_drain_slot = r.slot
            prev_pos = pos
            prev_type = r.slot_type
            prev_residual = r.residual_bits

        if sense_count != len(route):
            problems.append(f"uav {uav}: sensed {sense_count} tasks, route has {len(route)}")
        if urows and prev_residual > _TOL:
            problems.append(f"uav {uav}: finished with {prev_residual:.3g} bits undelivered")
        if route and last_sense_slot is not None and last_drain_slot is not None:
            # completion accounting: last sensing slot plus its transmission span
            if last_drain_slot <= last_sense_slot:
                problems.append(
                    f"uav {uav}: final upload ended at {last_drain_slot} before "
                    f"its last sensing slot {last_sense_slot}")

    if check_sensing_prob:
        for task_id, points in sorted(sensing_points.items()):
            task = tasks[task_id]
            dists = [p.dist(task.location) for _, p in points]
            if len(points) != len(task.workers):
                problems.append(
                    f"task {task_id}: sensed by {len(points)} UAVs, expected {len(task.workers)}")
            prob = sensing_success_coop(dists, sp)
            if prob < sp.pr_th - 1e-9:
                problems.append(
                    f"task {task_id}: cooperative sensing probability {prob:.6f} "
                    f"below threshold {sp.pr_th}")
    return problems

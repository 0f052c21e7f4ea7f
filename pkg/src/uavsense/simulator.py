"""Executable sense-and-send protocol.

Advances the network slot by slot.  Every UAV is, in each slot, in exactly
one of three states: a sensing slot (hovering at a sensing location,
collecting the task's payload), a transmission slot (moving along its
planned waypoints, draining collected data whenever a subcarrier is
granted) or an empty slot (moving with nothing left to send).  A UAV that
reaches a sensing location while still holding data hovers there in
transmission slots until drained, then senses; the outer optimizer absorbs
that slack on the next pass by re-planning against the observed grants.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .channel import ChannelParams, Position3, rate_at
from .scheduler import update_completion_estimates
from .sensing import Task
from .trajectory import KinematicParams, Leg

__all__ = [
    "SignalingParams",
    "UavPlan",
    "SimOutcome",
    "TraceRow",
    "run",
    "signaling_cost",
    "write_trace",
    "read_trace",
]

SENSING = "sensing"
TRANSMISSION = "transmission"
EMPTY = "empty"


@dataclass(frozen=True)
class SignalingParams:
    """Control-channel message counts per slot and per UAV."""

    beacon_msgs: int = 0  # uplink beacon, at most this many messages
    response_msgs: int = 0  # downlink trajectory/scheduling response

    def __post_init__(self):
        if self.beacon_msgs < 0 or self.response_msgs < 0:
            raise ValueError("message counts must be non-negative")


def signaling_cost(m: int, sig: SignalingParams) -> int:
    """Worst-case control messages exchanged per slot for m UAVs."""
    return m * (sig.beacon_msgs + sig.response_msgs)


@dataclass
class UavPlan:
    """Everything one UAV intends to do: route, sensing points, legs.

    ``legs[k]`` ends at ``sensing_locations[k]`` and carries the payload of
    task k-1 (nothing for k = 0); ``drain`` is the detour flown after the
    last sensing slot while the final payload uploads.
    """

    uav: int
    start: Position3
    task_ids: list[int]
    sensing_locations: list[Position3]
    legs: list[Leg]
    drain: Leg

    def __post_init__(self):
        if not (len(self.task_ids) == len(self.sensing_locations) == len(self.legs)):
            raise ValueError("task/location/leg lists must align")

    @property
    def n_tasks(self) -> int:
        return len(self.task_ids)

    def sensing_slots(self) -> list[int]:
        """Planned slot index of each sensing slot (all plan slots granted)."""
        taus = []
        t = 0
        for leg in self.legs:
            t += leg.slots + 1
            taus.append(t)
        return taus

    def planned_completion(self) -> int:
        if not self.task_ids:
            return 0
        return self.sensing_slots()[-1] + self.drain.slots


@dataclass
class TraceRow:
    slot: int
    uav: int
    slot_type: str
    x: float
    y: float
    z: float
    granted: int
    rate_bits: float
    residual_bits: float


@dataclass
class SimOutcome:
    """Result of one protocol run."""

    completion_times: dict[int, int]
    t_max: int
    tau: dict[int, list[int]]
    grants: list[frozenset[int]]
    requests: list[frozenset[int]]
    tran_durations: dict[tuple[int, int], int]  # (uav, task index) -> slots to drain
    total_signaling: int
    trace: list[TraceRow] | None


class _Runtime:
    """Mutable per-UAV execution state (one leg pointer plus residual)."""

    __slots__ = (
        "uav", "plan", "cur", "w", "residual", "position", "rate_now",
        "pending_sense", "done", "t_done", "taus", "chain", "tran_start",
        "_now",
    )

    def __init__(self, plan: UavPlan, cp: ChannelParams):
        self.uav = plan.uav
        self.plan = plan
        self.cur = 0  # leg being walked; n_tasks means the drain leg
        self.w = 0  # waypoints consumed on the current leg
        self.residual = 0.0
        self.position = plan.start
        self.rate_now = rate_at(plan.start.x, plan.start.y, plan.start.z, cp)
        self.pending_sense = False
        self.done = plan.n_tasks == 0
        self.t_done = 0
        self.taus: list[int] = []
        self.tran_start: int = 0
        self._now = 0
        # chain[j]: all-granted slots from "about to walk leg j" to completion
        self.chain = _completion_chain(plan)
        if not self.done and plan.legs[0].slots == 0:
            self.pending_sense = True

    def _current_leg(self) -> Leg:
        p = self.plan
        return p.drain if self.cur >= p.n_tasks else p.legs[self.cur]

    def projected_completion(self) -> float:
        """Completion slot if every future transmission slot were granted."""
        if self.done:
            return float(self.t_done)
        t = self._now
        p = self.plan
        if self.pending_sense:
            return t + 1 + self.chain[self.cur + 1]
        leg = self._current_leg()
        drain_slots = _slots_to_drain(leg, self.residual, self.w)
        if self.cur >= p.n_tasks:
            return t + drain_slots
        rem = max(leg.slots - self.w, drain_slots)
        return t + rem + 1 + self.chain[self.cur + 1]


def _slots_to_drain(leg: Leg, residual: float, w: int) -> int:
    """Additional all-granted slots until ``residual`` bits are delivered,
    starting just after waypoint ``w`` of ``leg`` (hovering at the leg end
    once waypoints run out)."""
    if residual <= 0:
        return 0
    total = 0.0
    rates = leg.rates
    for j in range(w, len(rates)):
        total += rates[j]
        if total >= residual:
            return j - w + 1
    if not rates:
        raise RuntimeError("a leg carrying data must have waypoints")
    end_rate = rates[-1]
    extra = math.ceil((residual - total) / end_rate - 1e-12)
    return (len(rates) - w) + max(extra, 1 if total < residual else 0)


def _completion_chain(plan: UavPlan) -> list[float]:
    n = plan.n_tasks
    chain = [0.0] * (n + 1)
    if n == 0:
        return chain
    chain[n] = _slots_to_drain(plan.drain, plan.drain.residual_data, 0)
    for j in range(n - 1, -1, -1):
        leg = plan.legs[j]
        walk = max(leg.slots, _slots_to_drain(leg, leg.residual_data, 0))
        chain[j] = walk + 1 + chain[j + 1]
    return chain


def run(
    plans: Sequence[UavPlan],
    sched,
    tasks: Mapping[int, Task],
    cp: ChannelParams,
    kin: KinematicParams,
    sig: SignalingParams | None = None,
    tx_in_sensing_slot: bool = False,
    max_slots: int = 100000,
    record_trace: bool = True,
) -> SimOutcome:
    """Run the protocol until every UAV finishes all its tasks.

    ``sched`` provides ``grant(slot, requests, estimates, residuals)``; the
    simulator feeds it optimistic completion projections each slot.
    ``tx_in_sensing_slot`` lets a UAV also request a subcarrier in its own
    sensing slot (off by default: uploads count from the following slot).
    """
    states = [_Runtime(p, cp) for p in plans]
    by_id = {s.uav: s for s in states}
    if len(by_id) != len(states):
        raise ValueError("duplicate UAV ids in plans")
    order = sorted(by_id)

    grants_log: list[frozenset[int]] = []
    requests_log: list[frozenset[int]] = []
    tran_durations: dict[tuple[int, int], int] = {}
    trace: list[TraceRow] | None = [] if record_trace else None

    active = [by_id[i] for i in order if not by_id[i].done]
    t = 0
    while active:
        t += 1
        if t > max_slots:
            worst = max(active, key=lambda s: s.residual)
            raise RuntimeError(
                f"simulation exceeded {max_slots} slots; UAV {worst.uav} still "
                f"holds {worst.residual:.3g} bits on leg {worst.cur}"
            )
        slot_types: dict[int, str] = {}
        requests: list[int] = []
        for st in active:
            st._now = t
            if st.pending_sense:
                # hover and collect: the position stays, data arrives in full
                st.taus.append(t)
                task = tasks[st.plan.task_ids[st.cur]]
                st.residual += task.data_size
                st.tran_start = t
                st.pending_sense = False
                st.cur += 1
                st.w = 0
                slot_types[st.uav] = SENSING
                if tx_in_sensing_slot:
                    requests.append(st.uav)
                continue
            leg = st._current_leg()
            if st.w < leg.slots:
                st.position = leg.waypoints[st.w]
                st.rate_now = leg.rates[st.w]
                st.w += 1
            # else: waypoints exhausted; hover in place at the leg end
            if st.residual > 0:
                slot_types[st.uav] = TRANSMISSION
                requests.append(st.uav)
            else:
                slot_types[st.uav] = EMPTY

        estimates = update_completion_estimates(active)
        residuals = {st.uav: st.residual for st in active}
        granted = sched.grant(t, requests, estimates, residuals) if requests else frozenset()
        requests_log.append(frozenset(requests))
        grants_log.append(frozenset(granted))

        for st in active:
            stype = slot_types[st.uav]
            applied = 0.0
            if st.uav in granted and st.residual > 0:
                applied = min(st.rate_now, st.residual)
                st.residual -= applied
                if st.residual <= 1e-9:
                    st.residual = 0.0
            if trace is not None:
                trace.append(TraceRow(
                    t, st.uav, stype,
                    st.position.x, st.position.y, st.position.z,
                    1 if st.uav in granted else 0, applied, st.residual,
                ))
            if st.residual == 0.0:
                if applied > 0.0 and st.cur >= 1:
                    tran_durations[(st.uav, st.cur - 1)] = t - st.tran_start
                if st.cur >= st.plan.n_tasks:
                    if stype != SENSING or applied > 0.0:
                        st.done = True
                        st.t_done = t
                elif stype != SENSING and st.w >= st._current_leg().slots:
                    st.pending_sense = True
        active = [s for s in active if not s.done]

    completion = {i: by_id[i].t_done for i in order}
    t_max = max(completion.values(), default=0)
    sig = sig or SignalingParams()
    return SimOutcome(
        completion_times=completion,
        t_max=t_max,
        tau={i: list(by_id[i].taus) for i in order},
        grants=grants_log,
        requests=requests_log,
        tran_durations=tran_durations,
        total_signaling=signaling_cost(len(order), sig) * t_max,
        trace=trace,
    )


_TRACE_HEADER = ["slot", "uav", "slot_type", "x", "y", "z", "granted",
                 "rate_bits", "residual_bits"]


def write_trace(rows: Iterable[TraceRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(_TRACE_HEADER)
        for r in rows:
            w.writerow([r.slot, r.uav, r.slot_type,
                        repr(r.x), repr(r.y), repr(r.z),
                        r.granted, repr(r.rate_bits), repr(r.residual_bits)])


def read_trace(path) -> list[TraceRow]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != _TRACE_HEADER:
            raise ValueError(f"unexpected trace header {header}")
        for rec in reader:
            rows.append(TraceRow(
                int(rec[0]), int(rec[1]), rec[2],
                float(rec[3]), float(rec[4]), float(rec[5]),
                int(rec[6]), float(rec[7]), float(rec[8]),
            ))
    return rows

"""Per-slot subcarrier allocation.

At most K UAVs transmit in any slot.  When demand exceeds K, subcarriers go
to the requesters with the largest projected completion time; ties break on
larger residual data, then lower UAV id, so schedules are reproducible.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Protocol

import numpy as np

__all__ = [
    "schedule_slot",
    "update_completion_estimates",
    "GreedyScheduler",
    "RandomScheduler",
    "ReplayScheduler",
]


def schedule_slot(
    requests: Iterable[int],
    completion_times: Mapping[int, float],
    k: int,
    residuals: Mapping[int, float] | None = None,
) -> frozenset[int]:
    """Grant up to ``k`` subcarriers among the requesting UAVs.

    Everyone wins when demand fits; otherwise the k largest completion-time
    estimates win (residual data, then lower id, break ties).
    """
    req = list(requests)
    if len(req) <= k:
        return frozenset(req)
    if residuals is None:
        key = lambda i: (-completion_times[i], i)
    else:
        key = lambda i: (-completion_times[i], -residuals.get(i, 0.0), i)
    req.sort(key=key)
    return frozenset(req[:k])


class _ProjectsCompletion(Protocol):
    uav: int

    def projected_completion(self) -> float: ...


def update_completion_estimates(states: Iterable[_ProjectsCompletion]) -> dict[int, float]:
    """Re-project every UAV's completion slot under all-future-slots-granted.

    The projection is the priority used for the next slot's contention; a
    denied slot can only push it later, never earlier.
    """
    return {s.uav: s.projected_completion() for s in states}


class GreedyScheduler:
    """Largest-completion-time-first allocation (the optimizer's scheduler)."""

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("need at least one subcarrier")
        self.k = k

    def grant(self, slot, requests, estimates, residuals):
        return schedule_slot(requests, estimates, self.k, residuals)


class RandomScheduler:
    """Uniformly random allocation; seeds the initial ITSSO iterate."""

    def __init__(self, k: int, seed: int):
        if k < 1:
            raise ValueError("need at least one subcarrier")
        self.k = k
        self._rng = np.random.default_rng(seed)

    def grant(self, slot, requests, estimates, residuals):
        req = sorted(requests)
        if len(req) <= self.k:
            return frozenset(req)
        picked = self._rng.choice(len(req), size=self.k, replace=False)
        return frozenset(req[i] for i in picked)


class ReplayScheduler:
    """Replays a recorded per-slot grant sequence (solution replay)."""

    def __init__(self, grants: list[frozenset[int]], k: int):
        self.grants = grants
        self.k = k

    def grant(self, slot, requests, estimates, residuals):
        if slot - 1 < len(self.grants):
            return frozenset(self.grants[slot - 1]) & frozenset(requests)
        return schedule_slot(requests, estimates, self.k, residuals)

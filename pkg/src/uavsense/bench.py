"""Scenario generation, baseline schemes and experiment drivers.

Scenarios draw task locations on the ground rectangle and UAV starts in the
box (altitudes floored), then deal each task to q distinct UAVs so that
per-UAV loads are equal.  Schemes share the task field: the cooperative
optimizer (itsso), the non-cooperative baseline (nc: q = 1 with the UAV
count scaled to keep the per-UAV load), and the fixed-sensing-location
baseline (fsl: everyone senses from a fixed altitude right above the task,
no probability constraint, no placement search).

Experiments sweep one variable, run a seeded batch of instances per point
and per scheme (instance i uses seed base+i in every scheme, so curves are
paired), and emit CSV files plus a manifest of how figure parameters were
resolved.  The RNG is numpy's default PCG64, seeded with 64-bit integers.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .audit import audit_trace
from .channel import ChannelParams, Position3
from .itsso import (
    InfeasibleScenario,
    ItssoConfig,
    Solution,
    initial_solution,
    run_itsso,
)
from .sensing import SensingParams, Task
from .trajectory import KinematicParams

__all__ = [
    "ScenarioConfig",
    "Scenario",
    "ExperimentResult",
    "generate_scenario",
    "nc_config",
    "fsl_plan",
    "run_scheme",
    "run_experiment",
    "parse_config_text",
    "load_config",
    "audit_solution",
    "EXPERIMENT_IDS",
]

SCHEMES = ("itsso", "nc", "fsl")

_ITSSO_SEED_OFFSET = 1_000_003  # decouples the schedule RNG from scenario draws


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one scenario family."""

    m: int = 20  # UAVs
    n: int = 20  # tasks
    k: int = 10  # subcarriers
    q: int = 4  # workers per task
    area: tuple[float, float, float] = (500.0, 500.0, 100.0)
    channel: ChannelParams = field(default_factory=ChannelParams)
    sensing: SensingParams = field(default_factory=SensingParams)
    kinematics: KinematicParams = field(default_factory=KinematicParams)
    data_size: float = 20e6  # bits per task
    seed: int = 0
    scheme: str = "itsso"
    fsl_height: float = 50.0
    uneven_split: bool = False  # derived configs may round the per-UAV load

    def __post_init__(self):
        if min(self.m, self.n, self.k, self.q) < 1:
            raise ValueError("m, n, k, q must all be at least 1")
        if self.q > self.m:
            raise ValueError(f"q={self.q} workers cannot exceed m={self.m} UAVs")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.data_size <= 0:
            raise ValueError("data_size must be positive")
        if not self.uneven_split and (self.n * self.q) % self.m != 0:
            raise ValueError(
                f"equal split impossible: n*q={self.n * self.q} not divisible by m={self.m}")

    @property
    def n_per_uav(self) -> int:
        return (self.n * self.q) // self.m


@dataclass
class Scenario:
    """One realized instance: geometry plus the task-to-UAV assignment."""

    config: ScenarioConfig
    uav_starts: dict[int, Position3]
    tasks: dict[int, Task]
    routes: dict[int, list[int]]

    @property
    def k(self) -> int:
        return self.config.k

    @property
    def channel(self) -> ChannelParams:
        return self.config.channel

    @property
    def kinematics(self) -> KinematicParams:
        return self.config.kinematics

    @property
    def sensing(self) -> SensingParams:
        return self.config.sensing


def _deal_assignment(rng: np.random.Generator, n: int, q: int,
                     bucket_sizes: list[int]) -> list[list[int]]:
    """Deal q copies of each task into buckets without duplicates per bucket."""
    m = len(bucket_sizes)
    for _ in range(200):
        slots = [j for j in range(n) for _ in range(q)]
        rng.shuffle(slots)
        buckets: list[list[int]] = []
        pos = 0
        for size in bucket_sizes:
            buckets.append(slots[pos:pos + size])
            pos += size
        # repair duplicate tasks inside a bucket by swapping across buckets
        ok = True
        for bi in range(m):
            guard = 0
            while len(set(buckets[bi])) != len(buckets[bi]):
                guard += 1
                if guard > 50 * n * q:
                    ok = False
                    break
                seen = set()
                di = next(i for i, t in enumerate(buckets[bi])
                          if t in seen or seen.add(t))
                bj = int(rng.integers(m))
                if bj == bi or not buckets[bj]:
                    continue
                dj = int(rng.integers(len(buckets[bj])))
                a, b = buckets[bi][di], buckets[bj][dj]
                if a == b:
                    continue
                if b in buckets[bi] or a in buckets[bj]:
                    continue
                buckets[bi][di], buckets[bj][dj] = b, a
            if not ok:
                break
        if ok:
            return buckets
    raise RuntimeError("could not deal a duplicate-free assignment")


def generate_scenario(config: ScenarioConfig) -> Scenario:
    """Deterministic instance for the config's seed."""
    rng = np.random.default_rng(config.seed)
    ax, ay, az = config.area
    task_xy = rng.uniform((0.0, 0.0), (ax, ay), size=(config.n, 2))
    start_xyz = rng.uniform((0.0, 0.0, 0.0), (ax, ay, az), size=(config.m, 3))

    if config.uneven_split:
        base, rem = divmod(config.n * config.q, config.m)
        sizes = [base + (1 if i < rem else 0) for i in range(config.m)]
    else:
        sizes = [config.n_per_uav] * config.m
    buckets = _deal_assignment(rng, config.n, config.q, sizes)

    workers: dict[int, list[int]] = {j: [] for j in range(config.n)}
    routes: dict[int, list[int]] = {}
    for uav, bucket in enumerate(buckets):
        routes[uav] = list(bucket)
        for tid in bucket:
            workers[tid].append(uav)

    tasks = {
        j: Task(
            id=j,
            location=Position3(float(task_xy[j, 0]), float(task_xy[j, 1]), 0.0),
            data_size=config.data_size,
            workers=tuple(sorted(workers[j])),
        )
        for j in range(config.n)
    }
    h_min = config.kinematics.h_min
    starts = {
        i: Position3(
            float(start_xyz[i, 0]), float(start_xyz[i, 1]),
            float(max(start_xyz[i, 2], h_min)),
        )
        for i in range(config.m)
    }
    return Scenario(config=config, uav_starts=starts, tasks=tasks, routes=routes)


def nc_config(base: ScenarioConfig, seed: int | None = None) -> ScenarioConfig:
    """Non-cooperative variant: q = 1, same tasks and per-UAV load.

    The UAV count scales to n / n_per_uav; when that is fractional the
    closest integer is used with a near-equal load split.
    """
    n_i = base.n_per_uav
    m = max(1, round(base.n / n_i))
    return replace(
        base, m=m, q=1, scheme="nc",
        uneven_split=(m * n_i != base.n),
        seed=base.seed if seed is None else seed,
    )


def fsl_plan(scenario: Scenario, cfg: ItssoConfig | None = None,
             record_trace: bool = False) -> Solution:
    """Fixed-sensing-location scheme: altitude pinned, no placement search,
    the probability constraint waived."""
    h = scenario.config.fsl_height
    fixed = {}
    for uav, route in scenario.routes.items():
        for idx, tid in enumerate(route):
            loc = scenario.tasks[tid].location
            fixed[(uav, idx)] = Position3(loc.x, loc.y, h)
    return run_itsso(
        scenario, cfg, placement=False, sensing_check=False,
        fixed_locations=fixed, record_trace=record_trace,
    )


def run_scheme(scenario: Scenario, cfg: ItssoConfig | None = None,
               record_trace: bool = False) -> Solution:
    """Dispatch on the scenario's scheme."""
    scheme = scenario.config.scheme
    if scheme == "fsl":
        return fsl_plan(scenario, cfg, record_trace)
    return run_itsso(scenario, cfg, record_trace=record_trace)


def audit_solution(scenario: Scenario, solution: Solution) -> list[str]:
    """Independent constraint audit of a solution's trace."""
    if solution.outcome.trace is None:
        raise ValueError("solution was produced without a trace; rerun with record_trace")
    return audit_trace(
        solution.outcome.trace,
        scenario.uav_starts,
        scenario.routes,
        scenario.tasks,
        scenario.channel,
        scenario.kinematics,
        scenario.sensing,
        scenario.k,
        check_sensing_prob=(scenario.config.scheme != "fsl"),
    )


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

@dataclass
class ExperimentResult:
    experiment: str
    rows: list[tuple[str, float, float, float, int]]  # scheme, x, mean, std, n
    raw: list[tuple[str, float, int, float]]  # scheme, x, instance, value
    manifest: str

    def mean(self, scheme: str, x: float) -> float:
        for s, xv, mean, _, _ in self.rows:
            if s == scheme and xv == x:
                return mean
        raise KeyError((scheme, x))

    def raw_values(self, scheme: str, x: float) -> list[float]:
        return [v for s, xv, _, v in self.raw if s == scheme and xv == x]


def _default_config() -> ScenarioConfig:
    return ScenarioConfig()


def _table_point(base: ScenarioConfig, *, m: int, n: int, q: int,
                 scheme: str = "itsso", uneven: bool = False, **kw) -> ScenarioConfig:
    return replace(base, m=m, n=n, q=q, scheme=scheme, uneven_split=uneven, **kw)


def _fig4_points(base: ScenarioConfig):
    # group-size sweep at n=20 tasks, 4 tasks per UAV: m = n*q / n_i = 5q
    for q in range(1, 9):
        yield float(q), [("itsso", _table_point(base, m=5 * q, n=20, q=q))]


def _fig5_points(base: ScenarioConfig):
    # per-UAV load sweep at m=20, q=4: n = 5 * n_i; nc keeps (n, n_i) with m = 5
    for n_i in (2, 4, 6, 8):
        n = 5 * n_i
        itsso = _table_point(base, m=20, n=n, q=4)
        nc = nc_config(itsso)
        fsl = replace(itsso, scheme="fsl")
        yield float(n_i), [("itsso", itsso), ("nc", nc), ("fsl", fsl)]


def _fig6_points(base: ScenarioConfig):
    # threshold sweep at n=20, n_i=4: itsso/fsl m=20 q=4, nc m=5 q=1
    for pr in (0.5, 0.6, 0.7, 0.8, 0.9):
        sensing = SensingParams(lam=base.sensing.lam, pr_th=pr)
        itsso = _table_point(base, m=20, n=20, q=4, sensing=sensing)
        nc = nc_config(itsso)
        fsl = replace(itsso, scheme="fsl")
        yield float(pr), [("itsso", itsso), ("nc", nc), ("fsl", fsl)]


def _fig7_points(base: ScenarioConfig):
    # payload sweep at n=20, m=10, q=4 (n_i = 8); nc rounds m to 3
    for rs_mbit in (5, 10, 15, 20, 25, 30, 35, 40):
        data = rs_mbit * 1e6
        itsso = _table_point(base, m=10, n=20, q=4, data_size=data)
        nc = nc_config(itsso)
        fsl = replace(itsso, scheme="fsl")
        yield float(rs_mbit), [("itsso", itsso), ("nc", nc), ("fsl", fsl)]


def _fig9_points(base: ScenarioConfig):
    # subcarrier sweep per payload level, m=20, q=4, n=20
    for k in range(1, 11):
        configs = []
        for rs_mbit in (10, 20, 30, 40):
            configs.append((
                f"itsso_rs{rs_mbit}",
                _table_point(base, m=20, n=20, q=4, k=k, data_size=rs_mbit * 1e6),
            ))
        yield float(k), configs


_SWEEPS: dict[str, Callable] = {
    "fig4": _fig4_points,
    "fig5": _fig5_points,
    "fig6": _fig6_points,
    "fig7": _fig7_points,
    "fig9": _fig9_points,
}

_MANIFESTS = {
    "fig4": "group-size sweep q=1..8; n=20, n_i=4, m=5q (equal split)",
    "fig5": "per-UAV load sweep n_i in {2,4,6,8}; itsso/fsl: m=20,q=4,n=5*n_i; "
            "nc: q=1, m=n/n_i=5 so the load matches",
    "fig6": "threshold sweep pr_th in {0.5..0.9}; itsso/fsl: m=20,q=4,n=20; nc: m=5,q=1",
    "fig7": "payload sweep R_s in {5..40} Mbit; itsso/fsl: m=10,q=4,n=20 (n_i=8); "
            "nc: q=1, m=round(20/8)=3 with near-equal loads 7/7/6",
    "fig8": "minimum group size vs threshold 1-10^-x, x=1..6; simulated = smallest q "
            "whose best placement (directly above the task at h_min) is feasible in "
            "the pipeline; theoretical = closed-form ceiling with d0 = h_min",
    "fig9": "subcarrier sweep K=1..10 at R_s in {10,20,30,40} Mbit; m=20,q=4,n=20; "
            "one scheme label per payload level",
}

EXPERIMENT_IDS = ("fig4", "fig5", "fig6", "fig7", "fig8", "fig9")


def _run_job(job) -> tuple[str, float, int, float]:
    label, x, idx, config = job
    scenario = generate_scenario(config)
    cfg = ItssoConfig(rng_seed=config.seed + _ITSSO_SEED_OFFSET)
    sol = run_scheme(scenario, cfg, record_trace=False)
    return (label, x, idx, float(sol.t_max))


def _min_q_simulated(base: ScenarioConfig, pr_th: float, q_cap: int = 16) -> int:
    """Smallest group size the pipeline accepts: probes the initial-solution
    feasibility of a one-task scenario at each q."""
    sensing = SensingParams(lam=base.sensing.lam, pr_th=pr_th)
    for q in range(1, q_cap + 1):
        cfg = replace(base, m=q, n=1, q=q, sensing=sensing, uneven_split=False)
        scenario = generate_scenario(cfg)
        try:
            initial_solution(scenario, ItssoConfig(rng_seed=cfg.seed))
            return q
        except InfeasibleScenario:
            continue
    raise RuntimeError(f"no feasible group size up to {q_cap} for pr_th={pr_th}")


def _min_q_theoretical(base: ScenarioConfig, pr_th: float) -> int:
    from .sensing import min_cooperative_uavs

    sensing = SensingParams(lam=base.sensing.lam, pr_th=pr_th)
    return min_cooperative_uavs(base.kinematics.h_min, sensing)


def _run_fig8(base: ScenarioConfig, instances: int, seed: int):
    raw = []
    for exponent in range(1, 7):
        pr = 1.0 - 10.0 ** (-exponent)
        for idx in range(min(instances, 10)):
            cfg = replace(base, seed=seed + idx)
            raw.append(("simulated", float(exponent), idx,
                        float(_min_q_simulated(cfg, pr))))
            raw.append(("theoretical", float(exponent), idx,
                        float(_min_q_theoretical(cfg, pr))))
    return raw


def run_experiment(
    experiment: str,
    overrides: Mapping | None = None,
    instances: int = 200,
    out_dir: str | os.PathLike | None = None,
    seed: int = 1000,
    workers: int = 0,
) -> ExperimentResult:
    """Run one figure experiment and (optionally) write its CSV files.

    ``overrides`` patches the base Table-defaults config (e.g. k, sensing).
    Instance i of every scheme runs on seed ``seed + i`` for pairing.
    """
    if experiment not in EXPERIMENT_IDS:
        raise ValueError(f"unknown experiment {experiment!r}; pick one of {EXPERIMENT_IDS}")
    base = _default_config()
    if overrides:
        base = replace(base, **dict(overrides))

    if experiment == "fig8":
        raw = _run_fig8(base, instances, seed)
    else:
        jobs = []
        for x, labelled in _SWEEPS[experiment](base):
            for label, cfg in labelled:
                for idx in range(instances):
                    jobs.append((label, x, idx, replace(cfg, seed=seed + idx)))
        if workers and workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                raw = list(pool.map(_run_job, jobs, chunksize=4))
        else:
            raw = [_run_job(j) for j in jobs]

    raw.sort(key=lambda r: (r[0], r[1], r[2]))
    groups: dict[tuple[str, float], list[float]] = {}
    for label, x, idx, value in raw:
        groups.setdefault((label, x), []).append(value)
    rows = []
    for (label, x), values in sorted(groups.items()):
        arr = np.asarray(values)
        std = float(arr.std(ddof=1)) if len(values) > 1 else 0.0
        rows.append((label, x, float(arr.mean()), std, len(values)))

    result = ExperimentResult(
        experiment=experiment, rows=rows, raw=raw,
        manifest=_MANIFESTS[experiment],
    )
    if out_dir is not None:
        _write_experiment(result, Path(out_dir))
    return result


def _write_experiment(result: ExperimentResult, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / f"{result.experiment}.csv", "w", newline="",
              encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "x", "mean_Tmax", "std_Tmax", "n"])
        for label, x, mean, std, n in result.rows:
            w.writerow([label, repr(x), repr(mean), repr(std), n])
    with open(out_dir / f"{result.experiment}_raw.csv", "w", newline="",
              encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "x", "instance", "t_max"])
        for label, x, idx, value in result.raw:
            w.writerow([label, repr(x), idx, repr(value)])
    with open(out_dir / f"{result.experiment}_manifest.txt", "w",
              encoding="utf-8") as fh:
        fh.write(result.manifest + "\n")


# ---------------------------------------------------------------------------
# config-file ingestion
# ---------------------------------------------------------------------------

_CONFIG_KEYS: dict[str, Callable[[str], object]] = {
    "M": int, "N": int, "K": int, "q": int, "seed": int,
    "scheme": str, "data_size": float, "fsl_height": float,
    "area.x": float, "area.y": float, "area.z": float,
    "channel.bs_height": float, "channel.carrier_freq": float,
    "channel.subcarrier_bandwidth": float, "channel.noise_power": float,
    "channel.tx_power": float, "channel.slot_duration": float,
    "sensing.lambda": float, "sensing.pr_th": float,
    "kinematics.v_max": float, "kinematics.h_min": float,
}


def parse_config_text(text: str) -> ScenarioConfig:
    """Key-value scenario config; '#' starts a comment; unknown keys refuse."""
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = body.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        if key in values:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _CONFIG_KEYS[key](raw)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for {key!r}: {raw!r}") from exc

    base = ScenarioConfig()
    area = (
        values.get("area.x", base.area[0]),
        values.get("area.y", base.area[1]),
        values.get("area.z", base.area[2]),
    )
    channel = ChannelParams(
        bs_height=values.get("channel.bs_height", base.channel.bs_height),
        carrier_freq=values.get("channel.carrier_freq", base.channel.carrier_freq),
        subcarrier_bandwidth=values.get(
            "channel.subcarrier_bandwidth", base.channel.subcarrier_bandwidth),
        noise_power=values.get("channel.noise_power", base.channel.noise_power),
        tx_power=values.get("channel.tx_power", base.channel.tx_power),
        slot_duration=values.get("channel.slot_duration", base.channel.slot_duration),
    )
    sensing = SensingParams(
        lam=values.get("sensing.lambda", base.sensing.lam),
        pr_th=values.get("sensing.pr_th", base.sensing.pr_th),
    )
    kin = KinematicParams(
        v_max=values.get("kinematics.v_max", base.kinematics.v_max),
        h_min=values.get("kinematics.h_min", base.kinematics.h_min),
    )
    return ScenarioConfig(
        m=values.get("M", base.m),
        n=values.get("N", base.n),
        k=values.get("K", base.k),
        q=values.get("q", base.q),
        area=area,
        channel=channel,
        sensing=sensing,
        kinematics=kin,
        data_size=values.get("data_size", base.data_size),
        seed=values.get("seed", base.seed),
        scheme=values.get("scheme", base.scheme),
        fsl_height=values.get("fsl_height", base.fsl_height),
    )


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())

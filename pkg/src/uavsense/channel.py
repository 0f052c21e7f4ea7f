"""Urban-macro air-to-ground uplink model.

Pure evaluation of the UAV-to-BS link on one subcarrier: 3D/horizontal
distances, LoS probability, average pathloss, SNR and the per-slot
achievable rate.  All dBm-to-linear conversions happen once when the
parameter set is constructed; everything on the hot path is plain float
math in linear milliwatts.

Small-scale fading is deliberately absent: the rate is a deterministic
function of geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

__all__ = [
    "ChannelDomainError",
    "Position3",
    "ChannelParams",
    "LinkBudget",
    "los_probability",
    "average_pathloss",
    "snr",
    "link_rate",
    "link_budget",
]

_LOG10 = math.log10
_EXP = math.exp


class ChannelDomainError(ValueError):
    """Geometry outside the model's domain (z <= 0, coincident BS, non-finite)."""


class Position3(NamedTuple):
    """Point in meters.  z is altitude above ground (tasks sit at z = 0)."""

    x: float
    y: float
    z: float

    def dist(self, other: "Position3") -> float:
        return math.sqrt(
            (self.x - other.x) ** 2
            + (self.y - other.y) ** 2
            + (self.z - other.z) ** 2
        )

    def horizontal_dist(self, other: "Position3") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)


@dataclass(frozen=True)
class ChannelParams:
    """Link parameters.  Powers are configured in dBm, frequency in GHz.

    Derived linear quantities are cached at construction:
    ``tx_mw`` / ``noise_mw`` (milliwatts) and the two constant dB terms
    of the pathloss expressions.
    """

    bs_height: float = 25.0  # H, meters
    carrier_freq: float = 2.0  # f_c, GHz
    subcarrier_bandwidth: float = 1e6  # W_B, Hz
    noise_power: float = -96.0  # sigma^2, dBm
    tx_power: float = 23.0  # P_U, dBm
    slot_duration: float = 1.0  # seconds; the paper leaves this open, 1 s default

    tx_mw: float = field(init=False, repr=False)
    noise_mw: float = field(init=False, repr=False)
    _fc_db: float = field(init=False, repr=False)
    _nlos_db: float = field(init=False, repr=False)

    def __post_init__(self):
        if not (self.bs_height > 0 and self.carrier_freq > 0):
            raise ValueError("bs_height and carrier_freq must be positive")
        if not (self.subcarrier_bandwidth > 0 and self.slot_duration > 0):
            raise ValueError("subcarrier_bandwidth and slot_duration must be positive")
        object.__setattr__(self, "tx_mw", 10.0 ** (self.tx_power / 10.0))
        object.__setattr__(self, "noise_mw", 10.0 ** (self.noise_power / 10.0))
        object.__setattr__(self, "_fc_db", 20.0 * _LOG10(self.carrier_freq))
        object.__setattr__(
            self, "_nlos_db", 20.0 * _LOG10(40.0 * math.pi * self.carrier_freq / 3.0)
        )

    @property
    def bs_position(self) -> Position3:
        return Position3(0.0, 0.0, self.bs_height)


@dataclass(frozen=True)
class LinkBudget:
    """All intermediate link quantities for one UAV position."""

    distance_to_bs: float  # meters
    horizontal_distance: float  # meters
    los_prob: float  # [0, 1]
    avg_pathloss: float  # dB
    snr: float  # linear ratio
    rate: float  # bits per slot (0 when unscheduled)


def _check_geometry(uav: Position3) -> None:
    if not uav.is_finite():
        raise ChannelDomainError(f"non-finite UAV position {uav}")
    if uav.z <= 0.0:
        raise ChannelDomainError(f"UAV altitude must be positive, got z={uav.z}")


def los_probability(uav: Position3, params: ChannelParams) -> float:
    """LoS probability of the UAV-BS link, clamped to [0, 1].

    Piecewise in the horizontal distance d_H: equals 1 up to the
    altitude-dependent breakpoint d_1, decays beyond it.
    """
    _check_geometry(uav)
    d_h = math.hypot(uav.x, uav.y)
    log_z = _LOG10(uav.z)
    d1 = max(460.0 * log_z - 700.0, 18.0)
    if d_h <= d1:
        return 1.0
    p0 = 4300.0 * log_z - 3800.0
    raw = d1 / d_h + _EXP((-d_h / p0) * (1.0 - d1 / d_h))
    if raw < 0.0:
        return 0.0
    return raw if raw < 1.0 else 1.0


def average_pathloss(uav: Position3, params: ChannelParams) -> float:
    """Average pathloss in dB: LoS/NLoS pathlosses mixed by the LoS probability.

    All logs are base-10 (dB convention); the carrier frequency enters in GHz.
    """
    _check_geometry(uav)
    d = math.sqrt(uav.x * uav.x + uav.y * uav.y + (uav.z - params.bs_height) ** 2)
    if d <= 0.0:
        raise ChannelDomainError("UAV coincides with the BS")
    p_los = los_probability(uav, params)
    log_d = _LOG10(d)
    pl_los = 28.0 + 22.0 * log_d + params._fc_db
    if p_los >= 1.0:
        return pl_los
    pl_nlos = -17.5 + (46.0 - 7.0 * _LOG10(uav.z)) * log_d + params._nlos_db
    return p_los * pl_los + (1.0 - p_los) * pl_nlos


def snr(uav: Position3, params: ChannelParams) -> float:
    """Linear SNR at the BS for a transmitting UAV."""
    pl_db = average_pathloss(uav, params)
    return params.tx_mw / (10.0 ** (pl_db / 10.0)) / params.noise_mw


def link_rate(uav: Position3, scheduled: bool, params: ChannelParams) -> float:
    """Achievable bits per slot; zero whenever the UAV holds no subcarrier."""
    if not scheduled:
        _check_geometry(uav)
        return 0.0
    gamma = snr(uav, params)
    return params.subcarrier_bandwidth * math.log2(1.0 + gamma) * params.slot_duration


def link_budget(uav: Position3, scheduled: bool, params: ChannelParams) -> LinkBudget:
    """Assemble every link quantity at once (diagnostics / audit)."""
    _check_geometry(uav)
    d = math.sqrt(uav.x * uav.x + uav.y * uav.y + (uav.z - params.bs_height) ** 2)
    d_h = math.hypot(uav.x, uav.y)
    p_los = los_probability(uav, params)
    pl = average_pathloss(uav, params)
    gamma = params.tx_mw / (10.0 ** (pl / 10.0)) / params.noise_mw
    rate = 0.0
    if scheduled:
        rate = params.subcarrier_bandwidth * math.log2(1.0 + gamma) * params.slot_duration
    return LinkBudget(
        distance_to_bs=d,
        horizontal_distance=d_h,
        los_prob=p_los,
        avg_pathloss=pl,
        snr=gamma,
        rate=rate,
    )


def rate_at(x: float, y: float, z: float, params: ChannelParams) -> float:
    """Scheduled rate at raw coordinates: the planner/simulator hot path.

    Same result as ``link_rate(Position3(x, y, z), True, params)`` with the
    domain checks assumed to have been done by the caller.
    """
    log_z = _LOG10(z)
    d1 = 460.0 * log_z - 700.0
    if d1 < 18.0:
        d1 = 18.0
    d_h = math.hypot(x, y)
    dz = z - params.bs_height
    d = math.sqrt(x * x + y * y + dz * dz)
    log_d = _LOG10(d)
    pl_los = 28.0 + 22.0 * log_d + params._fc_db
    if d_h <= d1:
        pl = pl_los
    else:
        p0 = 4300.0 * log_z - 3800.0
        p_los = d1 / d_h + _EXP((-d_h / p0) * (1.0 - d1 / d_h))
        if p_los >= 1.0:
            pl = pl_los
        else:
            if p_los < 0.0:
                p_los = 0.0
            pl_nlos = -17.5 + (46.0 - 7.0 * log_z) * log_d + params._nlos_db
            pl = p_los * pl_los + (1.0 - p_los) * pl_nlos
    gamma = params.tx_mw / (10.0 ** (pl / 10.0)) / params.noise_mw
    return params.subcarrier_bandwidth * math.log2(1.0 + gamma) * params.slot_duration

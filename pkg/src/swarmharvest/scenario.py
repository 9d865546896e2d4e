"""Domain types and the random scenario generator.

Every type here is an immutable value object; arrays are frozen after
construction so instances can be shared freely across workers.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ParameterError

LIGHT_SPEED = 299792458.0


def _freeze(arr):
    a = np.ascontiguousarray(arr)
    a.flags.writeable = False
    return a


def dbm_to_watt(dbm):
    return 10.0 ** (dbm / 10.0) / 1000.0


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    """Air-to-ground channel constants.

    beta, psi        environment constants of the sigmoid LoS model
    carrier_freq     Hz
    mu_los, mu_nlos  linear excess path loss for the two propagation states
    path_exponent    distance exponent of the free-space term
    """

    beta: float = 11.95
    psi: float = 0.14
    carrier_freq: float = 2.0e9
    light_speed: float = LIGHT_SPEED
    path_exponent: float = 2.0
    mu_los: float = db_to_linear(3.0)
    mu_nlos: float = db_to_linear(23.0)

    def __post_init__(self):
        if not (self.mu_nlos > self.mu_los > 1.0):
            raise ParameterError("excess losses must satisfy mu_nlos > mu_los > 1")
        if self.carrier_freq <= 0 or self.light_speed <= 0:
            raise ParameterError("carrier frequency and light speed must be positive")

    @property
    def kappa0(self):
        # free-space constant, 1/m
        return 4.0 * math.pi * self.carrier_freq / self.light_speed

    @classmethod
    def urban_2ghz(cls):
        return cls()


@dataclass(frozen=True)
class RadioParams:
    """Power-domain constants shared by every device.

    p_ut          node transmit power, W
    eh_eff        combined harvesting efficiency (conversion x duty), in (0, 1]
    rho           minimum received power for harvesting to engage, W
    gamma         linear SNR threshold for uplink decoding
    noise_power   receiver noise power, W
    """

    p_ut: float = dbm_to_watt(40.0)
    eh_eff: float = 0.5
    rho: float = dbm_to_watt(-60.0)
    gamma: float = db_to_linear(5.0)
    noise_power: float = dbm_to_watt(-120.0)

    def __post_init__(self):
        for name in ("p_ut", "rho", "gamma", "noise_power"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be strictly positive")
        if not (0.0 < self.eh_eff <= 1.0):
            raise ParameterError("eh_eff must lie in (0, 1]")

    @property
    def epsilon(self):
        # harvested-power-to-noise conversion factor, per device
        return self.eh_eff * self.p_ut / self.noise_power

    @classmethod
    def from_dbm(cls, p_ut_dbm=40.0, rho_dbm=-60.0, gamma_db=5.0,
                 noise_dbm=-120.0, eh_eff=0.5):
        """Build from log-domain figures. Powers are dBm, gamma is dB."""
        return cls(p_ut=dbm_to_watt(p_ut_dbm), eh_eff=eh_eff,
                   rho=dbm_to_watt(rho_dbm), gamma=db_to_linear(gamma_db),
                   noise_power=dbm_to_watt(noise_dbm))


@dataclass(frozen=True)
class Scenario:
    """The world being optimized: K ground devices, N hovering nodes, M subcarriers."""

    devices: np.ndarray          # K x 3, z column identically zero
    uav_count: int
    channel_count: int
    channel: ChannelParams = field(default_factory=ChannelParams)
    radio: RadioParams = field(default_factory=RadioParams)
    hover_time: float = 1.0
    region_radius: float = 80.0
    altitude_min: float = 1.0
    altitude_max: float = 150.0
    seed: int = 0

    def __post_init__(self):
        dev = _freeze(np.asarray(self.devices, dtype=float))
        if dev.ndim != 2 or dev.shape[1] != 3:
            raise ParameterError("devices must be a K x 3 array")
        if dev.shape[0] < 1:
            raise ParameterError("need at least one device")
        if np.any(dev[:, 2] != 0.0):
            raise ParameterError("device altitude must be exactly zero")
        object.__setattr__(self, "devices", dev)
        if self.uav_count < 1 or self.channel_count < 1:
            raise ParameterError("uav_count and channel_count must be >= 1")
        if self.hover_time <= 0 or self.region_radius <= 0:
            raise ParameterError("hover_time and region_radius must be positive")
        if not (0 < self.altitude_min < self.altitude_max):
            raise ParameterError("altitude bounds must satisfy 0 < min < max")

    @property
    def device_count(self):
        return self.devices.shape[0]

    @property
    def device_xy(self):
        return self.devices[:, :2]

    def to_json(self):
        payload = {
            "devices": self.devices.tolist(),
            "uav_count": self.uav_count,
            "channel_count": self.channel_count,
            "hover_time": self.hover_time,
            "region_radius": self.region_radius,
            "altitude_min": self.altitude_min,
            "altitude_max": self.altitude_max,
            "seed": self.seed,
            "channel": {
                "beta": self.channel.beta, "psi": self.channel.psi,
                "carrier_freq": self.channel.carrier_freq,
                "light_speed": self.channel.light_speed,
                "path_exponent": self.channel.path_exponent,
                "mu_los": self.channel.mu_los, "mu_nlos": self.channel.mu_nlos,
            },
            "radio": {
                "p_ut": self.radio.p_ut, "eh_eff": self.radio.eh_eff,
                "rho": self.radio.rho, "gamma": self.radio.gamma,
                "noise_power": self.radio.noise_power,
            },
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(devices=np.asarray(d["devices"]),
                   uav_count=d["uav_count"], channel_count=d["channel_count"],
                   channel=ChannelParams(**d["channel"]), radio=RadioParams(**d["radio"]),
                   hover_time=d["hover_time"], region_radius=d["region_radius"],
                   altitude_min=d["altitude_min"], altitude_max=d["altitude_max"],
                   seed=d["seed"])

    def content_hash(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def with_radio(self, radio):
        return replace(self, radio=radio)


def generate_scenario(k, radius, seed, uav_count=4, channel_count=12,
                      channel=None, radio=None, **kwargs):
    """Sample k device positions i.i.d. uniform over the disc of the given radius.

    Inverse-CDF sampling (r = R * sqrt(u), uniform angle) keeps the draw count
    fixed, so a given seed always yields the same scenario.
    """
    if k < 1:
        raise ParameterError("k must be >= 1")
    if radius <= 0:
        raise ParameterError("radius must be positive")
    rng = np.random.default_rng(seed)
    u = rng.random(k)
    ang = rng.random(k) * 2.0 * math.pi
    r = radius * np.sqrt(u)
    devices = np.column_stack([r * np.cos(ang), r * np.sin(ang), np.zeros(k)])
    return Scenario(devices=devices, uav_count=uav_count, channel_count=channel_count,
                    channel=channel or ChannelParams(), radio=radio or RadioParams(),
                    region_radius=radius, seed=seed, **kwargs)


@dataclass(frozen=True)
class Deployment:
    """Hover positions for both mission phases plus the placement slack vectors."""

    dl_positions: np.ndarray     # N x 3
    ul_positions: np.ndarray     # N x 3
    dl_slack: np.ndarray = None  # per-device, downlink quadratic-transform slack
    ul_slack: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "dl_positions", _freeze(np.asarray(self.dl_positions, float)))
        object.__setattr__(self, "ul_positions", _freeze(np.asarray(self.ul_positions, float)))
        for name in ("dl_slack", "ul_slack"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, _freeze(np.asarray(v, float)))

    def replace(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class AssociationState:
    """The three binary link matrices.

    dl_energy  K x N, 1 where the device harvests from the node while charging
    ul_info    K x N, exactly one 1 per row: who collects the device's data
    ul_energy  K x N, 1 where the device harvests during collection epochs
    """

    dl_energy: np.ndarray
    ul_info: np.ndarray
    ul_energy: np.ndarray

    def __post_init__(self):
        for name in ("dl_energy", "ul_info", "ul_energy"):
            m = _freeze(np.asarray(getattr(self, name), dtype=np.int8))
            object.__setattr__(self, name, m)

    def validate(self):
        if np.any(self.dl_energy.sum(axis=1) < 1):
            raise ParameterError("every device needs at least one charging node")
        if np.any(self.ul_info.sum(axis=1) != 1):
            raise ParameterError("every device needs exactly one collecting node")
        # ul_energy rows may be empty: a device out of everyone's activation
        # range while transmitting simply harvests nothing in that phase
        return self

    @property
    def serving_uav(self):
        # index of the single collecting node per device
        return np.argmax(self.ul_info, axis=1)

    def served_devices(self, uav):
        return np.flatnonzero(self.ul_info[:, uav] == 1)

    def replace(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class Schedule:
    """Epoch membership. s[i, k-1] = 1 when device i transmits in epoch k of its node."""

    s: np.ndarray                # K x L_max
    epochs_per_uav: np.ndarray   # N, number of equal epochs each node divides its window into

    def __post_init__(self):
        object.__setattr__(self, "s", _freeze(np.asarray(self.s, dtype=np.int8)))
        object.__setattr__(self, "epochs_per_uav", _freeze(np.asarray(self.epochs_per_uav, dtype=int)))

    @property
    def epoch_of(self):
        # 1-based epoch index per device
        return np.argmax(self.s, axis=1) + 1

    def validate(self, assoc=None, channel_count=None):
        if np.any(self.s.sum(axis=1) != 1):
            raise ParameterError("each device must appear in exactly one epoch")
        if assoc is not None and channel_count is not None:
            for j in range(self.epochs_per_uav.shape[0]):
                members = assoc.served_devices(j)
                if members.size == 0:
                    continue
                counts = self.s[members].sum(axis=0)
                if np.any(counts > channel_count):
                    raise ParameterError("per-epoch device count exceeds the subcarrier budget")
        return self


@dataclass(frozen=True)
class TimeAllocation:
    """Normalized split of the hover block: tau0 charging, tau1 collection."""

    tau0: float
    tau1: float

    def __post_init__(self):
        if self.tau0 <= 0 or self.tau1 <= 0:
            raise ParameterError("both time shares must be strictly positive")
        if self.tau0 + self.tau1 > 1.0 + 1e-12:
            raise ParameterError("time shares exceed the hover block")


@dataclass(frozen=True)
class SolverCoefficients:
    """Per-device constants consumed by the association and placement subproblems.

    theta0/theta1 capture how charging-phase and collection-phase harvesting
    feed the device's SNR; the remaining vectors are the per-branch shorthands
    the subproblem objectives are written in. varpi is the worst SNR-threshold
    ratio at the time split the coefficients were built with, and binding_pair
    is the (device, epoch) pair that caps the feasible charging share.
    """

    theta0: np.ndarray
    theta1: np.ndarray
    phi: np.ndarray
    gamma_cap: np.ndarray
    lambda_cap: np.ndarray
    omega_cap: np.ndarray
    iota: np.ndarray           # K x N, peer-node collection-phase harvest, own column excluded
    chi: np.ndarray            # K x N, energy feed entering the SNR feasibility bound
    w: np.ndarray              # K x L_max threshold-violation indicators
    varpi: float
    binding_pair: tuple        # (device index, epoch) that binds the SNR constraint
    gamma: float               # SNR threshold the coefficients were built with
    tau_snapshot: tuple        # (tau0, tau1) the time-dependent entries were built with
    epsilon: np.ndarray        # per-device harvested-power-to-noise factor
    serving: np.ndarray        # collecting-node index per device
    gain_ul: np.ndarray        # K x N collection-phase gains
    gain_dl: np.ndarray        # K x N charging-phase gains
    dl_harvest_sum: np.ndarray  # per-device sum of charging gains over its energy set
    ul_harvest_sum: np.ndarray  # per-device sum of collection gains over its energy set
    serving_gain: np.ndarray    # per-device gain to its collecting node


@dataclass(frozen=True)
class SolutionReport:
    """What a finished run reports back."""

    per_device_rate: np.ndarray
    per_device_throughput: np.ndarray
    sum_throughput: float
    jain: float
    trace: tuple
    feasibility_flags: dict
    iterations: int = 0
    converged: bool = True
    time: TimeAllocation = None
    deployment: Deployment = None
    state: object = None       # final pipeline state, reusable as a warm start

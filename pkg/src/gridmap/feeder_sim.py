"""Synthetic radial-feeder generator with a linearized resistive voltage model.

A feeder has one substation at fixed per-unit voltage, ``k`` service
transformers, and a group of meters behind each transformer. Voltage at a
meter is the substation voltage minus the resistive drop through its
transformer (proportional to the group's total load) minus the drops along
the secondary conductor segments between the transformer and the meter,
plus i.i.d. measurement noise:

    v_i(t) = v_sub - r_xfmr_j * sum_{m in group j} P_m(t)
                   - sum_{segments s on path to i} r_line * (load downstream of s)(t)
                   + eps_i(t)

The secondary is a chain by default (meters in series along one conductor)
or a star (each meter on its own segment). All randomness comes from a
single seed, so a spec reproduces its dataset bit for bit.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from datetime import datetime, timedelta

import numpy as np

from .errors import InputError, NumericalError
from .geo import EARTH_RADIUS_KM
from .ingest import GroundTruth, MeterDataset, TransformerSet

SECONDARY_KINDS = ("chain", "star")


@dataclass
class FeederSpec:
    k: int
    meters_per_xfmr: list[int]
    xfmr_impedance_pu: list[float]
    line_resistance_pu: float
    T: int
    noise_std_pu: float
    seed: int
    substation_voltage_pu: float = 1.0
    secondary: str = "chain"
    # load profile shape
    base_load_pu: float = 0.01
    load_amp_pu: float = 0.01
    load_noise_pu: float = 0.0
    der_injection_pu: float = 0.0
    samples_per_day: int = 96
    # geographic placement; explicit coordinates (radians) override the grid
    xfmr_locations: np.ndarray | None = None
    meter_locations: np.ndarray | None = None
    xfmr_spacing_km: float = 1.0
    meter_radius_km: float = 0.05
    origin_lat_deg: float = 40.0
    origin_lon_deg: float = -105.0

    def __post_init__(self):
        if isinstance(self.meters_per_xfmr, int):
            self.meters_per_xfmr = [self.meters_per_xfmr] * self.k
        self.meters_per_xfmr = [int(n) for n in self.meters_per_xfmr]
        if isinstance(self.xfmr_impedance_pu, (int, float)):
            self.xfmr_impedance_pu = [float(self.xfmr_impedance_pu)] * self.k
        self.xfmr_impedance_pu = [float(r) for r in self.xfmr_impedance_pu]
        if self.xfmr_locations is not None:
            self.xfmr_locations = np.asarray(self.xfmr_locations, dtype=float)
        if self.meter_locations is not None:
            self.meter_locations = np.asarray(self.meter_locations, dtype=float)
        self.validate()

    @property
    def n_meters(self) -> int:
        return sum(self.meters_per_xfmr)

    def validate(self) -> None:
        if self.k < 1:
            raise InputError("k must be at least 1")
        if len(self.meters_per_xfmr) != self.k:
            raise InputError("meters_per_xfmr must have one entry per transformer")
        if any(n < 1 for n in self.meters_per_xfmr):
            raise InputError("every transformer needs at least one meter")
        if len(self.xfmr_impedance_pu) != self.k:
            raise InputError("xfmr_impedance_pu must have one entry per transformer")
        if any(r < 0 for r in self.xfmr_impedance_pu) or self.line_resistance_pu < 0:
            raise InputError("resistances must be nonnegative")
        if self.T < 2:
            raise InputError("T must be at least 2")
        if self.noise_std_pu < 0 or self.load_noise_pu < 0:
            raise InputError("noise levels must be nonnegative")
        if self.der_injection_pu < 0:
            raise InputError("der_injection_pu must be nonnegative")
        if self.secondary not in SECONDARY_KINDS:
            raise InputError(f"secondary must be one of {SECONDARY_KINDS}")
        if self.samples_per_day < 1:
            raise InputError("samples_per_day must be positive")
        if self.xfmr_locations is not None and self.xfmr_locations.shape != (self.k, 2):
            raise InputError("xfmr_locations must be (k, 2)")
        n = self.n_meters
        if self.meter_locations is not None and self.meter_locations.shape != (n, 2):
            raise InputError("meter_locations must be (N, 2)")

    def labels(self) -> np.ndarray:
        """Transformer index of each meter, groups laid out contiguously."""
        return np.repeat(np.arange(self.k), self.meters_per_xfmr)

    def to_json_dict(self) -> dict:
        d = asdict(self)
        for key in ("xfmr_locations", "meter_locations"):
            if d[key] is not None:
                d[key] = [[math.degrees(a), math.degrees(b)] for a, b in d[key]]
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "FeederSpec":
        d = dict(d)
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise InputError(f"unknown feeder spec field(s): {', '.join(sorted(unknown))}")
        for key in ("xfmr_locations", "meter_locations"):
            if d.get(key) is not None:
                d[key] = np.radians(np.asarray(d[key], dtype=float))
        try:
            return cls(**d)
        except TypeError as exc:
            raise InputError(f"bad feeder spec: {exc}") from exc

    @classmethod
    def from_json_file(cls, path) -> "FeederSpec":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot parse feeder spec {path}: {exc}") from exc
        return cls.from_json_dict(d)


@dataclass
class LoadProfileSet:
    loads: np.ndarray               # (N, T) per-unit active power
    labels: np.ndarray              # (N,) transformer index per meter
    floor: float = 0.0              # loads are bounded below by -floor


def _rng(spec: FeederSpec, stream: int) -> np.random.Generator:
    # independent substreams so profiles, noise, and placement each depend
    # only on the seed, not on whether the other draws happened
    return np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(stream,)))


def _build_profile(spec: FeederSpec, rng, amp: float, phase: float) -> np.ndarray:
    t = np.arange(spec.T)
    day = 2.0 * np.pi * t / spec.samples_per_day
    p = spec.base_load_pu + amp * 0.5 * (1.0 + np.sin(day + phase))
    if spec.load_noise_pu > 0:
        p = p + rng.normal(0.0, spec.load_noise_pu, size=spec.T)
    return np.maximum(p, -spec.der_injection_pu)


def generate_profiles(spec: FeederSpec) -> LoadProfileSet:
    """Draw one load profile per meter: base + daily sinusoid + noise.

    Amplitude and phase are drawn per meter. If two meters on different
    transformers end up with exactly identical profiles, the second one is
    redrawn (with an amplitude floor so degenerate specs still separate).
    """
    rng = _rng(spec, 0)
    labels = spec.labels()
    n = spec.n_meters
    loads = np.empty((n, spec.T))
    for i in range(n):
        amp = spec.load_amp_pu * rng.uniform(0.5, 1.5)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        loads[i] = _build_profile(spec, rng, amp, phase)

    def collision(i):
        same = loads[:i] == loads[i]
        return np.any(same.all(axis=1) & (labels[:i] != labels[i]))

    for i in range(n):
        while collision(i):
            amp = max(spec.load_amp_pu, 1e-6) * rng.uniform(0.5, 1.5)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            loads[i] = _build_profile(spec, rng, amp, phase)

    return LoadProfileSet(loads=loads, labels=labels, floor=spec.der_injection_pu)


def _grid_locations(spec: FeederSpec, rng) -> tuple[np.ndarray, np.ndarray]:
    lat0 = math.radians(spec.origin_lat_deg)
    lon0 = math.radians(spec.origin_lon_deg)
    if spec.xfmr_locations is not None:
        xfmr_loc = spec.xfmr_locations.copy()
    else:
        xfmr_loc = np.empty((spec.k, 2))
        dlon = spec.xfmr_spacing_km / (EARTH_RADIUS_KM * math.cos(lat0))
        for j in range(spec.k):
            xfmr_loc[j] = (lat0, lon0 + j * dlon)
    if spec.meter_locations is not None:
        meter_loc = spec.meter_locations.copy()
    else:
        meter_loc = np.empty((spec.n_meters, 2))
        labels = spec.labels()
        for i in range(spec.n_meters):
            lat_x, lon_x = xfmr_loc[labels[i]]
            r = spec.meter_radius_km * math.sqrt(rng.uniform())
            theta = rng.uniform(0.0, 2.0 * np.pi)
            meter_loc[i, 0] = lat_x + (r * math.cos(theta)) / EARTH_RADIUS_KM
            meter_loc[i, 1] = lon_x + (r * math.sin(theta)) / (
                EARTH_RADIUS_KM * math.cos(lat_x)
            )
    return xfmr_loc, meter_loc


def simulate_voltages(
    spec: FeederSpec, loads: LoadProfileSet
) -> tuple[MeterDataset, TransformerSet, GroundTruth]:
    """Run the linearized feeder model and package the result as a dataset."""
    if loads.loads.shape != (spec.n_meters, spec.T):
        raise InputError("load matrix does not match the feeder spec")
    if np.any(loads.loads < -loads.floor - 1e-12):
        raise InputError("loads fall below the configured injection floor")

    labels = spec.labels()
    volts = np.full((spec.n_meters, spec.T), spec.substation_voltage_pu)
    start = 0
    for j, n_j in enumerate(spec.meters_per_xfmr):
        group = loads.loads[start : start + n_j]           # (n_j, T)
        volts[start : start + n_j] -= spec.xfmr_impedance_pu[j] * group.sum(axis=0)
        if spec.line_resistance_pu > 0:
            if spec.secondary == "chain":
                # segment s carries everything from position s to the end of
                # the chain; meter p accumulates segments 1..p
                suffix = np.cumsum(group[::-1], axis=0)[::-1]  # (n_j, T) downstream sums
                volts[start : start + n_j] -= spec.line_resistance_pu * np.cumsum(
                    suffix, axis=0
                )
            else:  # star
                volts[start : start + n_j] -= spec.line_resistance_pu * group
        start += n_j

    if spec.noise_std_pu > 0:
        volts = volts + _rng(spec, 1).normal(0.0, spec.noise_std_pu, size=volts.shape)

    if np.any(volts <= 0.0):
        raise NumericalError(
            "simulated voltage dropped to zero or below; reduce loads or impedances"
        )

    xfmr_loc, meter_loc = _grid_locations(spec, _rng(spec, 2))
    width = max(3, len(str(spec.n_meters - 1)))
    meter_ids = [f"m{i:0{width}d}" for i in range(spec.n_meters)]
    xfmr_ids = [f"x{j}" for j in range(spec.k)]

    dataset = MeterDataset(
        meter_ids=meter_ids,
        voltages=volts,
        timestamps=_timestamps(spec.T),
        locations=meter_loc,
    )
    xfmrs = TransformerSet(xfmr_ids=xfmr_ids, locations=xfmr_loc)
    truth = GroundTruth(
        mapping={meter_ids[i]: xfmr_ids[labels[i]] for i in range(spec.n_meters)},
        meter_ids=meter_ids,
        xfmr_ids=xfmr_ids,
        labels=labels.copy(),
    )
    return dataset, xfmrs, truth


def _timestamps(t: int) -> list[str]:
    # 15-minute cadence starting at an arbitrary fixed epoch; labels only
    start = datetime(2018, 1, 1)
    return [(start + timedelta(minutes=15 * i)).isoformat() for i in range(t)]

"""Experiment configuration: parameter sets, validation, canonical JSON I/O, RNG streams.

A Scenario is the single source of truth for a run. It is immutable, fully
validated at construction/load time, and serializes canonically so that
save -> load -> save is byte-identical. All randomness is derived from the
scenario seed through named streams (see :func:`rng_stream`), so adding
draws in one module never perturbs another.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Scenario file failed to parse or violates an invariant."""


@dataclass(frozen=True)
class RadioParams:
    """Physical-layer constants. Powers in dBm, bandwidths in Hz, rates in bit/s.

    Interference levels are constant linear powers in mW; they default to 0
    because inter-cell coordination is outside the model.
    """

    carrier_freq_hz: float = 2.0e9
    bandwidth_cellular_hz: float = 20.0e6
    bandwidth_d2d_hz: float = 10.0e6
    backhaul_rate_bps: float = 1.5e6
    tx_power_d2d_dbm: float = 23.0
    tx_power_bs_dbm: float = 43.0
    noise_psd_dbm_hz: float = -174.0
    interference_cellular_mw: float = 0.0
    interference_d2d_mw: float = 0.0
    min_rx_power_dbm: float = -50.0


@dataclass(frozen=True)
class MobilityParams:
    """Clustered-random mobility geometry. Distances in meters.

    The network area is the square [0, R)^2 with toroidal wrap; cluster
    middle points are uniform over it, home-points uniform in a disk of
    radius ``cluster_radius_m`` around their middle point. Population is
    cluster_count * homepoints_per_cluster * uts_per_homepoint.
    """

    coverage_radius_m: float = 250.0
    cluster_radius_m: float = 30.0
    cluster_count: int = 2
    homepoints_per_cluster: int = 10
    uts_per_homepoint: int = 2
    decay_exponent: float = 2.5
    slot_count: int = 1000

    @property
    def n_uts(self) -> int:
        return self.cluster_count * self.homepoints_per_cluster * self.uts_per_homepoint


@dataclass(frozen=True)
class ContentParams:
    """Catalog and cost constants. Sizes in bits, costs dimensionless."""

    chunk_count: int = 30
    chunk_size_bits: float = 8.0e6
    ut_cache_size_bits: float = 8.0e6
    zipf_alpha: float = 1.0
    unit_transmission_cost: float = 1e-6
    unit_cache_cost: float = 1.0

    @property
    def chunks_per_ut(self) -> int:
        return int(self.ut_cache_size_bits // self.chunk_size_bits)


@dataclass(frozen=True)
class AuctionParams:
    """Placement-solver and pricing knobs.

    gamma_mode selects the conflict threshold: "fixed" uses gamma_fixed,
    "mean_in_cluster" uses the mean in-cluster encounter probability of the
    realized trace.
    """

    gamma_mode: str = "mean_in_cluster"
    gamma_fixed: float = 0.5
    sdp_gap_tol: float = 1.49e-8
    rounding_threshold: float = 1e-5
    sublease_enum_limit: int = 12


@dataclass(frozen=True)
class Scenario:
    radio: RadioParams = field(default_factory=RadioParams)
    mobility: MobilityParams = field(default_factory=MobilityParams)
    content: ContentParams = field(default_factory=ContentParams)
    auction: AuctionParams = field(default_factory=AuctionParams)
    seed: int = 0


_SECTIONS = {
    "radio": RadioParams,
    "mobility": MobilityParams,
    "content": ContentParams,
    "auction": AuctionParams,
}


def _check(cond: bool, name: str, msg: str) -> None:
    if not cond:
        raise ScenarioError(f"{name}: {msg}")


def validate(sc: Scenario) -> Scenario:
    """Check every invariant; raise ScenarioError naming the offending field."""
    r, m, c, a = sc.radio, sc.mobility, sc.content, sc.auction

    _check(r.bandwidth_cellular_hz > 0, "radio.bandwidth_cellular_hz", "must be > 0")
    _check(r.bandwidth_d2d_hz > 0, "radio.bandwidth_d2d_hz", "must be > 0")
    _check(r.backhaul_rate_bps > 0, "radio.backhaul_rate_bps", "must be > 0")
    noise_mw = 10.0 ** (r.noise_psd_dbm_hz / 10.0) * r.bandwidth_cellular_hz
    _check(np.isfinite(noise_mw) and noise_mw > 0, "radio.noise_psd_dbm_hz",
           "noise power (psd x bandwidth) must be finite and > 0")
    _check(r.interference_cellular_mw >= 0, "radio.interference_cellular_mw", "must be >= 0")
    _check(r.interference_d2d_mw >= 0, "radio.interference_d2d_mw", "must be >= 0")

    _check(m.coverage_radius_m > 0, "mobility.coverage_radius_m", "must be > 0")
    _check(m.cluster_radius_m > 0, "mobility.cluster_radius_m", "must be > 0")
    _check(
        m.cluster_radius_m < m.coverage_radius_m,
        "mobility.cluster_radius_m",
        f"must be < coverage_radius_m ({m.cluster_radius_m} >= {m.coverage_radius_m})",
    )
    _check(m.cluster_count >= 1, "mobility.cluster_count", "must be >= 1")
    _check(m.homepoints_per_cluster >= 1, "mobility.homepoints_per_cluster", "must be >= 1")
    _check(m.uts_per_homepoint >= 1, "mobility.uts_per_homepoint", "must be >= 1")
    _check(m.slot_count >= 1, "mobility.slot_count", "must be >= 1")
    _check(m.decay_exponent > 0, "mobility.decay_exponent", "must be > 0")

    _check(c.chunk_count >= 1, "content.chunk_count", "must be >= 1")
    _check(c.chunk_size_bits > 0, "content.chunk_size_bits", "must be > 0")
    _check(c.ut_cache_size_bits >= c.chunk_size_bits, "content.ut_cache_size_bits",
           "must be >= chunk_size_bits")
    _check(c.zipf_alpha >= 0, "content.zipf_alpha", "must be >= 0")

    _check(a.gamma_mode in ("fixed", "mean_in_cluster"), "auction.gamma_mode",
           "must be 'fixed' or 'mean_in_cluster'")
    if a.gamma_mode == "fixed":
        _check(0.0 <= a.gamma_fixed <= 1.0, "auction.gamma_fixed", "must be in [0, 1]")
    _check(a.sdp_gap_tol > 0, "auction.sdp_gap_tol", "must be > 0")
    _check(a.rounding_threshold > 0, "auction.rounding_threshold", "must be > 0")
    _check(a.sublease_enum_limit >= 0, "auction.sublease_enum_limit", "must be >= 0")

    _check(isinstance(sc.seed, int) and 0 <= sc.seed < 2**64, "seed",
           "must be an integer in [0, 2^64)")
    return sc


def default_scenario(seed: int = 0) -> Scenario:
    """The documented default configuration (N=40 UTs, M=30 chunks)."""
    return validate(Scenario(seed=seed))


def scenario_to_dict(sc: Scenario) -> dict:
    d = {"schema_version": SCHEMA_VERSION, "seed": sc.seed}
    for name, _ in _SECTIONS.items():
        section = getattr(sc, name)
        d[name] = {f.name: getattr(section, f.name) for f in fields(section)}
    return d


def scenario_from_dict(d: dict, source: str = "<dict>") -> Scenario:
    """Build a Scenario from a (possibly partial) dict; missing fields take defaults."""
    if not isinstance(d, dict):
        raise ScenarioError(f"{source}: top level must be an object")
    known = set(_SECTIONS) | {"schema_version", "seed"}
    for key in d:
        if key not in known:
            raise ScenarioError(f"{source}: unknown field {key!r}")
    version = d.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"schema_version: unsupported value {version!r}")

    kwargs = {}
    for name, cls in _SECTIONS.items():
        section = d.get(name, {})
        if not isinstance(section, dict):
            raise ScenarioError(f"{name}: must be an object")
        valid = {f.name for f in fields(cls)}
        for key in section:
            if key not in valid:
                raise ScenarioError(f"{name}.{key}: unknown field")
        kwargs[name] = cls(**section)
    seed = d.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ScenarioError("seed: must be an integer")
    return validate(Scenario(seed=seed, **kwargs))


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from exc
    return scenario_from_dict(data, source=str(path))


def save_scenario(sc: Scenario, path) -> Path:
    """Write the canonical serialization (sorted keys, stable float repr)."""
    path = Path(path)
    path.write_text(json.dumps(scenario_to_dict(sc), indent=2, sort_keys=True) + "\n")
    return path


def with_overrides(sc: Scenario, **section_overrides) -> Scenario:
    """Functional update, e.g. with_overrides(sc, content={"chunk_count": 50})."""
    kwargs = {}
    for name, values in section_overrides.items():
        if name == "seed":
            kwargs["seed"] = values
        elif name in _SECTIONS:
            kwargs[name] = replace(getattr(sc, name), **values)
        else:
            raise ScenarioError(f"{name}: unknown section")
    return validate(replace(sc, **kwargs))


def rng_stream(seed: int, name: str) -> np.random.Generator:
    """Independent, reproducible generator for (seed, stream name).

    Streams are derived by hashing the name, so modules cannot collide and
    draw counts in one stream do not shift any other.
    """
    key = int.from_bytes(hashlib.sha256(name.encode()).digest()[:8], "big")
    return np.random.default_rng(np.random.SeedSequence([seed, key]))

"""Scenario configuration, network geometry and per-trial random streams.

Configuration files are YAML mappings whose keys mirror :class:`ScenarioConfig`
(nested mappings for ``path_loss``, ``correlation`` and ``coloring``). Unknown
keys are rejected so that a stored config always reproduces the same run.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import zlib
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
import yaml

from .errors import ConfigError

SEED_ENV_VAR = "CFRAN_MASTER_SEED"

PATH_LOSS_MODELS = ("free_space", "three_gpp")
CORRELATION_MODELS = ("iid", "local_scattering")
CSI_MODES = ("perfect", "estimated")
ASSOCIATION_MODES = ("full", "dcc")
GROUPINGS = ("graph_coloring", "kmeans_pp", "manual")
COMBINERS = ("zf", "mmse")
SINR_MODES = ("instantaneous", "uatf")


@dataclass(frozen=True)
class PathLossModel:
    model: str = "three_gpp"
    exponent: float = 4.0  # free_space only
    shadow_sigma_db: float = 4.0  # three_gpp only


@dataclass(frozen=True)
class CorrelationModel:
    model: str = "local_scattering"
    asd_azimuth_deg: float = 15.0
    asd_elevation_deg: float = 15.0


@dataclass(frozen=True)
class ColoringKnobs:
    delta_init: float = 0.25
    tenure: int = 7
    max_iter: int = 10_000
    restarts: int = 5
    bisection_iters: int = 30


@dataclass(frozen=True)
class ScenarioConfig:
    """Full parameterization of one experiment.

    Powers are physical (mW, dBm/Hz); :attr:`snr_scale` gives the uplink power
    normalized by the receiver noise power, which is what the signal-processing
    routines consume (they work with unit noise variance).
    """

    area_side: float = 200.0
    num_rrus: int = 100
    antennas_per_rru: int = 4
    num_ues: int = 24
    num_edus: int = 2
    uplink_power_mw: float = 200.0
    noise_psd_dbm_hz: float = -174.0
    bandwidth_hz: float = 20e6
    carrier_freq_hz: float = 2e9
    antenna_height: float = 10.0
    min_distance: float = 1.0
    num_pilots: int = 24
    block_length: int = 50
    error_prob: float = 1e-5
    path_loss: PathLossModel = field(default_factory=PathLossModel)
    correlation: CorrelationModel = field(default_factory=CorrelationModel)
    csi_mode: str = "estimated"
    association_mode: str = "full"
    rru_grouping: str = "graph_coloring"
    manual_partition: tuple[tuple[int, ...], ...] | None = None
    combiner: str = "mmse"
    sinr_mode: str = "instantaneous"
    uatf_samples: int = 1000
    coloring: ColoringKnobs = field(default_factory=ColoringKnobs)
    kmeans_restarts: int = 10
    target_se_per_ue: float = 5.0
    unscaled_dispersion: bool = False
    master_seed: int = 2024
    trials: int = 200
    fading_realizations: int = 1

    def __post_init__(self):
        _validate(self)

    @property
    def noise_power_dbm(self) -> float:
        return self.noise_psd_dbm_hz + 10.0 * math.log10(self.bandwidth_hz)

    @property
    def noise_power_mw(self) -> float:
        return 10.0 ** (self.noise_power_dbm / 10.0)

    @property
    def snr_scale(self) -> float:
        """Uplink power over noise power (linear)."""
        return self.uplink_power_mw / self.noise_power_mw

    @property
    def target_rate(self) -> float:
        return self.target_se_per_ue * self.num_ues

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        if d["manual_partition"] is not None:
            d["manual_partition"] = [list(g) for g in d["manual_partition"]]
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def replace(self, **changes) -> "ScenarioConfig":
        return config_from_dict(_deep_update(self.to_dict(), changes))


def _check(cond, fld, msg):
    if not cond:
        raise ConfigError(msg, field=fld)


def _validate(c: ScenarioConfig) -> None:
    _check(c.area_side > 0, "area_side", "must be > 0")
    _check(c.num_rrus >= 1, "num_rrus", "num_rrus >= 1")
    _check(c.num_ues >= 1, "num_ues", "num_ues >= 1")
    _check(c.num_edus >= 1, "num_edus", "num_edus >= 1")
    _check(c.num_edus <= c.num_rrus, "num_edus", "num_edus <= num_rrus")
    _check(c.antennas_per_rru >= 1, "antennas_per_rru", "antennas_per_rru >= 1")
    _check(c.block_length >= 1, "block_length", "block_length >= 1")
    _check(0.0 < c.error_prob < 0.5, "error_prob", "must lie in the open interval (0, 0.5)")
    _check(c.num_pilots >= 1, "num_pilots", "num_pilots >= 1")
    _check(c.uplink_power_mw > 0, "uplink_power_mw", "must be > 0")
    _check(c.bandwidth_hz > 0, "bandwidth_hz", "must be > 0")
    _check(c.carrier_freq_hz > 0, "carrier_freq_hz", "must be > 0")
    _check(c.antenna_height >= 0, "antenna_height", "must be >= 0")
    _check(c.min_distance > 0, "min_distance", "must be > 0")
    _check(c.trials >= 1, "trials", "trials >= 1")
    _check(c.fading_realizations >= 1, "fading_realizations", "must be >= 1")
    _check(c.uatf_samples >= 1, "uatf_samples", "must be >= 1")
    _check(c.kmeans_restarts >= 1, "kmeans_restarts", "must be >= 1")
    _check(c.target_se_per_ue >= 0, "target_se_per_ue", "must be >= 0")
    _check(0 <= c.master_seed < 2**64, "master_seed", "must be a 64-bit unsigned integer")
    _check(c.path_loss.model in PATH_LOSS_MODELS, "path_loss.model", f"one of {PATH_LOSS_MODELS}")
    _check(c.path_loss.exponent > 0, "path_loss.exponent", "must be > 0")
    _check(c.path_loss.shadow_sigma_db >= 0, "path_loss.shadow_sigma_db", "must be >= 0")
    _check(c.correlation.model in CORRELATION_MODELS, "correlation.model", f"one of {CORRELATION_MODELS}")
    _check(c.correlation.asd_azimuth_deg >= 0, "correlation.asd_azimuth_deg", "must be >= 0")
    _check(c.correlation.asd_elevation_deg >= 0, "correlation.asd_elevation_deg", "must be >= 0")
    _check(c.csi_mode in CSI_MODES, "csi_mode", f"one of {CSI_MODES}")
    _check(c.association_mode in ASSOCIATION_MODES, "association_mode", f"one of {ASSOCIATION_MODES}")
    _check(c.rru_grouping in GROUPINGS, "rru_grouping", f"one of {GROUPINGS}")
    _check(c.combiner in COMBINERS, "combiner", f"one of {COMBINERS}")
    _check(c.sinr_mode in SINR_MODES, "sinr_mode", f"one of {SINR_MODES}")
    k = c.coloring
    _check(0 < k.delta_init <= 1, "coloring.delta_init", "must lie in (0, 1]")
    _check(k.tenure >= 1, "coloring.tenure", "must be >= 1")
    _check(k.max_iter >= 1, "coloring.max_iter", "must be >= 1")
    _check(k.restarts >= 1, "coloring.restarts", "must be >= 1")
    _check(k.bisection_iters >= 1, "coloring.bisection_iters", "must be >= 1")
    if c.rru_grouping == "manual":
        _check(c.manual_partition is not None, "manual_partition", "required when rru_grouping is manual")
    if c.manual_partition is not None:
        groups = c.manual_partition
        flat = sorted(i for g in groups for i in g)
        _check(len(groups) == c.num_edus, "manual_partition", "must list exactly num_edus groups")
        _check(all(len(g) > 0 for g in groups), "manual_partition", "groups must be nonempty")
        _check(flat == list(range(c.num_rrus)), "manual_partition",
               "groups must be disjoint and cover RRUs 0..num_rrus-1")


_NESTED = {"path_loss": PathLossModel, "correlation": CorrelationModel, "coloring": ColoringKnobs}


def _coerce(cls, name, value):
    ftype = {f.name: f.type for f in dataclasses.fields(cls)}[name]
    ftype = str(ftype)
    try:
        if ftype == "int":
            if isinstance(value, bool):
                raise TypeError
            if isinstance(value, float):
                if not value.is_integer():
                    raise TypeError
                value = int(value)
            if not isinstance(value, int):
                raise TypeError
            return value
        if ftype == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError
            return float(value)
        if ftype == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
        if ftype == "str":
            if not isinstance(value, str):
                raise TypeError
            return value
    except TypeError:
        raise ConfigError(f"expected {ftype}, got {value!r}", field=name) from None
    return value


def _build(cls, data: Mapping[str, Any], prefix=""):
    if not isinstance(data, Mapping):
        raise ConfigError("expected a mapping", field=prefix.rstrip(".") or None)
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown}", field=prefix.rstrip(".") or None)
    kwargs = {}
    for key, value in data.items():
        if cls is ScenarioConfig and key in _NESTED:
            kwargs[key] = _build(_NESTED[key], value, prefix=f"{key}.")
        elif key == "manual_partition":
            if value is not None:
                try:
                    value = tuple(tuple(int(i) for i in g) for g in value)
                except (TypeError, ValueError):
                    raise ConfigError("expected a list of integer lists", field=key) from None
            kwargs[key] = value
        else:
            kwargs[key] = _coerce(cls, key, value)
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        if prefix and exc.field and not exc.field.startswith(prefix):
            raise ConfigError(str(exc).split(": ", 1)[-1], field=prefix + exc.field) from None
        raise


def config_from_dict(data: Mapping[str, Any]) -> ScenarioConfig:
    return _build(ScenarioConfig, data)


def _deep_update(base: dict, changes: Mapping[str, Any]) -> dict:
    out = dict(base)
    for key, value in changes.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict):
            out[key] = _deep_update(out[key], value)
        else:
            out[key] = value
    return out


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``dotted.key=value`` overrides; values are parsed as YAML scalars."""
    data = json.loads(json.dumps(data))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        value = yaml.safe_load(raw) if raw.strip() else None
        node = data
        parts = key.strip().split(".")
        for part in parts[:-1]:
            nxt = node.get(part)
            if nxt is None:
                nxt = node[part] = {}
            if not isinstance(nxt, dict):
                raise ConfigError(f"cannot descend into {part!r}", field=key)
            node = nxt
        node[parts[-1]] = value
    return data


def parse_config_text(source: str) -> dict:
    try:
        data = yaml.safe_load(source)
    except yaml.YAMLError as exc:
        raise ConfigError(f"parse failure: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping")
    return data


def load_config(source: str, overrides=(), env: Mapping[str, str] | None = None) -> ScenarioConfig:
    """Parse YAML text into a validated :class:`ScenarioConfig`.

    ``CFRAN_MASTER_SEED`` in ``env`` (default: the process environment)
    overrides ``master_seed``.
    """
    data = apply_overrides(parse_config_text(source), overrides)
    env = os.environ if env is None else env
    if env.get(SEED_ENV_VAR):
        try:
            data["master_seed"] = int(env[SEED_ENV_VAR])
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer", field="master_seed") from None
    return config_from_dict(data)


def derive_stream(master_seed: int, trial_index: int, purpose: str) -> np.random.Generator:
    """Independent, reproducible generator for one (trial, purpose) pair.

    Counter-based: the stream depends only on its three arguments, so trials may
    be evaluated in any order or process.
    """
    key = (int(trial_index), zlib.crc32(purpose.encode("utf-8")))
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(seq))


def child_streams(rng: np.random.Generator, count: int) -> list[np.random.Generator]:
    """Prefix-stable children: the first ``n`` of ``count`` equal those of ``n``."""
    entropy = int(rng.integers(0, 2**63))
    return [np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy, spawn_key=(i,))))
            for i in range(count)]


@dataclass(frozen=True, eq=False)
class Geometry:
    area_side: float
    rru_positions: np.ndarray  # (L, 2)
    ue_positions: np.ndarray  # (K, 2)
    rru_rru_dist: np.ndarray  # (L, L)
    ue_rru_dist: np.ndarray  # (K, L)

    @classmethod
    def from_positions(cls, rru_positions, ue_positions, area_side: float) -> "Geometry":
        rru = np.asarray(rru_positions, dtype=float).reshape(-1, 2)
        ue = np.asarray(ue_positions, dtype=float).reshape(-1, 2)
        return cls(
            area_side=float(area_side),
            rru_positions=rru,
            ue_positions=ue,
            rru_rru_dist=_pairwise(rru, rru),
            ue_rru_dist=_pairwise(ue, rru),
        )

    @property
    def num_rrus(self) -> int:
        return self.rru_positions.shape[0]

    @property
    def num_ues(self) -> int:
        return self.ue_positions.shape[0]


def _pairwise(a, b):
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def generate_geometry(config: ScenarioConfig, rng: np.random.Generator) -> Geometry:
    """Uniform RRU and UE drops over the square; UEs closer than the floor are redrawn."""
    side = config.area_side
    rru = rng.uniform(0.0, side, size=(config.num_rrus, 2))
    ue = rng.uniform(0.0, side, size=(config.num_ues, 2))
    for _ in range(10_000):
        bad = (_pairwise(ue, rru) < config.min_distance).any(axis=1)
        if not bad.any():
            break
        ue[bad] = rng.uniform(0.0, side, size=(int(bad.sum()), 2))
    else:  # pragma: no cover - only reachable with absurd floors
        raise ConfigError("cannot place UEs beyond the distance floor", field="min_distance")
    return Geometry.from_positions(rru, ue, side)

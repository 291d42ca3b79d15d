"""Run configuration: defaults, TOML parsing, validation and overrides."""

from __future__ import annotations

import copy
import dataclasses
import math
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .linkadapt import McsEntry, McsTable
from .scheduler import ALGORITHMS
from .scheduler import SchedulerParams as SchedulerConfig
MASKS = ("flat", "pm1", "pm2", "rb012", "custom")
ANTENNAS = ("mimo", "simo")

# (alpha1, alpha2) presets used throughout the evaluation
ALPHA_PRESETS = {"m1": (1.0, 1.0), "m2": (2.0, 1.0), "m3": (4.0, 1.0)}

SPEED_OF_LIGHT = 299_792_458.0


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key path."""


@dataclass(frozen=True)
class RadioConfig:
    bandwidth_mhz: float = 10.0
    prbs: int = 50
    active_subcarriers: int = 600
    subcarriers_per_prb: int = 12
    symbols_per_tti: int = 14
    subcarrier_spacing_khz: float = 15.0
    carrier_ghz: float = 2.0
    tti_ms: float = 1.0
    total_power_dbm: float = 46.0
    noise_density_dbm_hz: float = -174.0
    noise_figure_db: float = 9.0
    ue_speed_kmh: float = 3.0
    antenna: str = "mimo"
    samples_per_prb: int = 1

    def _check(self):
        _positive("radio", self, ("bandwidth_mhz", "prbs", "active_subcarriers", "subcarriers_per_prb",
                                  "symbols_per_tti", "subcarrier_spacing_khz", "carrier_ghz", "tti_ms"))
        if self.ue_speed_kmh < 0:
            raise ConfigError("radio.ue_speed_kmh: must be >= 0")
        if self.antenna not in ANTENNAS:
            raise ConfigError(f"radio.antenna: expected one of {ANTENNAS}, got {self.antenna!r}")
        if self.samples_per_prb not in (1, 3):
            raise ConfigError("radio.samples_per_prb: must be 1 or 3")
        if self.prbs * self.subcarriers_per_prb > self.active_subcarriers:
            raise ConfigError("radio.prbs: PRBs exceed the active subcarriers")

    @property
    def doppler_hz(self) -> float:
        return self.ue_speed_kmh / 3.6 * self.carrier_ghz * 1e9 / SPEED_OF_LIGHT

    @property
    def prb_bandwidth_hz(self) -> float:
        return self.subcarriers_per_prb * self.subcarrier_spacing_khz * 1e3

    @property
    def prb_power_w(self) -> float:
        """Per-PRB maximum power; the flat mask spends exactly the total power."""
        return 10 ** ((self.total_power_dbm - 30) / 10) / self.prbs

    @property
    def noise_w(self) -> float:
        dbm = self.noise_density_dbm_hz + 10 * math.log10(self.prb_bandwidth_hz) + self.noise_figure_db
        return 10 ** ((dbm - 30) / 10)

    @property
    def tti_s(self) -> float:
        return self.tti_ms * 1e-3


@dataclass(frozen=True)
class LayoutConfig:
    inter_site_distance: float = 500.0
    ues_per_cell: int = 15
    min_distance: float = 35.0
    shadowing_std_db: float = 8.0

    def _check(self):
        _positive("layout", self, ("inter_site_distance", "ues_per_cell", "min_distance"))
        if self.shadowing_std_db < 0:
            raise ConfigError("layout.shadowing_std_db: must be >= 0")


@dataclass(frozen=True)
class ChannelConfig:
    oscillators: int = 16
    cqi_period: int = 5
    cqi_delay: int = 2
    cqi_min_db: float = -10.0
    cqi_max_db: float = 30.0
    cqi_step_db: float = 1.0

    def _check(self):
        _positive("channel", self, ("oscillators", "cqi_period", "cqi_step_db"))
        if self.cqi_delay < 0:
            raise ConfigError("channel.cqi_delay: must be >= 0")
        if self.cqi_min_db >= self.cqi_max_db:
            raise ConfigError("channel.cqi_min_db: must be below cqi_max_db")


@dataclass(frozen=True)
class HarqConfig:
    processes: int = 6
    max_retx: int = 3
    feedback_delay: int = 2

    def _check(self):
        _positive("harq", self, ("processes", "feedback_delay"))
        if self.max_retx < 0:
            raise ConfigError("harq.max_retx: must be >= 0")


@dataclass(frozen=True)
class LinkConfig:
    bler_target: float = 0.2
    olla_step_up_db: float = 0.5
    olla_min_db: float = -5.0
    olla_max_db: float = 5.0

    def _check(self):
        if not 0 < self.bler_target < 1:
            raise ConfigError("link.bler_target: must lie in (0, 1)")
        if self.olla_step_up_db <= 0:
            raise ConfigError("link.olla_step_up_db: must be > 0")
        if self.olla_min_db > self.olla_max_db:
            raise ConfigError("link.olla_min_db: must not exceed olla_max_db")

    @property
    def olla_step_down_db(self) -> float:
        return self.olla_step_up_db * self.bler_target / (1 - self.bler_target)


@dataclass(frozen=True)
class MaskConfig:
    kind: str = "flat"
    levels_db: tuple = ()
    subbands: int = 3

    def _check(self):
        if self.kind not in MASKS:
            raise ConfigError(f"mask.kind: expected one of {MASKS}, got {self.kind!r}")
        if self.subbands < 1:
            raise ConfigError("mask.subbands: must be >= 1")
        if self.kind == "custom":
            if len(self.levels_db) != self.subbands:
                raise ConfigError("mask.levels_db: need one level per sub-band for a custom mask")
        if any(level > 0 for level in self.levels_db):
            raise ConfigError("mask.levels_db: levels must be <= 0 dB")


@dataclass(frozen=True)
class RunConfig:
    n_ttis: int = 6000
    warmup_ttis: int = 1000
    n_drops: int = 4
    seed: int = 1

    def _check(self):
        _positive("run", self, ("n_ttis", "n_drops"))
        if self.warmup_ttis < 0:
            raise ConfigError("run.warmup_ttis: must be >= 0")
        if self.warmup_ttis >= self.n_ttis:
            raise ConfigError("run.warmup_ttis: must be below run.n_ttis (empty statistics window)")


@dataclass(frozen=True)
class SystemConfig:
    radio: RadioConfig = field(default_factory=RadioConfig)
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    harq: HarqConfig = field(default_factory=HarqConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    mask: MaskConfig = field(default_factory=MaskConfig)
    run: RunConfig = field(default_factory=RunConfig)
    mcs: McsTable = None

    def __post_init__(self):
        if self.mcs is None:
            object.__setattr__(self, "mcs", _default_mcs_table())
        for name in _SECTIONS:
            getattr(self, name)._check()

    def to_dict(self) -> dict:
        out = {name: dataclasses.asdict(getattr(self, name)) for name in _SECTIONS}
        out["mask"]["levels_db"] = list(out["mask"]["levels_db"])
        out["mcs-table"] = [dataclasses.asdict(e) for e in self.mcs.entries]
        return out

    def fingerprint(self) -> str:
        """Hash of the resolved configuration; stable across platforms."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def replace(self, **dotted) -> "SystemConfig":
        """Copy with overrides given as ``section__key=value`` or a dotted-key mapping."""
        return with_overrides(self, {k.replace("__", "."): v for k, v in dotted.items()})

    def channel_key(self) -> tuple:
        """Fields that determine the radio channel of a drop (shared across scheduler variants)."""
        r = dataclasses.replace(self.radio, antenna="mimo")
        return (r, self.layout, self.channel.oscillators)


_SECTIONS = {
    "radio": RadioConfig,
    "layout": LayoutConfig,
    "channel": ChannelConfig,
    "harq": HarqConfig,
    "link": LinkConfig,
    "scheduler": SchedulerConfig,
    "mask": MaskConfig,
    "run": RunConfig,
}


def _positive(section, obj, names):
    for name in names:
        if getattr(obj, name) <= 0:
            raise ConfigError(f"{section}.{name}: must be > 0")


def _defaults_dict() -> dict:
    text = resources.files(__package__).joinpath("defaults.toml").read_text()
    return tomllib.loads(text)


_DEFAULT_MCS = None


def _default_mcs_table() -> McsTable:
    global _DEFAULT_MCS
    if _DEFAULT_MCS is None:
        _DEFAULT_MCS = _build_mcs(_defaults_dict()["mcs-table"])
    return _DEFAULT_MCS


def _build_mcs(rows) -> McsTable:
    fields_ = {f.name: f.type for f in dataclasses.fields(McsEntry)}
    entries = []
    for i, row in enumerate(rows):
        unknown = set(row) - set(fields_)
        if unknown:
            raise ConfigError(f"mcs-table[{i}].{sorted(unknown)[0]}: unknown key")
        missing = set(fields_) - set(row)
        if missing:
            raise ConfigError(f"mcs-table[{i}].{sorted(missing)[0]}: missing key")
        try:
            entries.append(McsEntry(**{k: _coerce(f"mcs-table[{i}].{k}", v, fields_[k], lower=False)
                                        for k, v in row.items()}))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"mcs-table[{i}]: {exc}") from None
    try:
        return McsTable(tuple(entries))
    except ValueError as exc:
        raise ConfigError(f"mcs-table: {exc}") from None


def _coerce(path: str, value: Any, type_name: str, lower: bool = True):
    t = type_name if isinstance(type_name, str) else type_name.__name__
    if t == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected integer, got {value!r}")
        return value
    if t == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected number, got {value!r}")
        return float(value)
    if t == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected string, got {value!r}")
        return value.lower() if lower else value
    if t == "tuple":
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected list, got {value!r}")
        return tuple(_coerce(f"{path}[{i}]", v, "float") for i, v in enumerate(value))
    raise ConfigError(f"{path}: unsupported field type {t}")


def from_dict(data: Mapping[str, Any]) -> SystemConfig:
    """Build a validated config from a nested mapping; omitted keys take defaults."""
    merged = _defaults_dict()
    for section, values in data.items():
        if section == "mcs-table":
            merged["mcs-table"] = values
            continue
        if section not in _SECTIONS:
            raise ConfigError(f"{section}: unknown section")
        if not isinstance(values, Mapping):
            raise ConfigError(f"{section}: expected a table")
        merged[section].update(values)

    kwargs = {}
    for section, cls in _SECTIONS.items():
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        values = {}
        for key, value in merged[section].items():
            if key not in types:
                raise ConfigError(f"{section}.{key}: unknown key")
            values[key] = _coerce(f"{section}.{key}", value, types[key])
        kwargs[section] = cls(**values)
    return SystemConfig(mcs=_build_mcs(merged["mcs-table"]), **kwargs)


def parse_config(path: str | Path | None = None) -> SystemConfig:
    """Read a TOML run configuration; an empty or absent file yields all defaults."""
    if path is None:
        return from_dict({})
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such config file") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return from_dict(data)


def with_overrides(config: SystemConfig, overrides: Mapping[str, Any]) -> SystemConfig:
    """Apply ``{"section.key": value}`` overrides on top of a resolved config."""
    data = config.to_dict()
    for dotted, value in overrides.items():
        if value is None:
            continue
        section, _, key = dotted.partition(".")
        if section not in _SECTIONS or not key:
            raise ConfigError(f"{dotted}: unknown key")
        data[section][key] = copy.deepcopy(value)
    return from_dict(data)


def scheduler_variant(label: str) -> dict:
    """Translate labels like ``pf`` or ``mpmpf-m2`` into scheduler overrides."""
    name, _, preset = label.lower().partition("-")
    if name not in ALGORITHMS:
        raise ConfigError(f"scheduler: unknown algorithm {label!r}")
    out = {"scheduler.algorithm": name}
    if preset:
        if preset not in ALPHA_PRESETS:
            raise ConfigError(f"scheduler: unknown alpha preset {preset!r}")
        out["scheduler.alpha1"], out["scheduler.alpha2"] = ALPHA_PRESETS[preset]
    return out

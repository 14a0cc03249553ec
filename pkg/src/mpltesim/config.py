"""Scenario configuration: typed dataclasses, validation, dotted-path overrides,
and a stable JSON round trip."""
from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass, field

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass
class PathConfig:
    path_id: int
    capacity_mbps: float = 16.0
    sender_ms: float = 2.0
    core_ms: float = 20.0
    receiver_ms: float = 5.0
    bs_queue_bytes: int = 2_000_000
    loss_prob: float = 0.0
    signal_dbm: float = -75.0
    spike_scale: float = 1.0
    handover_outage_ms: float = 300.0
    shared_queue: str | None = None


@dataclass
class SharedQueueConfig:
    name: str
    capacity_mbps: float = 20.0
    max_bytes: int = 128_000


@dataclass
class MobilityConfig:
    profile: str = "static"
    rate_scale: float = 1.0


@dataclass
class WorkloadConfig:
    kind: str = "bulk"  # bulk | dash
    bytes: int = 3_000_000
    segment_s: float = 6.0
    buffer_target_s: float = 30.0
    abr_safety: float = 0.8
    ewma_half_life_segments: float = 3.0


@dataclass
class AssistConfig:
    enabled: bool = True  # honored only when protocol is "ramptcp"
    signal_threshold_dbm: float = -95.0
    hysteresis_ms: float = 500.0
    staleness_limit_ms: float = 3000.0
    budget_threshold_factor: float = 2.0
    noise_sigma_db: float = 0.0


@dataclass
class InjectionConfig:
    """Timed loss-rate change on one path's receiver last mile."""

    at_s: float
    path_id: int
    loss_prob: float
    until_s: float | None = None


@dataclass
class DropInjectionConfig:
    """One handcrafted signal-drop event (used by magnitude sweeps)."""

    at_s: float
    path_id: int
    magnitude_db: float
    recovery_s: float = 4.0


@dataclass
class CompetitorConfig:
    enabled: bool = False
    cc: str = "reno"
    path_id: int = 3
    start_s: float = 0.0
    # fair-share accounting starts here, so both flows are past slow start
    measure_from_s: float = 15.0


@dataclass
class ScenarioConfig:
    name: str = "custom"
    seed: int = 1
    duration_s: float = 30.0
    protocol: str = "mptcp"  # mptcp | ramptcp | tcp_path1 | tcp_path2
    cc: str = "cubic"
    ofo_capacity_bytes: int | None = 1_000_000
    rto_floor_ms: float = 200.0
    initial_cwnd: float = 10.0
    paths: list[PathConfig] = field(default_factory=list)
    shared_queues: list[SharedQueueConfig] = field(default_factory=list)
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    assist: AssistConfig = field(default_factory=AssistConfig)
    injections: list[InjectionConfig] = field(default_factory=list)
    drop_injections: list[DropInjectionConfig] = field(default_factory=list)
    competitor: CompetitorConfig = field(default_factory=CompetitorConfig)
    schema_version: int = SCHEMA_VERSION


VALID_PROTOCOLS = ("mptcp", "ramptcp", "tcp_path1", "tcp_path2")
VALID_CC = ("reno", "cubic", "lia", "olia", "balia")
VALID_PROFILES = ("static", "walking", "driving")


def validate(cfg: ScenarioConfig) -> None:
    """Raise ConfigError naming the first offending field."""
    errors = []
    if cfg.protocol not in VALID_PROTOCOLS:
        errors.append(f"protocol must be one of {VALID_PROTOCOLS}, got {cfg.protocol!r}")
    if cfg.cc not in VALID_CC:
        errors.append(f"cc must be one of {VALID_CC}, got {cfg.cc!r}")
    if cfg.duration_s <= 0:
        errors.append(f"duration_s must be > 0, got {cfg.duration_s}")
    if cfg.mobility.profile not in VALID_PROFILES:
        errors.append(
            f"mobility.profile must be one of {VALID_PROFILES}, got {cfg.mobility.profile!r}"
        )
    if cfg.mobility.rate_scale < 0:
        errors.append(f"mobility.rate_scale must be >= 0, got {cfg.mobility.rate_scale}")
    if not cfg.paths:
        errors.append("paths must not be empty")
    seen = set()
    for i, p in enumerate(cfg.paths):
        if p.capacity_mbps <= 0:
            errors.append(
                f"paths[{i}].capacity_mbps must be > 0, got {p.capacity_mbps}"
            )
        if not 0.0 <= p.loss_prob <= 1.0:
            errors.append(f"paths[{i}].loss_prob must be in [0, 1], got {p.loss_prob}")
        if p.bs_queue_bytes <= 0:
            errors.append(f"paths[{i}].bs_queue_bytes must be > 0")
        if min(p.sender_ms, p.core_ms, p.receiver_ms) < 0:
            errors.append(f"paths[{i}] delay segments must be >= 0")
        if p.path_id in seen:
            errors.append(f"paths[{i}].path_id duplicates {p.path_id}")
        seen.add(p.path_id)
        if p.shared_queue and p.shared_queue not in {q.name for q in cfg.shared_queues}:
            errors.append(f"paths[{i}].shared_queue {p.shared_queue!r} is not defined")
    if cfg.workload.kind not in ("bulk", "dash"):
        errors.append(f"workload.kind must be bulk or dash, got {cfg.workload.kind!r}")
    if cfg.workload.kind == "bulk" and cfg.workload.bytes < 0:
        errors.append(f"workload.bytes must be >= 0, got {cfg.workload.bytes}")
    if cfg.workload.kind == "dash" and cfg.workload.segment_s <= 0:
        errors.append(f"workload.segment_s must be > 0, got {cfg.workload.segment_s}")
    if cfg.ofo_capacity_bytes is not None and cfg.ofo_capacity_bytes <= 0:
        errors.append(
            f"ofo_capacity_bytes must be > 0 or none, got {cfg.ofo_capacity_bytes}"
        )
    for i, inj in enumerate(cfg.injections):
        if not 0.0 <= inj.loss_prob <= 1.0:
            errors.append(f"injections[{i}].loss_prob must be in [0, 1]")
        if inj.path_id not in seen:
            errors.append(f"injections[{i}].path_id {inj.path_id} has no path")
    for i, drop in enumerate(cfg.drop_injections):
        if drop.magnitude_db < 0:
            errors.append(f"drop_injections[{i}].magnitude_db must be >= 0")
        if drop.recovery_s <= 0:
            errors.append(f"drop_injections[{i}].recovery_s must be > 0")
        if drop.path_id not in seen:
            errors.append(f"drop_injections[{i}].path_id {drop.path_id} has no path")
    if cfg.competitor.enabled and cfg.competitor.cc not in VALID_CC:
        errors.append(f"competitor.cc must be one of {VALID_CC}")
    if errors:
        raise ConfigError("; ".join(errors))


# -- overrides -------------------------------------------------------------------


def _coerce(raw: str, current):
    if isinstance(current, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    if current is None or raw.lower() in ("none", "null", "unbounded"):
        if raw.lower() in ("none", "null", "unbounded"):
            return None
        # field currently None: guess numeric, fall back to string
        try:
            return int(raw)
        except ValueError:
            try:
                return float(raw)
            except ValueError:
                return raw
    if isinstance(current, int):
        return int(float(raw))
    if isinstance(current, float):
        return float(raw)
    return raw


def apply_override(cfg: ScenarioConfig, key: str, raw_value: str) -> None:
    """Set one field by dotted path, e.g. paths.1.loss_prob or paths[1].loss_prob."""
    tokens = re.sub(r"\[(\d+)\]", r".\1", key).split(".")
    target = cfg
    for i, tok in enumerate(tokens):
        last = i == len(tokens) - 1
        if isinstance(target, list):
            try:
                idx = int(tok)
                item = target[idx]
            except (ValueError, IndexError):
                raise ConfigError(f"no list element {key!r} (token {tok!r})") from None
            if last:
                raise ConfigError(f"cannot assign a whole list element: {key!r}")
            target = item
            continue
        if not dataclasses.is_dataclass(target):
            raise ConfigError(f"cannot descend into {key!r} at {tok!r}")
        names = {f.name for f in dataclasses.fields(target)}
        if tok not in names:
            raise ConfigError(
                f"unknown field {tok!r} in {key!r}; valid: {sorted(names)}"
            )
        if last:
            setattr(target, tok, _coerce(raw_value, getattr(target, tok)))
        else:
            target = getattr(target, tok)


def to_dict(cfg: ScenarioConfig) -> dict:
    return dataclasses.asdict(cfg)


def config_json(cfg: ScenarioConfig) -> str:
    return json.dumps(to_dict(cfg), sort_keys=True, indent=2)

"""JSON config files and presets, mapped onto typed section dataclasses.

A config file is one JSON object whose optional sections are
`scenario`, `train`, `power`, `multilayer`, `sysim` and `zc`. A preset
supplies the same layout; file values override preset values key by key.
"""

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from config.presets import PRESETS
from engine.errors import ConfigError
from engine.harness import ScenarioConfig
from engine.neural import TrainConfig, product_loss_weights
from engine.sysim import ClusterTraffic, NomaPartition, PhyConfig, ResourcePoolConfig, SimMode, TrafficConfig

SECTIONS = ("scenario", "train", "power", "multilayer", "sysim", "zc")


def _build(cls, data: Dict[str, Any], section: str):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {unknown}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad [{section}] section: {e}") from e


@dataclass
class TrainSection:
    k: int = 4
    T: int = 2
    rate: float = 1.0
    amplitude: float = 1.0
    hidden_widths: List[int] = field(default_factory=lambda: [256, 256, 256, 256])
    learning_rate: float = 1e-4
    epochs: int = 200
    minibatch_size: int = 256
    train_size: int = 20000
    val_size: int = 2000
    train_ebn0_db: List[float] = field(default_factory=lambda: [8.0])
    activity_distribution: Optional[List[float]] = None
    loss_weights: List[Dict[str, float]] = field(default_factory=list)  # {users, ebn0_db, weight}
    product_weighting: bool = False
    seed: int = 0
    checkpoint: str = "model.npz"

    def train_config(self) -> TrainConfig:
        if self.product_weighting:
            weights = product_loss_weights(self.T, self.train_ebn0_db)
        else:
            weights = {}
        for entry in self.loss_weights:
            try:
                weights[(int(entry["users"]), float(entry["ebn0_db"]))] = float(entry["weight"])
            except (KeyError, TypeError, ValueError) as e:
                raise ConfigError(f"bad loss weight entry {entry}: {e}") from e
        activity = tuple(self.activity_distribution) if self.activity_distribution else None
        return TrainConfig(hidden_widths=tuple(self.hidden_widths), learning_rate=self.learning_rate,
                           epochs=self.epochs, minibatch_size=self.minibatch_size, train_size=self.train_size,
                           val_size=self.val_size, train_ebn0_db=tuple(float(e) for e in self.train_ebn0_db),
                           activity_distribution=activity, loss_weights=weights, seed=self.seed)


@dataclass
class PowerSection:
    k: int = 4
    T: int = 2
    primitive_poly: Optional[int] = None
    outer_rate: float = 1.0
    layers: int = 2
    p_max: float = 100.0
    noise_var: float = 1.0
    load: Optional[List[int]] = None  # users per layer; T each if omitted
    trials: int = 200
    levels: int = 32
    dynamic_range_db: float = 30.0
    detector: str = "bma"

    def __post_init__(self):
        if self.load is None:
            self.load = [self.T] * self.layers
        if self.trials <= 0 or self.levels <= 0:
            raise ConfigError("power search needs positive trials and levels")


@dataclass
class MultilayerSection:
    """Round simulation of the optimized plan; skipped when rounds is 0."""
    rounds: int = 0
    arrival_rate: float = 2.0
    fixed_arrivals: Optional[int] = None
    p_max_tx: float = math.inf
    fading: str = "rayleigh"
    policy: str = "channel_based"
    least_power: bool = False
    probabilities: Optional[List[float]] = None
    outage_draws: int = 100000

    def __post_init__(self):
        try:
            self.p_max_tx = float(self.p_max_tx)  # accepts "inf"
        except (TypeError, ValueError):
            raise ConfigError(f"p_max_tx must be a number or \"inf\", got {self.p_max_tx!r}") from None
        if not self.p_max_tx > 0:
            raise ConfigError(f"p_max_tx must be positive, got {self.p_max_tx}")
        if self.policy not in ("channel_based", "random"):
            raise ConfigError(f"policy must be channel_based or random, got {self.policy!r}")
        if self.fading not in ("rayleigh", "none"):
            raise ConfigError(f"fading must be rayleigh or none, got {self.fading!r}")


@dataclass
class SysimSection:
    frame_count: int = 1000
    oma_block_count: int = 0
    mode: str = "abstract"
    partitions: List[Dict[str, Any]] = field(default_factory=list)
    phy: Dict[str, Any] = field(default_factory=dict)

    def build(self) -> Tuple[ResourcePoolConfig, TrafficConfig, SimMode, PhyConfig]:
        try:
            mode = SimMode(self.mode)
        except ValueError:
            raise ConfigError(f"sysim mode must be 'abstract' or 'full_phy', got {self.mode!r}") from None
        parts, traffic = [], {}
        traffic_keys = {"rate", "population", "fixed_arrivals"}
        for entry in self.partitions:
            entry = dict(entry)
            flows = {key: entry.pop(key) for key in list(entry) if key in traffic_keys}
            parts.append(_build(NomaPartition, entry, "sysim.partitions"))
            traffic[parts[-1].cluster_id] = _build(ClusterTraffic, flows, "sysim.partitions")
        phy = _build(PhyConfig, dict(self.phy), "sysim.phy")
        if isinstance(phy.ebn0_db, str):
            phy.ebn0_db = math.inf if phy.ebn0_db.lower() == "inf" else float(phy.ebn0_db)
        pools = ResourcePoolConfig(parts, self.oma_block_count, self.frame_count)
        return pools, TrafficConfig(traffic), mode, phy


@dataclass
class ZcSection:
    q: int = 839
    u: int = 1
    u_cross: int = 2


def load_config_file(path) -> Dict[str, Dict[str, Any]]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(data) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"unknown config sections: {unknown}")
    for name, body in data.items():
        if not isinstance(body, dict):
            raise ConfigError(f"section [{name}] must be an object")
    return data


def resolve_sections(path=None, preset: Optional[str] = None) -> Dict[str, Dict[str, Any]]:
    """Preset values overlaid by config-file values."""
    sections: Dict[str, Dict[str, Any]] = {name: {} for name in SECTIONS}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        for name, body in PRESETS[preset].items():
            sections[name].update(body)
    if path is not None:
        for name, body in load_config_file(path).items():
            sections[name].update(body)
    return sections


def scenario_config(sections: Dict[str, Dict[str, Any]], **overrides) -> ScenarioConfig:
    data = dict(sections.get("scenario", {}))
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ScenarioConfig.from_dict(data)


def section(cls, sections: Dict[str, Dict[str, Any]], name: str):
    return _build(cls, dict(sections.get(name, {})), name)

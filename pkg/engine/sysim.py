"""Slot-level resource-pool simulator for hybrid OMA/NOMA grant-free access."""

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from scipy.stats import poisson

from engine.debug import debug_log
from engine.detectors import joint_activity_bma, mld_decode
from engine.errors import ConfigError, FileError
from engine.galois import build_field
from engine.phy import OuterCode, ReceivedBlock, ebn0_to_noise_var, synthesize
from engine.signatures import build_signature_code


class SimMode(Enum):
    """Abstract collision rule or the full PHY chain per GFRU."""
    ABSTRACT = "abstract"
    FULL_PHY = "full_phy"


@dataclass
class NomaPartition:
    """One NOMA sub-region dedicated to a QoS cluster."""
    cluster_id: str
    gfru_count: int
    signature_pool_size: int
    capability: int
    gfru_selection: str = "random"  # or "predefined": device id modulo gfru_count

    def __post_init__(self):
        if self.gfru_count < 0 or self.signature_pool_size < 0 or self.capability < 0:
            raise ConfigError(f"partition {self.cluster_id}: counts must be >= 0")
        if self.gfru_selection not in ("random", "predefined"):
            raise ConfigError(f"partition {self.cluster_id}: unknown GFRU selection {self.gfru_selection!r}")


@dataclass
class ResourcePoolConfig:
    noma_partitions: List[NomaPartition]
    oma_block_count: int = 0
    frame_count: int = 1000

    def __post_init__(self):
        if not self.noma_partitions:
            raise ConfigError("a NOMA run needs at least one partition")
        if self.oma_block_count < 0 or self.frame_count < 0:
            raise ConfigError("OMA block and frame counts must be >= 0")
        ids = [p.cluster_id for p in self.noma_partitions]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate cluster ids: {ids}")


@dataclass
class ClusterTraffic:
    rate: float = 0.0  # Poisson packets per frame
    population: Optional[int] = None
    fixed_arrivals: Optional[int] = None

    def __post_init__(self):
        if self.rate < 0:
            raise ConfigError(f"arrival rate must be >= 0, got {self.rate}")


@dataclass
class TrafficConfig:
    clusters: Dict[str, ClusterTraffic]


@dataclass
class PhyConfig:
    """Link parameters for FULL_PHY mode; the pool size must equal 2^k - 1."""
    k: int = 4
    outer_rate: float = 1.0
    ebn0_db: float = math.inf
    amplitude: float = 1.0
    detector: str = "bma"
    primitive_poly: Optional[int] = None


@dataclass
class ClusterMetrics:
    cluster_id: str
    frames: int = 0
    offered_load: float = 0.0
    packets: int = 0
    successes: int = 0
    collided: int = 0
    occupancy: Counter = field(default_factory=Counter)

    @property
    def throughput(self) -> float:
        return self.successes / self.frames if self.frames else 0.0

    @property
    def success_prob(self) -> float:
        return self.successes / self.packets if self.packets else math.nan

    @property
    def collision_rate(self) -> float:
        return self.collided / self.packets if self.packets else math.nan


@dataclass
class SystemMetrics:
    clusters: Dict[str, ClusterMetrics]
    oma_capacity: int
    frames: int


def analytic_success_probability(lam: float, n: int, T: int) -> float:
    """P(tagged packet succeeds) with Poisson(lam) other packets in its GFRU.

    The tagged packet needs every other packet on a different signature and
    at most T packets in total.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if T < 1:
        return 0.0
    l = np.arange(T)
    return float(np.sum(poisson.pmf(l, lam) * ((n - 1) / n) ** l))


class SystemSimulator:
    """Frame loop over clusters, GFRUs and signature picks."""

    def __init__(self, pools: ResourcePoolConfig, traffic: TrafficConfig, mode: SimMode = SimMode.ABSTRACT,
                 phy: Optional[PhyConfig] = None):
        self.pools = pools
        self.traffic = traffic
        self.mode = mode
        self.phy = phy or PhyConfig()
        self._codes = {}
        if mode is SimMode.FULL_PHY:
            self.outer = OuterCode.from_rate(self.phy.outer_rate)
            field_tables = build_field(self.phy.k, self.phy.primitive_poly)
            for part in pools.noma_partitions:
                if part.signature_pool_size != field_tables.order:
                    raise ConfigError(f"cluster {part.cluster_id}: pool size {part.signature_pool_size} "
                                      f"must equal 2^k - 1 = {field_tables.order} in full-PHY mode")
                self._codes[part.cluster_id] = build_signature_code(field_tables, part.capability)

    def _arrivals(self, traffic: ClusterTraffic, rng: np.random.Generator) -> int:
        if traffic.fixed_arrivals is not None:
            return traffic.fixed_arrivals
        count = int(rng.poisson(traffic.rate))
        if traffic.population is not None:
            count = min(count, traffic.population)
        return count

    def _gfru_choices(self, part: NomaPartition, traffic: ClusterTraffic, count: int,
                      rng: np.random.Generator) -> np.ndarray:
        if part.gfru_selection == "predefined":
            population = traffic.population or max(count, part.gfru_count)
            devices = rng.choice(population, size=min(count, population), replace=False)
            return devices % part.gfru_count
        return rng.integers(0, part.gfru_count, size=count)

    def _phy_successes(self, part: NomaPartition, signatures: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        code = self._codes[part.cluster_id]
        noise_var = ebn0_to_noise_var(self.phy.ebn0_db, self.phy.amplitude, code.T, self.outer.rate)
        messages = [int(s) + 1 for s in signatures]
        chips = synthesize(code, self.outer, messages, self.phy.amplitude)
        chips = chips + math.sqrt(noise_var) * rng.standard_normal(chips.size)
        block = ReceivedBlock(chips, self.phy.amplitude, noise_var)
        if self.phy.detector == "mld":
            decoded = mld_decode(block, code, self.outer, code.T)
        else:
            decoded = joint_activity_bma(block, code, self.outer)
        got = set(decoded.messages) if decoded.ok else set()
        return np.array([m in got for m in messages], dtype=bool)

    def run_frame(self, frame: int, seed: int, metrics: Dict[str, ClusterMetrics]):
        for c, part in enumerate(self.pools.noma_partitions):
            # one stream per (frame, cluster) keeps clusters independent of each other
            rng = np.random.default_rng([seed, frame, c])
            traffic = self.traffic.clusters.get(part.cluster_id, ClusterTraffic())
            stats = metrics[part.cluster_id]
            stats.frames += 1
            count = self._arrivals(traffic, rng)
            if part.gfru_count == 0:
                stats.packets += count
                stats.collided += count
                continue
            if count == 0:
                stats.occupancy[0] += part.gfru_count
                continue
            gfrus = self._gfru_choices(part, traffic, count, rng)
            count = gfrus.size
            signatures = rng.integers(0, part.signature_pool_size, size=count)
            stats.packets += count
            for g in range(part.gfru_count):
                members = np.flatnonzero(gfrus == g)
                stats.occupancy[int(members.size)] += 1
                if members.size == 0:
                    continue
                sigs = signatures[members]
                values, counts = np.unique(sigs, return_counts=True)
                unique = np.isin(sigs, values[counts == 1])
                alive = unique & (members.size <= part.capability)
                stats.collided += int(np.sum(~alive))
                if self.mode is SimMode.ABSTRACT:
                    stats.successes += int(np.sum(alive))
                else:
                    stats.successes += int(np.sum(self._phy_successes(part, sigs, rng)))

    def run(self, seed: int) -> SystemMetrics:
        metrics = {}
        for part in self.pools.noma_partitions:
            traffic = self.traffic.clusters.get(part.cluster_id, ClusterTraffic())
            metrics[part.cluster_id] = ClusterMetrics(part.cluster_id, offered_load=traffic.rate)
        for frame in range(self.pools.frame_count):
            self.run_frame(frame, seed, metrics)
        for stats in metrics.values():
            debug_log(f"[SYSIM] cluster {stats.cluster_id}: throughput={stats.throughput:.4f} "
                      f"success={stats.success_prob:.4f}")
        return SystemMetrics(metrics, self.pools.oma_block_count, self.pools.frame_count)


def run_system_sim(pools: ResourcePoolConfig, traffic: TrafficConfig, mode: SimMode = SimMode.ABSTRACT,
                   seed: int = 0, phy: Optional[PhyConfig] = None) -> SystemMetrics:
    """Simulate every frame and aggregate per-cluster metrics."""
    return SystemSimulator(pools, traffic, mode, phy).run(seed)


def write_system_metrics(metrics: SystemMetrics, path) -> Path:
    """Per-cluster rows: cluster_id, frames, offered_load, throughput, success_prob, collision_rate."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["cluster_id", "frames", "offered_load", "throughput", "success_prob", "collision_rate"])
            for stats in metrics.clusters.values():
                writer.writerow([stats.cluster_id, stats.frames, f"{stats.offered_load:g}",
                                 f"{stats.throughput:.6e}", f"{stats.success_prob:.6e}",
                                 f"{stats.collision_rate:.6e}"])
    except OSError as e:
        raise FileError(f"cannot write system metrics {path}: {e}") from e
    return path

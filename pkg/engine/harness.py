"""Monte Carlo BLER sweeps, curve CSVs and plot-script generation.

Every trial draws from its own stream keyed by (seed, Eb/N0 index, trial),
and chunks of trials are merged in trial order, so the CSV does not depend
on how many worker processes ran the sweep.
"""

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from config.settings import (
    CONFIDENCE_LEVEL,
    DEFAULT_MIN_ERROR_EVENTS,
    DL_DEFAULT_THRESHOLD,
    EBN0_CALIBRATION,
    MLD_SUBSET_BUDGET,
    TRIAL_CHUNK_SIZE,
)
from engine.debug import debug_log
from engine.detectors import DecodedSet, joint_activity_bma, mld_decode
from engine.errors import ConfigError, FileError
from engine.galois import build_field
from engine.neural import Model, codebook, dl_detect, load_model
from engine.phy import OuterCode, ReceivedBlock, ebn0_to_noise_var, synthesize
from engine.signatures import build_signature_code

DETECTORS = ("bma", "mld", "dl")
CSV_COLUMNS = ["scenario_id", "detector", "ebn0_db", "active_users", "trials",
               "message_errors", "false_alarms", "bler", "ci_low", "ci_high"]


def _parse_ebn0(value) -> float:
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "+inf", "infinity"):
            return math.inf
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"bad Eb/N0 value {value!r}") from None
    return float(value)


@dataclass
class ScenarioConfig:
    """One BLER experiment: code, detectors, SNR grid, activity and trial budget."""
    scenario_id: str = "scenario"
    k: int = 4
    T: int = 2
    primitive_poly: Optional[int] = None
    outer_rate: float = 1.0
    detectors: Tuple[str, ...] = ("bma",)
    dl_model: Optional[str] = None
    dl_threshold: float = DL_DEFAULT_THRESHOLD
    amplitude: float = 1.0
    ebn0_grid_db: Tuple[float, ...] = (0.0, 2.0, 4.0, 6.0, 8.0)
    activity: str = "fixed"  # "fixed" (active_users each trial) or "uniform" on 1..T
    active_users: Optional[int] = None
    trials_per_point: int = 1000
    min_error_events: int = DEFAULT_MIN_ERROR_EVENTS
    seed: int = 0
    workers: int = 1
    soft_viterbi: bool = False
    mld_budget: int = MLD_SUBSET_BUDGET

    def __post_init__(self):
        self.detectors = tuple(str(d).lower() for d in self.detectors)
        self.ebn0_grid_db = tuple(_parse_ebn0(v) for v in self.ebn0_grid_db)
        if not self.ebn0_grid_db:
            raise ConfigError("ebn0_grid_db must not be empty")
        if self.trials_per_point <= 0:
            raise ConfigError("trials_per_point must be positive")
        if not self.detectors:
            raise ConfigError("at least one detector is required")
        unknown = [d for d in self.detectors if d not in DETECTORS]
        if unknown:
            raise ConfigError(f"unknown detectors {unknown}; choose from {list(DETECTORS)}")
        if "dl" in self.detectors and not self.dl_model:
            raise ConfigError("the dl detector needs dl_model (checkpoint path)")
        if self.outer_rate not in (1, 1.0, 0.5):
            raise ConfigError(f"outer_rate must be 1 or 0.5, got {self.outer_rate}")
        if self.activity not in ("fixed", "uniform"):
            raise ConfigError(f"activity must be 'fixed' or 'uniform', got {self.activity!r}")
        if self.active_users is None:
            self.active_users = self.T
        if self.activity == "fixed" and not 1 <= self.active_users <= self.T:
            raise ConfigError(f"active_users must lie in 1..T={self.T}, got {self.active_users}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.amplitude <= 0:
            raise ConfigError("amplitude must be positive")

    @classmethod
    def from_dict(cls, data: Dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown scenario keys: {unknown}")
        data = dict(data)
        for key in ("detectors", "ebn0_grid_db"):
            if key in data:
                if isinstance(data[key], (str, int, float)):
                    data[key] = [data[key]]
                data[key] = tuple(data[key])
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"bad scenario config: {e}") from e

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["ebn0_grid_db"] = ["inf" if math.isinf(v) else v for v in self.ebn0_grid_db]
        data["detectors"] = list(self.detectors)
        return data

    def config_hash(self) -> str:
        """SHA-256 over every field that can change the numbers (workers excluded)."""
        data = self.to_dict()
        data.pop("workers")
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()


@dataclass
class CurvePoint:
    """Tally of one (detector, Eb/N0, L) cell."""
    scenario_id: str
    detector: str
    ebn0_db: float
    active_users: int
    trials: int = 0
    message_errors: int = 0
    false_alarms: int = 0

    @property
    def messages(self) -> int:
        return self.trials * self.active_users

    @property
    def bler(self) -> float:
        return self.message_errors / self.messages if self.messages else math.nan

    @property
    def false_alarm_rate(self) -> float:
        return self.false_alarms / self.trials if self.trials else math.nan

    @property
    def ci(self) -> Tuple[float, float]:
        return wilson_interval(self.message_errors, self.messages)

    @property
    def ci_low(self) -> float:
        return self.ci[0]

    @property
    def ci_high(self) -> float:
        return self.ci[1]


def wilson_interval(successes: int, total: int, level: float = CONFIDENCE_LEVEL) -> Tuple[float, float]:
    if total <= 0:
        return math.nan, math.nan
    z = norm.ppf(0.5 + level / 2.0)
    p = successes / total
    denom = 1.0 + z * z / total
    center = (p + z * z / (2.0 * total)) / denom
    half = z * math.sqrt(p * (1.0 - p) / total + z * z / (4.0 * total * total)) / denom
    low = 0.0 if successes == 0 else max(0.0, center - half)
    high = 1.0 if successes == total else min(1.0, center + half)
    return low, high


class TrialRunner:
    """Per-process transmit/detect chains for every detector of a scenario."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.code = build_signature_code(build_field(cfg.k, cfg.primitive_poly), cfg.T)
        self.outer = OuterCode.from_rate(cfg.outer_rate)
        self.model: Optional[Model] = None
        self.dl_codebook: Optional[np.ndarray] = None
        if "dl" in cfg.detectors:
            self.model = load_model(cfg.dl_model)
            if self.model.k != cfg.k or self.model.T != cfg.T:
                raise ConfigError(f"checkpoint was trained for k={self.model.k}, T={self.model.T}")
            self.dl_codebook = codebook(self.model, hard=True) * (cfg.amplitude / self.model.amplitude)
        self.bch_chips = self.outer.coded_length(self.code.seq_len)
        lengths = [self.bch_chips]
        if self.model is not None:
            lengths.append(self.model.chip_count)
        self.max_chips = max(lengths)

    def draw(self, rng: np.random.Generator) -> Tuple[List[int], np.ndarray]:
        cfg = self.cfg
        L = cfg.active_users if cfg.activity == "fixed" else int(rng.integers(1, cfg.T + 1))
        messages = sorted(int(m) + 1 for m in rng.choice(self.code.n, size=L, replace=False))
        return messages, rng.standard_normal(self.max_chips)

    def detect(self, detector: str, messages: Sequence[int], z: np.ndarray, ebn0_db: float) -> DecodedSet:
        cfg = self.cfg
        if detector == "dl":
            noise_var = ebn0_to_noise_var(ebn0_db, cfg.amplitude, cfg.T, self.model.rate)
            chips = self.dl_codebook[np.asarray(messages) - 1].sum(axis=0)
            chips = chips + math.sqrt(noise_var) * z[:self.model.chip_count]
            scale = self.model.amplitude / cfg.amplitude
            block = ReceivedBlock(chips * scale, self.model.amplitude, noise_var * scale * scale)
            return dl_detect(self.model, block, cfg.dl_threshold)
        noise_var = ebn0_to_noise_var(ebn0_db, cfg.amplitude, cfg.T, self.outer.rate)
        chips = synthesize(self.code, self.outer, messages, cfg.amplitude)
        chips = chips + math.sqrt(noise_var) * z[:self.bch_chips]
        block = ReceivedBlock(chips, cfg.amplitude, noise_var)
        if detector == "mld":
            return mld_decode(block, self.code, self.outer, cfg.T, cfg.mld_budget)
        return joint_activity_bma(block, self.code, self.outer, soft=cfg.soft_viterbi)

    def trial(self, ebn0_index: int, trial: int) -> Tuple[int, List[Tuple[int, int]]]:
        """Active count plus (missed, false alarms) per detector."""
        cfg = self.cfg
        rng = np.random.default_rng([cfg.seed, ebn0_index, trial])
        messages, z = self.draw(rng)
        sent = set(messages)
        counts = []
        for detector in cfg.detectors:
            decoded = self.detect(detector, messages, z, cfg.ebn0_grid_db[ebn0_index])
            got = set(decoded.messages) if decoded.ok else set()
            counts.append((len(sent - got), len(got - sent)))
        return len(messages), counts


@lru_cache(maxsize=4)
def _runner(cfg_json: str) -> TrialRunner:
    return TrialRunner(ScenarioConfig.from_dict(json.loads(cfg_json)))


def _run_chunk(job: Tuple[str, int, int, int]):
    cfg_json, ebn0_index, start, stop = job
    runner = _runner(cfg_json)
    return [runner.trial(ebn0_index, t) for t in range(start, stop)]


def run_bler_sweep(cfg: ScenarioConfig,
                   progress: Optional[Callable[[float, int], None]] = None) -> List[CurvePoint]:
    """Tally every (Eb/N0, L, detector) cell; rows come back sorted by (Eb/N0, L).

    A point stops at trials_per_point or at the first trial after which every
    detector has at least min_error_events message errors.
    """
    cfg_json = json.dumps(cfg.to_dict(), sort_keys=True)
    runner = _runner(cfg_json)  # fail fast on bad checkpoints in the parent process
    L_values = [cfg.active_users] if cfg.activity == "fixed" else list(range(1, cfg.T + 1))
    points: List[CurvePoint] = []
    pool = ProcessPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        for e, ebn0 in enumerate(cfg.ebn0_grid_db):
            cells = {(L, d): CurvePoint(cfg.scenario_id, d, ebn0, L) for L in L_values for d in cfg.detectors}
            totals = [0] * len(cfg.detectors)
            done = 0
            stopped = False
            while done < cfg.trials_per_point and not stopped:
                wave = []
                start = done
                for _ in range(cfg.workers):
                    if start >= cfg.trials_per_point:
                        break
                    stop = min(start + TRIAL_CHUNK_SIZE, cfg.trials_per_point)
                    wave.append((cfg_json, e, start, stop))
                    start = stop
                if pool is None:
                    results = [[runner.trial(e, t) for t in range(s, t_end)] for _, _, s, t_end in wave]
                else:
                    results = list(pool.map(_run_chunk, wave))
                for chunk in results:
                    for L, counts in chunk:
                        done += 1
                        for i, (d, (missed, extra)) in enumerate(zip(cfg.detectors, counts)):
                            cell = cells[(L, d)]
                            cell.trials += 1
                            cell.message_errors += missed
                            cell.false_alarms += extra
                            totals[i] += missed
                        if cfg.min_error_events > 0 and min(totals) >= cfg.min_error_events:
                            debug_log(f"[SWEEP] Eb/N0={ebn0:g}: stop at trial {done}")
                            stopped = True
                            break
                    if stopped:
                        break
                if progress is not None:
                    progress(ebn0, done)
            points.extend(cell for (L, d), cell in sorted(
                cells.items(), key=lambda item: (item[0][0], cfg.detectors.index(item[0][1]))) if cell.trials)
    finally:
        if pool is not None:
            pool.shutdown()
    points.sort(key=lambda p: (p.ebn0_db, p.active_users))
    return points


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6e}"


def write_curve_csv(points: Sequence[CurvePoint], cfg: ScenarioConfig, path) -> Path:
    """CSV with '#' lines for the config hash and energy convention, then one row per cell."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(f"# config_sha256={cfg.config_hash()}\n")
            fh.write(f"# ebn0_calibration={EBN0_CALIBRATION}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for p in points:
                writer.writerow([p.scenario_id, p.detector, f"{p.ebn0_db:g}", p.active_users, p.trials,
                                 p.message_errors, p.false_alarms, _fmt(p.bler), _fmt(p.ci_low), _fmt(p.ci_high)])
    except OSError as e:
        raise FileError(f"cannot write curve CSV {path}: {e}") from e
    return path


def read_curve_csv(path) -> List[Dict[str, str]]:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            return list(csv.DictReader(line for line in fh if not line.startswith("#")))
    except OSError as e:
        raise FileError(f"cannot read curve CSV {path}: {e}") from e


_CURVE_SCRIPT = '''#!/usr/bin/env python3
"""BLER versus Eb/N0, one series per (detector, active users)."""
import csv
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

CSV_PATH = {csv_path!r}
IMAGE_PATH = {image_path!r}

series = defaultdict(list)
with open(CSV_PATH, newline="") as fh:
    for row in csv.DictReader(line for line in fh if not line.startswith("#")):
        x = float(row["ebn0_db"])
        y = float(row["bler"])
        if x == float("inf") or not y > 0:
            continue
        series[(row["detector"], int(row["active_users"]))].append((x, y))

fig, ax = plt.subplots(figsize=(7, 5))
for (detector, users), pts in sorted(series.items()):
    pts.sort()
    ax.semilogy([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"{{detector.upper()}} L={{users}}")
ax.set_xlabel("Eb/N0 (dB)")
ax.set_ylabel("BLER")
ax.grid(True, which="both", alpha=0.3)
if series:
    ax.legend()
fig.tight_layout()
fig.savefig(IMAGE_PATH, dpi=150)
'''

_POWER_SCRIPT = '''#!/usr/bin/env python3
"""Min-max BLER over the two-layer received-power grid."""
import csv

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

CSV_PATH = {csv_path!r}
IMAGE_PATH = {image_path!r}

rows = []
with open(CSV_PATH, newline="") as fh:
    for row in csv.DictReader(line for line in fh if not line.startswith("#")):
        if row["p2"] == "nan":
            continue
        rows.append((float(row["p1"]), float(row["p2"]), float(row["minmax"])))

fig, ax = plt.subplots(figsize=(6, 5))
if rows:
    p1 = sorted({{r[0] for r in rows}})
    p2 = sorted({{r[1] for r in rows}})
    grid = np.full((len(p2), len(p1)), np.nan)
    for a, b, v in rows:
        grid[p2.index(b), p1.index(a)] = v
    mesh = ax.pcolormesh(10 * np.log10(p1), 10 * np.log10(p2), np.ma.masked_invalid(grid), shading="nearest")
    fig.colorbar(mesh, ax=ax, label="min-max BLER")
ax.set_xlabel("P1 (dB)")
ax.set_ylabel("P2 (dB)")
fig.tight_layout()
fig.savefig(IMAGE_PATH, dpi=150)
'''


def _emit(template: str, csv_path, script_path, image_path) -> Path:
    csv_path = Path(csv_path)
    if not csv_path.is_file():
        raise FileError(f"CSV not found: {csv_path}")
    script_path = Path(script_path) if script_path else csv_path.with_suffix(".plot.py")
    image_path = Path(image_path) if image_path else csv_path.with_suffix(".png")
    try:
        script_path.write_text(template.format(csv_path=str(csv_path.resolve()),
                                               image_path=str(image_path.resolve())))
    except OSError as e:
        raise FileError(f"cannot write plot script {script_path}: {e}") from e
    return script_path


def emit_plot_script(csv_path, script_path=None, image_path=None) -> Path:
    """Write a standalone matplotlib script that renders the BLER curves of csv_path."""
    return _emit(_CURVE_SCRIPT, csv_path, script_path, image_path)


def emit_power_plot_script(csv_path, script_path=None, image_path=None) -> Path:
    """Heatmap script for a power-optimizer grid CSV."""
    return _emit(_POWER_SCRIPT, csv_path, script_path, image_path)

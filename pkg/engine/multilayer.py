"""Multi-layer power-domain GF-NOMA: SIC receiver, power search, layer selection."""

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from config.settings import MAX_LAYERS, POWER_GRID_DYNAMIC_RANGE_DB, POWER_GRID_LEVELS
from engine.debug import debug_log
from engine.detectors import DecodedSet, joint_activity_bma, mld_decode
from engine.errors import FileError, InfeasibleGrid, InvalidLayerPlan
from engine.phy import OuterCode, ReceivedBlock, synthesize
from engine.signatures import BchSignatureCode


class DetectorKind(Enum):
    """Per-layer detector used inside the SIC chain."""
    BMA = "bma"
    MLD = "mld"


class LayerPolicy(Enum):
    """How a device picks its received-power layer."""
    CHANNEL_BASED = "channel_based"
    RANDOM = "random"


class Outage(Enum):
    """No layer is reachable under the device's transmit-power ceiling."""
    OUTAGE = "outage"


@dataclass(frozen=True)
class LayerPlan:
    """Received power per layer (linear, strictly descending) over a shared code."""
    powers: Tuple[float, ...]
    code: BchSignatureCode
    p_max: float = math.inf

    def __post_init__(self):
        if not 1 <= len(self.powers) <= MAX_LAYERS:
            raise InvalidLayerPlan(f"layer count must be in [1, {MAX_LAYERS}], got {len(self.powers)}")
        if any(p <= 0 for p in self.powers):
            raise InvalidLayerPlan(f"layer powers must be positive: {self.powers}")
        if any(a <= b for a, b in zip(self.powers, self.powers[1:])):
            raise InvalidLayerPlan(f"layer powers must be strictly descending: {self.powers}")
        if self.powers[0] > self.p_max:
            raise InvalidLayerPlan(f"top layer power {self.powers[0]} exceeds P_max {self.p_max}")

    @property
    def J(self) -> int:
        return len(self.powers)

    @property
    def T(self) -> int:
        return self.code.T

    def amplitudes(self) -> List[float]:
        return [math.sqrt(p) for p in self.powers]


@dataclass(frozen=True)
class UserState:
    """Device channel power gain and transmit-power ceiling."""
    channel_gain: float
    p_max_tx: float

    def __post_init__(self):
        if self.channel_gain <= 0 or self.p_max_tx <= 0:
            raise ValueError("channel gain and transmit ceiling must be positive")


def _decode_layer(block: ReceivedBlock, code: BchSignatureCode, outer: OuterCode,
                  detector: DetectorKind, soft: bool) -> DecodedSet:
    if detector is DetectorKind.MLD:
        return mld_decode(block, code, outer, code.T)
    return joint_activity_bma(block, code, outer, soft=soft)


def sic_receive(block: ReceivedBlock, plan: LayerPlan, outer: OuterCode,
                detector: DetectorKind = DetectorKind.BMA, soft: bool = False) -> List[DecodedSet]:
    """Decode layers strongest first, subtracting every successfully decoded layer.

    Undecoded weaker layers are folded into the noise as Gaussian interference
    of variance P_i * T / 2 each.
    """
    residual = np.array(block.chips, dtype=np.float64)
    results = []
    for j, power in enumerate(plan.powers):
        interference = sum(p * plan.T / 2.0 for p in plan.powers[j + 1:])
        layer_block = ReceivedBlock(chips=residual, amplitude=math.sqrt(power),
                                    noise_var=block.noise_var + interference)
        decoded = _decode_layer(layer_block, plan.code, outer, detector, soft)
        if decoded.ok:
            residual = residual - synthesize(plan.code, outer, decoded.messages, math.sqrt(power))
        else:
            debug_log(f"[SIC] layer {j + 1} failed; not subtracted")
        results.append(decoded)
    return results


def feasible_layers(plan: LayerPlan, user: UserState) -> List[int]:
    """1-based layers whose required transmit power P_j / g fits the ceiling."""
    return [j + 1 for j, p in enumerate(plan.powers) if p / user.channel_gain <= user.p_max_tx]


def select_layer(policy: LayerPolicy, user: UserState, plan: LayerPlan, least_power: bool = False,
                 probabilities: Optional[Sequence[float]] = None,
                 rng: Optional[np.random.Generator] = None) -> Union[int, Outage]:
    """Pick a layer index (1 = strongest) or Outage when none is affordable.

    CHANNEL_BASED takes the highest affordable layer, or with least_power the
    cheapest one. RANDOM draws from the configured probabilities restricted to
    the feasible set and renormalized.
    """
    feasible = feasible_layers(plan, user)
    if not feasible:
        return Outage.OUTAGE
    if policy is LayerPolicy.CHANNEL_BASED:
        return max(feasible) if least_power else min(feasible)
    if rng is None:
        raise ValueError("the random layer policy needs an rng")
    probs = np.full(plan.J, 1.0 / plan.J) if probabilities is None else np.asarray(probabilities, dtype=float)
    weights = np.array([probs[j - 1] for j in feasible])
    if weights.sum() <= 0:
        weights = np.ones(len(feasible))
    return int(rng.choice(feasible, p=weights / weights.sum()))


def _layer_messages(rng: np.random.Generator, n: int, load: int) -> List[int]:
    return sorted(int(m) + 1 for m in rng.choice(n, size=load, replace=False))


def evaluate_plan(plan: LayerPlan, noise_var: float, load: Sequence[int], trials: int, seed: int,
                  outer: OuterCode, detector: DetectorKind = DetectorKind.BMA) -> List[float]:
    """Monte Carlo per-layer BLER with `load[j]` distinct users on layer j.

    Trial t always draws from the stream keyed by (seed, t), so different
    plans are compared on common random numbers.
    """
    code = plan.code
    errors = [0] * plan.J
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        sent = [_layer_messages(rng, code.n, load[j]) for j in range(plan.J)]
        noise = rng.standard_normal(outer.coded_length(code.seq_len))
        chips = sum(synthesize(code, outer, sent[j], a) for j, a in enumerate(plan.amplitudes()))
        chips = chips + math.sqrt(noise_var) * noise
        decoded = sic_receive(ReceivedBlock(chips, plan.amplitudes()[0], noise_var), plan, outer, detector)
        for j, result in enumerate(decoded):
            got = set(result.messages) if result.ok else set()
            errors[j] += sum(1 for m in sent[j] if m not in got)
    return [errors[j] / (trials * load[j]) if load[j] else 0.0 for j in range(plan.J)]


@dataclass
class PowerGridRow:
    powers: Tuple[float, ...]
    bler: Tuple[float, ...]

    @property
    def minmax(self) -> float:
        return max(self.bler)


@dataclass
class PowerAllocation:
    """Optimizer result: the chosen plan, its min-max BLER and the full grid."""
    plan: LayerPlan
    minmax_bler: float
    grid: List[PowerGridRow] = field(default_factory=list)


def power_grid(p_max: float, levels: int = POWER_GRID_LEVELS,
               dynamic_range_db: float = POWER_GRID_DYNAMIC_RANGE_DB) -> List[float]:
    """Geometrically spaced power levels from P_max down by dynamic_range_db."""
    if levels == 1:
        return [p_max]
    step = dynamic_range_db / (levels - 1)
    return [p_max * 10.0 ** (-i * step / 10.0) for i in range(levels)]


def optimize_power_allocation(J: int, p_max: float, noise_var: float, load: Sequence[int], trials: int,
                              code: BchSignatureCode, outer: OuterCode, seed: int = 0,
                              levels: int = POWER_GRID_LEVELS,
                              dynamic_range_db: float = POWER_GRID_DYNAMIC_RANGE_DB,
                              detector: DetectorKind = DetectorKind.BMA) -> PowerAllocation:
    """Exhaustive grid search minimizing the maximum per-layer BLER.

    Ties go to the lower total power. One layer is served at P_max, since
    BLER does not increase with power at fixed noise.
    """
    if J not in (1, 2):
        raise InvalidLayerPlan(f"power optimization supports 1 or 2 layers, got {J}")
    if p_max <= 0:
        raise InvalidLayerPlan("P_max must be positive")
    load = list(load)
    if len(load) != J:
        raise InvalidLayerPlan(f"expected {J} per-layer loads, got {len(load)}")
    if J == 1:
        plan = LayerPlan((p_max,), code, p_max)
        bler = tuple(evaluate_plan(plan, noise_var, load, trials, seed, outer, detector))
        return PowerAllocation(plan, max(bler), [PowerGridRow((p_max,), bler)])

    grid = power_grid(p_max, levels, dynamic_range_db)
    candidates = [(p1, p2) for p1 in grid for p2 in grid if p1 > p2]
    if not candidates:
        raise InfeasibleGrid(f"no ordered power pairs in a {levels}-level grid")
    rows = []
    best: Optional[PowerGridRow] = None
    for powers in candidates:
        plan = LayerPlan(powers, code, p_max)
        row = PowerGridRow(powers, tuple(evaluate_plan(plan, noise_var, load, trials, seed, outer, detector)))
        rows.append(row)
        if best is None or (row.minmax, sum(row.powers)) < (best.minmax, sum(best.powers)):
            best = row
        debug_log(f"[POWER] P={powers} bler={row.bler}")
    return PowerAllocation(LayerPlan(best.powers, code, p_max), best.minmax, rows)


@dataclass
class ArrivalModel:
    """Packets per round: Poisson(rate) or exactly `fixed` packets."""
    rate: float = 1.0
    fixed: Optional[int] = None

    def draw(self, rng: np.random.Generator) -> int:
        if self.fixed is not None:
            return self.fixed
        return int(rng.poisson(self.rate))


@dataclass
class MultilayerMetrics:
    rounds: int
    arrivals: int
    outages: int
    transmitted: List[int]
    recovered: List[int]
    total_tx_power: float

    @property
    def per_layer_bler(self) -> List[float]:
        return [(t - r) / t if t else math.nan for t, r in zip(self.transmitted, self.recovered)]

    @property
    def outage_probability(self) -> float:
        return self.outages / self.arrivals if self.arrivals else math.nan

    @property
    def goodput(self) -> float:
        return sum(self.recovered) / self.rounds if self.rounds else 0.0

    @property
    def mean_tx_power(self) -> float:
        sent = sum(self.transmitted)
        return self.total_tx_power / sent if sent else math.nan


def draw_gain(fading: str, rng: np.random.Generator) -> float:
    if fading == "rayleigh":
        return float(rng.exponential(1.0))
    if fading == "none":
        return 1.0
    raise ValueError(f"unknown fading model {fading!r}")


def simulate_multilayer_round(plan: LayerPlan, arrivals: ArrivalModel, noise_var: float, rounds: int,
                              seed: int, outer: OuterCode, p_max_tx: float = math.inf,
                              fading: str = "rayleigh",
                              policy: LayerPolicy = LayerPolicy.CHANNEL_BASED, least_power: bool = False,
                              probabilities: Optional[Sequence[float]] = None,
                              detector: DetectorKind = DetectorKind.BMA) -> MultilayerMetrics:
    """Rounds of random arrivals, fading, layer choice and SIC detection."""
    code = plan.code
    metrics = MultilayerMetrics(rounds, 0, 0, [0] * plan.J, [0] * plan.J, 0.0)
    chip_count = outer.coded_length(code.seq_len)
    for r in range(rounds):
        rng = np.random.default_rng([seed, r])
        count = arrivals.draw(rng)
        metrics.arrivals += count
        sent: List[List[int]] = [[] for _ in range(plan.J)]
        for _ in range(count):
            user = UserState(draw_gain(fading, rng), p_max_tx)
            choice = select_layer(policy, user, plan, least_power, probabilities, rng)
            message = int(rng.integers(1, code.n + 1))
            if choice is Outage.OUTAGE:
                metrics.outages += 1
                continue
            sent[choice - 1].append(message)
            metrics.total_tx_power += plan.powers[choice - 1] / user.channel_gain
        if not any(sent):
            continue
        chips = np.zeros(chip_count)
        for j, a in enumerate(plan.amplitudes()):
            chips += synthesize(code, outer, sent[j], a)
        chips += math.sqrt(noise_var) * rng.standard_normal(chip_count)
        decoded = sic_receive(ReceivedBlock(chips, plan.amplitudes()[0], noise_var), plan, outer, detector)
        for j, result in enumerate(decoded):
            got = set(result.messages) if result.ok else set()
            metrics.transmitted[j] += len(sent[j])
            metrics.recovered[j] += sum(1 for m in sent[j] if m in got)
    return metrics


def estimate_outage(plan: LayerPlan, p_max_tx: float, draws: int, seed: int,
                    fading: str = "rayleigh") -> float:
    """Fraction of devices that cannot reach even the weakest layer."""
    rng = np.random.default_rng(seed)
    if fading == "rayleigh":
        gains = rng.exponential(1.0, size=draws)
    else:
        gains = np.ones(draws)
    return float(np.mean(min(plan.powers) / gains > p_max_tx))


def write_power_grid(allocation: PowerAllocation, path) -> Path:
    """Grid table with columns p1, p2, bler_layer1, bler_layer2, minmax."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["p1", "p2", "bler_layer1", "bler_layer2", "minmax"])
            for row in allocation.grid:
                p = list(row.powers) + [math.nan] * (2 - len(row.powers))
                b = list(row.bler) + [math.nan] * (2 - len(row.bler))
                writer.writerow([f"{p[0]:.6g}", f"{p[1]:.6g}", f"{b[0]:.6e}", f"{b[1]:.6e}", f"{row.minmax:.6e}"])
    except OSError as e:
        raise FileError(f"cannot write power grid {path}: {e}") from e
    return path

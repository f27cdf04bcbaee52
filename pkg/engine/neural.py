"""Autoencoder detector: shared user encoder, adder channel, receiver decoder.

Everything is plain numpy. The encoder maps a one-hot message to sigmoid
scores s. During training u = 2s - 1 is rescaled per user to RMS A, so each
user puts A^2 per chip on the channel as the hard +/-A chips (sign of u) do
at inference. The decoder maps the noisy chip sum to per-message
activity scores trained with multi-label binary cross-entropy.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from config.settings import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPSILON,
    ADAM_LEARNING_RATE,
    CHECKPOINT_FORMAT_VERSION,
    DL_DEFAULT_THRESHOLD,
    SOFT_CHIP_FLOOR,
)
from engine.debug import debug_log
from engine.detectors import DecodedSet, DecodeStatus
from engine.errors import CheckpointMissing, ConfigError, DivergenceDetected, FileError, LengthMismatch
from engine.phy import ReceivedBlock, ebn0_to_noise_var

LossWeights = Dict[Tuple[int, float], float]


@dataclass(frozen=True)
class MlpSpec:
    """Fully connected widths (input, hidden..., output); ReLU hidden, sigmoid output."""
    layer_widths: Tuple[int, ...]
    hidden_activation: str = "relu"
    output_activation: str = "sigmoid"

    def __post_init__(self):
        if len(self.layer_widths) < 3:
            raise ConfigError("an MLP needs an input, at least one hidden and an output layer")
        if any(w <= 0 for w in self.layer_widths):
            raise ConfigError(f"layer widths must be positive: {self.layer_widths}")
        if (self.hidden_activation, self.output_activation) != ("relu", "sigmoid"):
            raise ConfigError("only ReLU hidden and sigmoid output activations are supported")


class Mlp:
    """Weights and the forward/backward passes of one MLP."""

    def __init__(self, spec: MlpSpec, weights: List[np.ndarray], biases: List[np.ndarray]):
        self.spec = spec
        self.weights = weights
        self.biases = biases

    def parameters(self) -> List[np.ndarray]:
        params = []
        for W, b in zip(self.weights, self.biases):
            params.extend([W, b])
        return params

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, list]:
        """Output-layer logits and the (input, pre-activation) cache per layer."""
        cache = []
        a = x
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            cache.append((a, z))
            a = z if i == last else np.maximum(z, 0.0)
        return a, cache

    def backward(self, cache: list, d_logits: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
        """Parameter gradients (same order as parameters()) and d(input)."""
        grads: List[np.ndarray] = [None] * (2 * len(self.weights))
        dz = d_logits
        for i in range(len(self.weights) - 1, -1, -1):
            a, z = cache[i]
            if i != len(self.weights) - 1:
                dz = dz * (z > 0)
            grads[2 * i] = a.T @ dz
            grads[2 * i + 1] = dz.sum(axis=0)
            dz = dz @ self.weights[i].T
        return grads, dz


@dataclass
class Model:
    """Encoder shared by all users plus the receiver decoder."""
    encoder: Mlp
    decoder: Mlp
    amplitude: float
    chip_count: int
    T: int
    k: int
    rate: float = 1.0
    seed: int = 0

    @property
    def n(self) -> int:
        return self.encoder.spec.layer_widths[0]

    def parameters(self) -> List[np.ndarray]:
        return self.encoder.parameters() + self.decoder.parameters()

    def noise_var(self, ebn0_db: float) -> float:
        return ebn0_to_noise_var(ebn0_db, self.amplitude, self.T, self.rate)


@dataclass
class TrainConfig:
    """Optimizer, data and loss-weighting settings for one training run."""
    hidden_widths: Tuple[int, ...] = (256, 256, 256, 256)
    learning_rate: float = ADAM_LEARNING_RATE
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON
    epochs: int = 200
    minibatch_size: int = 256
    train_size: int = 20_000
    val_size: int = 2_000
    train_ebn0_db: Tuple[float, ...] = (8.0,)
    activity_distribution: Optional[Tuple[float, ...]] = None  # P(L = 1..T); uniform if None
    loss_weights: LossWeights = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        sizes = (self.epochs, self.minibatch_size, self.train_size, self.val_size)
        if any(s <= 0 for s in sizes):
            raise ConfigError(f"training sizes must be positive: {sizes}")
        if not self.train_ebn0_db:
            raise ConfigError("train_ebn0_db must not be empty")
        if any(w <= 0 for w in self.loss_weights.values()):
            raise ConfigError("loss weights must be positive")

    def weight(self, L: int, ebn0_db: float) -> float:
        return self.loss_weights.get((int(L), float(ebn0_db)), 1.0)


@dataclass
class LossTrace:
    """Per-epoch training and validation loss."""
    train: List[float] = field(default_factory=list)
    val: List[float] = field(default_factory=list)


def product_loss_weights(T: int, ebn0s: Sequence[float], user_weights: Optional[Dict[int, float]] = None,
                      snr_weights: Optional[Dict[float, float]] = None) -> LossWeights:
    """Product weighting user_weight(L) * snr_weight(ebn0) over every (L, ebn0).

    Defaults weight 3 and 4 active users by 10 and 20 and the 12 dB losses by 4.
    """
    user_weights = {3: 10.0, 4: 20.0} if user_weights is None else user_weights
    snr_weights = {12.0: 4.0} if snr_weights is None else snr_weights
    return {
        (L, float(e)): user_weights.get(L, 1.0) * snr_weights.get(float(e), 1.0)
        for L in range(1, T + 1) for e in ebn0s
    }


def _he(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    return rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out))


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    return rng.normal(0.0, math.sqrt(2.0 / (fan_in + fan_out)), size=(fan_in, fan_out))


def _init_mlp(spec: MlpSpec, rng: np.random.Generator) -> Mlp:
    widths = spec.layer_widths
    weights, biases = [], []
    for i in range(len(widths) - 1):
        init = _glorot if i == len(widths) - 2 else _he
        weights.append(init(rng, widths[i], widths[i + 1]))
        biases.append(np.zeros(widths[i + 1]))
    return Mlp(spec, weights, biases)


def build_specs(k: int, T: int, rate: float, hidden_widths: Sequence[int]) -> Tuple[MlpSpec, MlpSpec]:
    """Encoder/decoder specs: n one-hot inputs, k*T/R chips, n output scores."""
    n = (1 << k) - 1
    chips = int(round(k * T / rate))
    hidden = tuple(int(w) for w in hidden_widths)
    return MlpSpec((n,) + hidden + (chips,)), MlpSpec((chips,) + hidden + (n,))


def init_model(specs: Tuple[MlpSpec, MlpSpec], rng: np.random.Generator, amplitude: float = 1.0,
               T: int = 1, rate: float = 1.0, seed: int = 0) -> Model:
    """He-initialized ReLU layers, Glorot output layers, zero biases."""
    enc_spec, dec_spec = specs
    n = enc_spec.layer_widths[0]
    chips = enc_spec.layer_widths[-1]
    if dec_spec.layer_widths[0] != chips or dec_spec.layer_widths[-1] != n:
        raise ConfigError("decoder must map the encoder's chip count back to n scores")
    k = int(round(math.log2(n + 1)))
    if (1 << k) - 1 != n:
        raise ConfigError(f"encoder input width {n} is not 2^k - 1")
    return Model(encoder=_init_mlp(enc_spec, rng), decoder=_init_mlp(dec_spec, rng),
                 amplitude=amplitude, chip_count=chips, T=T, k=k, rate=rate, seed=seed)


def _soft_chips(logits: np.ndarray, amplitude: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rows of A * u / rms(u) with u = 2 * sigmoid(logits) - 1; also returns u and rms(u)."""
    u = 2.0 * expit(logits) - 1.0
    rms = np.sqrt(np.mean(u * u, axis=-1, keepdims=True) + SOFT_CHIP_FLOOR)
    return amplitude * u / rms, u, rms


def _soft_chips_backward(d_chips: np.ndarray, u: np.ndarray, rms: np.ndarray, amplitude: float) -> np.ndarray:
    """Gradient with respect to u of the rescaled chips."""
    proj = np.mean(d_chips * u, axis=-1, keepdims=True) / (rms * rms)
    return amplitude / rms * (d_chips - u * proj)


def codebook(model: Model, hard: bool = False) -> np.ndarray:
    """Chips of every message, shape (n, chip_count)."""
    logits, _ = model.encoder.forward(np.eye(model.n))
    if hard:
        return model.amplitude * np.where(logits >= 0, 1.0, -1.0)
    return _soft_chips(logits, model.amplitude)[0]


def encode_user(model: Model, one_hot: np.ndarray, hard: bool = True) -> np.ndarray:
    """Chips for one user's one-hot message."""
    one_hot = np.asarray(one_hot, dtype=np.float64)
    if one_hot.shape != (model.n,) or np.count_nonzero(one_hot) != 1 or one_hot.max() != 1:
        raise ValueError("encoder input must be a one-hot vector of length n")
    logits, _ = model.encoder.forward(one_hot[None, :])
    if hard:
        return model.amplitude * np.where(logits[0] >= 0, 1.0, -1.0)
    return _soft_chips(logits, model.amplitude)[0][0]


def one_hot(message: int, n: int) -> np.ndarray:
    v = np.zeros(n)
    v[message - 1] = 1.0
    return v


def decoder_scores(model: Model, chips: np.ndarray) -> np.ndarray:
    """Per-message activity scores in (0, 1) for one or more chip vectors."""
    chips = np.atleast_2d(np.asarray(chips, dtype=np.float64))
    if chips.shape[1] != model.chip_count:
        raise LengthMismatch(f"decoder expects {model.chip_count} chips, got {chips.shape[1]}")
    logits, _ = model.decoder.forward(chips)
    return expit(logits)


def system_forward(model: Model, messages: Sequence[int], noise_var: float,
                   rng: np.random.Generator, hard: bool = False) -> np.ndarray:
    """Encode each user, sum, add AWGN and return the decoder scores."""
    if len(set(messages)) != len(messages) or len(messages) > model.T:
        raise ValueError("messages must be distinct and at most T")
    chips = np.zeros(model.chip_count)
    for m in messages:
        chips += encode_user(model, one_hot(m, model.n), hard=hard)
    if noise_var > 0:
        chips = chips + rng.normal(0.0, math.sqrt(noise_var), size=chips.shape)
    return decoder_scores(model, chips)[0]


def dl_detect(model: Model, block: ReceivedBlock, threshold: float = DL_DEFAULT_THRESHOLD) -> DecodedSet:
    """Messages whose score exceeds the threshold; more than T is a failure."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    scores = decoder_scores(model, block.chips)[0]
    messages = tuple(int(i) + 1 for i in np.flatnonzero(scores > threshold))
    if len(messages) > model.T:
        return DecodedSet(messages=messages, detected_count=len(messages),
                          status=DecodeStatus.DECODE_FAILURE)
    return DecodedSet(messages=messages, detected_count=len(messages))


@dataclass
class Batch:
    """Multi-hot targets with frozen standard-normal noise and per-example scaling."""
    targets: np.ndarray  # (B, n)
    noise: np.ndarray  # (B, chips), standard normal
    sigmas: np.ndarray  # (B,)
    weights: np.ndarray  # (B,)

    def take(self, idx: np.ndarray) -> "Batch":
        return Batch(self.targets[idx], self.noise[idx], self.sigmas[idx], self.weights[idx])


def _relu_pattern(caches: Sequence[list]) -> bytes:
    masks = []
    for cache in caches:
        for _, z in cache[:-1]:
            masks.append((z > 0).ravel())
    return np.concatenate(masks).tobytes() if masks else b""


def batch_loss(model: Model, batch: Batch, need_grads: bool = True):
    """Weighted mean BCE over the batch; gradients via reverse-mode through the channel.

    Returns (loss, grads or None, relu activation pattern).
    """
    enc_logits, enc_cache = model.encoder.forward(np.eye(model.n))
    chips, u, rms = _soft_chips(enc_logits, model.amplitude)
    received = batch.targets @ chips + batch.sigmas[:, None] * batch.noise
    dec_logits, dec_cache = model.decoder.forward(received)

    size, n = batch.targets.shape
    per_example = np.mean(np.logaddexp(0.0, dec_logits) - batch.targets * dec_logits, axis=1)
    loss = float(np.sum(batch.weights * per_example) / size)
    pattern = _relu_pattern((enc_cache, dec_cache))
    if not need_grads:
        return loss, None, pattern

    d_logits = batch.weights[:, None] * (expit(dec_logits) - batch.targets) / (n * size)
    dec_grads, d_received = model.decoder.backward(dec_cache, d_logits)
    d_chips = batch.targets.T @ d_received
    d_u = _soft_chips_backward(d_chips, u, rms, model.amplitude)
    d_enc_logits = d_u * 0.5 * (1.0 - u * u)
    enc_grads, _ = model.encoder.backward(enc_cache, d_enc_logits)
    return loss, enc_grads + dec_grads, pattern


class AdamOptimizer:
    """Adam with bias correction, updating parameter arrays in place."""

    def __init__(self, params: List[np.ndarray], lr: float = ADAM_LEARNING_RATE, beta1: float = ADAM_BETA1,
                 beta2: float = ADAM_BETA2, eps: float = ADAM_EPSILON):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: List[np.ndarray]):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def draw_active_sets(rng: np.random.Generator, count: int, n: int, T: int,
                     activity: Optional[Sequence[float]] = None) -> List[np.ndarray]:
    """Activity count L on {1..T} then L distinct uniform messages, per example."""
    probs = np.full(T, 1.0 / T) if activity is None else np.asarray(activity, dtype=np.float64)
    if probs.size != T or np.any(probs < 0) or not math.isclose(probs.sum(), 1.0, rel_tol=1e-9):
        raise ConfigError(f"activity distribution must be {T} probabilities summing to 1")
    counts = rng.choice(np.arange(1, T + 1), size=count, p=probs)
    return [rng.choice(n, size=L, replace=False) + 1 for L in counts]


def make_batch(model: Model, cfg: TrainConfig, rng: np.random.Generator, count: int) -> Batch:
    """Random training examples with their frozen noise and loss weights."""
    sets = draw_active_sets(rng, count, model.n, model.T, cfg.activity_distribution)
    ebn0s = rng.choice(np.asarray(cfg.train_ebn0_db, dtype=np.float64), size=count)
    targets = np.zeros((count, model.n))
    for row, messages in enumerate(sets):
        targets[row, messages - 1] = 1.0
    sigmas = np.array([math.sqrt(model.noise_var(e)) for e in ebn0s])
    weights = np.array([cfg.weight(len(s), e) for s, e in zip(sets, ebn0s)])
    noise = rng.standard_normal((count, model.chip_count))
    return Batch(targets, noise, sigmas, weights)


def _mean_loss(model: Model, batch: Batch, chunk: int = 4096) -> float:
    total = 0.0
    size = batch.targets.shape[0]
    for start in range(0, size, chunk):
        idx = np.arange(start, min(start + chunk, size))
        loss, _, _ = batch_loss(model, batch.take(idx), need_grads=False)
        total += loss * idx.size
    return total / size


def train(model: Model, cfg: TrainConfig, progress=None) -> Tuple[Model, LossTrace]:
    """Minibatch Adam on the weighted multi-label BCE.

    The training set fixes the active message sets and Eb/N0 per example;
    channel noise is redrawn every epoch. The validation set keeps its noise.
    """
    rng = np.random.default_rng(cfg.seed)
    train_set = make_batch(model, cfg, rng, cfg.train_size)
    val_set = make_batch(model, cfg, rng, cfg.val_size)
    optimizer = AdamOptimizer(model.parameters(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
    trace = LossTrace()

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(cfg.train_size)
        train_set.noise = rng.standard_normal(train_set.noise.shape)
        running = 0.0
        for start in range(0, cfg.train_size, cfg.minibatch_size):
            idx = order[start:start + cfg.minibatch_size]
            loss, grads, _ = batch_loss(model, train_set.take(idx))
            if not math.isfinite(loss):
                raise DivergenceDetected(f"non-finite training loss at epoch {epoch}")
            optimizer.step(grads)
            running += loss * idx.size
        val_loss = _mean_loss(model, val_set)
        if not math.isfinite(val_loss):
            raise DivergenceDetected(f"non-finite validation loss at epoch {epoch}")
        trace.train.append(running / cfg.train_size)
        trace.val.append(val_loss)
        debug_log(f"[TRAIN] epoch {epoch} train={trace.train[-1]:.6f} val={val_loss:.6f}")
        if progress is not None:
            progress(epoch, trace.train[-1], val_loss)
    return model, trace


def gradient_check(model: Model, epsilon: float = 1e-5, loss_weights: Optional[LossWeights] = None,
                   batch_size: int = 4, ebn0_db: Sequence[float] = (8.0,), seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    Coordinates whose +/-epsilon perturbation flips a ReLU are skipped, as the
    loss is not differentiable there. Raises ValueError when every coordinate
    is skipped or has a zero gradient on both sides.
    """
    cfg = TrainConfig(train_ebn0_db=tuple(ebn0_db), loss_weights=dict(loss_weights or {}), seed=seed)
    batch = make_batch(model, cfg, np.random.default_rng(seed), batch_size)
    loss, grads, pattern = batch_loss(model, batch)
    floor = 1e-6 * max(1.0, abs(loss))
    worst = 0.0
    skipped = 0
    checked = 0
    for param, grad in zip(model.parameters(), grads):
        flat = param.reshape(-1)
        flat_grad = grad.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + epsilon
            plus, _, pattern_plus = batch_loss(model, batch, need_grads=False)
            flat[i] = original - epsilon
            minus, _, pattern_minus = batch_loss(model, batch, need_grads=False)
            flat[i] = original
            if pattern_plus != pattern or pattern_minus != pattern:
                skipped += 1
                continue
            numeric = (plus - minus) / (2.0 * epsilon)
            analytic = flat_grad[i]
            if numeric == 0.0 and analytic == 0.0:
                continue
            checked += 1
            denom = max(abs(numeric), abs(analytic), floor)
            worst = max(worst, abs(numeric - analytic) / denom)
    debug_log(f"[GRADCHECK] max relative error {worst:.3e}, {skipped} kink coordinates skipped")
    if checked == 0:
        raise ValueError(f"gradient check compared no coordinates ({skipped} skipped at ReLU kinks)")
    return worst


def save_model(model: Model, path) -> Path:
    """Write the checkpoint (.npz with a JSON header and raw weight arrays)."""
    path = Path(path)
    header = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "encoder_widths": list(model.encoder.spec.layer_widths),
        "decoder_widths": list(model.decoder.spec.layer_widths),
        "amplitude": model.amplitude,
        "chip_count": model.chip_count,
        "T": model.T,
        "k": model.k,
        "rate": model.rate,
        "seed": model.seed,
    }
    arrays = {"header": np.array(json.dumps(header, sort_keys=True))}
    for prefix, mlp in (("enc", model.encoder), ("dec", model.decoder)):
        for i, (W, b) in enumerate(zip(mlp.weights, mlp.biases)):
            arrays[f"{prefix}_W{i}"] = W
            arrays[f"{prefix}_b{i}"] = b
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)
    except OSError as e:
        raise FileError(f"cannot write checkpoint {path}: {e}") from e
    return path


def load_model(path) -> Model:
    """Read a checkpoint written by save_model."""
    path = Path(path)
    if not path.is_file():
        raise CheckpointMissing(f"checkpoint not found: {path}")
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("format_version") != CHECKPOINT_FORMAT_VERSION:
            raise CheckpointMissing(f"unsupported checkpoint version in {path}")
        mlps = []
        for prefix, key in (("enc", "encoder_widths"), ("dec", "decoder_widths")):
            spec = MlpSpec(tuple(header[key]))
            layers = len(spec.layer_widths) - 1
            weights = [np.array(data[f"{prefix}_W{i}"]) for i in range(layers)]
            biases = [np.array(data[f"{prefix}_b{i}"]) for i in range(layers)]
            mlps.append(Mlp(spec, weights, biases))
    return Model(encoder=mlps[0], decoder=mlps[1], amplitude=header["amplitude"],
                 chip_count=header["chip_count"], T=header["T"], k=header["k"],
                 rate=header["rate"], seed=header["seed"])


def write_loss_trace(trace: LossTrace, path) -> Path:
    """CSV with columns epoch, train_loss, val_loss."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "val_loss"])
            for epoch, (tr, va) in enumerate(zip(trace.train, trace.val), start=1):
                writer.writerow([epoch, f"{tr:.9e}", f"{va:.9e}"])
    except OSError as e:
        raise FileError(f"cannot write loss trace {path}: {e}") from e
    return path

"""Adder-channel physical layer: BPSK, superposition, AWGN, parity and outer code."""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaln, logsumexp

from config.settings import CONV_GENERATORS, CONV_MEMORY
from engine.errors import LengthMismatch
from engine.signatures import BchSignatureCode


@dataclass
class ReceivedBlock:
    """Real chip vector after superposition and noise."""
    chips: np.ndarray
    amplitude: float
    noise_var: float = 0.0

    def __post_init__(self):
        self.chips = np.asarray(self.chips, dtype=np.float64)
        if self.noise_var < 0:
            raise ValueError(f"noise variance must be >= 0, got {self.noise_var}")

    @property
    def length(self) -> int:
        return int(self.chips.size)


@dataclass(frozen=True)
class OuterCode:
    """Rate-1 passthrough or terminated rate-1/2 feed-forward convolutional code."""
    rate: float = 0.5
    generators: Tuple[int, ...] = field(default=CONV_GENERATORS)
    mem: int = CONV_MEMORY

    @classmethod
    def uncoded(cls) -> "OuterCode":
        return cls(rate=1.0, generators=(), mem=0)

    @classmethod
    def from_rate(cls, rate: float) -> "OuterCode":
        if rate == 1:
            return cls.uncoded()
        if rate == 0.5:
            return cls()
        raise ValueError(f"outer rate must be 1 or 1/2, got {rate}")

    @property
    def is_uncoded(self) -> bool:
        return self.rate == 1

    def coded_length(self, info_len: int) -> int:
        """Chips per signature for an information word of info_len bits."""
        if self.is_uncoded:
            return info_len
        return len(self.generators) * (info_len + self.mem)


def bpsk_modulate(bits: Sequence[int], amplitude: float) -> np.ndarray:
    """Map bit 0 to +A and bit 1 to -A."""
    bits = np.asarray(bits, dtype=np.float64)
    return amplitude * (1.0 - 2.0 * bits)


def superpose(signals: Sequence[np.ndarray], length: Optional[int] = None) -> np.ndarray:
    """Element-wise sum of equal-length signals (zeros when none transmit)."""
    if len(signals) == 0:
        return np.zeros(length or 0, dtype=np.float64)
    sizes = {np.asarray(s).size for s in signals}
    if length is not None:
        sizes.add(length)
    if len(sizes) != 1:
        raise LengthMismatch(f"cannot superpose signals of lengths {sorted(sizes)}")
    return np.sum(np.stack([np.asarray(s, dtype=np.float64) for s in signals]), axis=0)


def awgn_add(chips: np.ndarray, noise_var: float, rng: np.random.Generator,
             amplitude: float = 1.0) -> ReceivedBlock:
    """Add i.i.d. zero-mean Gaussian noise of variance noise_var per chip."""
    chips = np.asarray(chips, dtype=np.float64)
    if noise_var == 0:
        return ReceivedBlock(chips=chips.copy(), amplitude=amplitude, noise_var=0.0)
    noise = rng.normal(0.0, math.sqrt(noise_var), size=chips.shape)
    return ReceivedBlock(chips=chips + noise, amplitude=amplitude, noise_var=noise_var)


def ebn0_to_noise_var(ebn0_db: float, amplitude: float, T: int, rate: float) -> float:
    """Noise variance per real dimension for a per-user Eb/N0.

    Eb = A^2 * T / R (kT/R chips per k information bits) and N0 = 2 sigma^2.
    """
    if math.isinf(ebn0_db) and ebn0_db > 0:
        return 0.0
    return amplitude ** 2 * T / (2.0 * rate * 10.0 ** (ebn0_db / 10.0))


def estimate_parity(block: ReceivedBlock, L: int) -> Tuple[np.ndarray, float]:
    """Per-chip parity of the number of transmitted ones under L active users.

    Returns the parity bits and the squared distance between the chips and
    the level implied by the rounded ones count.
    """
    y = block.chips
    A = block.amplitude
    if L == 0:
        return np.zeros(y.size, dtype=np.uint8), float(np.sum(y ** 2))
    ones = np.clip(np.rint((L * A - y) / (2.0 * A)), 0, L)
    parity = (ones.astype(np.int64) % 2).astype(np.uint8)
    metric = float(np.sum((y - (L - 2.0 * ones) * A) ** 2))
    return parity, metric


def parity_llr(block: ReceivedBlock, L: int) -> np.ndarray:
    """Per-chip log P(parity=0 | y) - log P(parity=1 | y) under L users.

    Each user's coded bit is treated as equiprobable, so the ones count is
    Binomial(L, 1/2). A noiseless block falls back to +/-1 hard values.
    """
    y = block.chips
    if L == 0:
        return np.full(y.size, 50.0)
    if block.noise_var == 0:
        parity, _ = estimate_parity(block, L)
        return 1.0 - 2.0 * parity.astype(np.float64)
    ones = np.arange(L + 1)
    log_prior = gammaln(L + 1) - gammaln(ones + 1) - gammaln(L - ones + 1)
    levels = (L - 2.0 * ones) * block.amplitude
    loglik = log_prior[None, :] - (y[:, None] - levels[None, :]) ** 2 / (2.0 * block.noise_var)
    even = loglik[:, ones % 2 == 0]
    odd = loglik[:, ones % 2 == 1]
    return logsumexp(even, axis=1) - logsumexp(odd, axis=1)


@lru_cache(maxsize=None)
def _trellis(code: OuterCode):
    """Predecessor structure of the shift-register trellis.

    Register r = (bit << mem) | state, newest bit in the MSB tap; the next
    state is r >> 1, so the input bit of next state s is s >> (mem - 1).
    """
    n_states = 1 << code.mem
    outputs = np.zeros((n_states, 2, len(code.generators)), dtype=np.uint8)
    for state in range(n_states):
        for bit in (0, 1):
            register = (bit << code.mem) | state
            for g, gen in enumerate(code.generators):
                outputs[state, bit, g] = bin(register & gen).count("1") & 1
    next_states = np.arange(n_states)
    low = (next_states & ((1 << (code.mem - 1)) - 1)) << 1
    predecessors = np.stack([low, low | 1], axis=1)
    input_bits = next_states >> (code.mem - 1)
    return outputs, predecessors, input_bits


def conv_encode(bits: Sequence[int], code: OuterCode) -> np.ndarray:
    """Zero-tail terminated encoding (identity for the rate-1 code)."""
    bits = np.asarray(bits, dtype=np.uint8)
    if code.is_uncoded:
        return bits.copy()
    outputs, _, _ = _trellis(code)
    state = 0
    out = np.zeros(code.coded_length(bits.size), dtype=np.uint8)
    width = len(code.generators)
    for t, bit in enumerate(np.concatenate([bits, np.zeros(code.mem, dtype=np.uint8)])):
        out[t * width:(t + 1) * width] = outputs[state, bit]
        state = ((int(bit) << code.mem) | state) >> 1
    return out


def viterbi_decode(received: Sequence[float], code: OuterCode, soft: bool = False) -> np.ndarray:
    """Maximum-likelihood information sequence of a terminated codeword.

    Hard mode takes bits and uses the Hamming metric; soft mode takes LLRs
    (positive favours bit 0) and uses the correlation metric.
    """
    received = np.asarray(received, dtype=np.float64)
    if code.is_uncoded:
        return (received < 0).astype(np.uint8) if soft else received.astype(np.uint8)
    width = len(code.generators)
    if received.size % width or received.size // width <= code.mem:
        raise LengthMismatch(f"received length {received.size} is not a terminated codeword")
    outputs, predecessors, input_bits = _trellis(code)
    n_states = 1 << code.mem
    steps = received.size // width
    symbols = received.reshape(steps, width)
    signs = 1.0 - 2.0 * outputs.astype(np.float64)  # (state, bit, width)

    metric = np.full(n_states, np.inf)
    metric[0] = 0.0
    decisions = np.zeros((steps, n_states), dtype=np.uint8)
    pred_bits_out = outputs[predecessors, input_bits[:, None]]  # (next, 2, width)
    pred_signs = signs[predecessors, input_bits[:, None]]
    for t in range(steps):
        if soft:
            branch = -0.5 * np.sum(pred_signs * symbols[t], axis=2)
        else:
            branch = np.sum(pred_bits_out != symbols[t].astype(np.uint8), axis=2)
        candidates = metric[predecessors] + branch
        choice = np.argmin(candidates, axis=1)  # ties keep predecessor 0
        decisions[t] = choice
        metric = candidates[np.arange(n_states), choice]

    state = 0  # terminated trellis ends in the zero state
    decoded = np.zeros(steps, dtype=np.uint8)
    for t in range(steps - 1, -1, -1):
        decoded[t] = input_bits[state]
        state = predecessors[state, decisions[t, state]]
    return decoded[:steps - code.mem]


@lru_cache(maxsize=32)
def coded_signatures(code: BchSignatureCode, outer: OuterCode) -> np.ndarray:
    """Outer-coded signature bits of every message, shape (n, chips)."""
    coded = np.stack([conv_encode(column, outer) for column in code.columns])
    coded.setflags(write=False)
    return coded


def synthesize(code: BchSignatureCode, outer: OuterCode, messages: Sequence[int],
               amplitude: float) -> np.ndarray:
    """Noiseless superposition of the BPSK-modulated coded signatures."""
    coded = coded_signatures(code, outer)
    if len(messages) == 0:
        return np.zeros(coded.shape[1], dtype=np.float64)
    rows = coded[np.asarray(messages, dtype=np.int64) - 1]
    return np.sum(bpsk_modulate(rows, amplitude), axis=0)

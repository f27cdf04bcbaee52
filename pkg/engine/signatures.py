"""BCH parity-check signature code and Zadoff-Chu sequence analysis."""

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Sequence

import numpy as np

from engine.errors import InvalidCapability, InvalidZcParams, LengthMismatch, MessageOutOfRange
from engine.galois import FieldTables, alpha_pow, element_to_bits


@dataclass(frozen=True, eq=False)
class BchSignatureCode:
    """Signature matrix whose columns are odd BCH syndromes of single errors.

    Column j is the concatenation of the LSB-first bit serializations of
    alpha^j, alpha^(3j), ..., alpha^((2T-1)j). Message m maps to column m-1.
    """
    field: FieldTables
    T: int
    columns: np.ndarray  # shape (n, k*T), uint8

    @property
    def k(self) -> int:
        return self.field.k

    @property
    def n(self) -> int:
        return self.field.order

    @property
    def seq_len(self) -> int:
        return self.field.k * self.T

    def __repr__(self) -> str:
        return f"BchSignatureCode(k={self.k}, T={self.T}, n={self.n}, seq_len={self.seq_len})"


@dataclass(frozen=True)
class ZcParams:
    """Zadoff-Chu root index u and odd length q."""
    u: int
    q: int


def build_signature_code(field: FieldTables, T: int) -> BchSignatureCode:
    """Build the n x kT signature matrix for capability T."""
    if T < 1 or 2 * T - 1 >= field.order:
        raise InvalidCapability(f"capability T={T} needs 1 <= T and 2T-1 < {field.order}")
    columns = np.zeros((field.order, field.k * T), dtype=np.uint8)
    for j in range(field.order):
        bits = []
        for i in range(1, T + 1):
            bits.extend(element_to_bits(alpha_pow((2 * i - 1) * j, field), field.k))
        columns[j] = bits
    columns.setflags(write=False)
    return BchSignatureCode(field=field, T=T, columns=columns)


def message_to_signature(code: BchSignatureCode, m: int) -> np.ndarray:
    """Signature bits of message m (1-based)."""
    if not 1 <= m <= code.n:
        raise MessageOutOfRange(f"message {m} outside [1, {code.n}]")
    return code.columns[m - 1]


def syndrome_of(code: BchSignatureCode, messages: Iterable[int]) -> np.ndarray:
    """XOR of the signature columns of a message set."""
    syndrome = np.zeros(code.seq_len, dtype=np.uint8)
    for m in messages:
        syndrome ^= message_to_signature(code, m)
    return syndrome


def zc_generate(p: ZcParams) -> np.ndarray:
    """Root Zadoff-Chu sequence x[n] = exp(-i*pi*u*n*(n+1)/q)."""
    if p.q < 1 or p.q % 2 == 0:
        raise InvalidZcParams(f"ZC length q={p.q} must be odd")
    if not 1 <= p.u < p.q or math.gcd(p.u, p.q) != 1:
        raise InvalidZcParams(f"ZC root u={p.u} must satisfy 1 <= u < q and gcd(u, q) = 1")
    n = np.arange(p.q, dtype=np.int64)
    # reduce the phase index modulo 2q before scaling to keep precision at large q
    phase = (p.u * n * (n + 1)) % (2 * p.q)
    return np.exp(-1j * np.pi * phase / p.q)


def periodic_correlation(a: Sequence[complex], b: Sequence[complex], lag: int) -> complex:
    """sum_n a[n] * conj(b[(n + lag) mod q])."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise LengthMismatch(f"sequence lengths differ: {a.size} vs {b.size}")
    return complex(np.sum(a * np.conj(np.roll(b, -lag))))


def correlation_profile(a: Sequence[complex], b: Sequence[complex]) -> np.ndarray:
    """Magnitudes of periodic_correlation for every lag 0..q-1."""
    a = np.asarray(a)
    return np.array([abs(periodic_correlation(a, b, lag)) for lag in range(a.size)])


def zc_report(q: int, u: int, u_cross: int) -> Dict[str, float]:
    """Amplitude and correlation figures of two ZC roots of the same length."""
    x = zc_generate(ZcParams(u, q))
    y = zc_generate(ZcParams(u_cross, q))
    auto = correlation_profile(x, x)
    cross = correlation_profile(x, y)
    return {
        "length q": float(q),
        "max | |x| - 1 |": float(np.max(np.abs(np.abs(x) - 1.0))),
        "autocorrelation peak": float(auto[0]),
        "max off-peak autocorrelation": float(np.max(auto[1:])) if q > 1 else 0.0,
        "min cross-correlation": float(np.min(cross)),
        "max cross-correlation": float(np.max(cross)),
        "sqrt(q)": math.sqrt(q),
    }

"""Joint user-activity detection and message recovery.

Two back-ends share the DecodedSet result type:

- Berlekamp-Massey syndrome decoding (BMA), wrapped in a hypothesis test
  over the number of active users L, choosing the consistent hypothesis
  whose resynthesized superposition is closest to the received chips.
- Exhaustive maximum-likelihood detection (MLD) over all message subsets
  of size <= T, using precomputed Gram sums so a decode costs one
  correlation plus one gather per subset.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from itertools import combinations
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import comb

from config.settings import MLD_SUBSET_BUDGET
from engine.debug import debug_log
from engine.errors import BudgetExceeded, LengthMismatch
from engine.galois import OpCounter, bits_to_element, gf_add, gf_inv, gf_mul
from engine.phy import (
    OuterCode,
    ReceivedBlock,
    bpsk_modulate,
    coded_signatures,
    estimate_parity,
    parity_llr,
    synthesize,
    viterbi_decode,
)
from engine.signatures import BchSignatureCode


class DecodeStatus(Enum):
    """Outcome of a decode attempt."""
    SUCCESS = "success"
    DECODE_FAILURE = "decode_failure"


@dataclass
class DecodedSet:
    """Recovered message indices plus the detected activity count."""
    messages: Tuple[int, ...] = ()
    detected_count: int = 0
    status: DecodeStatus = DecodeStatus.SUCCESS
    metric: float = float("nan")
    field_ops: int = 0

    @property
    def ok(self) -> bool:
        return self.status is DecodeStatus.SUCCESS

    @classmethod
    def failure(cls, metric: float = float("nan"), field_ops: int = 0) -> "DecodedSet":
        return cls(messages=(), detected_count=0, status=DecodeStatus.DECODE_FAILURE,
                   metric=metric, field_ops=field_ops)


@dataclass
class HypothesisResult:
    """One row of the activity-hypothesis trace."""
    L: int
    parity_weight: int
    parity_metric: float
    bma_status: DecodeStatus
    decoded: Tuple[int, ...]
    resynthesis_metric: float = float("nan")
    consistent: bool = False
    winner: bool = False


def _split_syndrome(syndrome: np.ndarray, code: BchSignatureCode) -> List[int]:
    """Odd syndromes S1, S3, ..., S_{2T-1} from their k-bit LSB-first blocks."""
    k = code.k
    return [bits_to_element(syndrome[i * k:(i + 1) * k]) for i in range(code.T)]


def berlekamp_massey(syndromes: List[int], f, counter: Optional[OpCounter] = None) -> Tuple[List[int], int]:
    """Connection polynomial Lambda(x) (low degree first) and its length L."""
    C = [1]
    B = [1]
    L = 0
    m = 1
    b = 1
    for r, s in enumerate(syndromes):
        d = s
        for i in range(1, L + 1):
            if i < len(C):
                d = gf_add(d, gf_mul(C[i], syndromes[r - i], f, counter), counter)
        if d == 0:
            m += 1
            continue
        coef = gf_mul(d, gf_inv(b, f, counter), f, counter)
        previous = list(C)
        if len(C) < len(B) + m:
            C.extend([0] * (len(B) + m - len(C)))
        for i, bi in enumerate(B):
            C[i + m] = gf_add(C[i + m], gf_mul(coef, bi, f, counter), counter)
        if 2 * L <= r:
            L = r + 1 - L
            B = previous
            b = d
            m = 1
        else:
            m += 1
    while len(C) > 1 and C[-1] == 0:
        C.pop()
    return C, L


def chien_search(locator: List[int], f, counter: Optional[OpCounter] = None) -> List[int]:
    """Locations j in [0, n) with Lambda(alpha^-j) = 0."""
    degree = len(locator) - 1
    # term i holds Lambda_i * alpha^(-i*j) for the current j
    terms = list(locator[1:])
    steps = [f.exp_table[(-i) % f.order] for i in range(1, degree + 1)]
    roots = []
    for j in range(f.order):
        if j > 0:
            terms = [gf_mul(t, s, f, counter) for t, s in zip(terms, steps)]
        total = locator[0]
        for t in terms:
            total = gf_add(total, t, counter)
        if total == 0:
            roots.append(j)
    return roots


def bma_decode(syndrome: np.ndarray, code: BchSignatureCode) -> DecodedSet:
    """Decode a kT-bit syndrome sum into the set of active messages."""
    syndrome = np.asarray(syndrome, dtype=np.uint8)
    if syndrome.size != code.seq_len:
        raise LengthMismatch(f"syndrome has {syndrome.size} bits, expected {code.seq_len}")
    f = code.field
    counter = OpCounter()
    odd = _split_syndrome(syndrome, code)
    if not any(odd):
        return DecodedSet(messages=(), detected_count=0, field_ops=counter.total)

    # S_{2i} = S_i^2 for binary codes
    full = [0] * (2 * code.T + 1)
    for i in range(1, code.T + 1):
        full[2 * i - 1] = odd[i - 1]
    for i in range(1, code.T + 1):
        full[2 * i] = gf_mul(full[i], full[i], f, counter)

    locator, L = berlekamp_massey(full[1:], f, counter)
    degree = len(locator) - 1
    if degree != L or L > code.T:
        debug_log(f"[BMA] inconsistent locator: deg={degree} L={L}")
        return DecodedSet.failure(field_ops=counter.total)
    roots = chien_search(locator, f, counter)
    if len(roots) != degree:
        debug_log(f"[BMA] {len(roots)} roots for degree {degree}")
        return DecodedSet.failure(field_ops=counter.total)
    messages = tuple(j + 1 for j in roots)
    return DecodedSet(messages=messages, detected_count=len(messages), field_ops=counter.total)


def joint_activity_bma(block: ReceivedBlock, code: BchSignatureCode, outer: OuterCode,
                       soft: bool = False,
                       trace: Optional[List[HypothesisResult]] = None) -> DecodedSet:
    """Test every activity hypothesis L in 0..T and keep the best consistent one."""
    expected = outer.coded_length(code.seq_len)
    if block.length != expected:
        raise LengthMismatch(f"block has {block.length} chips, expected {expected}")
    best: Optional[DecodedSet] = None
    best_row: Optional[HypothesisResult] = None
    for L in range(code.T + 1):
        parity, parity_metric = estimate_parity(block, L)
        if outer.is_uncoded:
            syndrome = parity
        elif soft:
            syndrome = viterbi_decode(parity_llr(block, L), outer, soft=True)
        else:
            syndrome = viterbi_decode(parity, outer)
        candidate = bma_decode(syndrome, code)
        row = HypothesisResult(L=L, parity_weight=int(parity.sum()), parity_metric=parity_metric,
                               bma_status=candidate.status, decoded=candidate.messages)
        if candidate.ok and len(candidate.messages) == L:
            resynth = synthesize(code, outer, candidate.messages, block.amplitude)
            distance = float(np.sum((block.chips - resynth) ** 2))
            row.resynthesis_metric = distance
            row.consistent = True
            if best is None or distance < best.metric:
                best = DecodedSet(messages=candidate.messages, detected_count=L, metric=distance,
                                  field_ops=candidate.field_ops)
                best_row = row
        if trace is not None:
            trace.append(row)
    if best is None:
        debug_log("[BMA] no consistent activity hypothesis")
        return DecodedSet.failure()
    best_row.winner = True
    return best


class MldTables:
    """Subset enumeration tables for exhaustive minimum-distance detection.

    For a subset S of BPSK signatures c_m at amplitude A,
    ||y - A*sum c_m||^2 = ||y||^2 - 2A*sum <y, c_m> + A^2 * sum_{a,b in S} G[a, b],
    so only the correlations <y, c_m> depend on the received block.
    """

    def __init__(self, code: BchSignatureCode, outer: OuterCode, t_max: int,
                 budget: int = MLD_SUBSET_BUDGET):
        total = sum(int(comb(code.n, t, exact=True)) for t in range(t_max + 1))
        if total > budget:
            raise BudgetExceeded(f"{total} subsets exceed the MLD budget of {budget}")
        self.code = code
        self.outer = outer
        self.t_max = t_max
        self.subset_count = total
        self.signs = bpsk_modulate(coded_signatures(code, outer), 1.0)
        gram = self.signs @ self.signs.T
        self.subsets: List[np.ndarray] = []
        self.quadratic: List[np.ndarray] = []
        for t in range(1, t_max + 1):
            idx = np.array(list(combinations(range(code.n), t)), dtype=np.int64).reshape(-1, t)
            quad = np.zeros(idx.shape[0])
            for a in range(t):
                for b in range(t):
                    quad += gram[idx[:, a], idx[:, b]]
            self.subsets.append(idx)
            self.quadratic.append(quad)

    def decode(self, block: ReceivedBlock) -> DecodedSet:
        y = block.chips
        if y.size != self.signs.shape[1]:
            raise LengthMismatch(f"block has {y.size} chips, expected {self.signs.shape[1]}")
        A = block.amplitude
        energy = float(y @ y)
        correlations = self.signs @ y
        best_metric = energy
        best: Tuple[int, ...] = ()
        for idx, quad in zip(self.subsets, self.quadratic):
            metrics = energy - 2.0 * A * correlations[idx].sum(axis=1) + A * A * quad
            pos = int(np.argmin(metrics))
            # strict improvement keeps the smaller set on ties
            if metrics[pos] < best_metric:
                best_metric = float(metrics[pos])
                best = tuple(int(i) + 1 for i in idx[pos])
        return DecodedSet(messages=best, detected_count=len(best), metric=max(best_metric, 0.0))


@lru_cache(maxsize=8)
def mld_tables(code: BchSignatureCode, outer: OuterCode, t_max: int,
               budget: int = MLD_SUBSET_BUDGET) -> MldTables:
    """Per-process cache of MLD tables."""
    debug_log(f"[MLD] building subset tables for {code!r}, t_max={t_max}")
    return MldTables(code, outer, t_max, budget)


def mld_decode(block: ReceivedBlock, code: BchSignatureCode, outer: OuterCode, t_max: int,
               budget: int = MLD_SUBSET_BUDGET) -> DecodedSet:
    """Subset of size <= t_max minimizing the distance to the received chips.

    Ties go to the smaller subset, then to the lexicographically first one.
    """
    return mld_tables(code, outer, t_max, budget).decode(block)

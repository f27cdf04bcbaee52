"""GF(2^k) arithmetic through exponent/logarithm tables."""

from dataclasses import dataclass
from typing import List, Optional, Tuple

from config.settings import DEFAULT_PRIMITIVE_POLYS, MAX_FIELD_DEGREE, MIN_FIELD_DEGREE
from engine.errors import DivisionByZero, InvalidCapability, NonPrimitivePolynomial


@dataclass(frozen=True)
class FieldTables:
    """Exp/log tables of GF(2^k) for a fixed primitive polynomial.

    exp_table[i] = alpha^i for i in [0, 2^k - 2]; log_table[a] is the
    inverse map for nonzero a (log_table[0] is unused and set to -1).
    """
    k: int
    primitive_poly: int
    exp_table: Tuple[int, ...]
    log_table: Tuple[int, ...]

    @property
    def order(self) -> int:
        """Size of the multiplicative group, 2^k - 1."""
        return (1 << self.k) - 1

    @property
    def size(self) -> int:
        return 1 << self.k


class OpCounter:
    """Counts field additions and multiplications (inversions count as one)."""

    def __init__(self):
        self.additions = 0
        self.multiplications = 0

    @property
    def total(self) -> int:
        return self.additions + self.multiplications


def build_field(k: int, primitive_poly: Optional[int] = None) -> FieldTables:
    """Build exp/log tables by repeated multiplication by alpha."""
    if not MIN_FIELD_DEGREE <= k <= MAX_FIELD_DEGREE:
        raise InvalidCapability(f"field degree k={k} outside [{MIN_FIELD_DEGREE}, {MAX_FIELD_DEGREE}]")
    if primitive_poly is None:
        primitive_poly = DEFAULT_PRIMITIVE_POLYS[k]
    if primitive_poly.bit_length() - 1 != k:
        raise NonPrimitivePolynomial(f"polynomial {primitive_poly:#b} does not have degree {k}")

    order = (1 << k) - 1
    exp_table: List[int] = []
    log_table = [-1] * (1 << k)
    x = 1
    for i in range(order):
        if log_table[x] != -1:
            # alpha^i returned to an earlier element: cycle shorter than 2^k - 1
            raise NonPrimitivePolynomial(
                f"polynomial {primitive_poly:#b} generates a cycle of length {i} < {order}"
            )
        exp_table.append(x)
        log_table[x] = i
        x <<= 1
        if x & (1 << k):
            x ^= primitive_poly
    if x != 1:
        raise NonPrimitivePolynomial(f"polynomial {primitive_poly:#b} is not primitive")
    return FieldTables(k=k, primitive_poly=primitive_poly,
                       exp_table=tuple(exp_table), log_table=tuple(log_table))


def gf_add(a: int, b: int, counter: Optional[OpCounter] = None) -> int:
    if counter is not None:
        counter.additions += 1
    return a ^ b


def gf_mul(a: int, b: int, f: FieldTables, counter: Optional[OpCounter] = None) -> int:
    """Multiply two field elements."""
    if counter is not None:
        counter.multiplications += 1
    if a == 0 or b == 0:
        return 0
    return f.exp_table[(f.log_table[a] + f.log_table[b]) % f.order]


def gf_inv(a: int, f: FieldTables, counter: Optional[OpCounter] = None) -> int:
    """Multiplicative inverse of a nonzero element."""
    if a == 0:
        raise DivisionByZero("zero has no inverse in GF(2^k)")
    if counter is not None:
        counter.multiplications += 1
    return f.exp_table[(-f.log_table[a]) % f.order]


def gf_pow(a: int, e: int, f: FieldTables, counter: Optional[OpCounter] = None) -> int:
    """Raise a to the integer power e (negative e allowed for nonzero a)."""
    if counter is not None:
        counter.multiplications += 1
    if a == 0:
        if e < 0:
            raise DivisionByZero("zero raised to a negative power")
        return 1 if e == 0 else 0
    return f.exp_table[(f.log_table[a] * e) % f.order]


def alpha_pow(i: int, f: FieldTables) -> int:
    """alpha^i for any integer i."""
    return f.exp_table[i % f.order]


def element_to_bits(a: int, k: int) -> List[int]:
    """Serialize a field element LSB-first (coefficient of x^0 first)."""
    return [(a >> i) & 1 for i in range(k)]


def bits_to_element(bits) -> int:
    """Inverse of element_to_bits."""
    value = 0
    for i, bit in enumerate(bits):
        if int(bit):
            value |= 1 << i
    return value


def poly_mulmod(a: int, b: int, modulus: int) -> int:
    """Carry-less multiply then reduce; the reference oracle for gf_mul."""
    k = modulus.bit_length() - 1
    product = 0
    while b:
        if b & 1:
            product ^= a
        a <<= 1
        b >>= 1
    for shift in range(product.bit_length() - 1 - k, -1, -1):
        if product & (1 << (shift + k)):
            product ^= modulus << shift
    return product


def check_field(f: FieldTables, exhaustive: bool = True) -> List[str]:
    """Verify table invariants and, for small k, agreement with the oracle.

    Returns a list of violations (empty when the field is consistent).
    """
    problems = []
    if f.exp_table[0] != 1:
        problems.append("exp_table[0] != 1")
    if len(set(f.exp_table)) != f.order:
        problems.append("exp_table entries are not distinct")
    for i, a in enumerate(f.exp_table):
        if f.log_table[a] != i:
            problems.append(f"log_table[exp_table[{i}]] != {i}")
            break
    if exhaustive and f.k <= 6:
        for a in range(f.size):
            for b in range(f.size):
                if gf_mul(a, b, f) != poly_mulmod(a, b, f.primitive_poly):
                    problems.append(f"gf_mul({a}, {b}) disagrees with polynomial reduction")
                    return problems
    return problems

"""Arithmetic in the negacyclic polynomial ring Z[X]/(X^d + 1).

Coefficient vectors are plain Python int lists.  Large products are
computed exactly by Kronecker substitution: operands are packed into
single big integers, multiplied once through gmpy2/GMP, and unpacked,
which outperforms any pure-Python convolution at the ring sizes used
here.  Tiny rings fall back to the schoolbook convolution, which also
serves as the test oracle for the packed path.
"""

from __future__ import annotations

import gmpy2
from gmpy2 import mpz

__all__ = [
    "ring_add",
    "ring_sub",
    "ring_neg",
    "ring_scalar_offset",
    "ring_mul_exact",
    "ring_mul_mod",
    "schoolbook_negacyclic",
    "reduce_mod",
    "center_mod",
    "round_div",
    "sample_uniform",
    "sample_ternary",
    "sample_binary",
    "sample_gaussian",
]

_SCHOOLBOOK_MAX_D = 32


def reduce_mod(poly: list, q: int) -> list[int]:
    """Non-negative residues of each coefficient."""
    return [int(c) % q for c in poly]


def center_mod(poly: list, q: int) -> list[int]:
    """Centered residues in (-q/2, q/2]."""
    half = q // 2
    out = []
    for c in poly:
        c = int(c) % q
        out.append(c - q if c > half else c)
    return out


def ring_add(a: list, b: list, q: int) -> list[int]:
    return [(int(x) + int(y)) % q for x, y in zip(a, b, strict=True)]


def ring_sub(a: list, b: list, q: int) -> list[int]:
    return [(int(x) - int(y)) % q for x, y in zip(a, b, strict=True)]


def ring_neg(a: list, q: int) -> list[int]:
    return [(-int(x)) % q for x in a]


def ring_scalar_offset(a: list, scalar: int, q: int) -> list[int]:
    """Add an integer to the constant coefficient."""
    out = [int(c) % q for c in a]
    out[0] = (out[0] + scalar) % q
    return out


def schoolbook_negacyclic(a: list, b: list) -> list[int]:
    """Exact negacyclic convolution by double loop; the reference oracle."""
    d = len(a)
    if len(b) != d:
        raise ValueError("operands must share the ring degree")
    full = [0] * (2 * d)
    for i, ai in enumerate(a):
        ai = int(ai)
        if ai == 0:
            continue
        for j, bj in enumerate(b):
            full[i + j] += ai * int(bj)
    return [full[i] - full[i + d] for i in range(d)]


def _kronecker_negacyclic(a: list, b: list) -> list[int]:
    """Exact negacyclic convolution of non-negative operands via packing."""
    d = len(a)
    abits = max((int(x).bit_length() for x in a), default=1)
    bbits = max((int(x).bit_length() for x in b), default=1)
    nbits = abits + bbits + d.bit_length() + 1
    packed = gmpy2.pack([mpz(x) for x in a], nbits) * gmpy2.pack(
        [mpz(x) for x in b], nbits)
    full = list(gmpy2.unpack(packed, nbits))
    full += [mpz(0)] * (2 * d - len(full))
    return [int(full[i] - full[i + d]) for i in range(d)]


def ring_mul_exact(a: list, b: list) -> list[int]:
    """Exact negacyclic product over Z; operands must be non-negative."""
    d = len(a)
    if len(b) != d:
        raise ValueError("operands must share the ring degree")
    if d <= _SCHOOLBOOK_MAX_D:
        return schoolbook_negacyclic(a, b)
    if any(int(x) < 0 for x in a) or any(int(x) < 0 for x in b):
        raise ValueError("packed multiplication needs non-negative coefficients")
    return _kronecker_negacyclic(a, b)


def ring_mul_mod(a: list, b: list, q: int, assume_reduced: bool = False) -> list[int]:
    """Negacyclic product with coefficients reduced mod q.

    assume_reduced skips the input reduction for operands already stored
    as residues of q (the scheme-internal case).
    """
    ar = a if assume_reduced else reduce_mod(a, q)
    br = b if assume_reduced else reduce_mod(b, q)
    return reduce_mod(ring_mul_exact(ar, br), q)


def round_div(a: int, b: int) -> int:
    """Rounded quotient a/b with halves away from zero (b > 0)."""
    if b <= 0:
        raise ValueError("divisor must be positive")
    a = int(a)
    sign = -1 if a < 0 else 1
    quo, rem = divmod(abs(a), b)
    if 2 * rem >= b:
        quo += 1
    return sign * quo


def sample_uniform(d: int, q: int, rng) -> list[int]:
    return [rng.randrange(q) for _ in range(d)]


def sample_ternary(d: int, rng) -> list[int]:
    return [rng.randrange(3) - 1 for _ in range(d)]


def sample_binary(d: int, rng) -> list[int]:
    return [rng.randrange(2) for _ in range(d)]


def sample_gaussian(d: int, sigma: float, rng) -> list[int]:
    """Discrete Gaussian by rounding a continuous one; sigma = 0 gives zeros."""
    if sigma == 0.0:
        return [0] * d
    return [round(rng.gauss(0.0, sigma)) for _ in range(d)]

"""Matrix inversion as a flat sum of per-permutation cofactor products.

Writing each entry of the inverse Gram matrix through its cofactor turns
the tuning formula -Gamma^T W (W^T W)^{-1} into a plain sum of scalar
products, one per (permutation, data row, column) triple.  That sum is
what the encrypted pipelines evaluate; this module is the plaintext
template and the oracle they are tested against.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, SingularMatrixError
from .frit import FritData

__all__ = [
    "MAX_ORDER",
    "SignedPermutationTable",
    "PhiDecomposition",
    "GainTermList",
    "signed_permutations",
    "phi_matrices",
    "gain_terms",
    "invert_via_cofactors",
    "flat_index",
    "term_count",
]

#: Cofactor expansion enumerates (n-1)! permutations; refuse above this order.
MAX_ORDER = 6


@dataclass(frozen=True)
class SignedPermutationTable:
    """All permutations of {1..n-1} with parity signs, in lexicographic order."""

    n: int
    rows: tuple  # ((perm tuple, sign), ...)

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class PhiDecomposition:
    """Per-permutation matrices whose sum is the inverse of the Gram matrix."""

    phis: tuple  # of (n, n) ndarrays


@dataclass(frozen=True)
class GainTermList:
    """Flat list of 1 x n terms whose sum is the tuned gain."""

    terms: tuple  # of (n,) ndarrays, ordered by flat index
    n: int
    N: int

    @property
    def M(self) -> int:
        return len(self.terms)

    def total(self) -> np.ndarray:
        return np.sum(np.vstack(self.terms), axis=0)


def _perm_sign(perm) -> int:
    """Parity via inversion count."""
    inversions = sum(1 for a, b in itertools.combinations(perm, 2) if a > b)
    return -1 if inversions % 2 else 1


def signed_permutations(n: int, max_order: int = MAX_ORDER) -> SignedPermutationTable:
    """Enumerate the signed permutations of {1..n-1}.

    n = 1 degenerates to the single empty permutation with sign +1.
    """
    if n < 1:
        raise ValueError(f"order must be >= 1, got {n}")
    if n > max_order:
        raise CapacityError(
            f"order {n} needs {math.factorial(n - 1)} permutations; "
            f"cap is {max_order}")
    rows = tuple((perm, _perm_sign(perm))
                 for perm in itertools.permutations(range(1, n)))
    return SignedPermutationTable(n=n, rows=rows)


def _minor(Psi: np.ndarray, i: int, j: int) -> np.ndarray:
    """Psi with 1-based row i and column j removed."""
    keep_r = [r for r in range(Psi.shape[0]) if r != i - 1]
    keep_c = [c for c in range(Psi.shape[1]) if c != j - 1]
    return Psi[np.ix_(keep_r, keep_c)]


def phi_matrices(Psi, table: SignedPermutationTable) -> PhiDecomposition:
    """Build the per-permutation matrices of the cofactor decomposition.

    Entry (j, i) of the k-th matrix is det^{-1} (-1)^{i+j} sgn(sigma_k)
    times the sigma_k-selected product over the minor with row i and
    column j removed: the transposition (j, i) <- (i, j) is what makes
    the sum the inverse rather than the adjugate-transpose.
    """
    Psi = np.asarray(Psi, dtype=float)
    n = table.n
    if Psi.shape != (n, n):
        raise ValueError(f"Psi must be {n}x{n}, got {Psi.shape}")
    det = float(np.linalg.det(Psi))
    if det == 0.0 or not np.isfinite(det):
        raise SingularMatrixError("cannot decompose a singular matrix")
    det_inv = 1.0 / det
    phis = []
    for perm, sign in table.rows:
        phi = np.zeros((n, n))
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                minor = _minor(Psi, i, j)
                prod = 1.0
                for l, col in enumerate(perm, start=1):
                    prod *= minor[l - 1, col - 1]
                phi[j - 1, i - 1] = det_inv * ((-1) ** (i + j)) * sign * prod
        phis.append(phi)
    return PhiDecomposition(phis=tuple(phis))


def invert_via_cofactors(Psi) -> np.ndarray:
    """Inverse of Psi as the sum of the decomposition matrices."""
    Psi = np.asarray(Psi, dtype=float)
    table = signed_permutations(Psi.shape[0])
    return np.sum(phi_matrices(Psi, table).phis, axis=0)


def flat_index(k: int, i: int, l: int, n: int, N: int) -> int:
    """Bijective 1-based flattening of (permutation k, data row i, column l)."""
    return ((k - 1) * n * N + (i - 1)) * n + l


def term_count(n: int, N: int) -> int:
    """Number of flat terms: one per (k, i, l) triple."""
    return math.factorial(n - 1) * n * N * n


def gain_terms(data: FritData, phis: PhiDecomposition) -> GainTermList:
    """Emit the per-triple terms -Gamma_i W_il Phi_{k,l} in flat-index order."""
    n, N = data.n, data.N
    if len(phis.phis) != math.factorial(n - 1):
        raise ValueError("decomposition does not match the data order")
    terms = []
    for k, phi in enumerate(phis.phis, start=1):
        for i in range(1, n * N + 1):
            for l in range(1, n + 1):
                term = -data.Gamma[i - 1] * data.W[i - 1, l - 1] * phi[l - 1, :]
                assert flat_index(k, i, l, n, N) == len(terms) + 1
                terms.append(term)
    return GainTermList(terms=tuple(terms), n=n, N=N)

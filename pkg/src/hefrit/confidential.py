"""Client/server protocol for tuning a gain over encrypted data.

The client encodes and encrypts its regression data (Gamma, W, the Gram
matrix Psi, the reciprocal of its determinant, and the constant -1) into
dataset D.  The server, holding only public key material, evaluates the
cofactor-expansion sum term by term with homomorphic multiplications and
returns dataset F: one encrypted 1 x n row per flat term for ElGamal
(whose products cannot be added under encryption, so the client sums
after decryption, steered by an exponent ledger), or a single encrypted
row for CKKS (summed homomorphically).

The exponent ledger tracks how many sensitivity factors each ElGamal
product has absorbed: n - 1 from the minor product, one more when the
permutation sign or the cofactor parity injects an encrypted -1, one for
the determinant reciprocal, and three for the term factors (-1, Gamma_i,
W_il).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import ckks, elgamal
from .cofactor import flat_index, signed_permutations, term_count
from .errors import DepthError, EncodingRangeError, ProtocolError
from .frit import FritData

__all__ = [
    "ExponentLedger",
    "EncryptedDatasetD",
    "EncryptedDatasetF",
    "exponent_table",
    "client_prepare",
    "server_tune_elgamal",
    "client_finalize_elgamal",
    "server_tune_ckks",
    "client_finalize_ckks",
]

SCHEMES = ("elgamal", "ckks")

#: Worst-case multiplicative depth of the server pipeline for order n:
#: minor chain (n - 2), sign, determinant, parity, and the three-factor
#: term chain.
def required_depth(n: int) -> int:
    return n + 4


@dataclass(frozen=True)
class ExponentLedger:
    """Sensitivity-exponent bookkeeping for ElGamal decoding.

    omega[k][j][i] counts the gamma factors inside the (j, i) entry of the
    k-th intermediate matrix; xi[t] is the per-column decode exponent
    vector of flat term t (the matching omega row plus 3).
    """

    omega: tuple  # per permutation: n x n nested tuples of ints
    xi: tuple     # per flat term: n-tuples of ints

    def to_json_dict(self) -> dict:
        return {"omega": [[list(r) for r in mat] for mat in self.omega],
                "xi": [list(row) for row in self.xi]}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ExponentLedger":
        return cls(omega=tuple(tuple(tuple(r) for r in mat) for mat in doc["omega"]),
                   xi=tuple(tuple(row) for row in doc["xi"]))


def exponent_table(table, n: int) -> tuple:
    """Omega matrices for every permutation row of the signed table."""
    mats = []
    for _, sign in table.rows:
        mat = [[0] * n for _ in range(n)]
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                mat[j - 1][i - 1] = ((n - 1) + (1 if sign < 0 else 0)
                                     + (1 if (i + j) % 2 else 0) + 1)
        mats.append(tuple(tuple(r) for r in mat))
    return tuple(mats)


@dataclass(frozen=True)
class EncryptedDatasetD:
    """Client-to-server payload: elementwise encryptions plus public keys."""

    scheme: str
    n: int
    N: int
    sensitivity: float
    public: object                 # scheme public key (never secret material)
    enc_gamma: tuple               # length n*N
    enc_w: tuple                   # (n*N) x n
    enc_psi: tuple                 # n x n
    enc_det_inv: object
    enc_minus_one: object

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ProtocolError(f"unknown scheme {self.scheme!r}")
        _reject_secret_material(self.public)
        if len(self.enc_gamma) != self.n * self.N:
            raise ProtocolError("Gamma ciphertext count does not match n*N")
        if len(self.enc_w) != self.n * self.N or any(
                len(row) != self.n for row in self.enc_w):
            raise ProtocolError("W ciphertext shape does not match (n*N, n)")
        if len(self.enc_psi) != self.n or any(
                len(row) != self.n for row in self.enc_psi):
            raise ProtocolError("Psi ciphertext shape does not match (n, n)")

    def to_json(self) -> str:
        if self.scheme == "elgamal":
            pub = json.loads(self.public.to_json())
            ser = lambda ct: ct.to_json_dict()  # noqa: E731
        else:
            pub = json.loads(self.public.to_json())
            params = self.public.params
            ser = lambda ct: ct.to_json_dict(params)  # noqa: E731
        return json.dumps({
            "scheme": self.scheme, "n": self.n, "N": self.N,
            "sensitivity": self.sensitivity,
            "public_key": pub,
            "gamma": [ser(c) for c in self.enc_gamma],
            "w": [[ser(c) for c in row] for row in self.enc_w],
            "psi": [[ser(c) for c in row] for row in self.enc_psi],
            "det_inv": ser(self.enc_det_inv),
            "minus_one": ser(self.enc_minus_one),
        })

    @classmethod
    def from_json(cls, text: str) -> "EncryptedDatasetD":
        doc = json.loads(text)
        scheme = doc["scheme"]
        if scheme == "elgamal":
            public = elgamal.ElGamalPublicKey.from_json(json.dumps(doc["public_key"]))
            de = elgamal.ElGamalCiphertext.from_json_dict
        elif scheme == "ckks":
            public = ckks.CkksPublicKey.from_json(json.dumps(doc["public_key"]))
            params = public.params
            de = lambda d: ckks.CkksCiphertext.from_json_dict(d, params)  # noqa: E731
        else:
            raise ProtocolError(f"unknown scheme {scheme!r}")
        return cls(
            scheme=scheme, n=int(doc["n"]), N=int(doc["N"]),
            sensitivity=float(doc["sensitivity"]), public=public,
            enc_gamma=tuple(de(c) for c in doc["gamma"]),
            enc_w=tuple(tuple(de(c) for c in row) for row in doc["w"]),
            enc_psi=tuple(tuple(de(c) for c in row) for row in doc["psi"]),
            enc_det_inv=de(doc["det_inv"]),
            enc_minus_one=de(doc["minus_one"]),
        )


@dataclass(frozen=True)
class EncryptedDatasetF:
    """Server-to-client payload with the encrypted tuned gain.

    ElGamal: M encrypted rows plus the exponent ledger.  CKKS: a single
    encrypted row (params travel for serialization only).
    """

    scheme: str
    n: int
    rows: tuple | None = None            # elgamal: M rows of n ciphertexts
    ledger: ExponentLedger | None = None
    enc_f: tuple | None = None           # ckks: n ciphertexts
    params: ckks.CkksParams | None = None

    @property
    def M(self) -> int:
        return len(self.rows) if self.rows is not None else 0

    def to_json(self) -> str:
        if self.scheme == "elgamal":
            return json.dumps({
                "scheme": self.scheme, "n": self.n,
                "manifest": {"M": self.M, "ledger": self.ledger.to_json_dict()},
                "rows": [[ct.to_json_dict() for ct in row] for row in self.rows],
            })
        return json.dumps({
            "scheme": self.scheme, "n": self.n,
            "manifest": {"M": 1},
            "params": self.params.to_json_dict(),
            "enc_f": [ct.to_json_dict(self.params) for ct in self.enc_f],
        })

    @classmethod
    def from_json(cls, text: str) -> "EncryptedDatasetF":
        doc = json.loads(text)
        scheme = doc["scheme"]
        n = int(doc["n"])
        if scheme == "elgamal":
            ledger = ExponentLedger.from_json_dict(doc["manifest"]["ledger"])
            rows = tuple(tuple(elgamal.ElGamalCiphertext.from_json_dict(c)
                               for c in row) for row in doc["rows"])
            return cls(scheme=scheme, n=n, rows=rows, ledger=ledger)
        if scheme == "ckks":
            params = ckks.CkksParams.from_json_dict(doc["params"])
            enc_f = tuple(ckks.CkksCiphertext.from_json_dict(c, params)
                          for c in doc["enc_f"])
            return cls(scheme=scheme, n=n, enc_f=enc_f, params=params)
        raise ProtocolError(f"unknown scheme {scheme!r}")


_SECRET_ATTRS = ("s", "sk", "secret", "secret_key")


def _reject_secret_material(public) -> None:
    """Server-side guard: refuse any object carrying a secret component."""
    for attr in _SECRET_ATTRS:
        if getattr(public, attr, None) is not None:
            raise ProtocolError(
                f"object with secret attribute {attr!r} passed where only "
                "public key material is allowed")


def client_prepare(scheme: str, data: FritData, public, sensitivity: float,
                   rng, nonce_bits: int | None = None) -> EncryptedDatasetD:
    """Encode and encrypt the regression data elementwise into dataset D."""
    if scheme not in SCHEMES:
        raise ProtocolError(f"unknown scheme {scheme!r}")
    n, N = data.n, data.N

    scalars = [(f"Gamma[{i + 1}]", float(data.Gamma[i])) for i in range(n * N)]
    scalars += [(f"W[{i + 1},{l + 1}]", float(data.W[i, l]))
                for i in range(n * N) for l in range(n)]
    scalars += [(f"Psi[{i + 1},{j + 1}]", float(data.Psi[i, j]))
                for i in range(n) for j in range(n)]
    scalars += [("det(Psi)^-1", float(data.det_psi_inv)), ("-1", -1.0)]

    if scheme == "elgamal":
        def encrypt_one(name, x):
            try:
                encoded = elgamal.ecd(x, sensitivity, public)
            except EncodingRangeError as exc:
                raise EncodingRangeError(f"{name} = {x!r}: {exc}") from exc
            return elgamal.enc(public, encoded.m, rng, nonce_bits=nonce_bits)
    else:
        params = public.params
        def encrypt_one(name, x):
            try:
                encoded = ckks.ecd(x, sensitivity, params.q0)
            except EncodingRangeError as exc:
                raise EncodingRangeError(f"{name} = {x!r}: {exc}") from exc
            return ckks.enc(public, encoded, rng)

    cts = [encrypt_one(name, x) for name, x in scalars]
    pos = 0
    enc_gamma = tuple(cts[pos:pos + n * N]); pos += n * N
    enc_w = tuple(tuple(cts[pos + i * n:pos + (i + 1) * n])
                  for i in range(n * N)); pos += n * N * n
    enc_psi = tuple(tuple(cts[pos + i * n:pos + (i + 1) * n])
                    for i in range(n)); pos += n * n
    enc_det_inv = cts[pos]
    enc_minus_one = cts[pos + 1]
    return EncryptedDatasetD(scheme=scheme, n=n, N=N, sensitivity=sensitivity,
                             public=public, enc_gamma=enc_gamma, enc_w=enc_w,
                             enc_psi=enc_psi, enc_det_inv=enc_det_inv,
                             enc_minus_one=enc_minus_one)


def _minor_cts(enc_psi, i: int, j: int, n: int):
    """Ciphertext matrix of Psi with 1-based row i and column j removed."""
    return [[enc_psi[r][c] for c in range(n) if c != j - 1]
            for r in range(n) if r != i - 1]


def server_tune_elgamal(D: EncryptedDatasetD) -> EncryptedDatasetF:
    """Evaluate every flat term homomorphically; never decrypts.

    Emits one encrypted row and one exponent vector per (permutation, data
    row, column) triple, in flat-index order.
    """
    if not isinstance(D, EncryptedDatasetD) or D.scheme != "elgamal":
        raise ProtocolError("server_tune_elgamal needs an elgamal dataset D")
    public = D.public
    _reject_secret_material(public)
    p = public.p
    n, N = D.n, D.N
    table = signed_permutations(n)
    omega = exponent_table(table, n)

    # intermediate matrices: enc_phi[k][j-1][i-1]
    enc_phi = []
    for (perm, sign) in table.rows:
        mat = [[None] * n for _ in range(n)]
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                minor = _minor_cts(D.enc_psi, i, j, n)
                prod = None
                for l, col in enumerate(perm, start=1):
                    ct = minor[l - 1][col - 1]
                    prod = ct if prod is None else elgamal.hmul(prod, ct, p)
                if sign < 0:
                    prod = elgamal.hmul(D.enc_minus_one, prod, p)
                phi = (D.enc_det_inv if prod is None
                       else elgamal.hmul(D.enc_det_inv, prod, p))
                if (i + j) % 2:
                    phi = elgamal.hmul(phi, D.enc_minus_one, p)
                mat[j - 1][i - 1] = phi
        enc_phi.append(mat)

    # shared partial products: (-1)*Gamma_i and then *W_il
    mg = [elgamal.hmul(D.enc_minus_one, D.enc_gamma[i], p) for i in range(n * N)]
    mgw = [[elgamal.hmul(mg[i], D.enc_w[i][l], p) for l in range(n)]
           for i in range(n * N)]

    rows, xi = [], []
    for k in range(1, len(table.rows) + 1):
        for i in range(1, n * N + 1):
            for l in range(1, n + 1):
                row = tuple(elgamal.hmul(mgw[i - 1][l - 1],
                                         enc_phi[k - 1][l - 1][c], p)
                            for c in range(n))
                assert flat_index(k, i, l, n, N) == len(rows) + 1
                rows.append(row)
                xi.append(tuple(w + 3 for w in omega[k - 1][l - 1]))
    ledger = ExponentLedger(omega=omega, xi=tuple(xi))
    return EncryptedDatasetF(scheme="elgamal", n=n, rows=tuple(rows), ledger=ledger)


def client_finalize_elgamal(F: EncryptedDatasetF, keys: elgamal.ElGamalKeys,
                            gamma_e: float) -> np.ndarray:
    """Decrypt each term row, decode at its ledger exponent, and sum."""
    if F.scheme != "elgamal":
        raise ProtocolError("finalize_elgamal needs an elgamal dataset F")
    if F.ledger is None or F.rows is None:
        raise ProtocolError("dataset F is missing rows or the exponent ledger")
    if len(F.ledger.xi) != len(F.rows):
        raise ProtocolError("exponent ledger does not cover every term")
    gamma = Fraction(gamma_e)
    total = [Fraction(0)] * F.n
    for row, exponents in zip(F.rows, F.ledger.xi):
        for c in range(F.n):
            m = elgamal.dec(keys, row[c])
            total[c] += elgamal.dcd_exact(m, gamma ** exponents[c], keys.public)
    return np.array([float(t) for t in total])


def _cmult(a, b, public):
    """Align to the lower level, then multiply."""
    level = min(a.level, b.level)
    params = public.params
    return ckks.mult(ckks.mod_align(a, level, params),
                     ckks.mod_align(b, level, params), public)


def server_tune_ckks(D: EncryptedDatasetD) -> EncryptedDatasetF:
    """Evaluate the term sum with leveled operations; never decrypts.

    All intermediate matrices are brought to a common level before the
    term chains, and the final rows are summed in ascending flat-index
    order so results are bit-reproducible.
    """
    if not isinstance(D, EncryptedDatasetD) or D.scheme != "ckks":
        raise ProtocolError("server_tune_ckks needs a ckks dataset D")
    public = D.public
    _reject_secret_material(public)
    params = public.params
    n, N = D.n, D.N
    if params.L_max < required_depth(n):
        raise DepthError(
            f"chain of {params.L_max} levels cannot host a depth-"
            f"{required_depth(n)} pipeline",
            required=required_depth(n), available=params.L_max)
    table = signed_permutations(n)

    enc_phi = []
    for (perm, sign) in table.rows:
        mat = [[None] * n for _ in range(n)]
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                minor = _minor_cts(D.enc_psi, i, j, n)
                prod = None
                for l, col in enumerate(perm, start=1):
                    ct = minor[l - 1][col - 1]
                    prod = ct if prod is None else _cmult(prod, ct, public)
                if sign < 0:
                    prod = _cmult(prod, D.enc_minus_one, public)
                phi = (D.enc_det_inv if prod is None
                       else _cmult(D.enc_det_inv, prod, public))
                if (i + j) % 2:
                    phi = _cmult(phi, D.enc_minus_one, public)
                mat[j - 1][i - 1] = phi
        enc_phi.append(mat)

    phi_level = min(ct.level for mat in enc_phi for row in mat for ct in row)
    enc_phi = [[[ckks.mod_align(ct, phi_level, params) for ct in row]
                for row in mat] for mat in enc_phi]

    mg = [_cmult(D.enc_minus_one, D.enc_gamma[i], public) for i in range(n * N)]
    mgw = [[_cmult(mg[i], D.enc_w[i][l], public) for l in range(n)]
           for i in range(n * N)]

    acc = None
    count = 0
    for k in range(1, len(table.rows) + 1):
        for i in range(1, n * N + 1):
            for l in range(1, n + 1):
                row = [_cmult(mgw[i - 1][l - 1], enc_phi[k - 1][l - 1][c], public)
                       for c in range(n)]
                count += 1
                assert flat_index(k, i, l, n, N) == count
                if acc is None:
                    acc = row
                else:
                    acc = [ckks.add(a, t, params) for a, t in zip(acc, row)]
    assert count == term_count(n, N)
    return EncryptedDatasetF(scheme="ckks", n=n, enc_f=tuple(acc), params=params)


def client_finalize_ckks(F: EncryptedDatasetF, keys: ckks.CkksKeys,
                         gamma_c: float) -> np.ndarray:
    """Decrypt and decode the single encrypted row at its scale power."""
    if F.scheme != "ckks":
        raise ProtocolError("finalize_ckks needs a ckks dataset F")
    if F.enc_f is None:
        raise ProtocolError("dataset F is missing the encrypted gain")
    out = [ckks.dcd(ckks.dec(keys, ct), gamma_c, ct.scale_power)
           for ct in F.enc_f]
    return np.array(out)

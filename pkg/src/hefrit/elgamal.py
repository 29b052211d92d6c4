"""Multiplicatively homomorphic ElGamal over a safe-prime field.

The plaintext space is the quadratic-residue subgroup G of Z_p^* for a
safe prime p = 2q + 1, so membership is a Jacobi-symbol test and exactly
one of {z, p - z} lies in G.  Reals enter the group through a sensitivity
encoder: x is scaled by 1/gamma, shifted by p when negative, and snapped
to the nearest group element; the recorded rounding offset is what makes
the product-decoding identity exact.

Modular exponentiations follow a fixed-window square-and-multiply whose
operation pattern depends only on the declared exponent size, not the
exponent value (documented discipline, not a side-channel audit).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import gmpy2
from gmpy2 import mpz

from .errors import EncodingRangeError, KeyGenError

__all__ = [
    "ElGamalPublicKey",
    "ElGamalKeys",
    "ElGamalCiphertext",
    "EncodedScalar",
    "gen",
    "enc",
    "dec",
    "hmul",
    "ecd",
    "dcd",
    "dcd_exact",
    "mod_pow",
    "is_group_element",
    "CACHED_SAFE_PRIME_3072",
]

# 3072-bit MODP group modulus from RFC 3526: a safe prime with p = 7 (mod 8),
# so 2 is a quadratic residue and generates the order-q subgroup.  Primality
# of p and (p-1)/2 is re-verified before first use.
CACHED_SAFE_PRIME_3072 = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AAAC42DAD33170D04507A33"
    "A85521ABDF1CBA64ECFB850458DBEF0A8AEA71575D060C7DB3970F85A6E1E4C7"
    "ABF5AE8CDB0933D71E8C94E04A25619DCEE3D2261AD2EE6BF12FFA06D98A0864"
    "D87602733EC86A64521F2B18177B200CBBE117577A615D6C770988C0BAD946E2"
    "08E24FA074E5AB3143DB5BFCE0FD108E4B82D120A93AD2CAFFFFFFFFFFFFFFFF",
    16,
)

_PRIME_CHECK_ROUNDS = 30
_verified_cached_prime = False


def mod_pow(base: int, exp: int, mod: int, exp_bits: int | None = None,
            window: int = 4) -> int:
    """Fixed-window modular exponentiation.

    The square/multiply pattern is determined by exp_bits alone; pass the
    group exponent size to keep the pattern independent of the secret.
    """
    if exp < 0:
        raise ValueError("exponent must be non-negative")
    if exp_bits is None:
        exp_bits = max(exp.bit_length(), 1)
    if exp.bit_length() > exp_bits:
        raise ValueError("exponent longer than declared exp_bits")
    base = mpz(base) % mod
    mod = mpz(mod)
    table = [mpz(1)] * (1 << window)
    for i in range(1, 1 << window):
        table[i] = table[i - 1] * base % mod
    acc = mpz(1)
    mask = (1 << window) - 1
    nwin = (exp_bits + window - 1) // window
    for i in range(nwin - 1, -1, -1):
        for _ in range(window):
            acc = acc * acc % mod
        acc = acc * table[(exp >> (i * window)) & mask] % mod
    return int(acc)


def is_group_element(v: int, p: int) -> bool:
    """Quadratic-residue test, equivalent to v^q = 1 (mod p) for p = 2q+1."""
    if not 1 <= v < p:
        return False
    return gmpy2.jacobi(mpz(v), mpz(p)) == 1


@dataclass(frozen=True)
class ElGamalPublicKey:
    """Public parameters (p, q, g, h); bits is the size of q."""

    p: int
    q: int
    g: int
    h: int
    bits: int

    def __post_init__(self):
        if self.p != 2 * self.q + 1:
            raise ValueError("p must equal 2q + 1")
        if self.g in (0, 1) or not is_group_element(self.g, self.p):
            raise ValueError("g does not generate the quadratic-residue subgroup")
        if not is_group_element(self.h, self.p):
            raise ValueError("h is not a subgroup element")

    def to_json(self) -> str:
        return json.dumps({"p": f"{self.p:x}", "q": f"{self.q:x}",
                           "g": f"{self.g:x}", "h": f"{self.h:x}"})

    @classmethod
    def from_json(cls, text: str) -> "ElGamalPublicKey":
        doc = json.loads(text)
        p, q, g, h = (int(doc[k], 16) for k in ("p", "q", "g", "h"))
        _check_safe_prime(p, q)
        return cls(p=p, q=q, g=g, h=h, bits=q.bit_length())


@dataclass(frozen=True)
class ElGamalKeys:
    """Key pair; the secret exponent s never appears in the public part."""

    public: ElGamalPublicKey
    s: int
    secret_bits: int

    @property
    def p(self) -> int:
        return self.public.p

    @property
    def q(self) -> int:
        return self.public.q

    def secret_to_json(self) -> str:
        return json.dumps({"s": f"{self.s:x}", "secret_bits": self.secret_bits})

    @classmethod
    def from_json(cls, public_text: str, secret_text: str) -> "ElGamalKeys":
        public = ElGamalPublicKey.from_json(public_text)
        doc = json.loads(secret_text)
        s = int(doc["s"], 16)
        secret_bits = int(doc.get("secret_bits", public.q.bit_length()))
        keys = cls(public=public, s=s, secret_bits=secret_bits)
        if mod_pow(public.g, s, public.p, secret_bits) != public.h:
            raise ValueError("secret does not match the public key")
        return keys


@dataclass(frozen=True)
class ElGamalCiphertext:
    c1: int
    c2: int

    def to_json_dict(self) -> dict:
        return {"c1": f"{self.c1:x}", "c2": f"{self.c2:x}"}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ElGamalCiphertext":
        return cls(c1=int(doc["c1"], 16), c2=int(doc["c2"], 16))

    def validate(self, public: ElGamalPublicKey) -> "ElGamalCiphertext":
        if not (is_group_element(self.c1, public.p)
                and is_group_element(self.c2, public.p)):
            raise ValueError("ciphertext components outside the plaintext subgroup")
        return self


@dataclass(frozen=True)
class EncodedScalar:
    """Group element nearest to x/gamma (+p for negative x).

    offset is the signed rounding distance m - target kept exactly; the
    decoding identity for products uses it with its sign even though the
    plain distance delta is what bounds the quantization error.
    """

    m: int
    offset: Fraction
    gamma_exponent: int = 1

    @property
    def delta(self) -> Fraction:
        return abs(self.offset)


def _is_prime(v: int) -> bool:
    return gmpy2.is_prime(mpz(v), _PRIME_CHECK_ROUNDS)


def _check_safe_prime(p: int, q: int) -> None:
    if p != 2 * q + 1 or not (_is_prime(p) and _is_prime(q)):
        raise ValueError("p, q do not form a safe-prime pair")


def _cached_3072_keys_modulus() -> tuple[int, int]:
    global _verified_cached_prime
    p = CACHED_SAFE_PRIME_3072
    q = (p - 1) // 2
    if not _verified_cached_prime:
        _check_safe_prime(p, q)
        _verified_cached_prime = True
    return p, q


def _smallest_generator(p: int) -> int:
    g = 2
    while not is_group_element(g, p):
        g += 1
    return g


def gen(bits: int, rng, secret_bits: int | None = None,
        max_tries: int = 2_000_000) -> ElGamalKeys:
    """Generate keys with a `bits`-long safe-prime modulus p.

    bits = 3072 uses the cached, re-verified modulus (fresh safe primes of
    that size are impractically slow to search for); smaller sizes are
    searched randomly.  secret_bits caps the size of s (the 128-bit
    profile pairs a 3072-bit modulus with a 256-bit secret).
    """
    if bits == 3072:
        p, q = _cached_3072_keys_modulus()
    elif 5 <= bits <= 1024:
        p = q = 0
        for _ in range(max_tries):
            cand = rng.randrange(1 << (bits - 2), 1 << (bits - 1)) | 1
            if _is_prime(cand) and _is_prime(2 * cand + 1):
                q, p = cand, 2 * cand + 1
                break
        if p == 0:
            raise KeyGenError(f"no {bits}-bit safe prime found in {max_tries} tries")
    else:
        raise ValueError(f"unsupported modulus size {bits}")
    g = _smallest_generator(p)
    if secret_bits is None:
        secret_bits = q.bit_length()
        s = rng.randrange(1, q)
    else:
        if secret_bits >= q.bit_length():
            raise ValueError("secret_bits must be smaller than q")
        s = rng.randrange(1 << (secret_bits - 1), 1 << secret_bits)
    h = mod_pow(g, s, p, secret_bits)
    public = ElGamalPublicKey(p=p, q=q, g=g, h=h, bits=q.bit_length())
    return ElGamalKeys(public=public, s=s, secret_bits=secret_bits)


def enc(public: ElGamalPublicKey, m: int, rng,
        nonce_bits: int | None = None) -> ElGamalCiphertext:
    """Encrypt a group element with a fresh nonce.

    nonce_bits shortens the nonce range for the high-security profile
    (short-exponent ElGamal); by default the nonce is uniform over Z_q.
    """
    if not is_group_element(m, public.p):
        raise ValueError("plaintext is not an element of the subgroup")
    if nonce_bits is None:
        r = rng.randrange(1, public.q)
        exp_bits = public.q.bit_length()
    else:
        r = rng.randrange(1 << (nonce_bits - 1), 1 << nonce_bits)
        exp_bits = nonce_bits
    c1 = mod_pow(public.g, r, public.p, exp_bits)
    c2 = int(mpz(m) * mod_pow(public.h, r, public.p, exp_bits) % public.p)
    return ElGamalCiphertext(c1=c1, c2=c2)


def dec(keys: ElGamalKeys, ct: ElGamalCiphertext) -> int:
    """Recover the group element: c1^{-s} c2 (mod p)."""
    p = keys.p
    c1s = mod_pow(ct.c1, keys.s, p, keys.secret_bits)
    return int(gmpy2.invert(mpz(c1s), mpz(p)) * ct.c2 % p)


def hmul(a: ElGamalCiphertext, b: ElGamalCiphertext, p: int) -> ElGamalCiphertext:
    """Componentwise product; decrypts to the product of the plaintexts."""
    return ElGamalCiphertext(c1=int(mpz(a.c1) * b.c1 % p),
                             c2=int(mpz(a.c2) * b.c2 % p))


def ecd(x: float, gamma, public: ElGamalPublicKey) -> EncodedScalar:
    """Encode a real into the subgroup at sensitivity gamma.

    The target x/gamma (+p if x < 0) is snapped to the nearest subgroup
    element, walking outward one integer at a time; ties prefer the
    smaller element.  Raises when |x/gamma| exceeds q.
    """
    gamma = Fraction(gamma)
    if not 0 < gamma <= 1:
        raise ValueError("sensitivity must lie in (0, 1]")
    t = Fraction(x) / gamma
    if abs(t) > public.q:
        raise EncodingRangeError(
            f"|x/gamma| = {float(abs(t)):.4g} exceeds the subgroup order "
            f"q ~ 2^{public.q.bit_length() - 1}")
    target = t + (public.p if x < 0 else 0)
    lo = math.floor(target)
    hi = lo + 1
    while True:
        if lo >= 1 and (target - lo <= hi - target or hi >= public.p):
            cand, lo = lo, lo - 1
        elif hi < public.p:
            cand, hi = hi, hi + 1
        else:
            raise EncodingRangeError("no subgroup element near the target")
        if is_group_element(cand, public.p):
            return EncodedScalar(m=cand, offset=Fraction(cand) - target)


def dcd_exact(m: int, gamma_power, public: ElGamalPublicKey) -> Fraction:
    """Decode a residue to an exact rational at the given gamma power."""
    if not 0 <= m < public.p:
        raise ValueError("residue out of range")
    centered = m - public.p if m > public.q else m
    return Fraction(centered) * Fraction(gamma_power)


def dcd(m: int, gamma_power, public: ElGamalPublicKey) -> float:
    """Decode a residue to a real: gamma_power * (m - p [m > q])."""
    return float(dcd_exact(m, gamma_power, public))

"""Leveled homomorphic encryption on real scalars (CKKS style, no packing).

Plaintexts are integers x/gamma_c rounded, carried in the constant
coefficient of a ring element; there is no canonical embedding or slot
packing.  The modulus chain is q_l = q0 * Delta^l with Delta = 1/gamma_c,
so one rescaling divides the carried scale by Delta and drops one level.
Multiplication relinearizes the degree-two ciphertext through an
evaluation key over q_L^2 (special modulus P = q_L) and rescales once.

Coefficients are stored as non-negative residues of the level modulus and
centered only for rounding and serialization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from .errors import AlignmentError, DepthError, EncodingRangeError
from .ring import (
    center_mod,
    reduce_mod,
    ring_add,
    ring_mul_exact,
    ring_mul_mod,
    ring_scalar_offset,
    round_div,
    sample_binary,
    sample_gaussian,
    sample_ternary,
    sample_uniform,
)

__all__ = [
    "CkksParams",
    "CkksPublicKey",
    "CkksKeys",
    "CkksCiphertext",
    "gen",
    "ecd",
    "dcd",
    "dcd_exact",
    "enc",
    "dec",
    "add",
    "mult",
    "rescale",
    "mod_align",
]


@dataclass(frozen=True)
class CkksParams:
    """Ring/chain parameters.

    d: ring degree (power of two).
    L_max: top level; the modulus chain is q_l = q0 * Delta^l, 0 <= l <= L_max.
    gamma_c: sensitivity; Delta = 1/gamma_c is the plaintext scale.
    q0: base modulus, chosen much larger than Delta so the last level can
        still hold a scaled plaintext.
    sigma: noise standard deviation (3.2 unless a noiseless test profile).
    """

    d: int
    L_max: int
    gamma_c: float = 2.0 ** -40
    q0: int = 2 ** 60
    sigma: float = 3.2

    def __post_init__(self):
        if self.d < 2 or self.d & (self.d - 1):
            raise ValueError("ring degree must be a power of two >= 2")
        if self.L_max < 1:
            raise ValueError("need at least one rescalable level")
        delta = Fraction(1) / Fraction(self.gamma_c)
        if delta.denominator != 1 or delta.numerator < 2:
            raise ValueError("1/gamma_c must be an integer scale >= 2")
        if self.q0 <= delta.numerator:
            raise ValueError("q0 must exceed the scale Delta")
        object.__setattr__(self, "_delta", int(delta))

    @property
    def delta(self) -> int:
        return self._delta

    def modulus(self, level: int) -> int:
        if not 0 <= level <= self.L_max:
            raise ValueError(f"level {level} outside [0, {self.L_max}]")
        return self.q0 * self.delta ** level

    @property
    def q_top(self) -> int:
        return self.modulus(self.L_max)

    def to_json_dict(self) -> dict:
        return {"d": self.d, "L_max": self.L_max, "gamma_c": self.gamma_c,
                "q0": f"{self.q0:x}", "sigma": self.sigma}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "CkksParams":
        return cls(d=int(doc["d"]), L_max=int(doc["L_max"]),
                   gamma_c=float(doc["gamma_c"]), q0=int(doc["q0"], 16),
                   sigma=float(doc["sigma"]))


def _poly_to_hex(poly: list, q: int) -> list[str]:
    out = []
    for c in center_mod(poly, q):
        out.append(f"-{-c:x}" if c < 0 else f"{c:x}")
    return out


def _poly_from_hex(chunks: list, q: int) -> list[int]:
    return [int(c, 16) % q for c in chunks]


@dataclass(frozen=True)
class CkksPublicKey:
    """Everything the evaluating party may hold: parameters, pk, evk."""

    params: CkksParams
    pk0: tuple
    pk1: tuple
    evk0: tuple
    evk1: tuple

    def to_json(self) -> str:
        qL = self.params.q_top
        qL2 = qL * qL
        return json.dumps({
            "params": self.params.to_json_dict(),
            "pk0": _poly_to_hex(self.pk0, qL), "pk1": _poly_to_hex(self.pk1, qL),
            "evk0": _poly_to_hex(self.evk0, qL2), "evk1": _poly_to_hex(self.evk1, qL2),
        })

    @classmethod
    def from_json(cls, text: str) -> "CkksPublicKey":
        doc = json.loads(text)
        params = CkksParams.from_json_dict(doc["params"])
        qL = params.q_top
        qL2 = qL * qL
        return cls(params=params,
                   pk0=tuple(_poly_from_hex(doc["pk0"], qL)),
                   pk1=tuple(_poly_from_hex(doc["pk1"], qL)),
                   evk0=tuple(_poly_from_hex(doc["evk0"], qL2)),
                   evk1=tuple(_poly_from_hex(doc["evk1"], qL2)))


@dataclass(frozen=True)
class CkksKeys:
    """Key bundle; sk coefficients are ternary and never serialized publicly."""

    public: CkksPublicKey
    sk: tuple

    @property
    def params(self) -> CkksParams:
        return self.public.params

    def secret_to_json(self) -> str:
        return json.dumps({"sk": list(self.sk)})

    @classmethod
    def from_json(cls, public_text: str, secret_text: str) -> "CkksKeys":
        public = CkksPublicKey.from_json(public_text)
        sk = tuple(json.loads(secret_text)["sk"])
        if any(c not in (-1, 0, 1) for c in sk):
            raise ValueError("secret key coefficients must be ternary")
        return cls(public=public, sk=sk)


@dataclass(frozen=True)
class CkksCiphertext:
    """Pair of ring elements at a chain level.

    scale_power counts the Delta factors the carried plaintext has
    absorbed: fresh encryptions have power 1, each multiplication adds the
    operand powers and the built-in rescale subtracts one.
    """

    ct0: tuple
    ct1: tuple
    level: int
    scale_power: int

    def to_json_dict(self, params: CkksParams) -> dict:
        q = params.modulus(self.level)
        return {"level": self.level, "scale_power": self.scale_power,
                "ct0": _poly_to_hex(self.ct0, q), "ct1": _poly_to_hex(self.ct1, q)}

    @classmethod
    def from_json_dict(cls, doc: dict, params: CkksParams) -> "CkksCiphertext":
        level = int(doc["level"])
        q = params.modulus(level)
        return cls(ct0=tuple(_poly_from_hex(doc["ct0"], q)),
                   ct1=tuple(_poly_from_hex(doc["ct1"], q)),
                   level=level, scale_power=int(doc["scale_power"]))


def gen(params: CkksParams, rng) -> CkksKeys:
    """Sample a ternary secret and derive the public and evaluation keys."""
    d = params.d
    qL = params.q_top
    qL2 = qL * qL
    sk = sample_ternary(d, rng)
    pk1 = sample_uniform(d, qL, rng)
    e = sample_gaussian(d, params.sigma, rng)
    pk0 = ring_add([-c for c in ring_mul_mod(pk1, sk, qL)], e, qL)
    evk1 = sample_uniform(d, qL2, rng)
    e2 = sample_gaussian(d, params.sigma, rng)
    sk2 = ring_mul_mod(sk, sk, qL2)
    evk0 = [(-a + b + qL * c) % qL2
            for a, b, c in zip(ring_mul_mod(evk1, sk, qL2), e2, sk2)]
    public = CkksPublicKey(params=params, pk0=tuple(pk0), pk1=tuple(pk1),
                           evk0=tuple(evk0), evk1=tuple(evk1))
    return CkksKeys(public=public, sk=tuple(sk))


def ecd(x: float, gamma_c: float, q0: int | None = None) -> int:
    """Scale by 1/gamma_c and round half away from zero."""
    scaled = Fraction(x) / Fraction(gamma_c)
    value = round_div(scaled.numerator, scaled.denominator)
    if q0 is not None and abs(value) > q0 // 2:
        raise EncodingRangeError(
            f"encoded magnitude {abs(value)} exceeds q0/2")
    return value


def dcd_exact(value: int, gamma_c: float, gamma_power: int = 1) -> Fraction:
    return Fraction(value) * Fraction(gamma_c) ** gamma_power


def dcd(value: int, gamma_c: float, gamma_power: int = 1) -> float:
    """Undo gamma_power scale factors."""
    return float(dcd_exact(value, gamma_c, gamma_power))


def enc(public: CkksPublicKey, m: int, rng) -> CkksCiphertext:
    """Encrypt an encoded integer at the top level."""
    params = public.params
    qL = params.q_top
    v = sample_binary(params.d, rng)
    e1 = sample_gaussian(params.d, params.sigma, rng)
    e2 = sample_gaussian(params.d, params.sigma, rng)
    ct0 = ring_scalar_offset(
        ring_add(ring_mul_mod(v, list(public.pk0), qL, assume_reduced=True),
                 e1, qL), int(m), qL)
    ct1 = ring_add(ring_mul_mod(v, list(public.pk1), qL, assume_reduced=True),
                   e2, qL)
    return CkksCiphertext(ct0=tuple(ct0), ct1=tuple(ct1),
                          level=params.L_max, scale_power=1)


def dec(keys: CkksKeys, ct: CkksCiphertext) -> int:
    """Centered constant coefficient of ct0 + ct1 * sk at the ciphertext level."""
    q = keys.params.modulus(ct.level)
    m = ring_add(ct.ct0, ring_mul_mod(ct.ct1, keys.sk, q), q)
    return center_mod(m, q)[0]


def _require_aligned(a: CkksCiphertext, b: CkksCiphertext,
                     check_scale: bool) -> None:
    if a.level != b.level:
        raise AlignmentError(
            f"operand levels differ: {a.level} vs {b.level}; mod_align first")
    if check_scale and a.scale_power != b.scale_power:
        raise AlignmentError(
            f"operand scale powers differ: {a.scale_power} vs {b.scale_power}")


def add(a: CkksCiphertext, b: CkksCiphertext, params: CkksParams) -> CkksCiphertext:
    """Componentwise sum at a shared level and scale."""
    _require_aligned(a, b, check_scale=True)
    q = params.modulus(a.level)
    return CkksCiphertext(ct0=tuple(ring_add(a.ct0, b.ct0, q)),
                          ct1=tuple(ring_add(a.ct1, b.ct1, q)),
                          level=a.level, scale_power=a.scale_power)


def rescale(ct: CkksCiphertext, params: CkksParams) -> CkksCiphertext:
    """Divide by Delta (rounded on centered coefficients) and drop a level."""
    if ct.level < 1:
        raise DepthError("no level left to rescale", required=1, available=0)
    q_here = params.modulus(ct.level)
    q_next = params.modulus(ct.level - 1)
    delta = params.delta
    ct0 = [round_div(c, delta) % q_next for c in center_mod(ct.ct0, q_here)]
    ct1 = [round_div(c, delta) % q_next for c in center_mod(ct.ct1, q_here)]
    return CkksCiphertext(ct0=tuple(ct0), ct1=tuple(ct1),
                          level=ct.level - 1, scale_power=ct.scale_power - 1)


def mult(a: CkksCiphertext, b: CkksCiphertext, public: CkksPublicKey) -> CkksCiphertext:
    """Tensor product, relinearization through evk, then one rescale."""
    _require_aligned(a, b, check_scale=False)
    if a.level < 1:
        raise DepthError("multiplication needs a rescalable level",
                         required=1, available=a.level)
    params = public.params
    q = params.modulus(a.level)
    P = params.q_top
    a0, a1, b0, b1 = list(a.ct0), list(a.ct1), list(b.ct0), list(b.ct1)
    d40 = ring_mul_mod(a0, b0, q, assume_reduced=True)
    d41 = ring_add(ring_mul_mod(a0, b1, q, assume_reduced=True),
                   ring_mul_mod(a1, b0, q, assume_reduced=True), q)
    d42 = ring_mul_mod(a1, b1, q, assume_reduced=True)
    # exact products against the evaluation key, divided by the special modulus
    r0 = [round_div(c, P) for c in ring_mul_exact(d42, list(public.evk0))]
    r1 = [round_div(c, P) for c in ring_mul_exact(d42, list(public.evk1))]
    ct30 = ring_add(d40, reduce_mod(r0, q), q)
    ct31 = ring_add(d41, reduce_mod(r1, q), q)
    prod = CkksCiphertext(ct0=tuple(ct30), ct1=tuple(ct31), level=a.level,
                          scale_power=a.scale_power + b.scale_power)
    return rescale(prod, params)


def mod_align(ct: CkksCiphertext, target_level: int,
              params: CkksParams) -> CkksCiphertext:
    """Reduce into a smaller chain modulus without touching the scale."""
    if target_level > ct.level:
        raise AlignmentError(
            f"cannot align upward: ciphertext at level {ct.level}, "
            f"target {target_level}")
    if target_level == ct.level:
        return ct
    q = params.modulus(target_level)
    return CkksCiphertext(ct0=tuple(reduce_mod(ct.ct0, q)),
                          ct1=tuple(reduce_mod(ct.ct1, q)),
                          level=target_level, scale_power=ct.scale_power)

"""Parameter bundles for the two supported operating points.

`test` favors speed: a small ElGamal modulus and a reduced CKKS ring, no
security claim.  `secure128` targets the 128-bit level: a 3072-bit
safe-prime modulus with 256-bit exponents on the ElGamal side, and ring
degree 32768 with a 21-modulus chain (one 60-bit base plus twenty 40-bit
scale steps) on the CKKS side; sensitivity 2^-40 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import ckks, elgamal

__all__ = ["Profile", "PROFILES", "get_profile"]


@dataclass(frozen=True)
class Profile:
    name: str
    elgamal_bits: int
    elgamal_secret_bits: int | None
    elgamal_nonce_bits: int | None
    gamma_e: float
    ckks_d: int
    ckks_L_max: int
    ckks_q0: int
    gamma_c: float
    ckks_sigma: float

    def ckks_params(self) -> ckks.CkksParams:
        return ckks.CkksParams(d=self.ckks_d, L_max=self.ckks_L_max,
                               gamma_c=self.gamma_c, q0=self.ckks_q0,
                               sigma=self.ckks_sigma)

    def gen_elgamal(self, rng) -> elgamal.ElGamalKeys:
        return elgamal.gen(self.elgamal_bits, rng,
                           secret_bits=self.elgamal_secret_bits)

    def gen_ckks(self, rng) -> ckks.CkksKeys:
        return ckks.gen(self.ckks_params(), rng)

    def sensitivity(self, scheme: str) -> float:
        return self.gamma_e if scheme == "elgamal" else self.gamma_c


PROFILES = {
    # gamma_e is coarser here than in secure128: decoded products absorb up
    # to n + 5 sensitivity factors, which must stay inside the 256-bit
    # subgroup order.
    "test": Profile(
        name="test",
        elgamal_bits=256, elgamal_secret_bits=None, elgamal_nonce_bits=None,
        gamma_e=2.0 ** -30,
        ckks_d=4096, ckks_L_max=10, ckks_q0=2 ** 60,
        gamma_c=2.0 ** -40, ckks_sigma=3.2,
    ),
    "secure128": Profile(
        name="secure128",
        elgamal_bits=3072, elgamal_secret_bits=256, elgamal_nonce_bits=256,
        gamma_e=2.0 ** -40,
        ckks_d=32768, ckks_L_max=20, ckks_q0=2 ** 60,
        gamma_c=2.0 ** -40, ckks_sigma=3.2,
    ),
}


def get_profile(name: str) -> Profile:
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown profile {name!r}; "
                         f"choose from {sorted(PROFILES)}") from None

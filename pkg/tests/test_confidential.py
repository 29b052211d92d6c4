import functools
import json
import random
from fractions import Fraction

import numpy as np
import pytest

from hefrit import ckks, confidential, elgamal
from hefrit.cofactor import gain_terms, phi_matrices, signed_permutations, term_count
from hefrit.confidential import (
    EncryptedDatasetD,
    EncryptedDatasetF,
    client_finalize_ckks,
    client_finalize_elgamal,
    client_prepare,
    exponent_table,
    server_tune_ckks,
    server_tune_elgamal,
)
from hefrit.errors import DepthError, ProtocolError
from hefrit.frit import FritData

from conftest import example_setup


@functools.cache
def elgamal_keys_256():
    return elgamal.gen(256, random.Random(77))


@functools.cache
def ckks_small_keys():
    params = ckks.CkksParams(d=64, L_max=6, gamma_c=2.0 ** -20, q0=2 ** 40)
    return ckks.gen(params, random.Random(78))


def synthetic_data(seed=0, n=2, N=2):
    rng = np.random.default_rng(seed)
    W = rng.uniform(-2, 2, size=(n * N, n))
    Gamma = rng.uniform(-2, 2, size=n * N)
    Psi = W.T @ W
    det = float(np.linalg.det(Psi))
    return FritData(Gamma=Gamma, W=W, Psi=Psi, det_psi_inv=1.0 / det, n=n, N=N)


class TestExponentTable:
    def test_order_two_checkerboard(self):
        table = signed_permutations(2)
        (omega,) = exponent_table(table, 2)
        # single permutation with positive sign: n-1+1 on even parity,
        # one more on odd parity
        assert omega == ((2, 3), (3, 2))

    def test_order_three_all_cases(self):
        table = signed_permutations(3)
        mats = exponent_table(table, 3)
        assert len(mats) == 2
        positive, negative = mats
        # parity of (i + j) alternates; the sign row adds one
        assert positive[0][0] == 3 and positive[0][1] == 4
        assert negative[0][0] == 4 and negative[0][1] == 5
        for mat, sign in zip(mats, (1, -1)):
            for j in range(3):
                for i in range(3):
                    expect = 2 + (1 if sign < 0 else 0) + ((i + j) % 2) + 1
                    assert mat[j][i] == expect

    def test_entries_within_band(self):
        for n in (1, 2, 3, 4):
            mats = exponent_table(signed_permutations(n), n)
            values = {v for mat in mats for row in mat for v in row}
            assert values <= set(range(n, n + 3))

    def test_order_one_degenerate(self):
        (omega,) = exponent_table(signed_permutations(1), 1)
        assert omega == ((1,),)


class TestClientPrepare:
    def test_example1_ciphertext_counts(self, example1):
        _, _, data, _ = example1
        keys = elgamal_keys_256()
        D = client_prepare("elgamal", data, keys.public, 2.0 ** -30,
                           random.Random(1))
        assert len(D.enc_gamma) == 100
        assert sum(len(r) for r in D.enc_w) == 200
        assert sum(len(r) for r in D.enc_psi) == 4
        assert D.enc_det_inv is not None and D.enc_minus_one is not None

    def test_zero_data_encodes_near_zero(self):
        keys = elgamal_keys_256()
        gamma = 2.0 ** -30
        n, N = 2, 2
        data = FritData(Gamma=np.zeros(n * N), W=np.zeros((n * N, n)),
                        Psi=np.zeros((n, n)), det_psi_inv=1.0, n=n, N=N)
        D = client_prepare("elgamal", data, keys.public, gamma, random.Random(2))
        bound = float(Fraction(gamma) * elgamal.ecd(0.0, gamma, keys.public).delta)
        for ct in D.enc_gamma:
            decoded = elgamal.dcd(elgamal.dec(elgamal_keys_256(), ct), gamma,
                                  keys.public)
            assert abs(decoded) <= bound

    def test_serialized_dataset_has_no_secret_fields(self, example1):
        _, _, data, _ = example1
        keys = elgamal_keys_256()
        D = client_prepare("elgamal", data, keys.public, 2.0 ** -30,
                           random.Random(3))
        doc = json.loads(D.to_json())
        assert set(doc["public_key"]) == {"p", "q", "g", "h"}
        text = D.to_json()
        assert '"s"' not in text and '"sk"' not in text and "secret" not in text

    def test_roundtrip_through_json(self):
        keys = elgamal_keys_256()
        D = client_prepare("elgamal", synthetic_data(), keys.public,
                           2.0 ** -30, random.Random(4))
        back = EncryptedDatasetD.from_json(D.to_json())
        assert back.enc_gamma == D.enc_gamma
        assert back.enc_w == D.enc_w
        assert back.enc_psi == D.enc_psi
        assert back.public == D.public

    def test_unknown_scheme(self):
        with pytest.raises(ProtocolError):
            client_prepare("paillier", synthetic_data(),
                           elgamal_keys_256().public, 0.5, random.Random(0))


def mirror_elgamal_pipeline(data: FritData, public, gamma):
    """Exact rational mirror of the encrypted evaluation.

    Re-encodes every scalar the client would, then follows the same loop
    structure on (value + gamma * offset) rationals: what the encrypted
    pipeline must equal exactly, offsets included.
    """
    gamma = Fraction(gamma)

    def lift(x):
        encoded = elgamal.ecd(float(x), gamma, public)
        return Fraction(x if isinstance(x, Fraction) else float(x)) \
            + gamma * encoded.offset

    n, N = data.n, data.N
    minus_one = lift(-1.0)
    det_inv = lift(data.det_psi_inv)
    gam = [lift(g) for g in data.Gamma]
    w = [[lift(x) for x in row] for row in data.W]
    psi = [[lift(x) for x in row] for row in data.Psi]
    table = signed_permutations(n)
    total = [Fraction(0)] * n
    for perm, sign in table.rows:
        phi = [[None] * n for _ in range(n)]
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                minor = [[psi[r][c] for c in range(n) if c != j - 1]
                         for r in range(n) if r != i - 1]
                prod = Fraction(1)
                for l, col in enumerate(perm, start=1):
                    prod *= minor[l - 1][col - 1]
                if sign < 0:
                    prod *= minus_one
                entry = det_inv * prod
                if (i + j) % 2:
                    entry *= minus_one
                phi[j - 1][i - 1] = entry
        for i in range(n * N):
            for l in range(n):
                base = minus_one * gam[i] * w[i][l]
                for c in range(n):
                    total[c] += base * phi[l][c]
    return total


class TestElGamalPipeline:
    def test_example1_row_count_and_ledger(self, example1):
        _, _, data, _ = example1
        keys = elgamal_keys_256()
        D = client_prepare("elgamal", data, keys.public, 2.0 ** -30,
                           random.Random(5))
        F = server_tune_elgamal(D)
        assert F.M == 200 == term_count(2, 50)
        exponents = {e for row in F.ledger.xi for e in row}
        assert exponents <= {5, 6, 7}
        assert exponents == {5, 6}  # order two never hits the sign case
        assert all(x == o + 3
                   for xi_row, om in zip(F.ledger.xi, _omega_rows(F.ledger, 2, 50))
                   for x, o in zip(xi_row, om))

    def test_finalize_matches_exact_offset_oracle(self):
        keys = elgamal_keys_256()
        gamma = 2.0 ** -30
        data = synthetic_data(seed=1, n=2, N=2)
        D = client_prepare("elgamal", data, keys.public, gamma, random.Random(6))
        gain = client_finalize_elgamal(server_tune_elgamal(D), keys, gamma)
        oracle = mirror_elgamal_pipeline(data, keys.public, gamma)
        assert gain.tolist() == [float(t) for t in oracle]

    def test_finalize_matches_exact_offset_oracle_order_three(self):
        keys = elgamal_keys_256()
        gamma = 2.0 ** -20
        data = synthetic_data(seed=2, n=3, N=2)
        D = client_prepare("elgamal", data, keys.public, gamma, random.Random(7))
        F = server_tune_elgamal(D)
        assert F.M == term_count(3, 2)
        gain = client_finalize_elgamal(F, keys, gamma)
        oracle = mirror_elgamal_pipeline(data, keys.public, gamma)
        assert gain.tolist() == [float(t) for t in oracle]

    def test_terms_decode_to_cofactor_terms(self):
        # each decoded row approximates the plaintext cofactor term; the
        # quantization offsets bound the gap
        keys = elgamal_keys_256()
        gamma = 2.0 ** -30
        data = synthetic_data(seed=3, n=2, N=2)
        D = client_prepare("elgamal", data, keys.public, gamma, random.Random(8))
        F = server_tune_elgamal(D)
        plain = gain_terms(data, phi_matrices(data.Psi, signed_permutations(2)))
        for row, exponents, term in zip(F.rows, F.ledger.xi, plain.terms):
            for c in range(2):
                decoded = elgamal.dcd(elgamal.dec(keys, row[c]),
                                      Fraction(gamma) ** exponents[c],
                                      keys.public)
                assert decoded == pytest.approx(term[c], abs=1e-6)

    def test_gain_close_to_plaintext_baseline(self, example1):
        _, _, data, gain_plain = example1
        keys = elgamal_keys_256()
        gamma = 2.0 ** -30
        D = client_prepare("elgamal", data, keys.public, gamma, random.Random(9))
        gain = client_finalize_elgamal(server_tune_elgamal(D), keys, gamma)
        assert np.linalg.norm(gain - gain_plain) < 1e-4

    def test_server_requires_elgamal_dataset(self):
        keys = ckks_small_keys()
        D = client_prepare("ckks", synthetic_data(), keys.public, 2.0 ** -20,
                           random.Random(10))
        with pytest.raises(ProtocolError):
            server_tune_elgamal(D)

    def test_finalize_requires_ledger(self):
        F = EncryptedDatasetF(scheme="elgamal", n=2, rows=(), ledger=None)
        with pytest.raises(ProtocolError):
            client_finalize_elgamal(F, elgamal_keys_256(), 0.5)

    def test_deterministic_output(self, example1):
        _, _, data, _ = example1
        keys = elgamal_keys_256()
        runs = []
        for _ in range(2):
            D = client_prepare("elgamal", data, keys.public, 2.0 ** -30,
                               random.Random(99))
            runs.append(server_tune_elgamal(D).to_json())
        assert runs[0] == runs[1]


def _omega_rows(ledger, n, N):
    """Omega row that produced each flat term, in emission order."""
    rows = []
    for omega in ledger.omega:
        for _ in range(n * N):
            for l in range(n):
                rows.append(omega[l])
    return rows


class TestCkksPipeline:
    def test_small_end_to_end(self):
        keys = ckks_small_keys()
        params = keys.params
        data = synthetic_data(seed=4, n=2, N=2)
        D = client_prepare("ckks", data, keys.public, params.gamma_c,
                           random.Random(11))
        F = server_tune_ckks(D)
        assert F.scheme == "ckks" and len(F.enc_f) == 2
        gain = client_finalize_ckks(F, keys, params.gamma_c)
        direct = -data.Gamma @ data.W @ np.linalg.inv(data.Psi)
        assert np.abs(gain - direct).max() < 1e-2

    def test_noiseless_matches_term_sum(self):
        params = ckks.CkksParams(d=64, L_max=6, gamma_c=2.0 ** -20,
                                 q0=2 ** 40, sigma=0.0)
        keys = ckks.gen(params, random.Random(12))
        data = synthetic_data(seed=5, n=2, N=2)
        D = client_prepare("ckks", data, keys.public, params.gamma_c,
                           random.Random(13))
        gain = client_finalize_ckks(server_tune_ckks(D), keys, params.gamma_c)
        plain = gain_terms(data, phi_matrices(data.Psi, signed_permutations(2)))
        assert np.abs(gain - plain.total()).max() < 1e-3

    def test_depth_guard(self):
        params = ckks.CkksParams(d=64, L_max=5, gamma_c=2.0 ** -20, q0=2 ** 40)
        keys = ckks.gen(params, random.Random(14))
        D = client_prepare("ckks", synthetic_data(seed=6), keys.public,
                           params.gamma_c, random.Random(15))
        with pytest.raises(DepthError) as err:
            server_tune_ckks(D)
        assert err.value.required == 6 and err.value.available == 5

    def test_server_requires_ckks_dataset(self):
        keys = elgamal_keys_256()
        D = client_prepare("elgamal", synthetic_data(), keys.public, 2.0 ** -30,
                           random.Random(16))
        with pytest.raises(ProtocolError):
            server_tune_ckks(D)

    def test_finalize_scheme_mismatch(self):
        F = EncryptedDatasetF(scheme="elgamal", n=2, rows=(),
                              ledger=confidential.ExponentLedger((), ()))
        with pytest.raises(ProtocolError):
            client_finalize_ckks(F, ckks_small_keys(), 0.5)

    def test_deterministic_bytes(self):
        keys = ckks_small_keys()
        params = keys.params
        data = synthetic_data(seed=7, n=2, N=2)
        runs = []
        for _ in range(2):
            D = client_prepare("ckks", data, keys.public, params.gamma_c,
                               random.Random(101))
            runs.append(server_tune_ckks(D).to_json())
        assert runs[0] == runs[1]

    def test_dataset_roundtrip_through_json(self):
        keys = ckks_small_keys()
        data = synthetic_data(seed=8, n=2, N=2)
        D = client_prepare("ckks", data, keys.public, keys.params.gamma_c,
                           random.Random(17))
        back = EncryptedDatasetD.from_json(D.to_json())
        assert back.enc_gamma == D.enc_gamma
        F = server_tune_ckks(back)
        F2 = EncryptedDatasetF.from_json(F.to_json())
        assert F2.enc_f == F.enc_f


class TestSchemeAgreement:
    def test_pipelines_agree_with_each_other_and_baseline(self):
        data = synthetic_data(seed=9, n=2, N=3)
        direct = -data.Gamma @ data.W @ np.linalg.inv(data.Psi)

        eg_keys = elgamal_keys_256()
        D1 = client_prepare("elgamal", data, eg_keys.public, 2.0 ** -30,
                            random.Random(18))
        gain_e = client_finalize_elgamal(server_tune_elgamal(D1), eg_keys,
                                         2.0 ** -30)

        ck = ckks_small_keys()
        D2 = client_prepare("ckks", data, ck.public, ck.params.gamma_c,
                            random.Random(19))
        gain_c = client_finalize_ckks(server_tune_ckks(D2), ck,
                                      ck.params.gamma_c)

        assert np.abs(gain_e - direct).max() < 1e-4
        assert np.abs(gain_c - direct).max() < 1e-2
        assert np.abs(gain_e - gain_c).max() < 1e-2


class TestTrustModel:
    def test_dataset_rejects_key_pairs(self):
        keys = elgamal_keys_256()
        with pytest.raises(ProtocolError):
            EncryptedDatasetD(scheme="elgamal", n=1, N=1, sensitivity=0.5,
                              public=keys,  # full key pair, not public half
                              enc_gamma=(None,), enc_w=((None,),),
                              enc_psi=((None,),), enc_det_inv=None,
                              enc_minus_one=None)

    def test_ckks_dataset_rejects_key_bundle(self):
        keys = ckks_small_keys()
        with pytest.raises(ProtocolError):
            EncryptedDatasetD(scheme="ckks", n=1, N=1, sensitivity=0.5,
                              public=keys, enc_gamma=(None,), enc_w=((None,),),
                              enc_psi=((None,),), enc_det_inv=None,
                              enc_minus_one=None)

    def test_server_guards_run_before_work(self):
        with pytest.raises(ProtocolError):
            server_tune_elgamal("not a dataset")
        with pytest.raises(ProtocolError):
            server_tune_ckks(42)

    def test_serialized_f_has_no_secret_fields(self, example1):
        _, _, data, _ = example1
        keys = elgamal_keys_256()
        D = client_prepare("elgamal", data, keys.public, 2.0 ** -30,
                           random.Random(20))
        text = server_tune_elgamal(D).to_json()
        assert '"s"' not in text and "secret" not in text and '"sk"' not in text

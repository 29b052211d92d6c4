"""Data-driven state-feedback gain tuning over homomorphically encrypted data.

The plaintext path simulates a closed loop, builds the tuning regression,
and solves it; the encrypted paths ship the data to an untrusted server
as ElGamal or CKKS ciphertexts, evaluate the same tuning formula through
a cofactor-expansion sum of homomorphic products, and decode the gain
back on the client.
"""

from .plant import (
    PlantModel,
    SignalLog,
    closed_loop_poles,
    excitation_pulse,
    pole_distance,
    simulate_closed_loop,
)
from .frit import (
    DesiredClosedLoop,
    FritData,
    TransferFunction,
    build_frit_data,
    build_gamma,
    build_w,
    closed_loop_transfer,
    fictitious_reference,
    filter_signal,
    frit_gain,
    objective,
)
from .cofactor import (
    gain_terms,
    invert_via_cofactors,
    phi_matrices,
    signed_permutations,
)
from .confidential import (
    EncryptedDatasetD,
    EncryptedDatasetF,
    ExponentLedger,
    client_finalize_ckks,
    client_finalize_elgamal,
    client_prepare,
    server_tune_ckks,
    server_tune_elgamal,
)
from .examples import get_example
from .profiles import PROFILES, get_profile
from .rng import make_rng

__version__ = "0.1.0"

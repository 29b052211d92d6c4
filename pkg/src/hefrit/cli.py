"""Command-line workflow: simulate, tune (plain or encrypted), verify.

Every artifact is a JSON file; every randomized step takes --seed so runs
are reproducible byte for byte.  Exit codes: 0 success, 2 usage, 3
crypto/range error, 4 network error, 5 verification threshold exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import ckks, confidential, elgamal, wire
from .errors import (
    AlignmentError,
    CapacityError,
    DepthError,
    DimensionError,
    EncodingRangeError,
    HefritError,
    KeyGenError,
    ProtocolError,
    SingularMatrixError,
    TransportError,
    WindowError,
)
from .examples import get_example
from .frit import DesiredClosedLoop, build_frit_data, frit_gain
from .plant import (
    PlantModel,
    SignalLog,
    closed_loop_poles,
    excitation_pulse,
    pole_distance,
    simulate_closed_loop,
)
from .profiles import get_profile
from .rng import make_rng

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CRYPTO = 3
EXIT_NETWORK = 4
EXIT_VERIFY = 5

_CRYPTO_ERRORS = (EncodingRangeError, KeyGenError, SingularMatrixError,
                  DepthError, AlignmentError, CapacityError, DimensionError,
                  WindowError, ProtocolError)


class VerificationFailure(HefritError):
    pass


def _write_json(path: str, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=None, separators=(",", ":")))


def _read_json(path: str) -> dict:
    return json.loads(Path(path).read_text())


def _write_gain(path: str, gain) -> None:
    _write_json(path, {"F": [float(g) for g in gain]})


def _read_gain(path: str) -> np.ndarray:
    return np.array(_read_json(path)["F"], dtype=float)


def _key_paths(directory: str, scheme: str) -> tuple[Path, Path]:
    base = Path(directory)
    return base / f"{scheme}_public.json", base / f"{scheme}_secret.json"


def cmd_keygen(args) -> int:
    profile = get_profile(args.profile)
    rng = make_rng(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    public_path, secret_path = _key_paths(args.out, args.scheme)
    if args.scheme == "elgamal":
        keys = profile.gen_elgamal(rng)
        public_path.write_text(keys.public.to_json())
        secret_path.write_text(keys.secret_to_json())
    else:
        keys = profile.gen_ckks(rng)
        public_path.write_text(keys.public.to_json())
        secret_path.write_text(keys.secret_to_json())
    print(f"wrote {public_path} and {secret_path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    example = get_example(args.example)
    log = simulate_closed_loop(example.plant, example.F_ini,
                               excitation_pulse(example.N))
    Path(args.out).write_text(log.to_json())
    hd_out = args.hd_out or str(Path(args.out).parent / "hd.json")
    Path(hd_out).write_text(example.Hd.to_json())
    print(f"wrote {args.out} ({log.steps} steps) and {hd_out}")
    return EXIT_OK


def _load_log_and_hd(log_path: str, hd_path: str) -> tuple[SignalLog, DesiredClosedLoop]:
    log = SignalLog.from_json(Path(log_path).read_text())
    hd = DesiredClosedLoop.from_json(Path(hd_path).read_text())
    return log, hd


def cmd_prepare(args) -> int:
    profile = get_profile(args.profile)
    log, hd = _load_log_and_hd(args.log, args.hd)
    data = build_frit_data(log, hd, args.window_start, args.samples)
    public_path, _ = _key_paths(args.keys, args.scheme)
    rng = make_rng(args.seed)
    if args.scheme == "elgamal":
        public = elgamal.ElGamalPublicKey.from_json(public_path.read_text())
        dataset = confidential.client_prepare(
            "elgamal", data, public, profile.gamma_e, rng,
            nonce_bits=profile.elgamal_nonce_bits)
    else:
        public = ckks.CkksPublicKey.from_json(public_path.read_text())
        dataset = confidential.client_prepare(
            "ckks", data, public, profile.gamma_c, rng)
    Path(args.out).write_text(dataset.to_json())
    print(f"wrote {args.out} (scheme={args.scheme}, n={data.n}, N={data.N})")
    return EXIT_OK


def cmd_serve(args) -> int:
    handle = wire.serve((args.host, args.port))
    print(f"tuning server listening on {handle.address[0]}:{handle.address[1]}",
          flush=True)
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        handle.close()
    return EXIT_OK


def cmd_tune(args) -> int:
    dataset = confidential.EncryptedDatasetD.from_json(Path(args.data).read_text())
    if args.remote:
        host, _, port = args.remote.rpartition(":")
        result, server_seconds = wire.request_tune(
            (host or "127.0.0.1", int(port)), dataset, timeout=args.timeout)
    else:
        started = time.perf_counter()
        if dataset.scheme == "elgamal":
            result = confidential.server_tune_elgamal(dataset)
        else:
            result = confidential.server_tune_ckks(dataset)
        server_seconds = time.perf_counter() - started
    Path(args.out).write_text(result.to_json())
    print(f"server_seconds={server_seconds:.6f}")
    print(f"wrote {args.out} (scheme={result.scheme}, terms={result.M or 1})")
    return EXIT_OK


def cmd_finalize(args) -> int:
    profile = get_profile(args.profile)
    result = confidential.EncryptedDatasetF.from_json(Path(args.result).read_text())
    public_path, secret_path = _key_paths(args.keys, args.scheme)
    if args.scheme == "elgamal":
        keys = elgamal.ElGamalKeys.from_json(public_path.read_text(),
                                             secret_path.read_text())
        gain = confidential.client_finalize_elgamal(result, keys, profile.gamma_e)
    else:
        keys = ckks.CkksKeys.from_json(public_path.read_text(),
                                       secret_path.read_text())
        gain = confidential.client_finalize_ckks(result, keys, profile.gamma_c)
    _write_gain(args.out, gain)
    print(f"wrote {args.out}: F = {[round(float(g), 10) for g in gain]}")
    return EXIT_OK


def cmd_frit(args) -> int:
    log, hd = _load_log_and_hd(args.log, args.hd)
    data = build_frit_data(log, hd, args.window_start, args.samples)
    gain = frit_gain(data)
    _write_gain(args.out, gain)
    print(f"wrote {args.out}: F = {[round(float(g), 10) for g in gain]}")
    return EXIT_OK


def cmd_verify(args) -> int:
    gain = _read_gain(args.gain)
    baseline = _read_gain(args.baseline)
    plant_doc = _read_json(args.plant)
    plant = PlantModel.from_json_dict(plant_doc)
    diff_norm = float(np.linalg.norm(gain - baseline))
    poles_gain = closed_loop_poles(plant, gain)
    poles_base = closed_loop_poles(plant, baseline)
    pdist = pole_distance(poles_gain, poles_base)
    if "v" in plant_doc:
        v = np.array(plant_doc["v"], dtype=float)
    else:
        v = excitation_pulse(args.steps)
    log_gain = simulate_closed_loop(plant, gain, v)
    log_base = simulate_closed_loop(plant, baseline, v)
    deviations = log_base.x - log_gain.x

    def fmt_poles(poles):
        return ";".join(f"{z.real:.12g}{z.imag:+.12g}j" for z in poles)

    print(f"gain_diff_norm,{diff_norm:.12g}")
    print(f"pole_distance,{pdist:.12g}")
    print(f"poles_gain,{fmt_poles(poles_gain)}")
    print(f"poles_baseline,{fmt_poles(poles_base)}")
    header = ",".join(["step"] + [f"dx{j + 1}" for j in range(plant.order)])
    print(header)
    for k in range(deviations.shape[0]):
        row = ",".join([str(k)] + [f"{d:.12g}" for d in deviations[k]])
        print(row)
    failures = []
    if args.max_gain_diff is not None and diff_norm > args.max_gain_diff:
        failures.append(f"gain_diff_norm {diff_norm:.3e} > {args.max_gain_diff:.3e}")
    if args.max_pole_distance is not None and pdist > args.max_pole_distance:
        failures.append(f"pole_distance {pdist:.3e} > {args.max_pole_distance:.3e}")
    max_dev = float(np.abs(deviations).max()) if deviations.size else 0.0
    if args.max_trajectory_dev is not None and max_dev > args.max_trajectory_dev:
        failures.append(
            f"trajectory deviation {max_dev:.3e} > {args.max_trajectory_dev:.3e}")
    if failures:
        raise VerificationFailure("; ".join(failures))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hefrit",
        description="Gain tuning from closed-loop data, plain or encrypted")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate a key pair")
    p.add_argument("--scheme", choices=("elgamal", "ckks"), required=True)
    p.add_argument("--profile", default="test")
    p.add_argument("--out", required=True, help="directory for the key files")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("simulate", help="run a bundled example experiment")
    p.add_argument("--example", type=int, choices=(1, 2), required=True)
    p.add_argument("--out", required=True, help="signal log JSON path")
    p.add_argument("--hd-out", default=None,
                   help="desired-loop JSON path (default: hd.json next to --out)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("prepare", help="encrypt tuning data into dataset D")
    p.add_argument("--scheme", choices=("elgamal", "ckks"), required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--hd", required=True)
    p.add_argument("--keys", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--profile", default="test")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--window-start", type=int, default=0)
    p.add_argument("--samples", type=int, default=None)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("serve", help="run a tuning server")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=wire.DEFAULT_PORT)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("tune", help="compute dataset F from dataset D")
    p.add_argument("--data", required=True)
    p.add_argument("--remote", default=None, help="HOST:PORT of a tuning server")
    p.add_argument("--timeout", type=float, default=600.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("finalize", help="decrypt dataset F into a gain")
    p.add_argument("--scheme", choices=("elgamal", "ckks"), required=True)
    p.add_argument("--result", required=True)
    p.add_argument("--keys", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--profile", default="test")
    p.set_defaults(func=cmd_finalize)

    p = sub.add_parser("frit", help="plaintext baseline tuning")
    p.add_argument("--log", required=True)
    p.add_argument("--hd", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--window-start", type=int, default=0)
    p.add_argument("--samples", type=int, default=None)
    p.set_defaults(func=cmd_frit)

    p = sub.add_parser("verify", help="compare a gain against a baseline")
    p.add_argument("--gain", required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--plant", required=True)
    p.add_argument("--steps", type=int, default=50,
                   help="simulation length when the plant file has no excitation")
    p.add_argument("--max-gain-diff", type=float, default=None)
    p.add_argument("--max-pole-distance", type=float, default=None)
    p.add_argument("--max-trajectory-dev", type=float, default=None)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except VerificationFailure as exc:
        print(f"error: verification_failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except TransportError as exc:
        print(f"error: network: {exc}", file=sys.stderr)
        return EXIT_NETWORK
    except _CRYPTO_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CRYPTO
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

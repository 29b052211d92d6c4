"""One-shot gain tuning from closed-loop data.

Given a log recorded under an initial gain and a desired closed-loop model
(one transfer function per state), the tuned gain is the least-squares
minimizer of the fictitious-reference tracking residual.  This module is
the plaintext baseline; the encrypted pipelines must reproduce its result.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, SingularMatrixError, WindowError
from .plant import SignalLog

__all__ = [
    "TransferFunction",
    "DesiredClosedLoop",
    "FritData",
    "filter_signal",
    "build_gamma",
    "build_w",
    "build_frit_data",
    "frit_gain",
    "fictitious_reference",
    "objective",
    "closed_loop_transfer",
]

#: Gram matrices with a condition number above this are rejected.
DEFAULT_CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class TransferFunction:
    """Rational function of z; coefficients in descending powers of z."""

    num: tuple
    den: tuple

    def __post_init__(self):
        num = tuple(float(c) for c in self.num)
        den = tuple(float(c) for c in self.den)
        if not den or den[0] == 0.0:
            raise ValueError("denominator must have a nonzero leading coefficient")
        if not num:
            num = (0.0,)
        if len(num) > len(den):
            raise ValueError(
                f"improper transfer function: numerator degree {len(num) - 1} "
                f"exceeds denominator degree {len(den) - 1}")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def to_json_dict(self) -> dict:
        return {"num": list(self.num), "den": list(self.den)}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TransferFunction":
        return cls(num=doc["num"], den=doc["den"])


@dataclass(frozen=True)
class DesiredClosedLoop:
    """Target response from excitation to each state, one component per state."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps or not all(isinstance(c, TransferFunction) for c in comps):
            raise ValueError("components must be a non-empty list of TransferFunction")
        object.__setattr__(self, "components", comps)

    @property
    def order(self) -> int:
        return len(self.components)

    def to_json(self) -> str:
        return json.dumps({"components": [c.to_json_dict() for c in self.components]})

    @classmethod
    def from_json(cls, text: str) -> "DesiredClosedLoop":
        doc = json.loads(text)
        return cls(tuple(TransferFunction.from_json_dict(c) for c in doc["components"]))


@dataclass(frozen=True)
class FritData:
    """Regression pair for the tuning least squares.

    Gamma stacks n blocks of N tracking residuals, W the matching filtered
    state rows; Psi = W^T W and det_psi_inv = 1/det(Psi) are carried along
    because the encrypted pipelines consume them directly.
    """

    Gamma: np.ndarray      # (n*N,)
    W: np.ndarray          # (n*N, n)
    Psi: np.ndarray        # (n, n)
    det_psi_inv: float
    n: int
    N: int

    def __post_init__(self):
        Gamma = np.asarray(self.Gamma, dtype=float).reshape(-1)
        W = np.asarray(self.W, dtype=float)
        Psi = np.asarray(self.Psi, dtype=float)
        if Gamma.shape[0] != self.n * self.N:
            raise DimensionError("Gamma length must be n*N")
        if W.shape != (self.n * self.N, self.n):
            raise DimensionError("W must have shape (n*N, n)")
        if Psi.shape != (self.n, self.n):
            raise DimensionError("Psi must be n x n")
        object.__setattr__(self, "Gamma", Gamma)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "Psi", Psi)


def filter_signal(tf: TransferFunction, s) -> np.ndarray:
    """Apply den(z) y = num(z) s with zero initial conditions.

    The input is delayed by the relative degree, i.e. the filter realizes
    the proper transfer function itself, not a coefficient-aligned FIR/IIR.
    """
    s = np.asarray(s, dtype=float).reshape(-1)
    if s.size == 0:
        raise ValueError("input sequence must be non-empty")
    num, den = tf.num, tf.den
    p = len(den) - 1
    m = len(num) - 1
    d = p - m
    a0 = den[0]
    y = np.zeros(s.shape[0])
    for k in range(s.shape[0]):
        acc = 0.0
        for j, b in enumerate(num):
            i = k - d - j
            if i >= 0:
                acc += b * s[i]
        for j in range(1, p + 1):
            i = k - j
            if i >= 0:
                acc -= den[j] * y[i]
        y[k] = acc / a0
    return y


def _check_window(log: SignalLog, Hd: DesiredClosedLoop,
                  window_start: int, N: int) -> None:
    if Hd.order != log.order:
        raise DimensionError(
            f"desired loop has {Hd.order} components, log order is {log.order}")
    if N < 1 or window_start < 0 or window_start + N > log.steps:
        raise WindowError(
            f"window [{window_start}, {window_start + N}) does not fit a "
            f"{log.steps}-step log")


def build_gamma(log: SignalLog, Hd: DesiredClosedLoop,
                window_start: int = 0, N: int | None = None) -> np.ndarray:
    """Stack per-state tracking residuals x_j - (H_dj u) over the window.

    Filters run over the whole log from step 0 with zero initial state;
    the window is cut afterwards.
    """
    if N is None:
        N = log.steps - window_start
    _check_window(log, Hd, window_start, N)
    sl = slice(window_start, window_start + N)
    blocks = [log.x[sl, j] - filter_signal(Hd.components[j], log.u)[sl]
              for j in range(log.order)]
    return np.concatenate(blocks)


def build_w(log: SignalLog, Hd: DesiredClosedLoop,
            window_start: int = 0, N: int | None = None) -> np.ndarray:
    """Stack per-state blocks of H_dj-filtered state rows over the window."""
    if N is None:
        N = log.steps - window_start
    _check_window(log, Hd, window_start, N)
    sl = slice(window_start, window_start + N)
    n = log.order
    blocks = []
    for j in range(n):
        cols = [filter_signal(Hd.components[j], log.x[:, c])[sl] for c in range(n)]
        blocks.append(np.column_stack(cols))
    return np.vstack(blocks)


def build_frit_data(log: SignalLog, Hd: DesiredClosedLoop,
                    window_start: int = 0, N: int | None = None) -> FritData:
    """Assemble the regression pair plus the Gram data the protocols need."""
    if N is None:
        N = log.steps - window_start
    Gamma = build_gamma(log, Hd, window_start, N)
    W = build_w(log, Hd, window_start, N)
    Psi = W.T @ W
    det = float(np.linalg.det(Psi))
    if det == 0.0 or not np.isfinite(det):
        raise SingularMatrixError("Gram matrix W^T W is singular")
    return FritData(Gamma=Gamma, W=W, Psi=Psi, det_psi_inv=1.0 / det,
                    n=log.order, N=N)


def frit_gain(data: FritData,
              condition_limit: float = DEFAULT_CONDITION_LIMIT) -> np.ndarray:
    """Tuned gain -Gamma^T W (W^T W)^{-1}, via an orthogonal least squares."""
    cond = float(np.linalg.cond(data.Psi))
    if not np.isfinite(cond) or cond > condition_limit:
        raise SingularMatrixError(
            f"Gram matrix condition {cond:.3e} exceeds limit {condition_limit:.1e}",
            condition=cond)
    # minimizer of ||Gamma + W F^T|| over F
    Ft, *_ = np.linalg.lstsq(data.W, -data.Gamma, rcond=None)
    return Ft


def fictitious_reference(log: SignalLog, F) -> np.ndarray:
    """Excitation that would explain the log under gain F: u - F x."""
    F = np.asarray(F, dtype=float).reshape(-1)
    if F.shape[0] != log.order:
        raise DimensionError(
            f"gain has {F.shape[0]} entries but log order is {log.order}")
    return log.u - log.x @ F


def objective(log: SignalLog, Hd: DesiredClosedLoop, F,
              window_start: int = 0, N: int | None = None) -> float:
    """Tracking cost ||x - H_d applied to the fictitious reference of F||_2."""
    if N is None:
        N = log.steps - window_start
    _check_window(log, Hd, window_start, N)
    vt = fictitious_reference(log, F)
    sl = slice(window_start, window_start + N)
    blocks = [log.x[sl, j] - filter_signal(Hd.components[j], vt)[sl]
              for j in range(log.order)]
    return float(np.linalg.norm(np.concatenate(blocks)))


def closed_loop_transfer(plant, F) -> DesiredClosedLoop:
    """Per-state transfer functions from excitation to state under gain F.

    Uses the resolvent expansion adj(zI - M) = sum_k z^{n-1-k} B_k with
    B_0 = I and B_k = M B_{k-1} + c_k I, where the c_k are the
    characteristic polynomial coefficients of M = A + B F.
    """
    F = np.asarray(F, dtype=float).reshape(-1)
    M = plant.A + np.outer(plant.B, F)
    n = M.shape[0]
    den = np.poly(M)  # [1, c_1, ..., c_n]
    Bk = np.eye(n)
    num_cols = [plant.B.copy()]
    for k in range(1, n):
        Bk = M @ Bk + den[k] * np.eye(n)
        num_cols.append(Bk @ plant.B)
    comps = []
    for j in range(n):
        comps.append(TransferFunction(num=tuple(col[j] for col in num_cols),
                                      den=tuple(den)))
    return DesiredClosedLoop(tuple(comps))

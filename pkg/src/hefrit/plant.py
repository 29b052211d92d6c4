"""Closed-loop simulation of discrete-time state-feedback systems.

The plant is x(k+1) = A x(k) + B u(k) with scalar input, driven by the
controller u(k) = F x(k) + v(k) from zero initial state.  The module also
provides the pulse excitation used by the worked examples and pole
utilities for comparing tuned loops.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

__all__ = [
    "PlantModel",
    "SignalLog",
    "simulate_closed_loop",
    "excitation_pulse",
    "closed_loop_poles",
    "pole_distance",
]


@dataclass(frozen=True)
class PlantModel:
    """Discrete-time plant (A, B); the sampling period is metadata only."""

    A: np.ndarray
    B: np.ndarray
    sampling_period: float = 1.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise DimensionError(f"A must be square, got shape {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise DimensionError(
                f"B has {B.shape[0]} rows but A is {A.shape[0]}x{A.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def order(self) -> int:
        return self.A.shape[0]

    def to_json_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "sampling_period": self.sampling_period,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "PlantModel":
        return cls(A=np.array(doc["A"], dtype=float),
                   B=np.array(doc["B"], dtype=float),
                   sampling_period=float(doc.get("sampling_period", 1.0)))


@dataclass(frozen=True)
class SignalLog:
    """State/input/excitation sequences from one closed-loop run.

    All three sequences have the same length; x[0] is the zero vector.
    """

    x: np.ndarray  # (steps, n)
    u: np.ndarray  # (steps,)
    v: np.ndarray  # (steps,)
    plant: PlantModel | None = field(default=None, compare=False)

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        u = np.asarray(self.u, dtype=float).reshape(-1)
        v = np.asarray(self.v, dtype=float).reshape(-1)
        if not (x.shape[0] == u.shape[0] == v.shape[0]):
            raise DimensionError(
                f"x ({x.shape[0]}), u ({u.shape[0]}) and v ({v.shape[0]}) "
                "must have equal length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def steps(self) -> int:
        return self.u.shape[0]

    @property
    def order(self) -> int:
        return self.x.shape[1]

    def to_json_dict(self) -> dict:
        doc = self.plant.to_json_dict() if self.plant is not None else {}
        doc.update({
            "x": self.x.tolist(),
            "u": self.u.tolist(),
            "v": self.v.tolist(),
        })
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SignalLog":
        plant = PlantModel.from_json_dict(doc) if "A" in doc else None
        return cls(x=np.array(doc["x"], dtype=float),
                   u=np.array(doc["u"], dtype=float),
                   v=np.array(doc["v"], dtype=float),
                   plant=plant)

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text: str) -> "SignalLog":
        return cls.from_json_dict(json.loads(text))


def _check_gain(plant: PlantModel, F) -> np.ndarray:
    F = np.asarray(F, dtype=float).reshape(-1)
    if F.shape[0] != plant.order:
        raise DimensionError(
            f"gain has {F.shape[0]} entries but plant order is {plant.order}")
    return F


def simulate_closed_loop(plant: PlantModel, F, v) -> SignalLog:
    """Run u(k) = F x(k) + v(k), x(k+1) = A x(k) + B u(k) from x(0) = 0."""
    F = _check_gain(plant, F)
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size == 0:
        raise DimensionError("excitation sequence must be non-empty")
    n, steps = plant.order, v.shape[0]
    x = np.zeros((steps + 1, n))
    u = np.zeros(steps)
    for k in range(steps):
        u[k] = F @ x[k] + v[k]
        x[k + 1] = plant.A @ x[k] + plant.B * u[k]
    return SignalLog(x=x[:steps], u=u, v=v, plant=plant)


def excitation_pulse(total_steps: int) -> np.ndarray:
    """Unit pulse over steps 1..5 inside a zero sequence of the given length."""
    if total_steps < 6:
        raise ValueError(f"pulse needs at least 6 steps, got {total_steps}")
    v = np.zeros(total_steps)
    v[1:6] = 1.0
    return v


def closed_loop_poles(plant: PlantModel, F) -> list[complex]:
    """Eigenvalues of A + B F, with multiplicity."""
    F = _check_gain(plant, F)
    return [complex(z) for z in np.linalg.eigvals(plant.A + np.outer(plant.B, F))]


def pole_distance(poles_a, poles_b) -> float:
    """l2 norm of paired pole differences, minimized over pairings.

    Pairing is a min-cost perfect matching; pole sets in scope are small
    (n <= 6) so all permutations are tried.
    """
    a = [complex(z) for z in poles_a]
    b = [complex(z) for z in poles_b]
    if len(a) != len(b):
        raise ValueError(f"pole lists differ in length: {len(a)} vs {len(b)}")
    best = math.inf
    for perm in itertools.permutations(range(len(b))):
        cost = math.sqrt(sum(abs(a[i] - b[j]) ** 2 for i, j in enumerate(perm)))
        if cost < best:
            best = cost
    return best

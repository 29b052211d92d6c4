"""The two bundled benchmark problems.

Both tune a pulse-excited loop from a known initial gain toward a desired
closed-loop response.  Benchmark 1 is a second-order plant whose target
response is written out exactly; benchmark 2 is a third-order plant whose
target response is realized by a reference gain, so the desired transfer
functions are derived from that gain rather than hand-typed (their
coefficients match the four-decimal roundings commonly quoted for this
problem, and deriving them exactly is what lets tuning land back on the
reference gain to full precision).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frit import DesiredClosedLoop, TransferFunction, closed_loop_transfer
from .plant import PlantModel

__all__ = ["WorkedExample", "get_example", "EXAMPLE_NUMBERS"]

EXAMPLE_NUMBERS = (1, 2)


@dataclass(frozen=True)
class WorkedExample:
    number: int
    plant: PlantModel
    F_ini: np.ndarray
    Hd: DesiredClosedLoop
    N: int
    reference_gain: np.ndarray  # expected tuned gain
    gain_tolerance: float       # how closely plain tuning reproduces it


def _example_1() -> WorkedExample:
    plant = PlantModel(A=[[1.0, 1.0], [0.0, -2.0]], B=[0.0, 1.0],
                       sampling_period=0.01)
    den = (1.0, -0.5, 0.0)
    Hd = DesiredClosedLoop((
        TransferFunction(num=(1.0,), den=den),
        TransferFunction(num=(1.0, -1.0), den=den),
    ))
    return WorkedExample(number=1, plant=plant,
                         F_ini=np.array([-0.8, 2.0]), Hd=Hd, N=50,
                         reference_gain=np.array([-0.5, 1.5]),
                         gain_tolerance=1e-6)


def _example_2() -> WorkedExample:
    plant = PlantModel(
        A=[[0.9054, 0.6895, 0.2246],
           [-0.2246, 0.2317, 0.2403],
           [-0.2403, -0.9455, -0.2489]],
        B=[0.0946, 0.2246, 0.2403],
        sampling_period=1.0)
    reference = np.array([0.1863750, 0.1357217, 0.1833644])
    Hd = closed_loop_transfer(plant, reference)
    return WorkedExample(number=2, plant=plant,
                         F_ini=np.array([0.12, -2.37, -0.82]), Hd=Hd, N=30,
                         reference_gain=reference, gain_tolerance=1e-4)


def get_example(number: int) -> WorkedExample:
    if number == 1:
        return _example_1()
    if number == 2:
        return _example_2()
    raise ValueError(f"no example {number}; choose from {EXAMPLE_NUMBERS}")

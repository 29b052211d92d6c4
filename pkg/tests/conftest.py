"""Shared fixtures: cached example data and small key material."""

import functools
import random

import pytest

from hefrit import elgamal
from hefrit.examples import get_example
from hefrit.frit import build_frit_data, frit_gain
from hefrit.plant import excitation_pulse, simulate_closed_loop


@functools.cache
def example_setup(number: int):
    """Example definition, simulated log, regression data, and tuned gain."""
    ex = get_example(number)
    log = simulate_closed_loop(ex.plant, ex.F_ini, excitation_pulse(ex.N))
    data = build_frit_data(log, ex.Hd)
    gain = frit_gain(data)
    return ex, log, data, gain


@functools.cache
def toy_elgamal_keys() -> elgamal.ElGamalKeys:
    """p = 23 keys: the subgroup is small enough to enumerate."""
    keys = elgamal.gen(5, random.Random(11))
    assert keys.p == 23 and keys.q == 11
    return keys


@functools.cache
def toy_group_elements() -> tuple:
    keys = toy_elgamal_keys()
    return tuple(m for m in range(1, keys.p)
                 if elgamal.is_group_element(m, keys.p))


@functools.cache
def cached_3072_keys() -> elgamal.ElGamalKeys:
    return elgamal.gen(3072, random.Random(1), secret_bits=256)


@pytest.fixture(scope="session")
def example1():
    return example_setup(1)


@pytest.fixture(scope="session")
def example2():
    return example_setup(2)


@pytest.fixture(scope="session")
def toy_keys():
    return toy_elgamal_keys()


@pytest.fixture(scope="session")
def secure_keys():
    return cached_3072_keys()

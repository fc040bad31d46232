"""Shared fixtures: seeded RNGs and small random-state builders."""

from __future__ import annotations

import numpy as np
import pytest

from spinfridge import QuantumState, SpinRegister
from spinfridge.sectors import sector_bases


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260814)


def random_density(rng: np.random.Generator, dim: int) -> np.ndarray:
    """A Ginibre-random density matrix (full rank, strictly positive)."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_dense_state(rng: np.random.Generator, n: int) -> QuantumState:
    return QuantumState(SpinRegister.of_size(n),
                        dense=random_density(rng, 1 << n))


def random_blocked_state(rng: np.random.Generator, n: int) -> QuantumState:
    """Random state with no inter-sector coherence (block-diagonal)."""
    raw = []
    total = 0.0
    for basis in sector_bases(n):
        d = len(basis)
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        b = g @ g.conj().T
        raw.append(b)
        total += float(np.trace(b).real)
    return QuantumState(SpinRegister.of_size(n),
                        blocks=[b / total for b in raw])

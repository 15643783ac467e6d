from __future__ import annotations

from collections.abc import Callable
from fractions import Fraction

import numpy as np
import pytest

from scripts.core_model import Circulations


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def equal_thirds() -> Circulations:
    """Γ = (1/3, 1/3, 1/3): сфероид, пять равновесий при Θ = 1."""
    third = Fraction(1, 3)
    return Circulations(third, third, third)


@pytest.fixture
def collapse_circulations() -> Circulations:
    return Circulations(Fraction(2, 3), Fraction(2, 3), Fraction(-1, 3))


@pytest.fixture
def random_positions(rng: np.random.Generator) -> Callable[..., np.ndarray]:
    """Фабрика случайных попарно удалённых точек."""

    def make(n: int = 3, spread: float = 2.0) -> np.ndarray:
        while True:
            z = rng.uniform(-spread, spread, n) + 1j * rng.uniform(-spread, spread, n)
            d = np.abs(z[:, None] - z[None, :]) + np.eye(n) * 10
            if d.min() > 0.2:
                return z

    return make

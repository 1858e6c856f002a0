from pathlib import Path

import pytest

from oed.synth import random_fixture, separable_corpus

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixture_dir() -> Path:
    return FIXTURES


@pytest.fixture
def tiny_dataset():
    return random_fixture(10, seed=4)


@pytest.fixture
def separable():
    return separable_corpus(20, seed=3)

import numpy as np
import pytest

from colorvein.imaging import BinaryPattern, GrayImage
from colorvein.synth import generate_subject

ACCEPTANCE_RESULTS: dict[str, str] = {}


@pytest.fixture(scope="session")
def vein_subject():
    """One deterministic synthetic subject shared by read-only tests."""
    return generate_subject(5, 2, (64, 64))


@pytest.fixture(scope="session")
def vein_mask(vein_subject):
    return vein_subject.ground_truth[0]


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def make_gray(arr) -> GrayImage:
    return GrayImage(np.asarray(arr, dtype=np.float64))


def make_pattern(arr) -> BinaryPattern:
    return BinaryPattern(np.asarray(arr, dtype=np.uint8))

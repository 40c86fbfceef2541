import numpy as np
import pytest
from hypothesis import settings

from linerec.dataset import CharDict
from linerec.synth import alphabet_chars

settings.register_profile("suite", deadline=None, max_examples=50)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def small_dict() -> CharDict:
    return CharDict.from_chars(alphabet_chars(5))


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)

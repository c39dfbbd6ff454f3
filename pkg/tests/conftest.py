import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fuselens.image import RegisteredPair  # noqa: E402
from fuselens.kernels import BACKENDS  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240615)


def random_pair(rng, shape=(16, 16)):
    ct, mr, y = rng.random((3,) + shape)
    return RegisteredPair(ct, mr), y


@pytest.fixture(params=sorted(BACKENDS))
def backend(request):
    return BACKENDS[request.param]

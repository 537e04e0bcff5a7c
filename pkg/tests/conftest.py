import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from transferopt import get_family


@pytest.fixture
def cat3():
    return get_family("categorical", {"num_outcomes": 3})


@pytest.fixture
def cat2():
    return get_family("categorical", {"num_outcomes": 2})


@pytest.fixture
def gauss1():
    return get_family("gaussian_iso", {"dim": 1})


@pytest.fixture
def gauss3():
    return get_family("gaussian_iso", {"dim": 3})


@pytest.fixture
def softmax23():
    # feature_dim 2, num_classes 3 -> six free parameters
    return get_family("softmax_regression", {"feature_dim": 2, "num_classes": 3})


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)

import os
import sys

import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("lab", max_examples=60, deadline=None)
settings.load_profile("lab")


@pytest.fixture
def quadratic():
    from lflab.potentials import builtin_potential

    return builtin_potential("quadratic", d=1, lam=1.0)

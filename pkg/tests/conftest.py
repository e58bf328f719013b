import pytest
from hypothesis import settings

from helpers import smooth_u
from smectic.grid import make_grid, sample_field

settings.register_profile("numeric", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("numeric")


@pytest.fixture
def smooth_field():
    def build(n, box=None):
        g = make_grid(n, n, n) if box is None else make_grid(n, n, n, box)
        return sample_field(g, smooth_u)

    return build

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import wwm

settings.register_profile(
    "det", derandomize=True, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("det")

S = 1.0


@pytest.fixture(scope="session")
def grid():
    return wwm.make_grid(-8, 8, 4096)


@pytest.fixture(scope="session")
def grid_small():
    return wwm.make_grid(-8, 8, 2048)


@pytest.fixture(scope="session")
def state_a50(grid):
    return wwm.gaussian_twin_slits(S, S / 50, grid)


@pytest.fixture(scope="session")
def state_a20(grid):
    return wwm.gaussian_twin_slits(S, S / 20, grid)


@pytest.fixture(scope="session")
def narrow():
    return wwm.narrow_twin_slits(S)


@pytest.fixture(scope="session")
def sign():
    return wwm.builtin("sign")


@pytest.fixture(scope="session")
def identity():
    return wwm.builtin("identity")


@pytest.fixture(scope="session")
def kick_pair():
    return wwm.builtin("kicks", kicks=[(0.5, np.pi / 2), (0.5, -np.pi / 2)])


@pytest.fixture(scope="session")
def sew():
    return wwm.builtin("sew_flat", w=0.25, s=S)


def random_complete_scheme(rng, n_channels=2):
    """Random expression scheme that is complete by construction.

    Two channels cos(f), sin(f) (three: spherical split) with random
    smooth real f and independent random phase factors; completeness is
    the pointwise identity cos^2 + sin^2 = 1.
    """
    def fn():
        a0 = rng.uniform(-1, 1)
        a1 = rng.uniform(0.2, 1.5)
        w1 = rng.uniform(0.3, 2.0)
        ph = rng.uniform(0, 3)
        return f"({a0:.6f} + {a1:.6f}*sin({w1:.6f}*x + {ph:.6f}))"

    def phase():
        k = rng.uniform(-2, 2)
        c = rng.uniform(0, 3)
        return f"exp(i*({k:.6f}*x + {c:.6f}))"

    f = fn()
    if n_channels == 2:
        lines = [f"cos({f})*{phase()}", f"sin({f})*{phase()}"]
    else:
        h = fn()
        lines = [
            f"cos({f})*{phase()}",
            f"sin({f})*cos({h})*{phase()}",
            f"sin({f})*sin({h})*{phase()}",
        ]
    return wwm.parse_scheme("\n".join(lines))

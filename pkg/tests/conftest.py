import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from swsecond.source_model import binary_example_pmf, compute_stats, make_joint_pmf  # noqa: E402

LN2 = math.log(2.0)

# the acceptance module reruns the stateless property tests from a second instance
settings.register_profile("swsecond", suppress_health_check=[HealthCheck.differing_executors])
settings.load_profile("swsecond")


@pytest.fixture(scope="session")
def binary_pmf():
    return binary_example_pmf()


@pytest.fixture(scope="session")
def stats_nats(binary_pmf):
    return compute_stats(binary_pmf)


@pytest.fixture(scope="session")
def stats_bits(stats_nats):
    return stats_nats.in_units("bits")


def random_pmf(rng, rows=2, cols=2, floor=0.02):
    """Dense random pmf with every cell at least ``floor`` before normalising."""
    w = rng.dirichlet(np.ones(rows * cols)) + floor
    return make_joint_pmf((w / w.sum()).reshape(rows, cols))


@st.composite
def pmfs(draw, max_rows=3, max_cols=3, allow_zeros=True):
    rows = draw(st.integers(2, max_rows))
    cols = draw(st.integers(2, max_cols))
    cells = draw(
        st.lists(
            st.floats(0.0 if allow_zeros else 0.01, 1.0, allow_nan=False, allow_infinity=False),
            min_size=rows * cols,
            max_size=rows * cols,
        )
    )
    arr = np.array(cells).reshape(rows, cols) + 1e-3
    if allow_zeros:
        # knock out some cells while keeping every row and column alive
        mask = np.array(draw(st.lists(st.booleans(), min_size=rows * cols, max_size=rows * cols))).reshape(rows, cols)
        keep = arr * ~mask
        if np.all(keep.sum(0) > 0) and np.all(keep.sum(1) > 0):
            arr = keep
    return make_joint_pmf(arr / arr.sum())

"""Shared reference systems for the test suite."""

import numpy as np
import pytest

from sse_lab.system import SystemSpec, build_flat_bath


@pytest.fixture(scope="session")
def flat_bath():
    # 201 levels at spacing 0.01: golden-rule width 2 pi v^2 / spacing = 0.1
    return build_flat_bath(gamma_target=0.1, level_count=201, spacing=0.01, e_s=0.0)


@pytest.fixture(scope="session")
def wide_bath():
    # wider band (half-width 4) so finite-band rate corrections ~0.4% stay
    # well under the statistical resolution of 10^3..10^4-trajectory runs
    return build_flat_bath(gamma_target=0.05, level_count=81, spacing=0.1, e_s=0.0)


@pytest.fixture(scope="session")
def dense_bath():
    # dense AND wide: half-width 4 with recurrence time 2 pi / 0.01 >> any
    # horizon used here, so 2%-level line-shape contracts are resolvable
    return build_flat_bath(gamma_target=0.1, level_count=801, spacing=0.01, e_s=0.0)


@pytest.fixture(scope="session")
def gold_bath():
    # half-width 40: band-truncation tails < 2% even at Gamma t = 0.5, and
    # the ~Gamma/(pi W) survival-rate deficit (~0.08% at t=10) stays below
    # the standard error of 10^4-trajectory ensembles; recurrence time
    # 2 pi / 0.04 = 157 still dwarfs every horizon used here
    return build_flat_bath(gamma_target=0.1, level_count=2001, spacing=0.04, e_s=0.0)


@pytest.fixture(scope="session")
def small_bath():
    # cheap 21-level variant for plumbing tests
    return build_flat_bath(gamma_target=0.05, level_count=21, spacing=0.1, e_s=0.0)


@pytest.fixture(scope="session")
def qubit_spec():
    # minimal decay problem: one manifold state, one bath state
    return SystemSpec(
        energies=np.array([0.0, 1.0]),
        v=np.array([[0.0, 0.1], [0.1, 0.0]]),
        manifold=(0,),
        initial=0,
    )

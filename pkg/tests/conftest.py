import functools
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from multitrace.experiments import Problem  # noqa: E402
from multitrace.geometry import (  # noqa: E402
    build_partition,
    fig1_config,
    gap_config,
    two_domain_circle_config,
)

ACCEPTANCE = {}


@functools.lru_cache(maxsize=None)
def problem(geometry, kappas, h):
    """Assembled problem, shared by every test in the session."""
    if geometry == "fig1":
        cfg = fig1_config(kappas)
    elif geometry == "circle":
        cfg = two_domain_circle_config(kappas)
    elif geometry.startswith("gap"):
        cfg = gap_config(float(geometry[3:]), kappas)
    else:
        raise KeyError(geometry)
    return Problem(build_partition(cfg), h)


@functools.lru_cache(maxsize=None)
def spectrum(geometry, kappas, h, alpha):
    return problem(geometry, kappas, h).spectrum(alpha)


@pytest.fixture(scope="session")
def get_problem():
    return problem


@pytest.fixture(scope="session")
def get_spectrum():
    return spectrum


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])

import sys
import warnings

import numpy as np
import pytest

from memgdro.ambiguity import AmbiguitySet
from memgdro.formulation import compile_model
from memgdro.instance import build_default_instance
from memgdro.wcep import BigMWarning


def pytest_configure(config):
    warnings.simplefilter("ignore", BigMWarning)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", [])
    if lines:
        terminalreporter.section("acceptance")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def tiny2():
    """T=2, S=2: the smallest instance the oracles enumerate quickly."""
    inst = build_default_instance(2, 2, seed=0)
    return inst, compile_model(inst)


@pytest.fixture(scope="session")
def tiny3():
    inst = build_default_instance(2, 3, seed=0)
    return inst, compile_model(inst)


@pytest.fixture(scope="session")
def day48():
    inst = build_default_instance(48, 10, seed=0)
    return inst, compile_model(inst)


def ball(inst, r):
    return AmbiguitySet(inst.samples, r, inst.box)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

"""
Shared fixtures; puts src/ on the import path
"""

import sys
from pathlib import Path

import pytest

SRC = Path(__file__).resolve().parent.parent / 'src'
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from experiment_config import parse_config  # noqa: E402
from kernels import KernelSpec  # noqa: E402
from rkhs_env import BanditEnvironment, DecisionSet, make_bounded_function  # noqa: E402

CONFIG_DIR = SRC.parent / 'configs'

DELTA10_MEANS = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.85]


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='run acceptance-scale Monte Carlo tests')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


def delta_environment_dict(means, B=2.0):
    return {
        'kernel': {'family': 'delta'},
        'decision_set': [[i] for i in range(len(means))],
        'function': {'centers': 'decision_set', 'weights': list(means), 'B': B},
    }


def sqexp_environment_dict():
    return {
        'kernel': {'family': 'sqexp', 'lengthscale': 0.2},
        'decision_set': {'grid': {'low': 0.0, 'high': 1.0, 'num': 25}},
        'function': {'centers': [[0.2], [0.5], [0.8]], 'weights': [0.5, 0.3, 0.6], 'B': 1.0},
    }


def make_config(**entries):
    """ExperimentConfig from keyword entries on top of a small regret document"""
    document = {
        'version': 1,
        'experiment': 'regret',
        'environment': delta_environment_dict(DELTA10_MEANS),
        'policies': [{'policy': 'uniform_random'}],
        'horizon': 50,
        'seeds': [0, 1],
    }
    document.update(entries)
    return parse_config(document)


@pytest.fixture
def delta_kernel():
    return KernelSpec.delta()


@pytest.fixture
def se_kernel():
    return KernelSpec.squared_exponential(0.2)


@pytest.fixture
def delta10_env(delta_kernel):
    decision_set = DecisionSet([[i] for i in range(10)])
    f = make_bounded_function(delta_kernel, decision_set.points, DELTA10_MEANS, 2.0, decision_set)
    return BanditEnvironment(f, decision_set)


@pytest.fixture
def grid25():
    return DecisionSet.grid(0.0, 1.0, 25)

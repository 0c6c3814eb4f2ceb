"""Shared fixtures; the expensive trained networks are session-scoped."""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import basinrec as br


@pytest.fixture(scope="session")
def params12():
    return br.LorenzParams(r=12.0)


@pytest.fixture(scope="session")
def dataset12_small(params12):
    """2000 labeled samples at r=12; enough for split/IO/statistics tests."""
    return br.generate_dataset(params12, 2000, seed=101)


@pytest.fixture(scope="session")
def net12(params12):
    """Default-pipeline r=12 model (20k samples, default arch and training)."""
    seeds = br.derive_seeds(2024)
    result = br.generate_dataset(params12, 20000, seed=seeds.dataset)
    tr, te = br.train_test_split(result.data, 0.8, seeds.split)
    net, report = br.train(tr, te, br.NetworkArch(),
                           br.TrainConfig(seed=seeds.train))
    return net, report


def zero_net(arch=None):
    """All-zero parameters: forward is identically 0.5."""
    arch = arch or br.NetworkArch((3, 8, 1))
    params = br.init_params(arch, 0)
    for w in params.weights:
        w[:] = 0.0
    for b in params.biases:
        b[:] = 0.0
    return params

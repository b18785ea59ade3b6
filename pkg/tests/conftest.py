import numpy as np
import pytest

from simbeam.channel import Environment, sample_channel_set
from simbeam.geometry import SimLayout, SimLayoutConfig


def make_channels(seed=0, L=2, Nx=2, Ny=2, K=2, env=None):
    layout = SimLayout(SimLayoutConfig(M=K, K=K, L=L, Nx=Nx, Ny=Ny))
    return sample_channel_set(layout, env or Environment(), np.random.default_rng(seed), seed=seed)


@pytest.fixture
def channels():
    return make_channels(0, L=3, Nx=2, Ny=2, K=2)


@pytest.fixture
def budget():
    return Environment().tx_power

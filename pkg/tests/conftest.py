"""Pytest configuration and fixtures for ctwrc tests."""

import numpy as np
import pytest

from ctwrc.scheme.matfact import ChannelSet, gen_channels
from ctwrc.scheme.triangulate import Permutation, triangularize


@pytest.fixture
def channel() -> ChannelSet:
    """A fixed K = 3 non-reciprocal draw at 20 dB on every node."""
    return gen_channels(3, 7, reciprocal=False, P_B=100.0, P_R=100.0, P_M=100.0)


@pytest.fixture
def tri(channel):
    """Triangularization of ``channel`` for the order 2-3-1."""
    return triangularize(channel, Permutation.from_order([1, 2, 0]))


@pytest.fixture
def identity_channel() -> ChannelSet:
    """Identity channels with equal budgets; every optimality ratio is 1."""
    eye = np.eye(2, dtype=np.complex128)
    return ChannelSet(K=2, H_BR=eye, H_MR=eye, H_RB=eye, H_RM=eye,
                      sigma2=1.0, P_B=10.0, P_R=10.0, P_M=np.array([10.0, 10.0]))


@pytest.fixture
def sweep_out(tmp_path):
    """CSV path inside an isolated directory."""
    return tmp_path / "out" / "sweep.csv"

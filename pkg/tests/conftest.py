from pathlib import Path

import numpy as np
import pytest

from nshops import SystemModel

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)
PSI0 = np.array([1.0, np.exp(-1j * np.pi / 4)]) / np.sqrt(2)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def atom(omega0=5.0, coupling=SX):
    return SystemModel(0.5 * omega0 * SZ, coupling)


def isolated_bloch(t, omega0=5.0):
    """Bloch vector of PSI0 under H = (omega0/2) sigma_z."""
    return np.cos(omega0 * t - np.pi / 4), np.sin(omega0 * t - np.pi / 4), np.zeros_like(t)


@pytest.fixture
def configs():
    return CONFIGS

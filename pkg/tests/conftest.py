import numpy as np
import pytest

from zonofd.plant import PlantModel, single_fault_bounds
from zonofd.setops import Zonotope


def two_actuator_model(fault_hi=0.8):
    """The 2-state / 2-actuator benchmark system used across the test suite."""
    A = np.array([[0.5, 0.3], [0.2, 0.6]])
    B = np.array([[0.05, 0.08], [0.07, 0.05]])
    E = np.array([[0.05, 0.03], [0.04, 0.05]])
    C = np.eye(2)
    F = 0.1 * np.eye(2)
    W = Zonotope(np.zeros(2), 0.5 * np.eye(2))
    V = Zonotope(np.zeros(2), 0.1 * np.eye(2))
    bounds = single_fault_bounds(2, [(0.0, fault_hi), (0.0, fault_hi)])
    return PlantModel(A, B, C, E, F, bounds, W, V)


@pytest.fixture
def model():
    return two_actuator_model()


@pytest.fixture
def model_generic_bounds():
    """Same system with the generic half-open [0, 1) fault bounds."""
    return two_actuator_model(fault_hi=1.0)

"""Shared fixtures: normalized surfaces, grids, and cached constructions.

Construction fixtures are session-scoped because building a pair on a fine
grid costs seconds; every test that needs one reuses the same object.
"""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import bilayerlab as bl

settings.register_profile(
    "lab",
    deadline=None,
    max_examples=200,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("lab")

SPHERE_EPS = (0.04, 0.02, 0.01, 0.005)
CLIFFORD_EPS = (0.01, 0.0075, 0.005)
FLAT_EPS = (0.2, 0.1, 0.05, 0.02, 0.01, 0.005)


@pytest.fixture(scope="session")
def sphere():
    return bl.normalize_to_unit_mass(bl.make_surface("sphere", (1.0,)))


@pytest.fixture(scope="session")
def sphere_grid(sphere):
    return bl.build_grid(sphere)


@pytest.fixture(scope="session")
def sphere_pairs(sphere, sphere_grid):
    return {
        eps: bl.build_construction(sphere, eps, sphere_grid) for eps in SPHERE_EPS
    }


@pytest.fixture(scope="session")
def sphere_reports(sphere_pairs):
    return {eps: bl.energy(pair) for eps, pair in sphere_pairs.items()}


@pytest.fixture(scope="session")
def clifford():
    return bl.normalize_to_unit_mass(bl.make_surface("torus", (math.sqrt(2.0), 1.0)))


@pytest.fixture(scope="session")
def clifford_grid(clifford):
    return bl.build_grid(clifford)


@pytest.fixture(scope="session")
def clifford_pairs(clifford, clifford_grid):
    return {
        eps: bl.build_construction(clifford, eps, clifford_grid)
        for eps in CLIFFORD_EPS
    }


@pytest.fixture(scope="session")
def clifford_reports(clifford_pairs):
    return {eps: bl.energy(pair) for eps, pair in clifford_pairs.items()}


@pytest.fixture(scope="session")
def flat():
    return bl.normalize_to_unit_mass(bl.make_surface("flat", (1.0,)))


@pytest.fixture(scope="session")
def flat_grid(flat):
    return bl.build_grid(flat)


@pytest.fixture(scope="session")
def flat_pairs(flat, flat_grid):
    return {eps: bl.build_construction(flat, eps, flat_grid) for eps in FLAT_EPS}

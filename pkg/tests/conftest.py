import numpy as np
import pytest

from dgease.geometry.meshes import annulus_mesh, structured_rectangle
from dgease.geometry.polymesh import agglomerate, cells_as_elements, grouped_mesh


@pytest.fixture(scope="session")
def square_mesh():
    """Unit square, 8 x 8 x 2 triangles agglomerated into 8 elements."""
    return agglomerate(structured_rectangle(8, 8), 8)


@pytest.fixture(scope="session")
def two_squares():
    """[0, 2] x [0, 1] as two unit-square elements."""
    bg = structured_rectangle(2, 1, 0.0, 2.0, 0.0, 1.0)
    return grouped_mesh(bg, np.array([0, 0, 1, 1]), star="centroid")


@pytest.fixture(scope="session")
def annulus_coarse():
    return cells_as_elements(annulus_mesh(15, 2))

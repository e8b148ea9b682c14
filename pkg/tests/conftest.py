import numpy as np
import pytest

from porodg.basis import DgSpace
from porodg.mesh import PolyMesh, generate_cartesian, generate_voronoi
from porodg.models import preset


@pytest.fixture(scope="session")
def unit_square_mesh():
    """Single unit-square element."""
    return PolyMesh([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2, 3]])


@pytest.fixture(scope="session")
def two_element_mesh():
    """Two unit-height rectangles sharing one vertical face."""
    return generate_cartesian((0.0, 0.0, 2.0, 1.0), 2, 1)


@pytest.fixture(scope="session")
def four_square_mesh():
    """Voronoi tessellation with generators at the quadrant centers."""
    gens = np.array([[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]])
    return generate_voronoi((0, 0, 1, 1), 4, lloyd_iters=0, generators=gens)


@pytest.fixture(scope="session")
def small_voronoi_mesh():
    """Irregular 4-cell Voronoi mesh (generic face geometry)."""
    return generate_voronoi((0, 0, 1, 1), 4, lloyd_iters=2, seed=11)


@pytest.fixture(scope="session")
def voronoi20_mesh():
    return generate_voronoi((0, 0, 1, 1), 20, lloyd_iters=20, seed=5)


@pytest.fixture(scope="session")
def space_p2_small(small_voronoi_mesh):
    return DgSpace(small_voronoi_mesh, 2)


def heterogeneous_coeffs(n, seed=0):
    """Random strictly positive coefficient field (element-wise constants)."""
    rng = np.random.default_rng(seed)

    def draw():
        return rng.uniform(0.5, 2.0, n)

    D = np.zeros((n, 2, 2))
    a, b, c = draw(), draw(), rng.uniform(-0.2, 0.2, n)
    D[:, 0, 0] = a
    D[:, 1, 1] = b
    D[:, 0, 1] = D[:, 1, 0] = c
    return preset("unified", n, rho=draw(), mu=draw(), lam=draw(),
                  delta1=draw(), delta2=draw(), gamma=draw(), d0=draw(),
                  tau1=draw(), tau2=draw(), D=D)

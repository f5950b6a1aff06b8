import numpy as np
import pytest

from richop import coeff as C
from richop import encoder as E
from richop import fem as F
from richop import mesh as M
from richop import pipeline as P
from richop import reduced_basis as RB


@pytest.fixture(scope="session")
def square():
    return M.unit_square()


@pytest.fixture(scope="session")
def square_mesh(square):
    return M.triangulate(square, 0.12)


@pytest.fixture(scope="session")
def space(square_mesh):
    return F.build_space(square_mesh, 1)


@pytest.fixture(scope="session")
def config(space):
    return F.normalize_source(space, F.ProblemConfig(1.0, 0.5))


@pytest.fixture(scope="session")
def k0(space, config):
    return F.assemble_stiffness(space, config.a0)


@pytest.fixture(scope="session")
def family(square):
    return C.analytic_family(1.0, 0.5, square, n_modes=4, decay=0.7, fill=0.9)


@pytest.fixture(scope="session")
def snapshots(family, space, config):
    return RB.generate_snapshots(family, 30, 123, space, config)


@pytest.fixture(scope="session")
def basis_and_trace(snapshots):
    return RB.weak_greedy(snapshots, 8)


@pytest.fixture(scope="session")
def basis(basis_and_trace):
    return basis_and_trace[0]


@pytest.fixture(scope="session")
def nodal_encoder(square):
    return E.build_nodal_encoder(F.build_space(M.triangulate(square, 0.3), 1))


@pytest.fixture(scope="session")
def operator(family, config, space, nodal_encoder):
    return P.build_operator(
        family, config, space, 30, 8, nodal_encoder, 1e-2, seed=123
    )


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)

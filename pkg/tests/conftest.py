import numpy as np
import pytest

from platelab.bcs import BoundaryConditionSet, apply_bcs
from platelab.energy import MaterialParams
from platelab.geometry import build_mesh, unit_square
from platelab.spaces import SpaceH1, SpaceH2


@pytest.fixture(scope="session")
def square8():
    mesh = build_mesh(unit_square(), 8, 8)
    return mesh, SpaceH1(mesh), SpaceH2(mesh)


@pytest.fixture(scope="session")
def square16():
    mesh = build_mesh(unit_square(), 16, 16)
    return mesh, SpaceH1(mesh), SpaceH2(mesh)


@pytest.fixture(scope="session")
def params_unit():
    return MaterialParams(lam=1.0, mu=1.0, eps=1.0)


@pytest.fixture(scope="session")
def params_thin():
    return MaterialParams(lam=1.0, mu=1.0, eps=0.1)


def clamp_all(mesh, h1, h2):
    return apply_bcs(mesh, h1, h2, BoundaryConditionSet(regime="full_clamp"))

import sys

import numpy as np
import pytest

from penalty_topopt.grid import BoundarySegment, BoundarySpec, Grid, GridSpec
from penalty_topopt.material import ElasticMaterial, HeatMaterial
from penalty_topopt.objective import HeatTransfer, Mechanism, PenaltyParams

E_MAX = 5000.0 * 8.0 / 3.0


def mech_bcs(port=(0.4, 0.6)):
    return BoundarySpec([
        BoundarySegment("left", 0.0, 0.1, "clamp"),
        BoundarySegment("left", 0.9, 1.0, "clamp"),
        BoundarySegment("left", *port, "traction", (-2.0, 0.0), load="in"),
        BoundarySegment("right", *port, "traction", (-1.0, 0.0), load="out"),
    ])


def heat_bcs(value=0.0):
    return BoundarySpec([BoundarySegment("left", 0.4, 0.6, "temperature", value=value)])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_mech():
    """12 x 12 mechanism with a moderate stiffness contrast."""
    def make(lam=1.0, gamma=0.1, n=12, contrast=1e-3, interp="linear-compliance", p=None,
             formulation="stress", eps=None):
        grid = Grid(GridSpec(n, n))
        mat = ElasticMaterial(E_MAX, contrast * E_MAX, 0.3, interp, p)
        params = PenaltyParams(lam=lam, gamma=gamma, eps=eps, beta=0.3, formulation=formulation)
        return Mechanism(grid, mech_bcs(), mat, params)
    return make


@pytest.fixture
def small_heat():
    def make(lam=0.1, gamma=0.1, n=12, p=None, value=0.0, q=(1.0, 100.0)):
        grid = Grid(GridSpec(n, n))
        mat = HeatMaterial(10.0, 1.0, q[0], q[1]) if p is None else \
            HeatMaterial(10.0, 1.0, q[0], q[1], interp_kappa="gmif", p=p)
        return HeatTransfer(grid, heat_bcs(value), mat, PenaltyParams(lam=lam, gamma=gamma, beta=0.4))
    return make


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

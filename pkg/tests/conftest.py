import numpy as np
import pytest

from shearlab import presets
from shearlab.eulerian import ScalarField
from shearlab.field import build_field
from shearlab.geometry import initial_datum_from_schedule, sample_initial_datum


@pytest.fixture(scope="session")
def spectral():
    ps, sched = presets.spectral_preset()
    return ps, sched


@pytest.fixture(scope="session")
def flow():
    ps, sched = presets.flow_preset()
    return ps, sched


@pytest.fixture(scope="session")
def spectral_field(spectral):
    _, sched = spectral
    return build_field(sched, "reflect")


@pytest.fixture(scope="session")
def flow_field(flow):
    _, sched = flow
    return build_field(sched, "reflect")


@pytest.fixture(scope="session")
def spectral_datum(spectral):
    _, sched = spectral
    return ScalarField(sample_initial_datum(initial_datum_from_schedule(sched), 1024))


@pytest.fixture(scope="session")
def small_schedule():
    """Quick low-resolution cascade for solver unit tests (N = 512 admissible)."""
    from fractions import Fraction as F

    from shearlab.params import DeskSpec, ParameterSet, derive_schedule

    spec = DeskSpec(a0=F(1, 4), ratios=[4], t=[F(1, 8)], tbar=[F(1, 8)],
                    moll_scale=[F(1, 32), F(1, 64)])
    ps = ParameterSet(p=None, p_circ=F(2), alpha=F(0), beta=F(0),
                      epsilon=F(1, 64), delta=F(1, 8), gamma=F(1, 2), m=1,
                      a0=F(1, 4), mode="desk", desk=spec)
    return ps, derive_schedule(ps, 1)

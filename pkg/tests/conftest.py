import numpy as np
import pytest

from interconnect.heatwave import FunctionSpec, InterconnectSpec

X = FunctionSpec.polynomial(0.0, 1.0)
BUMP = FunctionSpec.polynomial(0.0, np.pi, -1.0)  # x (pi - x)


def regular_spec(M=2000, **kw):
    return InterconnectSpec(b1=X, b2=X, c1=FunctionSpec.zero(),
                            c2=FunctionSpec.polynomial(1.0),
                            phi0=FunctionSpec.sine(1.0, 0.5), N=8, t1=1.0, M=M, **kw)


def singular_spec(M=2000, **kw):
    return InterconnectSpec(b1=X, b2=X, c1=BUMP, c2=FunctionSpec.zero(),
                            phi0=FunctionSpec.sine(1.0, 0.5), N=8, t1=1.0, M=M, **kw)


@pytest.fixture(scope="session")
def regular_reports():
    from interconnect.heatwave import run_pipeline
    return {M: run_pipeline(regular_spec(M)) for M in (1000, 2000)}


@pytest.fixture(scope="session")
def singular_report():
    from interconnect.heatwave import run_pipeline
    return run_pipeline(singular_spec())

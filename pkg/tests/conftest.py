import numpy as np
import pytest

from geoforms.geometry import MetricField
from geoforms.hypersurface import NormalFormMetric


def product_chart(base: MetricField, t: str = "t") -> NormalFormMetric:
    n = base.dims
    return NormalFormMetric((t,) + base.coords,
                            {(i, j): base.component(i, j) for i in range(n) for j in range(i, n)})


@pytest.fixture(scope="session")
def s3():
    return MetricField(("a", "b", "c"), {(0, 0): 1, (1, 1): "sin(a)^2", (2, 2): "sin(a)^2*sin(b)^2"})


@pytest.fixture(scope="session")
def s2s1():
    return MetricField(("a", "b", "c"), {(0, 0): 1, (1, 1): "sin(a)^2", (2, 2): 1})


@pytest.fixture(scope="session")
def generic4():
    return MetricField(("t", "x", "y", "z"), {
        (0, 0): "exp(2*t*x)", (1, 1): "1 + t^2*y + x^2/4", (2, 2): "cosh(t + z)",
        (3, 3): "2 + sin(x*y)", (0, 1): "t*z/3", (1, 2): "x*y/5",
    })


@pytest.fixture(scope="session")
def generic_chart():
    return NormalFormMetric(("t", "x", "y", "z"), {
        (0, 0): "exp(2*t*x)", (1, 1): "1 + t^2*y + x^2/4", (2, 2): "cosh(t + z)", (0, 1): "t*z/3",
    })


@pytest.fixture(scope="session")
def fiber_e2t():
    return NormalFormMetric(("t", "x", "y", "z"),
                            {(0, 0): "exp(2*t)", (1, 1): "exp(2*t)", (2, 2): "exp(2*t)"},
                            fiber_warp="exp(2*t)")


def maxabs(a) -> float:
    return float(np.max(np.abs(np.asarray(a, dtype=float))))

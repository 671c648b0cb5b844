import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plateflow import kernels
from plateflow.model import PlateProblem, make_benchmark

py = kernels.get_backend("python")
try:
    cy = kernels.get_backend("cython")
except ImportError:  # extension not built
    cy = None

needs_cython = pytest.mark.skipif(cy is None, reason="compiled kernels not built")

PROBLEM = PlateProblem(make_benchmark("bilayer", gamma=1.3), 4, 2)


def inputs(seed, scale):
    rng = np.random.default_rng(seed)
    sp = PROBLEM.space
    y = PROBLEM.y0 + scale * rng.standard_normal(sp.ndof)
    Z = np.ascontiguousarray(rng.standard_normal(PROBLEM.Z.shape))
    g = np.ascontiguousarray(rng.standard_normal(PROBLEM.g.shape))
    return sp, np.ascontiguousarray(sp.local(y)), Z, g


@needs_cython
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(1e-3, 10.0))
def test_cython_matches_python(seed, scale):
    sp, yl, Z, g = inputs(seed, scale)
    a = py.cubic_energy(sp.hess, sp.grad, sp.area, Z, yl)
    b = cy.cubic_energy(sp.hess, sp.grad, sp.area, Z, yl)
    assert np.isclose(a, b, rtol=1e-12, atol=1e-12)
    for name, args in [
        ("cubic_gradient", (sp.hess, sp.grad, sp.area, Z, yl)),
        ("constraint_rows", (sp.grad, sp.area, yl)),
        ("metric_defect", (sp.grad, sp.area, g, yl)),
    ]:
        a = np.asarray(getattr(py, name)(*args))
        b = np.asarray(getattr(cy, name)(*args))
        assert a.shape == b.shape
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(a).max())), name


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_env_forces_python_fallback():
    env = dict(os.environ, PLATEFLOW_KERNELS="python")
    out = subprocess.run(
        [sys.executable, "-c", "from plateflow import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


@needs_cython
def test_default_backend_is_compiled():
    assert kernels.BACKEND == "cython" or os.environ.get("PLATEFLOW_KERNELS") == "python"

import os
import subprocess
import sys

import numpy as np
import pytest

from pxclda import _kernels_py, _backend

try:
    from pxclda import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

needs_ext = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


@pytest.fixture(params=[np.float64, np.complex128])
def arr(request):
    rng = np.random.default_rng(0)
    a = rng.standard_normal((9, 10, 11))
    if request.param is np.complex128:
        a = a + 1j * rng.standard_normal(a.shape)
    a.setflags(write=False)
    return a


@needs_ext
@pytest.mark.parametrize("axis", [0, 1, 2])
def test_backends_agree(arr, axis):
    assert np.allclose(compiled.second_diff(arr, axis, 0.3), _kernels_py.second_diff(arr, axis, 0.3),
                       rtol=1e-13, atol=1e-12)
    assert np.allclose(compiled.first_diff(arr, axis, 0.3), _kernels_py.first_diff(arr, axis, 0.3),
                       rtol=1e-13, atol=1e-12)


@needs_ext
def test_backends_agree_laplacian_and_hamiltonian(arr):
    v = np.random.default_rng(1).standard_normal(arr.shape)
    assert np.allclose(compiled.laplacian(arr, 0.2), _kernels_py.laplacian(arr, 0.2), rtol=1e-13, atol=1e-11)
    assert np.allclose(compiled.kinetic_plus_potential(arr, v, 0.2),
                       _kernels_py.kinetic_plus_potential(arr, v, 0.2), rtol=1e-13, atol=1e-11)


def test_python_stencil_on_polynomial():
    z = np.arange(12, dtype=float)[:, None, None] * np.ones((12, 9, 9))
    d1 = _kernels_py.first_diff(z ** 3, 0, 1.0)
    assert np.allclose(d1[2:-2], 3 * z[2:-2] ** 2)
    d2 = _kernels_py.second_diff(z ** 3, 0, 1.0)
    assert np.allclose(d2[2:-2], 6 * z[2:-2])


def test_pure_python_env_switch():
    env = dict(os.environ, PXCLDA_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import pxclda; print(pxclda.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"
    assert _backend.BACKEND in ("cython", "python")

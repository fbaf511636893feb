"""Pure-numpy versions of the stencil kernels in ``_kernels.pyx``.

Used when the compiled extension is unavailable or when
``PXCLDA_PURE_PYTHON=1`` is set. Results agree with the compiled kernels to
round-off (the summation order inside each stencil differs slightly).
"""
import numpy as np

_D2 = (-1.0, 16.0, -30.0, 16.0, -1.0)
_D1 = (1.0, -8.0, 0.0, 8.0, -1.0)


def _stencil(f, axis, coeffs, scale):
    f = np.asarray(f)
    out = coeffs[2] * f
    src = np.moveaxis(f, axis, 0)
    dst = np.moveaxis(out, axis, 0)  # view into ``out``
    for offset, c in zip((-2, -1, 1, 2), (coeffs[0], coeffs[1], coeffs[3], coeffs[4])):
        if c == 0.0:
            continue
        # out[i] += c * f[i + offset], zero outside the box
        if offset > 0:
            dst[:-offset] += c * src[offset:]
        else:
            dst[-offset:] += c * src[:offset]
    out *= scale
    return out


def second_diff(f, axis, h):
    return _stencil(f, axis, _D2, 1.0 / (12.0 * h * h))


def first_diff(f, axis, h):
    return _stencil(f, axis, _D1, 1.0 / (12.0 * h))


def laplacian(f, h):
    return second_diff(f, 0, h) + second_diff(f, 1, h) + second_diff(f, 2, h)


def kinetic_plus_potential(f, v, h):
    return -0.5 * laplacian(f, h) + v * f

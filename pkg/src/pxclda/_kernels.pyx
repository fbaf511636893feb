# cython: language_level=3
"""Compiled 4th-order finite-difference stencils on 3D C-ordered arrays.

Every kernel assumes zero-Dirichlet values outside the array. Array axis 0
is z, axis 1 is y, axis 2 is x (x-fastest storage). Signatures mirror
``pxclda._kernels_py`` exactly.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef fused scalar:
    double
    double complex


cdef inline scalar _at(const scalar[:, :, ::1] f, Py_ssize_t k, Py_ssize_t j,
                       Py_ssize_t i, Py_ssize_t nz, Py_ssize_t ny,
                       Py_ssize_t nx) noexcept nogil:
    if k < 0 or k >= nz or j < 0 or j >= ny or i < 0 or i >= nx:
        return 0
    return f[k, j, i]


cdef inline scalar _d2_axis(const scalar[:, :, ::1] f, Py_ssize_t k, Py_ssize_t j,
                            Py_ssize_t i, int axis, Py_ssize_t nz,
                            Py_ssize_t ny, Py_ssize_t nx) noexcept nogil:
    cdef Py_ssize_t dk = 0, dj = 0, di = 0
    if axis == 0:
        dk = 1
    elif axis == 1:
        dj = 1
    else:
        di = 1
    return (-_at(f, k - 2 * dk, j - 2 * dj, i - 2 * di, nz, ny, nx)
            + 16.0 * _at(f, k - dk, j - dj, i - di, nz, ny, nx)
            - 30.0 * f[k, j, i]
            + 16.0 * _at(f, k + dk, j + dj, i + di, nz, ny, nx)
            - _at(f, k + 2 * dk, j + 2 * dj, i + 2 * di, nz, ny, nx))


cdef inline scalar _d1_axis(const scalar[:, :, ::1] f, Py_ssize_t k, Py_ssize_t j,
                            Py_ssize_t i, int axis, Py_ssize_t nz,
                            Py_ssize_t ny, Py_ssize_t nx) noexcept nogil:
    cdef Py_ssize_t dk = 0, dj = 0, di = 0
    if axis == 0:
        dk = 1
    elif axis == 1:
        dj = 1
    else:
        di = 1
    return (_at(f, k - 2 * dk, j - 2 * dj, i - 2 * di, nz, ny, nx)
            - 8.0 * _at(f, k - dk, j - dj, i - di, nz, ny, nx)
            + 8.0 * _at(f, k + dk, j + dj, i + di, nz, ny, nx)
            - _at(f, k + 2 * dk, j + 2 * dj, i + 2 * di, nz, ny, nx))


def _empty_like(arr):
    return np.empty(arr.shape, dtype=arr.dtype)


def second_diff(const scalar[:, :, ::1] f, int axis, double h):
    """4th-order second derivative of ``f`` along one array axis."""
    cdef Py_ssize_t nz = f.shape[0], ny = f.shape[1], nx = f.shape[2]
    cdef Py_ssize_t k, j, i
    cdef double c = 1.0 / (12.0 * h * h)
    out_arr = _empty_like(np.asarray(f))
    cdef scalar[:, :, ::1] out = out_arr
    with nogil:
        for k in range(nz):
            for j in range(ny):
                for i in range(nx):
                    out[k, j, i] = c * _d2_axis(f, k, j, i, axis, nz, ny, nx)
    return out_arr


def first_diff(const scalar[:, :, ::1] f, int axis, double h):
    """4th-order antisymmetric first derivative along one array axis."""
    cdef Py_ssize_t nz = f.shape[0], ny = f.shape[1], nx = f.shape[2]
    cdef Py_ssize_t k, j, i
    cdef double c = 1.0 / (12.0 * h)
    out_arr = _empty_like(np.asarray(f))
    cdef scalar[:, :, ::1] out = out_arr
    with nogil:
        for k in range(nz):
            for j in range(ny):
                for i in range(nx):
                    out[k, j, i] = c * _d1_axis(f, k, j, i, axis, nz, ny, nx)
    return out_arr


def laplacian(const scalar[:, :, ::1] f, double h):
    """Sum of the three axis second derivatives, fused into one sweep."""
    cdef Py_ssize_t nz = f.shape[0], ny = f.shape[1], nx = f.shape[2]
    cdef Py_ssize_t k, j, i
    cdef double c = 1.0 / (12.0 * h * h)
    out_arr = _empty_like(np.asarray(f))
    cdef scalar[:, :, ::1] out = out_arr
    with nogil:
        for k in range(nz):
            for j in range(ny):
                for i in range(nx):
                    out[k, j, i] = c * (_d2_axis(f, k, j, i, 0, nz, ny, nx)
                                        + _d2_axis(f, k, j, i, 1, nz, ny, nx)
                                        + _d2_axis(f, k, j, i, 2, nz, ny, nx))
    return out_arr


def kinetic_plus_potential(const scalar[:, :, ::1] f, const double[:, :, ::1] v,
                           double h):
    """Return ``-0.5 * laplacian(f) + v * f`` in a single pass."""
    cdef Py_ssize_t nz = f.shape[0], ny = f.shape[1], nx = f.shape[2]
    cdef Py_ssize_t k, j, i
    cdef double c = -0.5 / (12.0 * h * h)
    out_arr = _empty_like(np.asarray(f))
    cdef scalar[:, :, ::1] out = out_arr
    with nogil:
        for k in range(nz):
            for j in range(ny):
                for i in range(nx):
                    out[k, j, i] = (c * (_d2_axis(f, k, j, i, 0, nz, ny, nx)
                                         + _d2_axis(f, k, j, i, 1, nz, ny, nx)
                                         + _d2_axis(f, k, j, i, 2, nz, ny, nx))
                                    + v[k, j, i] * f[k, j, i])
    return out_arr

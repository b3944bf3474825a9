# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled leapfrog kernels for 1-, 2- and 3-dimensional spatial grids.

Each output element is computed by exactly one thread from read-only inputs,
so results are bit-identical for any worker count.
"""

from cython.parallel import prange


def step_1d(double[::1] v_prev, double[::1] v_curr, double[::1] out,
            double lam2, int workers):
    cdef Py_ssize_t nx = v_curr.shape[0]
    cdef Py_ssize_t i
    out[0] = 0.0
    out[nx - 1] = 0.0
    with nogil:
        for i in prange(1, nx - 1, num_threads=workers, schedule='static'):
            out[i] = 2.0 * v_curr[i] - v_prev[i] + lam2 * (
                v_curr[i + 1] - 2.0 * v_curr[i] + v_curr[i - 1])


def step_2d(double[:, ::1] v_prev, double[:, ::1] v_curr, double[:, ::1] out,
            double lam2, int workers):
    cdef Py_ssize_t nx = v_curr.shape[0]
    cdef Py_ssize_t ny = v_curr.shape[1]
    cdef Py_ssize_t i, j
    with nogil:
        for j in range(ny):
            out[0, j] = 0.0
            out[nx - 1, j] = 0.0
        for i in range(nx):
            out[i, 0] = 0.0
            out[i, ny - 1] = 0.0
        for i in prange(1, nx - 1, num_threads=workers, schedule='static'):
            for j in range(1, ny - 1):
                out[i, j] = 2.0 * v_curr[i, j] - v_prev[i, j] + lam2 * (
                    v_curr[i + 1, j] + v_curr[i - 1, j]
                    + v_curr[i, j + 1] + v_curr[i, j - 1]
                    - 4.0 * v_curr[i, j])


def step_3d(double[:, :, ::1] v_prev, double[:, :, ::1] v_curr,
            double[:, :, ::1] out, double lam2, int workers):
    cdef Py_ssize_t nx = v_curr.shape[0]
    cdef Py_ssize_t ny = v_curr.shape[1]
    cdef Py_ssize_t nz = v_curr.shape[2]
    cdef Py_ssize_t i, j, k
    with nogil:
        for j in range(ny):
            for k in range(nz):
                out[0, j, k] = 0.0
                out[nx - 1, j, k] = 0.0
        for i in range(nx):
            for k in range(nz):
                out[i, 0, k] = 0.0
                out[i, ny - 1, k] = 0.0
            for j in range(ny):
                out[i, j, 0] = 0.0
                out[i, j, nz - 1] = 0.0
        for i in prange(1, nx - 1, num_threads=workers, schedule='static'):
            for j in range(1, ny - 1):
                for k in range(1, nz - 1):
                    out[i, j, k] = 2.0 * v_curr[i, j, k] - v_prev[i, j, k] + lam2 * (
                        v_curr[i + 1, j, k] + v_curr[i - 1, j, k]
                        + v_curr[i, j + 1, k] + v_curr[i, j - 1, k]
                        + v_curr[i, j, k + 1] + v_curr[i, j, k - 1]
                        - 6.0 * v_curr[i, j, k])

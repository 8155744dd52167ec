# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the hot inner loops.

Signature-identical to ``_core_py``; see that module for the contracts.
Buffers are flat row-major double arrays accepted through typed memoryviews,
so ``array('d')`` instances can be passed directly.
"""

from libc.math cimport sqrt, tanh

# largest double strictly below 1; IEEE tanh rounds to +-1.0 for |x| >~ 19
cdef double ONE_BELOW = 0.9999999999999999


def matvec_add(double[::1] a, double[::1] x, double[::1] out, Py_ssize_t m, Py_ssize_t n):
    cdef Py_ssize_t i, j, base
    cdef double s
    with nogil:
        for i in range(m):
            base = i * n
            s = 0.0
            for j in range(n):
                s += a[base + j] * x[j]
            out[i] += s


def matvec_t_add(double[::1] a, double[::1] x, double[::1] out, Py_ssize_t m, Py_ssize_t n):
    cdef Py_ssize_t i, j, base
    cdef double xi
    with nogil:
        for i in range(m):
            base = i * n
            xi = x[i]
            for j in range(n):
                out[j] += a[base + j] * xi


def matmul(double[::1] a, double[::1] b, double[::1] out, Py_ssize_t m, Py_ssize_t k, Py_ssize_t n):
    cdef Py_ssize_t i, j, l, arow, orow
    cdef double s
    with nogil:
        for i in range(m):
            arow = i * k
            orow = i * n
            for j in range(n):
                s = 0.0
                for l in range(k):
                    s += a[arow + l] * b[l * n + j]
                out[orow + j] = s


def tanh_inplace(double[::1] x, Py_ssize_t n):
    cdef Py_ssize_t i
    cdef double y
    with nogil:
        for i in range(n):
            y = tanh(x[i])
            if y >= 1.0:
                y = ONE_BELOW
            elif y <= -1.0:
                y = -ONE_BELOW
            x[i] = y


def tanh_prime_mul(double[::1] delta, double[::1] y, double[::1] out, Py_ssize_t n):
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            out[i] = delta[i] * (1.0 - y[i] * y[i])


def outer_add(double[::1] acc, double[::1] u, double[::1] v, Py_ssize_t m, Py_ssize_t n):
    cdef Py_ssize_t i, j, base
    cdef double ui
    with nogil:
        for i in range(m):
            base = i * n
            ui = u[i]
            for j in range(n):
                acc[base + j] += ui * v[j]


def axpy(double alpha, double[::1] x, double[::1] y, Py_ssize_t n):
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            y[i] += alpha * x[i]


def add_scaled_diff(double[::1] a, double[::1] b, double s, double[::1] out, Py_ssize_t n):
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            out[i] += s * (a[i] - b[i])


def sq_diff_sum(double[::1] a, double[::1] b, Py_ssize_t n):
    cdef Py_ssize_t i
    cdef double s = 0.0
    cdef double diff
    with nogil:
        for i in range(n):
            diff = a[i] - b[i]
            s += diff * diff
    return s


def sgd_update(double[::1] p, double[::1] vel, double[::1] g, double lr, double mu, Py_ssize_t n):
    cdef Py_ssize_t i
    cdef double v
    with nogil:
        for i in range(n):
            v = mu * vel[i] - lr * g[i]
            vel[i] = v
            p[i] += v


def adam_update(double[::1] p, double[::1] m, double[::1] v, double[::1] g,
                double lr, double b1, double b2, double eps,
                double bc1, double bc2, Py_ssize_t n):
    cdef Py_ssize_t i
    cdef double gi, mi, vi
    with nogil:
        for i in range(n):
            gi = g[i]
            mi = b1 * m[i] + (1.0 - b1) * gi
            vi = b2 * v[i] + (1.0 - b2) * gi * gi
            m[i] = mi
            v[i] = vi
            p[i] -= lr * (mi / bc1) / (sqrt(vi / bc2) + eps)

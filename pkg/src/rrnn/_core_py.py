"""Pure-Python kernels: the fallback used when the compiled core is absent.

Every function here has a signature-identical twin in ``_core.pyx``.  All
buffers are flat, row-major, C-contiguous double arrays (``array('d')`` in
practice) and the loop order matches the compiled version so both backends
produce the same floating-point results.
"""

import math


def matvec_add(a, x, out, m, n):
    # out[i] += sum_j a[i,j] * x[j]
    for i in range(m):
        base = i * n
        s = 0.0
        for j in range(n):
            s += a[base + j] * x[j]
        out[i] += s


def matvec_t_add(a, x, out, m, n):
    # out[j] += sum_i a[i,j] * x[i]  (a is m-by-n, x has length m)
    for i in range(m):
        base = i * n
        xi = x[i]
        for j in range(n):
            out[j] += a[base + j] * xi


def matmul(a, b, out, m, k, n):
    # out = a @ b, overwriting out; a is m-by-k, b is k-by-n
    for i in range(m):
        arow = i * k
        orow = i * n
        for j in range(n):
            s = 0.0
            for l in range(k):
                s += a[arow + l] * b[l * n + j]
            out[orow + j] = s


# largest double strictly below 1; IEEE tanh rounds to +-1.0 for |x| >~ 19
_ONE_BELOW = 0.9999999999999999


def tanh_inplace(x, n):
    for i in range(n):
        y = math.tanh(x[i])
        if y >= 1.0:
            y = _ONE_BELOW
        elif y <= -1.0:
            y = -_ONE_BELOW
        x[i] = y


def tanh_prime_mul(delta, y, out, n):
    # out[i] = delta[i] * (1 - y[i]^2), with y a tanh output
    for i in range(n):
        out[i] = delta[i] * (1.0 - y[i] * y[i])


def outer_add(acc, u, v, m, n):
    # acc[i,j] += u[i] * v[j]
    for i in range(m):
        base = i * n
        ui = u[i]
        for j in range(n):
            acc[base + j] += ui * v[j]


def axpy(alpha, x, y, n):
    # y += alpha * x
    for i in range(n):
        y[i] += alpha * x[i]


def add_scaled_diff(a, b, s, out, n):
    # out[i] += s * (a[i] - b[i])
    for i in range(n):
        out[i] += s * (a[i] - b[i])


def sq_diff_sum(a, b, n):
    s = 0.0
    for i in range(n):
        diff = a[i] - b[i]
        s += diff * diff
    return s


def sgd_update(p, vel, g, lr, mu, n):
    # vel = mu*vel - lr*g; p += vel
    for i in range(n):
        v = mu * vel[i] - lr * g[i]
        vel[i] = v
        p[i] += v


def adam_update(p, m, v, g, lr, b1, b2, eps, bc1, bc2, n):
    # bc1/bc2 are the bias corrections 1 - b1**t and 1 - b2**t
    for i in range(n):
        gi = g[i]
        mi = b1 * m[i] + (1.0 - b1) * gi
        vi = b2 * v[i] + (1.0 - b2) * gi * gi
        m[i] = mi
        v[i] = vi
        p[i] -= lr * (mi / bc1) / (math.sqrt(vi / bc2) + eps)

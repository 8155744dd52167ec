"""Dense double-precision vectors and matrices with flat row-major storage.

This is the numerical kernel of the package: everything else is built on the
operations here, which dispatch to the active backend (compiled extension or
pure Python) selected in ``_backend``.  Values are treated as immutable by
callers; the in-place ``*_into`` helpers exist for the training hot loops,
which own their buffers.
"""

import math
from array import array

from . import _backend
from .errors import DataError, ShapeError


def zeros_buf(n):
    return array("d", bytes(8 * n))


class Vector:
    """A length-n vector of 64-bit reals backed by a flat ``array('d')``."""

    __slots__ = ("data",)

    def __init__(self, values):
        self.data = array("d", values)

    @classmethod
    def zeros(cls, n):
        v = cls.__new__(cls)
        v.data = zeros_buf(n)
        return v

    @classmethod
    def wrap(cls, buf):
        """Adopt an existing ``array('d')`` without copying."""
        v = cls.__new__(cls)
        v.data = buf
        return v

    def __len__(self):
        return len(self.data)

    def __getitem__(self, i):
        return self.data[i]

    def __iter__(self):
        return iter(self.data)

    def __repr__(self):
        return f"Vector({self.tolist()!r})"

    def __eq__(self, other):
        return isinstance(other, Vector) and self.data == other.data

    def copy(self):
        return Vector.wrap(array("d", self.data))

    def tolist(self):
        return list(self.data)

    def is_finite(self):
        return all(math.isfinite(x) for x in self.data)


class Matrix:
    """An m-by-n matrix of 64-bit reals, row-major in a flat ``array('d')``."""

    __slots__ = ("rows", "cols", "data")

    def __init__(self, rows, cols, values=None):
        self.rows = rows
        self.cols = cols
        if values is None:
            self.data = zeros_buf(rows * cols)
        else:
            self.data = array("d", values)
            if len(self.data) != rows * cols:
                raise ShapeError(
                    f"matrix {rows}x{cols} needs {rows * cols} entries, got {len(self.data)}"
                )

    @classmethod
    def zeros(cls, rows, cols):
        return cls(rows, cols)

    @classmethod
    def from_rows(cls, rows):
        if not rows:
            raise ShapeError("matrix needs at least one row")
        ncols = len(rows[0])
        flat = []
        for r in rows:
            if len(r) != ncols:
                raise ShapeError("ragged rows in matrix literal")
            flat.extend(r)
        return cls(len(rows), ncols, flat)

    @classmethod
    def identity(cls, n):
        m = cls(n, n)
        for i in range(n):
            m.data[i * n + i] = 1.0
        return m

    def at(self, i, j):
        return self.data[i * self.cols + j]

    def row(self, i):
        return list(self.data[i * self.cols : (i + 1) * self.cols])

    def tolists(self):
        return [self.row(i) for i in range(self.rows)]

    def copy(self):
        m = Matrix.__new__(Matrix)
        m.rows, m.cols = self.rows, self.cols
        m.data = array("d", self.data)
        return m

    def shape(self):
        return (self.rows, self.cols)

    def is_finite(self):
        return all(math.isfinite(x) for x in self.data)

    def __eq__(self, other):
        return (
            isinstance(other, Matrix)
            and self.shape() == other.shape()
            and self.data == other.data
        )

    def __repr__(self):
        return f"Matrix({self.rows}x{self.cols})"


def backend_name():
    return _backend.name


def set_backend(name):
    """Activate a kernel backend ('python' or 'compiled'); testing/bench hook."""
    return _backend.select(name)


# ---------------------------------------------------------------------------
# value-level operations


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """C = A @ B."""
    if a.cols != b.rows:
        raise ShapeError(f"cannot multiply {a.rows}x{a.cols} by {b.rows}x{b.cols}")
    out = Matrix.zeros(a.rows, b.cols)
    _backend.kernels.matmul(a.data, b.data, out.data, a.rows, a.cols, b.cols)
    return out


def matvec(a: Matrix, v: Vector) -> Vector:
    """A @ v."""
    if a.cols != len(v):
        raise ShapeError(f"cannot apply {a.rows}x{a.cols} to vector of length {len(v)}")
    out = Vector.zeros(a.rows)
    _backend.kernels.matvec_add(a.data, v.data, out.data, a.rows, a.cols)
    return out


def matvec_t(a: Matrix, v: Vector) -> Vector:
    """A.T @ v."""
    if a.rows != len(v):
        raise ShapeError(
            f"cannot apply transpose of {a.rows}x{a.cols} to vector of length {len(v)}"
        )
    out = Vector.zeros(a.cols)
    _backend.kernels.matvec_t_add(a.data, v.data, out.data, a.rows, a.cols)
    return out


def tanh_map(v: Vector) -> Vector:
    """Elementwise tanh; outputs are strictly inside (-1, 1)."""
    out = v.copy()
    _backend.kernels.tanh_inplace(out.data, len(out.data))
    return out


def tanh_prime_from_output(y: Vector) -> Vector:
    """Derivative of tanh expressed through its output: 1 - y**2."""
    out = Vector.zeros(len(y))
    for i, yi in enumerate(y.data):
        out.data[i] = 1.0 - yi * yi
    return out


def frob_sq_diff(a: Vector, b: Vector) -> float:
    """Sum of squared componentwise differences."""
    if len(a) != len(b):
        raise ShapeError(f"length mismatch: {len(a)} vs {len(b)}")
    return _backend.kernels.sq_diff_sum(a.data, b.data, len(a.data))


def softmax(z: Vector) -> Vector:
    """Stable softmax: exponentials are taken after subtracting the max logit."""
    n = len(z)
    if n < 1:
        raise ShapeError("softmax needs at least one logit")
    zmax = max(z.data)
    exps = array("d", (math.exp(x - zmax) for x in z.data))
    total = math.fsum(exps)
    for i in range(n):
        exps[i] /= total
    return Vector.wrap(exps)


def mean_of(vectors) -> Vector:
    """Elementwise arithmetic mean of a nonempty list of equal-length vectors."""
    vectors = list(vectors)
    if not vectors:
        raise DataError("mean of an empty list of vectors")
    n = len(vectors[0])
    acc = zeros_buf(n)
    for v in vectors:
        if len(v) != n:
            raise ShapeError(f"length mismatch in mean: {len(v)} vs {n}")
        _backend.kernels.axpy(1.0, v.data, acc, n)
    inv = 1.0 / len(vectors)
    for i in range(n):
        acc[i] *= inv
    return Vector.wrap(acc)


# ---------------------------------------------------------------------------
# small conveniences used across modules


def add(a: Vector, b: Vector) -> Vector:
    if len(a) != len(b):
        raise ShapeError(f"length mismatch: {len(a)} vs {len(b)}")
    out = a.copy()
    _backend.kernels.axpy(1.0, b.data, out.data, len(out.data))
    return out


def sub(a: Vector, b: Vector) -> Vector:
    if len(a) != len(b):
        raise ShapeError(f"length mismatch: {len(a)} vs {len(b)}")
    out = a.copy()
    _backend.kernels.axpy(-1.0, b.data, out.data, len(out.data))
    return out


def scale(v: Vector, s: float) -> Vector:
    out = v.copy()
    for i in range(len(out.data)):
        out.data[i] *= s
    return out


def dist(a: Vector, b: Vector) -> float:
    """Euclidean distance."""
    return math.sqrt(frob_sq_diff(a, b))


# ---------------------------------------------------------------------------
# in-place helpers for the hot loops (buffers owned by the caller)


def matvec_add_into(a: Matrix, v: Vector, out: Vector):
    """out += A @ v"""
    _backend.kernels.matvec_add(a.data, v.data, out.data, a.rows, a.cols)


def matvec_t_add_into(a: Matrix, v: Vector, out: Vector):
    """out += A.T @ v"""
    _backend.kernels.matvec_t_add(a.data, v.data, out.data, a.rows, a.cols)


def tanh_into(v: Vector):
    _backend.kernels.tanh_inplace(v.data, len(v.data))


def tanh_backprop_into(delta: Vector, y: Vector, out: Vector):
    """out = delta * (1 - y**2), with y a tanh output."""
    _backend.kernels.tanh_prime_mul(delta.data, y.data, out.data, len(out.data))


def axpy_into(alpha: float, x: Vector, y: Vector):
    """y += alpha * x"""
    _backend.kernels.axpy(alpha, x.data, y.data, len(y.data))


def add_scaled_diff_into(a: Vector, b: Vector, s: float, out: Vector):
    """out += s * (a - b)"""
    _backend.kernels.add_scaled_diff(a.data, b.data, s, out.data, len(out.data))


def outer_add_into(acc: Matrix, u: Vector, v: Vector):
    """acc += outer(u, v)"""
    _backend.kernels.outer_add(acc.data, u.data, v.data, acc.rows, acc.cols)

"""Dense linear algebra helpers, a seedable generator and QR orthogonalization.

Matrices and vectors are plain float64 numpy arrays. ``Rng`` draws its bits
from PCG64 (PCG-XSL-RR 128/64) and turns them into normals with the
Box-Muller transform, so a seed pins the sample stream on every platform.
"""

import math

import numpy as np

from .errors import InvalidArgumentError

__all__ = ["Rng", "gaussian", "matmul", "orthogonalize", "as_matrix", "as_vector"]


class Rng:
    """Seedable random stream.

    Uniform doubles are ``(next_uint64 >> 11) * 2**-53`` from PCG64. Normals
    are produced in pairs ``(r cos t, r sin t)`` with ``r = sqrt(-2 ln(1-u1))``
    and ``t = 2 pi u2``.
    """

    def __init__(self, seed=0):
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
        else:
            self._seq = np.random.SeedSequence(int(seed))
        self._gen = np.random.Generator(np.random.PCG64(self._seq))

    def uniform(self, size=None):
        return self._gen.random(size)

    def standard_normal(self, size):
        shape = (size,) if isinstance(size, (int, np.integer)) else tuple(size)
        n = int(np.prod(shape, dtype=np.int64))
        if n == 0:
            return np.zeros(shape)
        pairs = (n + 1) // 2
        u = self._gen.random((pairs, 2))
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        theta = 2.0 * math.pi * u[:, 1]
        z = np.empty((pairs, 2))
        z[:, 0] = r * np.cos(theta)
        z[:, 1] = r * np.sin(theta)
        return z.reshape(-1)[:n].reshape(shape)

    def normal(self, mean, variance, size):
        if variance < 0:
            raise InvalidArgumentError(f"variance must be >= 0, got {variance}")
        return mean + math.sqrt(variance) * self.standard_normal(size)

    def integers(self, high, size=None):
        return self._gen.integers(0, high, size=size)

    def permutation(self, n):
        return self._gen.permutation(n)

    def spawn(self, k):
        """Independent child streams; child ``j`` depends only on (seed, j)."""
        return [Rng(s) for s in self._seq.spawn(k)]


def gaussian(rng, mean, variance, n):
    """``n`` i.i.d. draws from N(mean, variance) as a float64 vector."""
    if n < 0:
        raise InvalidArgumentError("n must be >= 0")
    return rng.normal(mean, variance, int(n))


def as_matrix(a):
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise InvalidArgumentError(f"expected a 2-d matrix, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise InvalidArgumentError("matrix entries must be finite")
    return m


def as_vector(a):
    v = np.asarray(a, dtype=np.float64)
    if v.ndim != 1:
        raise InvalidArgumentError(f"expected a 1-d vector, got shape {v.shape}")
    if not np.isfinite(v).all():
        raise InvalidArgumentError("vector entries must be finite")
    return v


def matmul(a, b):
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise InvalidArgumentError(f"shape mismatch: {a.shape} @ {b.shape}")
    return a @ b


def orthogonalize(rng, m):
    """Random m x m orthogonal matrix.

    Q comes from the QR factorization of a N(0, 1/m) matrix; columns are
    flipped so that diag(R) > 0, which makes Q a deterministic function of the
    draw (and Haar-distributed).
    """
    if m < 1:
        raise InvalidArgumentError("m must be >= 1")
    a = rng.normal(0.0, 1.0 / m, (m, m))
    q, r = np.linalg.qr(a)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs

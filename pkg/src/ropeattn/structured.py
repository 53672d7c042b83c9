"""Circulant, Toeplitz, and rescaled Toeplitz matrices with FFT matvecs.

A Toeplitz matrix T is generated by a length 2n-1 vector a through
T[i, j] = a[i - j]; the offset t maps to array slot t + (n - 1), a layout
fixed project-wide.  A rescaled Toeplitz matrix is D1 * Toep(a) * D2 for
diagonal D1, D2.  These matrices are closed under the entrywise (Hadamard)
product, which is the property the attention engine builds on: the product
multiplies the diagonals and the generating vectors pointwise.

Matrix-vector products run in O(n log n) by embedding the Toeplitz matrix
into a circulant of side next_pow2(2n): offsets 0..n-1 occupy the head of
the circulant's first column, offsets -(n-1)..-1 its tail, and the extra
padding sits in the central zero block so the non-wraparound window is
preserved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ResourceLimitError
from .fourier import ComplexBuffer, fft_forward, fft_inverse, next_pow2

__all__ = [
    "ToeplitzGenerator",
    "CirculantGenerator",
    "RescaledToeplitz",
    "circulant_matvec",
    "toeplitz_matvec",
    "rescaled_matvec",
    "hadamard",
    "hadamard_chain_matvec",
    "to_dense",
    "DENSE_LIMIT",
]

DENSE_LIMIT = 4096


@dataclass(frozen=True)
class ToeplitzGenerator:
    """Length 2n-1 generating vector of an n x n Toeplitz matrix."""

    n: int
    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        if self.n < 1:
            raise ValueError(f"side length must be positive, got {self.n}")
        if a.ndim != 1 or a.shape[0] != 2 * self.n - 1:
            raise ValueError(
                f"generator for n={self.n} must have length {2 * self.n - 1}, "
                f"got shape {a.shape}"
            )
        object.__setattr__(self, "a", a)

    def offset(self, t: int) -> float:
        """Entry at offset t = i - j, for t in -(n-1)..(n-1)."""
        return self.a[t + self.n - 1]

    @classmethod
    def identity(cls, n: int) -> "ToeplitzGenerator":
        a = np.zeros(2 * n - 1)
        a[n - 1] = 1.0
        return cls(n, a)

    @classmethod
    def ones(cls, n: int) -> "ToeplitzGenerator":
        return cls(n, np.ones(2 * n - 1))


@dataclass(frozen=True)
class CirculantGenerator:
    """First column of an m x m circulant matrix (columns cyclically shifted)."""

    m: int
    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=np.float64)
        if self.m < 1:
            raise ValueError(f"side length must be positive, got {self.m}")
        if c.ndim != 1 or c.shape[0] != self.m:
            raise ValueError(f"first column must have length {self.m}, got shape {c.shape}")
        object.__setattr__(self, "c", c)


@dataclass(frozen=True)
class RescaledToeplitz:
    """D1 * Toep(a) * D2 with D1 = diag(d1), D2 = diag(d2)."""

    d1: np.ndarray
    gen: ToeplitzGenerator
    d2: np.ndarray

    def __post_init__(self):
        d1 = np.asarray(self.d1, dtype=np.float64)
        d2 = np.asarray(self.d2, dtype=np.float64)
        n = self.gen.n
        if d1.shape != (n,) or d2.shape != (n,):
            raise ValueError(
                f"diagonals must have length {n}, got {d1.shape} and {d2.shape}"
            )
        object.__setattr__(self, "d1", d1)
        object.__setattr__(self, "d2", d2)

    @property
    def n(self) -> int:
        return self.gen.n

    @classmethod
    def all_ones(cls, n: int) -> "RescaledToeplitz":
        """The all-ones matrix, the identity of the Hadamard product."""
        return cls(np.ones(n), ToeplitzGenerator.ones(n), np.ones(n))


def circulant_matvec(c: CirculantGenerator, x: np.ndarray) -> np.ndarray:
    """Circ(c) @ x via the diagonalization Circ(c) = F^-1 diag(Fc) F.

    Power-of-two sides go straight through the FFT; other sides are routed
    through the Toeplitz embedding, which pads to a power of two itself.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (c.m,):
        raise ValueError(f"vector length {x.shape} does not match side {c.m}")
    m = c.m
    if m & (m - 1) == 0:
        fc = fft_forward(ComplexBuffer.from_real(c.c)).to_complex()
        fx = fft_forward(ComplexBuffer.from_real(x)).to_complex()
        y = fft_inverse(ComplexBuffer.from_complex(fc * fx))
        return y.re.copy()
    # Circ(c)[i, j] = c[(i - j) mod m], i.e. a Toeplitz generator a[t] = c[t mod m].
    t = np.arange(-(m - 1), m)
    gen = ToeplitzGenerator(m, c.c[np.mod(t, m)])
    return toeplitz_matvec(gen, x)


def toeplitz_matvec(t: ToeplitzGenerator, x: np.ndarray) -> np.ndarray:
    """Toep(a) @ x through the padded circulant embedding.

    The length-2n circulant [a_0..a_{n-1}, 0, a_{-(n-1)}..a_{-1}] applied to
    [x; 0] yields [Toep(a) x; Resi(a) x]; the residual block is discarded.
    Padding to next_pow2(2n) inserts extra zeros in the central block.
    """
    x = np.asarray(x, dtype=np.float64)
    n = t.n
    if x.shape != (n,):
        raise ValueError(f"vector length {x.shape} does not match side {n}")
    m = next_pow2(2 * n)
    col = np.zeros(m)
    col[:n] = t.a[n - 1:]
    if n > 1:
        col[m - n + 1:] = t.a[:n - 1]
    xpad = np.zeros(m)
    xpad[:n] = x
    return circulant_matvec(CirculantGenerator(m, col), xpad)[:n]


def rescaled_matvec(m: RescaledToeplitz, x: np.ndarray) -> np.ndarray:
    """(D1 Toep(a) D2) @ x, evaluated right to left."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (m.n,):
        raise ValueError(f"vector length {x.shape} does not match side {m.n}")
    return m.d1 * toeplitz_matvec(m.gen, m.d2 * x)


def hadamard(a: RescaledToeplitz, b: RescaledToeplitz) -> RescaledToeplitz:
    """Entrywise product: diagonals multiply, generators multiply pointwise."""
    if a.n != b.n:
        raise ValueError(f"side mismatch: {a.n} vs {b.n}")
    return RescaledToeplitz(
        a.d1 * b.d1,
        ToeplitzGenerator(a.n, a.gen.a * b.gen.a),
        a.d2 * b.d2,
    )


def hadamard_chain_matvec(factors, x: np.ndarray) -> np.ndarray:
    """(F1^(e1) o F2^(e2) o ...) @ x where o is the Hadamard product.

    `factors` is a sequence of (RescaledToeplitz, nonnegative exponent)
    pairs.  The empty product (no factors, or all exponents zero) is the
    all-ones matrix, matching the entrywise convention x^0 = 1.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    acc = RescaledToeplitz.all_ones(n)
    for factor, exponent in factors:
        if factor.n != n:
            raise ValueError(f"factor side {factor.n} does not match vector length {n}")
        if exponent < 0:
            raise ValueError(f"exponent must be nonnegative, got {exponent}")
        for _ in range(exponent):
            acc = hadamard(acc, factor)
    return rescaled_matvec(acc, x)


def to_dense(m: RescaledToeplitz, limit: int = DENSE_LIMIT) -> np.ndarray:
    """Materialize D1 Toep(a) D2 entrywise; refuses sides above `limit`."""
    if m.n > limit:
        raise ResourceLimitError(f"side {m.n} exceeds dense limit {limit}")
    n = m.n
    idx = np.arange(n)
    offsets = idx[:, None] - idx[None, :] + (n - 1)
    return m.d1[:, None] * m.gen.a[offsets] * m.d2[None, :]

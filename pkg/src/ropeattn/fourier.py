"""Radix-2 FFT primitives sized to powers of two.

The forward transform is unnormalized, y[j] = sum_t x[t] * w^(-j*t) with
w = exp(2*pi*i/n); the inverse carries the 1/n factor.  Under this
convention the circulant diagonalization identity Circ(a) = F^-1 diag(Fa) F
holds verbatim, which is how the structured-matrix module consumes it.

All arithmetic is 64-bit floating point.  Twiddle tables and bit-reversal
permutations are cached per size and frozen after construction, so the
transforms are safe to call concurrently on disjoint buffers.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = ["ComplexBuffer", "fft_forward", "fft_inverse", "next_pow2"]


@dataclass(frozen=True)
class ComplexBuffer:
    """A complex vector stored as separate real and imaginary arrays."""

    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        re = np.asarray(self.re, dtype=np.float64)
        im = np.asarray(self.im, dtype=np.float64)
        if re.ndim != 1 or im.ndim != 1:
            raise ValueError("ComplexBuffer parts must be one-dimensional")
        if re.shape != im.shape:
            raise ValueError(
                f"real/imaginary length mismatch: {re.shape[0]} vs {im.shape[0]}"
            )
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

    def __len__(self) -> int:
        return self.re.shape[0]

    @classmethod
    def from_real(cls, values) -> "ComplexBuffer":
        re = np.asarray(values, dtype=np.float64)
        return cls(re, np.zeros_like(re))

    @classmethod
    def from_complex(cls, values) -> "ComplexBuffer":
        z = np.asarray(values, dtype=np.complex128)
        return cls(z.real.copy(), z.imag.copy())

    def to_complex(self) -> np.ndarray:
        return self.re + 1j * self.im


def next_pow2(n: int) -> int:
    """Smallest power of two >= n.  Raises for n < 1."""
    if n < 1:
        raise ValueError(f"next_pow2 requires n >= 1, got {n}")
    return 1 << (int(n) - 1).bit_length()


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@lru_cache(maxsize=None)
def _bit_reversal(n: int) -> np.ndarray:
    perm = np.zeros(n, dtype=np.intp)
    bits = n.bit_length() - 1
    for i in range(n):
        rev = 0
        x = i
        for _ in range(bits):
            rev = (rev << 1) | (x & 1)
            x >>= 1
        perm[i] = rev
    perm.setflags(write=False)
    return perm


@lru_cache(maxsize=None)
def _twiddles(span: int, sign: int) -> np.ndarray:
    # sign -1 for the forward transform, +1 for the inverse.
    half = span // 2
    tw = np.exp(sign * 2j * np.pi * np.arange(half) / span)
    tw.setflags(write=False)
    return tw


def _transform(z: np.ndarray, sign: int) -> np.ndarray:
    n = z.shape[0]
    if n == 1:
        return z.copy()
    z = z[_bit_reversal(n)]
    half = 1
    while half < n:
        tw = _twiddles(2 * half, sign)
        blocks = z.reshape(-1, 2 * half)
        t = blocks[:, half:] * tw
        lo = blocks[:, :half]
        blocks[:, half:] = lo - t
        blocks[:, :half] = lo + t
        half *= 2
    return z


def _check_pow2(x: ComplexBuffer):
    if not _is_pow2(len(x)):
        raise ValueError(f"transform length must be a power of two, got {len(x)}")


def fft_forward(x: ComplexBuffer) -> ComplexBuffer:
    """Unnormalized DFT of a power-of-two buffer.  Input is not mutated."""
    _check_pow2(x)
    return ComplexBuffer.from_complex(_transform(x.to_complex(), -1))


def fft_inverse(y: ComplexBuffer) -> ComplexBuffer:
    """Inverse DFT carrying the 1/n factor, so fft_inverse(fft_forward(x)) == x."""
    _check_pow2(y)
    return ComplexBuffer.from_complex(_transform(y.to_complex(), +1) / len(y))

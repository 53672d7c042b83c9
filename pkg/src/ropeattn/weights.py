"""Weight sequences over a shared support, and the rotary instantiation.

An attention instance scores position pair (i, j) by
Q[i, :] @ W[i-j] @ K[j, :].T / sqrt(d), where every offset's d x d weight
matrix W[t] is supported on the same index set S.  The sequence is stored
one Toeplitz generator per support entry: the generator for (l1, l2) holds
(W[t])[l1, l2] across offsets t = -(n-1)..(n-1), so each support entry
contributes the rescaled Toeplitz component
diag(Q[:, l1]) * Toep(gen / sqrt(d)) * diag(K[:, l2]) and the full score
matrix is the sum of these components.

The rotary construction fills the support with the d/2 diagonal 2 x 2
rotation blocks.  The stored weight for offset t = i - j is the rotation
by (j - i) * theta_b (cos on the block diagonal, +sin upper right, -sin
lower left), i.e. the key position is rotated relative to the query.
Support indices are 1-based throughout, including on disk.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .structured import RescaledToeplitz, ToeplitzGenerator

__all__ = [
    "SupportSet",
    "WeightSequence",
    "AttentionInstance",
    "ValidationReport",
    "rope_weights",
    "validate_instance",
    "build_component",
    "exponent_bound",
    "DEFAULT_ROTARY_BASE",
]

DEFAULT_ROTARY_BASE = 1.0e4


@dataclass(frozen=True)
class SupportSet:
    """Ordered, duplicate-free list of 1-based (l1, l2) index pairs."""

    entries: tuple

    def __post_init__(self):
        entries = tuple((int(a), int(b)) for a, b in self.entries)
        if len(set(entries)) != len(entries):
            raise ValueError("support entries must be unique")
        object.__setattr__(self, "entries", entries)

    @property
    def k(self) -> int:
        return len(self.entries)

    def index_of(self, l1: int, l2: int) -> int:
        try:
            return self.entries.index((l1, l2))
        except ValueError:
            raise ValueError(f"({l1}, {l2}) is not in the support") from None


@dataclass(frozen=True)
class WeightSequence:
    """One Toeplitz generator per support entry, side n, dimension d."""

    n: int
    d: int
    support: SupportSet
    gens: tuple

    def __post_init__(self):
        gens = tuple(self.gens)
        if len(gens) != self.support.k:
            raise ValueError(
                f"{self.support.k} support entries but {len(gens)} generators"
            )
        for g in gens:
            if g.n != self.n:
                raise ValueError(f"generator side {g.n} does not match n={self.n}")
        object.__setattr__(self, "gens", gens)

    def dense_weight(self, t: int) -> np.ndarray:
        """Reassemble the dense d x d matrix W[t] from the stored generators."""
        w = np.zeros((self.d, self.d))
        for (l1, l2), gen in zip(self.support.entries, self.gens):
            w[l1 - 1, l2 - 1] = gen.offset(t)
        return w


@dataclass(frozen=True)
class AttentionInstance:
    """Q, K, V matrices with a weight sequence, magnitude bound B, accuracy eps."""

    Q: np.ndarray
    K: np.ndarray
    V: np.ndarray
    weights: WeightSequence
    B: float
    eps: float

    def __post_init__(self):
        for name in ("Q", "K", "V"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))

    @property
    def n(self) -> int:
        return self.weights.n

    @property
    def d(self) -> int:
        return self.weights.d


@dataclass
class ValidationReport:
    ok: bool = True
    violations: list = field(default_factory=list)

    def fail(self, message: str):
        self.ok = False
        self.violations.append(message)


def rope_weights(n: int, d: int, alpha: float = DEFAULT_ROTARY_BASE) -> WeightSequence:
    """Rotary weight sequence: d/2 diagonal 2 x 2 rotation blocks, support size 2d.

    Block b (1-based) rotates by angle frequency theta_b = alpha^(-2(b-1)/d);
    alpha defaults to the original rotary base 1e4.
    """
    if d < 2 or d % 2 != 0:
        raise ValueError(f"rotary weights need even d >= 2, got {d}")
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if alpha <= 1:
        raise ValueError(f"rotary base must exceed 1, got {alpha}")

    t = np.arange(-(n - 1), n, dtype=np.float64)
    entries = []
    gens = []
    for b in range(1, d // 2 + 1):
        theta = alpha ** (-2.0 * (b - 1) / d)
        cos = np.cos(t * theta)
        sin = np.sin(t * theta)
        r, c = 2 * b - 1, 2 * b
        for (l1, l2), vec in (((r, r), cos), ((r, c), sin), ((c, r), -sin), ((c, c), cos)):
            entries.append((l1, l2))
            gens.append(ToeplitzGenerator(n, vec))
    return WeightSequence(n, d, SupportSet(tuple(entries)), tuple(gens))


def validate_instance(inst: AttentionInstance) -> ValidationReport:
    """Check magnitude bounds and dimension agreement; failures carry coordinates."""
    report = ValidationReport()
    n, d = inst.n, inst.d

    for name in ("Q", "K", "V"):
        m = getattr(inst, name)
        if m.shape != (n, d):
            report.fail(f"{name} has shape {m.shape}, expected ({n}, {d})")
            continue
        over = np.argwhere(np.abs(m) > inst.B)
        if over.size:
            i, j = over[0]
            report.fail(
                f"|{name}[{i},{j}]| = {abs(m[i, j]):.6g} exceeds B = {inst.B:.6g}"
            )

    for (l1, l2), gen in zip(inst.weights.support.entries, inst.weights.gens):
        if not (1 <= l1 <= d and 1 <= l2 <= d):
            report.fail(f"support entry ({l1}, {l2}) outside [1, {d}]^2")
            continue
        worst = np.argmax(np.abs(gen.a))
        if abs(gen.a[worst]) > 1.0:
            report.fail(
                f"|W[{worst - (n - 1)}][{l1},{l2}]| = {abs(gen.a[worst]):.6g} exceeds 1"
            )

    if inst.weights.support.k > 4 * d:
        warnings.warn(
            f"support size {inst.weights.support.k} exceeds 4*d = {4 * d}; "
            "the O(d) support contract is soft but runtime degrades",
            stacklevel=2,
        )
    if not inst.B > 0:
        report.fail(f"B must be positive, got {inst.B}")
    if not inst.eps > 0:
        report.fail(f"eps must be positive, got {inst.eps}")
    return report


def build_component(inst: AttentionInstance, l1: int, l2: int) -> RescaledToeplitz:
    """Rescaled Toeplitz component diag(Q[:, l1]) Toep(gen / sqrt(d)) diag(K[:, l2]).

    The 1/sqrt(d) normalization is folded into the generator so the
    diagonals stay raw Q/K columns.
    """
    idx = inst.weights.support.index_of(l1, l2)
    gen = inst.weights.gens[idx]
    scaled = ToeplitzGenerator(inst.n, gen.a / math.sqrt(inst.d))
    return RescaledToeplitz(inst.Q[:, l1 - 1], scaled, inst.K[:, l2 - 1])


def exponent_bound(inst: AttentionInstance) -> float:
    """Certified upper bound on the magnitude of any pre-exponential score.

    Sums, over support entries, max|Q column| * max|generator| *
    max|K column| / sqrt(d); never below the true maximum score magnitude.
    """
    scale = 1.0 / math.sqrt(inst.d)
    bound = 0.0
    for (l1, l2), gen in zip(inst.weights.support.entries, inst.weights.gens):
        bound += (
            np.abs(inst.Q[:, l1 - 1]).max(initial=0.0)
            * np.abs(gen.a).max(initial=0.0)
            * np.abs(inst.K[:, l2 - 1]).max(initial=0.0)
            * scale
        )
    return float(bound)

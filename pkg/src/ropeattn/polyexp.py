"""Degree-controlled polynomial approximation of exp plus multinomial expansion.

The approximating family is the truncated Taylor series: it meets any fixed
(radius, eps) target at the scales this package runs at, and its remainder
on [-R, R] is certified by exp(R) * R^(g+1) / (g+1)!.  The asymptotically
optimal degree bound is not claimed; reports carry the actual Taylor degree.

The expansion side turns p(z_1 + ... + z_k) into sum_m alpha_m * prod_l
z_l^m(l) over all exponent maps m with total degree <= deg(p), with
alpha_m = c_|m| * |m|! / prod_l m(l)! by the multinomial theorem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ApproximationError, ResourceLimitError

__all__ = [
    "ExpPolynomial",
    "MonomialMap",
    "MonomialTable",
    "build_exp_poly",
    "eval_poly",
    "enumerate_monomials",
    "exponent_matrix",
    "monomial_coefficient",
    "build_monomial_table",
    "DEGREE_CAP",
    "MONOMIAL_BUDGET",
    "GRID_POINTS",
]

DEGREE_CAP = 512
MONOMIAL_BUDGET = 1 << 24
GRID_POINTS = 1000


@dataclass(frozen=True)
class ExpPolynomial:
    """Polynomial sum_t coeffs[t] * x^t approximating exp on [-valid_radius, valid_radius]."""

    degree: int
    coeffs: np.ndarray
    valid_radius: float
    target_eps: float

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if coeffs.shape != (self.degree + 1,):
            raise ValueError(
                f"degree {self.degree} needs {self.degree + 1} coefficients, "
                f"got shape {coeffs.shape}"
            )
        object.__setattr__(self, "coeffs", coeffs)


def _remainder_log(radius: float, g: int) -> float:
    """log of the Taylor remainder bound exp(R) * R^(g+1) / (g+1)!."""
    if radius == 0.0:
        return -math.inf
    return radius + (g + 1) * math.log(radius) - math.lgamma(g + 2)


def build_exp_poly(radius: float, eps: float) -> ExpPolynomial:
    """Truncated Taylor polynomial of smallest degree meeting the remainder bound.

    Raises ApproximationError when no degree up to DEGREE_CAP meets the bound,
    or when the 1000-point grid check fails, which signals that eps is below
    what 64-bit arithmetic can deliver for this radius.
    """
    if radius < 0:
        raise ValueError(f"radius must be nonnegative, got {radius}")
    if not 0 < eps < 0.1:
        raise ValueError(f"eps must lie in (0, 0.1), got {eps}")

    log_eps = math.log(eps)
    g = 0
    while _remainder_log(radius, g) > log_eps:
        g += 1
        if g > DEGREE_CAP:
            raise ApproximationError(
                f"no degree <= {DEGREE_CAP} reaches eps={eps:g} on radius {radius:g}; "
                "eps is too small for this radius"
            )

    coeffs = np.empty(g + 1)
    coeffs[0] = 1.0
    for t in range(1, g + 1):
        coeffs[t] = coeffs[t - 1] / t

    poly = ExpPolynomial(g, coeffs, float(radius), float(eps))
    grid = np.linspace(-radius, radius, GRID_POINTS)
    worst = float(np.max(np.abs(eval_poly(poly, grid) - np.exp(grid))))
    if worst > eps:
        raise ApproximationError(
            f"grid check failed: max deviation {worst:.3e} > eps={eps:g} at degree {g}; "
            "eps is below 64-bit floating-point reach for this radius"
        )
    return poly


def eval_poly(p: ExpPolynomial, x):
    """Horner evaluation; accepts a scalar or an ndarray."""
    x = np.asarray(x, dtype=np.float64)
    acc = np.full(x.shape, p.coeffs[p.degree])
    for t in range(p.degree - 1, -1, -1):
        acc = acc * x + p.coeffs[t]
    return acc if acc.shape else float(acc)


@dataclass(frozen=True)
class MonomialMap:
    """Exponent assignment for one expansion term: entry l gets exponents[l]."""

    exponents: tuple

    @property
    def total(self) -> int:
        return sum(self.exponents)


@dataclass(frozen=True)
class MonomialTable:
    """All exponent maps with total <= degree, with their expansion coefficients.

    `exponents` is a (count, k) integer matrix in ascending lexicographic
    order; `alphas` the matching coefficients.  count == C(degree + k, k).
    """

    degree: int
    k: int
    exponents: np.ndarray
    alphas: np.ndarray

    def __len__(self) -> int:
        return self.exponents.shape[0]

    def entries(self):
        """(MonomialMap, alpha) pairs in table order."""
        return [
            (MonomialMap(tuple(int(e) for e in row)), float(a))
            for row, a in zip(self.exponents, self.alphas)
        ]


def _check_budget(k: int, g: int, budget: int) -> int:
    count = math.comb(g + k, k)
    if count > budget:
        raise ResourceLimitError(
            f"monomial count C({g + k},{k}) = {count} exceeds budget {budget}"
        )
    return count


def exponent_matrix(k: int, g: int, budget: int = MONOMIAL_BUDGET) -> np.ndarray:
    """All maps [k] -> N with total <= g as a (C(g+k,k), k) matrix, ascending lex."""
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if g < 0:
        raise ValueError(f"degree must be nonnegative, got {g}")
    _check_budget(k, g, budget)

    def build(width: int, rest: int) -> np.ndarray:
        if width == 1:
            return np.arange(rest + 1, dtype=np.int64).reshape(-1, 1)
        blocks = []
        for v in range(rest + 1):
            tail = build(width - 1, rest - v)
            head = np.full((tail.shape[0], 1), v, dtype=np.int64)
            blocks.append(np.hstack([head, tail]))
        return np.vstack(blocks)

    return build(k, g)


def enumerate_monomials(k: int, g: int, budget: int = MONOMIAL_BUDGET):
    """All MonomialMaps with total <= g in ascending lexicographic order."""
    rows = exponent_matrix(k, g, budget)
    return [MonomialMap(tuple(int(e) for e in row)) for row in rows]


def monomial_coefficient(p: ExpPolynomial, m: MonomialMap) -> float:
    """Expansion coefficient alpha_m = c_|m| * |m|! / prod_l m(l)!."""
    total = m.total
    if total > p.degree:
        raise ValueError(f"monomial total {total} exceeds polynomial degree {p.degree}")
    c = p.coeffs[total]
    if c == 0.0:
        return 0.0
    coef = math.factorial(total)
    for e in m.exponents:
        coef //= math.factorial(e)
    return float(c * coef)


def build_monomial_table(p: ExpPolynomial, k: int, budget: int = MONOMIAL_BUDGET) -> MonomialTable:
    """Expansion of p(z_1 + ... + z_k) as a MonomialTable.

    Coefficients are computed vectorized as coeffs[t] * t! / prod m(l)!
    with a float factorial table; they agree with monomial_coefficient to
    rounding.
    """
    exps = exponent_matrix(k, p.degree, budget)
    totals = exps.sum(axis=1)
    fact = np.ones(p.degree + 1)
    for t in range(1, p.degree + 1):
        fact[t] = fact[t - 1] * t
    inv_fact = 1.0 / fact
    alphas = p.coeffs[totals] * fact[totals] * np.prod(inv_fact[exps], axis=1)
    return MonomialTable(p.degree, k, exps, alphas)

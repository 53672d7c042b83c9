"""Fast and exact attention over weight-sequence instances.

The exact path materializes the n x n score matrix, exponentiates it
entrywise, and normalizes: T = D^-1 A V with D = diag(A 1).  It exists to
validate the fast path and costs O(n^2 |S|).

The fast path never forms A.  It approximates exp by a truncated Taylor
polynomial on [-R, R], where R bounds every score, and expands the
polynomial of the component sum into monomials.  Each monomial's matrix is
a Hadamard product of rescaled Toeplitz components, itself rescaled
Toeplitz: its left/right diagonals are products of Q/K column powers and
its generating vector is a pointwise product of generator powers.  Applying
one such matrix to a vector costs one padded-FFT convolution, so the whole
computation is C(g+k, k) convolutions shared across the d+1 right-hand
sides (the all-ones vector for D and the columns of V).

Implementation notes for the fast path, chosen for a machine-bandwidth
budget rather than elegance:

* Right-hand transforms are grouped by the distinct right-diagonal
  (K-column power) profiles, and inverse transforms by the distinct
  left-diagonal profiles; both counts are C(g+d, d), far below C(g+k, k).
* Generator power products are deduplicated by sign-equivalence classes of
  the raw generators (rotary cos/sin blocks collapse 2d generators to d
  classes), then streamed through fixed-size chunks in ascending
  lexicographic order, built incrementally from shared exponent prefixes.
* A compiled kernel accumulates alpha * Gen_m . X_c(m) into the row-profile
  accumulator Z_r(m) per frequency block.  Blocks partition the spectrum,
  and within a block monomials are visited in a fixed order, so the result
  is bitwise reproducible and independent of the thread count.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.fft as sfft
from numba import njit, prange

from .errors import NormalizationError, ResourceLimitError
from .polyexp import MONOMIAL_BUDGET, MonomialTable, build_exp_poly, build_monomial_table
from .structured import DENSE_LIMIT, hadamard_chain_matvec, rescaled_matvec
from .weights import AttentionInstance, build_component, exponent_bound, validate_instance

__all__ = [
    "AttentionOutput",
    "attention_components",
    "linear_attention",
    "linear_attention_oracle",
    "exp_attention_matvec",
    "fast_attention",
    "exact_attention",
    "linf_error",
]

NORMALIZATION_FLOOR = 1e-12
_CHUNK = 256
_ROW_BLOCK = 64
_FREQ_BLOCKS = 16


@dataclass
class AttentionOutput:
    """Normalized output T, the normalizer diagonal, and run statistics."""

    T: np.ndarray
    diag: np.ndarray
    stats: dict = field(default_factory=dict)


def _set_threads(threads):
    if threads is None:
        threads = os.cpu_count() or 1
    threads = max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(threads)
    return threads


@njit(parallel=True, cache=True)
def _accumulate(G, alphas, gidx, rid, cid, X, Z, nblocks):  # pragma: no cover - compiled
    nm = alphas.shape[0]
    nfreq = G.shape[1]
    ns = X.shape[0]
    bs = (nfreq + nblocks - 1) // nblocks
    for blk in prange(nblocks):
        f0 = blk * bs
        f1 = min(nfreq, f0 + bs)
        for m in range(nm):
            a = alphas[m]
            gi = gidx[m]
            r = rid[m]
            c = cid[m]
            for s in range(ns):
                for f in range(f0, f1):
                    Z[s, r, f] += a * (G[gi, f] * X[s, c, f])


def _generator_classes(raw):
    """Group generator vectors that are equal up to sign.

    Returns (representatives, class index per generator, sign per
    generator).  Rotary blocks share one cos and one sign-flipped sin
    vector, so the class count drops from 2d to d there; unstructured
    generators each form their own class.  Matching is exact (bitwise), so
    this never changes results, only how much work is shared.
    """
    reps = []
    cls = np.empty(len(raw), dtype=np.int64)
    sign = np.empty(len(raw))
    for i, vec in enumerate(raw):
        for ci, rep in enumerate(reps):
            if np.array_equal(vec, rep):
                cls[i], sign[i] = ci, 1.0
                break
            if np.array_equal(vec, -rep):
                cls[i], sign[i] = ci, -1.0
                break
        else:
            reps.append(vec)
            cls[i], sign[i] = len(reps) - 1, 1.0
    return reps, cls, sign


def _require_valid(inst: AttentionInstance):
    report = validate_instance(inst)
    if not report.ok:
        raise ValueError("invalid instance: " + "; ".join(report.violations))


def attention_components(inst: AttentionInstance):
    """All rescaled Toeplitz components, in support order."""
    return [build_component(inst, l1, l2) for l1, l2 in inst.weights.support.entries]


def _dense_scores(inst: AttentionInstance) -> np.ndarray:
    """The n x n pre-exponential score matrix, computed entrywise."""
    n = inst.n
    idx = np.arange(n, dtype=np.int32)
    off = idx[:, None] - idx[None, :] + (n - 1)
    scale = 1.0 / math.sqrt(inst.d)
    scores = np.zeros((n, n))
    for (l1, l2), gen in zip(inst.weights.support.entries, inst.weights.gens):
        scores += np.outer(inst.Q[:, l1 - 1], inst.K[:, l2 - 1] * scale) * gen.a[off]
    return scores


def exact_attention(inst: AttentionInstance, dense_limit: int = DENSE_LIMIT) -> AttentionOutput:
    """Quadratic oracle: exp applied literally to the dense score matrix."""
    if inst.n > dense_limit:
        raise ResourceLimitError(f"n = {inst.n} exceeds dense limit {dense_limit}")
    t0 = time.perf_counter()
    A = np.exp(_dense_scores(inst))
    diag = A.sum(axis=1)
    T = (A @ inst.V) / diag[:, None]
    return AttentionOutput(
        T, diag, {"elapsed": {"total": time.perf_counter() - t0}}
    )


def _guard_diag(diag: np.ndarray):
    row = int(np.argmin(np.abs(diag)))
    if abs(diag[row]) < NORMALIZATION_FLOOR:
        raise NormalizationError(
            f"normalizer entry D[{row}] = {diag[row]:.6g} has magnitude below "
            f"{NORMALIZATION_FLOOR:g}"
        )


def linear_attention(inst: AttentionInstance) -> AttentionOutput:
    """Attention without the entrywise exp, via one FFT matvec per component.

    Scores reuse the 1/sqrt(d)-scaled components; the uniform scaling
    cancels in D^-1 (A V).  The score matrix is sign-indefinite here, so
    normalizer entries may be negative; only magnitudes below the guard
    threshold are an error.
    """
    _require_valid(inst)
    t0 = time.perf_counter()
    comps = attention_components(inst)
    cols = [np.ones(inst.n)] + [inst.V[:, c] for c in range(inst.d)]
    applied = []
    for x in cols:
        acc = np.zeros(inst.n)
        for comp in comps:
            acc += rescaled_matvec(comp, x)
        applied.append(acc)
    diag = applied[0]
    _guard_diag(diag)
    T = np.stack(applied[1:], axis=1) / diag[:, None]
    return AttentionOutput(
        T,
        diag,
        {
            "support_size": inst.weights.support.k,
            "elapsed": {"total": time.perf_counter() - t0},
        },
    )


def linear_attention_oracle(inst: AttentionInstance, dense_limit: int = DENSE_LIMIT) -> AttentionOutput:
    """Dense counterpart of linear_attention, same scaling convention."""
    if inst.n > dense_limit:
        raise ResourceLimitError(f"n = {inst.n} exceeds dense limit {dense_limit}")
    t0 = time.perf_counter()
    S = _dense_scores(inst)
    diag = S.sum(axis=1)
    _guard_diag(diag)
    T = (S @ inst.V) / diag[:, None]
    return AttentionOutput(T, diag, {"elapsed": {"total": time.perf_counter() - t0}})


def exp_attention_matvec(
    inst: AttentionInstance,
    table: MonomialTable,
    components,
    v: np.ndarray,
) -> np.ndarray:
    """Approximate exp-applied attention times v, one monomial at a time.

    Reference form of the expansion: sums alpha_m * (Hadamard power chain) v
    in table (lexicographic) order with Kahan compensation.  Cost grows with
    the monomial count times the total degree; the streaming path inside
    fast_attention is the production route.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (inst.n,):
        raise ValueError(f"vector length {v.shape} does not match n = {inst.n}")
    acc = np.zeros(inst.n)
    comp = np.zeros(inst.n)
    for row, alpha in zip(table.exponents, table.alphas):
        term = alpha * hadamard_chain_matvec(
            [(c, int(e)) for c, e in zip(components, row)], v
        )
        y = term - comp
        t = acc + y
        comp = (t - acc) - y
        acc = t
    return acc


def _profile_tables(matrix: np.ndarray, profiles: np.ndarray) -> np.ndarray:
    """Row products of matrix columns raised to each profile's exponents."""
    n, d = matrix.shape
    max_pow = int(profiles.max(initial=0))
    pows = np.empty((d, max_pow + 1, n))
    pows[:, 0] = 1.0
    for c in range(d):
        col = matrix[:, c]
        for e in range(1, max_pow + 1):
            pows[c, e] = pows[c, e - 1] * col
    out = np.empty((profiles.shape[0], n))
    for j, prof in enumerate(profiles):
        acc = pows[0, prof[0]].copy()
        for c in range(1, d):
            acc *= pows[c, prof[c]]
        out[j] = acc
    return out


def fast_attention(
    inst: AttentionInstance,
    *,
    threads=None,
    monomial_budget: int = MONOMIAL_BUDGET,
) -> AttentionOutput:
    """Near-linear-time approximation of D^-1 exp(scores) V.

    Builds the score bound R, a Taylor polynomial for exp accurate to
    eps * exp(-R) / (4 * max(B, 1)) per entry (which keeps the normalized
    output within eps), expands it over the support components, and streams
    the monomial convolutions as described in the module docstring.
    """
    _require_valid(inst)
    threads = _set_threads(threads)
    n, d = inst.n, inst.d
    k = inst.weights.support.k
    elapsed = {}
    t_start = time.perf_counter()

    # Plan: score bound, polynomial, monomial table, diagonal profiles.
    t0 = time.perf_counter()
    bound = exponent_bound(inst)
    eps_poly = inst.eps * math.exp(-bound) / (4.0 * max(inst.B, 1.0))
    poly = build_exp_poly(bound, min(eps_poly, 0.099))
    table = build_monomial_table(poly, k, monomial_budget)
    exps = table.exponents
    alphas = table.alphas

    l1 = np.array([e[0] - 1 for e in inst.weights.support.entries])
    l2 = np.array([e[1] - 1 for e in inst.weights.support.entries])
    row_prof = np.zeros((len(exps), d), dtype=np.int64)
    col_prof = np.zeros((len(exps), d), dtype=np.int64)
    for i in range(k):
        row_prof[:, l1[i]] += exps[:, i]
        col_prof[:, l2[i]] += exps[:, i]
    uniq_r, rid = np.unique(row_prof, axis=0, return_inverse=True)
    uniq_c, cid = np.unique(col_prof, axis=0, return_inverse=True)
    rid = np.ascontiguousarray(rid.reshape(-1).astype(np.int64))
    cid = np.ascontiguousarray(cid.reshape(-1).astype(np.int64))
    left_diag = _profile_tables(inst.Q, uniq_r)
    right_diag = _profile_tables(inst.K, uniq_c)
    elapsed["plan"] = time.perf_counter() - t0

    # Forward transforms of the d+1 right-hand sides per right-diagonal
    # profile, in small row blocks to keep allocations and cache use flat.
    t0 = time.perf_counter()
    length = 2 * n if (2 * n) & (2 * n - 1) == 0 else 1 << (2 * n).bit_length()
    nfreq = length // 2 + 1
    rhs = [np.ones(n)] + [inst.V[:, c] for c in range(d)]
    X = np.empty((len(rhs), len(uniq_c), nfreq), dtype=np.complex128)
    pad = np.zeros((_ROW_BLOCK, length))
    for s, vec in enumerate(rhs):
        for i in range(0, len(uniq_c), _ROW_BLOCK):
            j = min(i + _ROW_BLOCK, len(uniq_c))
            pad[: j - i, :n] = right_diag[i:j] * vec
            X[s, i:j] = sfft.rfft(pad[: j - i], axis=1, workers=threads)
    elapsed["rhs_transform"] = time.perf_counter() - t0

    # Stream the distinct generator power products and accumulate per row
    # profile.  Generators equal up to sign (the rotary cos/sin structure)
    # collapse many monomials onto one spectrum; signs fold into the
    # coefficients.
    t0 = time.perf_counter()
    scale = 1.0 / math.sqrt(d)
    raw = [gen.a * scale for gen in inst.weights.gens]
    reps, cls, sign = _generator_classes(raw)
    ncls = len(reps)

    cls_prof = np.zeros((len(exps), ncls), dtype=np.int64)
    for i in range(k):
        cls_prof[:, cls[i]] += exps[:, i]
    negated = np.flatnonzero(sign < 0)
    if negated.size:
        parity = exps[:, negated].sum(axis=1) % 2
        signed_alphas = np.where(parity == 1, -alphas, alphas)
    else:
        signed_alphas = alphas
    uniq_g, gid = np.unique(cls_prof, axis=0, return_inverse=True)
    gid = gid.reshape(-1).astype(np.int64)

    # Monomials sorted by (spectrum, row, column) index keep the kernel's
    # gathers cache-resident; the fixed permutation keeps results bitwise
    # reproducible.
    order = np.lexsort((cid, rid, gid))
    gid_s = np.ascontiguousarray(gid[order])
    rid_s = np.ascontiguousarray(rid[order])
    cid_s = np.ascontiguousarray(cid[order])
    alpha_s = np.ascontiguousarray(signed_alphas[order])

    rep_pow = np.empty((ncls, poly.degree + 1, 2 * n - 1))
    rep_pow[:, 0] = 1.0
    for c in range(ncls):
        for e in range(1, poly.degree + 1):
            rep_pow[c, e] = rep_pow[c, e - 1] * reps[c]

    first_diff = np.zeros(len(uniq_g), dtype=np.int64)
    if len(uniq_g) > 1:
        first_diff[1:] = np.argmax(uniq_g[1:] != uniq_g[:-1], axis=1)

    Z = np.zeros((len(rhs), len(uniq_r), nfreq), dtype=np.complex128)
    stack = np.ones((ncls + 1, 2 * n - 1))
    gbuf = np.zeros((_CHUNK, length))
    nblocks = max(_FREQ_BLOCKS, nfreq // 512)
    g0 = 0
    while g0 < len(uniq_g):
        g1 = min(g0 + _CHUNK, len(uniq_g))
        for j in range(g0, g1):
            prof = uniq_g[j]
            for p in range(first_diff[j] if j else 0, ncls):
                np.multiply(stack[p], rep_pow[p, prof[p]], out=stack[p + 1])
            vec = stack[ncls]
            gbuf[j - g0, :n] = vec[n - 1:]
            if n > 1:
                gbuf[j - g0, length - n + 1:] = vec[:n - 1]
        G = sfft.rfft(gbuf[: g1 - g0], axis=1, workers=threads)
        lo = int(np.searchsorted(gid_s, g0))
        hi = int(np.searchsorted(gid_s, g1))
        _accumulate(
            G, alpha_s[lo:hi], gid_s[lo:hi] - g0, rid_s[lo:hi], cid_s[lo:hi],
            X, Z, nblocks,
        )
        g0 = g1
    elapsed["monomial_stream"] = time.perf_counter() - t0

    # Inverse transforms per row profile, combine, normalize.
    t0 = time.perf_counter()
    applied = np.zeros((len(rhs), n))
    for s in range(len(rhs)):
        for i in range(0, len(uniq_r), _ROW_BLOCK):
            j = min(i + _ROW_BLOCK, len(uniq_r))
            rows = sfft.irfft(Z[s, i:j], n=length, axis=1, workers=threads)
            applied[s] += np.einsum("rn,rn->n", left_diag[i:j], rows[:, :n])
    diag = applied[0]
    row = int(np.argmin(diag))
    if diag[row] < NORMALIZATION_FLOOR:
        raise NormalizationError(
            f"approximate normalizer D[{row}] = {diag[row]:.6g} fell below "
            f"{NORMALIZATION_FLOOR:g}; the polynomial budget is too coarse"
        )
    T = applied[1:].T / diag[:, None]
    elapsed["normalize"] = time.perf_counter() - t0
    elapsed["total"] = time.perf_counter() - t_start

    return AttentionOutput(
        T,
        diag,
        {
            "monomial_count": len(table),
            "poly_degree": poly.degree,
            "poly_eps": poly.target_eps,
            "exponent_bound": bound,
            "threads": threads,
            "elapsed": elapsed,
        },
    )


def linf_error(a: np.ndarray, b: np.ndarray) -> float:
    """Max absolute entrywise difference of two equal-shaped matrices."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)))

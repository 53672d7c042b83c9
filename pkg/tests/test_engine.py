import math

import numpy as np
import pytest

from ropeattn.engine import (
    attention_components,
    exact_attention,
    exp_attention_matvec,
    fast_attention,
    linear_attention,
    linear_attention_oracle,
    linf_error,
)
from ropeattn.errors import ApproximationError, NormalizationError, ResourceLimitError
from ropeattn.polyexp import ExpPolynomial, build_monomial_table
from ropeattn.structured import ToeplitzGenerator
from ropeattn.weights import AttentionInstance, SupportSet, WeightSequence, rope_weights

from oracles import dense_scores


def rope_instance(rng, n, d, B=0.5, eps=1e-6):
    return AttentionInstance(
        rng.uniform(-B, B, (n, d)),
        rng.uniform(-B, B, (n, d)),
        rng.uniform(-B, B, (n, d)),
        rope_weights(n, d),
        B,
        eps,
    )


def scripted_instance(n, d, Q, K, V, gens, support, B=1.0, eps=1e-6):
    weights = WeightSequence(n, d, SupportSet(support), gens)
    return AttentionInstance(Q, K, V, weights, B, eps)


class TestLinearAttention:
    def test_single_row_returns_v(self):
        rng = np.random.default_rng(0)
        inst = rope_instance(rng, 1, 2)
        out = linear_attention(inst)
        np.testing.assert_allclose(out.T, inst.V, atol=1e-12)

    def test_zero_values_give_zero_output(self):
        rng = np.random.default_rng(1)
        inst = rope_instance(rng, 8, 2)
        inst.V[:] = 0.0
        out = linear_attention(inst)
        np.testing.assert_array_equal(out.T, np.zeros((8, 2)))

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_dense_oracle(self, seed):
        rng = np.random.default_rng(seed)
        inst = rope_instance(rng, 16, 2)
        fast = linear_attention(inst)
        oracle = linear_attention_oracle(inst)
        assert linf_error(fast.T, oracle.T) <= 1e-9
        np.testing.assert_allclose(fast.diag, oracle.diag, atol=1e-10)

    def test_zero_normalizer_raises_with_row(self):
        n = 4
        gens = (ToeplitzGenerator(n, np.zeros(2 * n - 1)),)
        rng = np.random.default_rng(2)
        inst = scripted_instance(
            n, 1,
            rng.uniform(-1, 1, (n, 1)), rng.uniform(-1, 1, (n, 1)),
            rng.uniform(-1, 1, (n, 1)), gens, ((1, 1),),
        )
        with pytest.raises(NormalizationError, match=r"D\[0\]"):
            linear_attention(inst)

    def test_invalid_instance_rejected(self):
        rng = np.random.default_rng(3)
        inst = rope_instance(rng, 4, 2, B=0.5)
        inst.Q[0, 0] = 2.0
        with pytest.raises(ValueError, match="invalid instance"):
            linear_attention(inst)


class TestExpAttentionMatvec:
    def test_constant_polynomial_gives_all_ones_matrix(self):
        rng = np.random.default_rng(4)
        inst = rope_instance(rng, 6, 2)
        p = ExpPolynomial(0, np.array([1.0]), 0.0, 0.05)
        table = build_monomial_table(p, inst.weights.support.k)
        comps = attention_components(inst)
        v = rng.uniform(-1, 1, 6)
        out = exp_attention_matvec(inst, table, comps, v)
        np.testing.assert_allclose(out, np.full(6, v.sum()), atol=1e-12)

    def test_linear_polynomial_single_entry(self):
        n = 5
        rng = np.random.default_rng(5)
        gens = (ToeplitzGenerator(n, rng.uniform(-1, 1, 2 * n - 1)),)
        inst = scripted_instance(
            n, 1,
            rng.uniform(-1, 1, (n, 1)), rng.uniform(-1, 1, (n, 1)),
            rng.uniform(-1, 1, (n, 1)), gens, ((1, 1),),
        )
        p = ExpPolynomial(1, np.array([1.0, 1.0]), 1.0, 0.05)
        table = build_monomial_table(p, 1)
        comps = attention_components(inst)
        v = rng.uniform(-1, 1, n)
        expected = (np.ones((n, n)) + dense_scores(inst)) @ v
        np.testing.assert_allclose(
            exp_attention_matvec(inst, table, comps, v), expected, atol=1e-10
        )

    def test_matches_dense_polynomial_oracle(self):
        rng = np.random.default_rng(6)
        inst = rope_instance(rng, 8, 2)
        coeffs = np.array([1.0, 1.0, 0.5, 1.0 / 6.0])
        p = ExpPolynomial(3, coeffs, 1.0, 0.05)
        table = build_monomial_table(p, inst.weights.support.k)
        comps = attention_components(inst)
        v = rng.uniform(-1, 1, 8)
        scores = dense_scores(inst)
        dense = np.zeros_like(scores)
        for t, c in enumerate(coeffs):
            dense += c * scores ** t
        assert linf_error(
            exp_attention_matvec(inst, table, comps, v)[None, :], (dense @ v)[None, :]
        ) <= 1e-8

    def test_vector_length_checked(self):
        rng = np.random.default_rng(7)
        inst = rope_instance(rng, 4, 2)
        p = ExpPolynomial(0, np.array([1.0]), 0.0, 0.05)
        table = build_monomial_table(p, inst.weights.support.k)
        with pytest.raises(ValueError, match="does not match"):
            exp_attention_matvec(inst, table, attention_components(inst), np.ones(5))


class TestFastAttention:
    def test_single_row_is_v(self):
        rng = np.random.default_rng(8)
        inst = rope_instance(rng, 1, 4)
        out = fast_attention(inst)
        np.testing.assert_allclose(out.T, inst.V, atol=1e-12)

    def test_zero_scores_give_column_means(self):
        rng = np.random.default_rng(9)
        inst = rope_instance(rng, 8, 2)
        inst.Q[:] = 0.0
        inst.K[:] = 0.0
        out = fast_attention(inst)
        expected = np.tile(inst.V.mean(axis=0), (8, 1))
        np.testing.assert_allclose(out.T, expected, atol=1e-12)
        assert out.stats["poly_degree"] == 0

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        inst = rope_instance(rng, 64, 4)
        fast = fast_attention(inst)
        oracle = exact_attention(inst)
        assert linf_error(fast.T, oracle.T) <= 1e-6

    def test_random_support_matches_oracle(self):
        rng = np.random.default_rng(10)
        n, d = 24, 3
        support = ((1, 2), (3, 3), (2, 1), (1, 1), (3, 1))
        gens = tuple(
            ToeplitzGenerator(n, rng.uniform(-1, 1, 2 * n - 1)) for _ in support
        )
        inst = scripted_instance(
            n, d,
            rng.uniform(-0.5, 0.5, (n, d)), rng.uniform(-0.5, 0.5, (n, d)),
            rng.uniform(-0.5, 0.5, (n, d)), gens, support, B=0.5,
        )
        assert linf_error(fast_attention(inst).T, exact_attention(inst).T) <= 1e-6

    def test_bitwise_deterministic_across_runs_and_threads(self):
        rng = np.random.default_rng(11)
        inst = rope_instance(rng, 32, 4)
        a = fast_attention(inst)
        b = fast_attention(inst)
        c = fast_attention(inst, threads=1)
        assert np.array_equal(a.T, b.T)
        assert np.array_equal(a.T, c.T)
        assert np.array_equal(a.diag, c.diag)

    def test_monomial_count_accounting(self):
        rng = np.random.default_rng(12)
        inst = rope_instance(rng, 16, 2)
        out = fast_attention(inst)
        k = inst.weights.support.k
        g = out.stats["poly_degree"]
        assert out.stats["monomial_count"] == math.comb(g + k, k)

    def test_shift_invariance_of_structure(self):
        n = 12
        rng = np.random.default_rng(13)
        base = rng.uniform(-0.5, 0.5, 2 * n - 1)
        mats = [rng.uniform(-0.5, 0.5, (n, 1)) for _ in range(3)]
        for shift in (0.0, 0.4):
            gens = (ToeplitzGenerator(n, base + shift),)
            inst = scripted_instance(n, 1, *mats, gens, ((1, 1),), B=0.5)
            err = linf_error(fast_attention(inst).T, exact_attention(inst).T)
            assert err <= inst.eps

    @pytest.mark.parametrize("n", [1, 2, 4, 8, 16])
    @pytest.mark.parametrize("d", [2, 4])
    def test_small_instance_equivalence(self, n, d):
        # 20 seeds per (n, d) at B = 0.5, eps = 1e-6.
        worst = 0.0
        for seed in range(20):
            rng = np.random.default_rng(1000 * n + 100 * d + seed)
            inst = rope_instance(rng, n, d)
            worst = max(
                worst, linf_error(fast_attention(inst).T, exact_attention(inst).T)
            )
        assert worst <= 1e-6

    def test_monomial_budget_error(self):
        rng = np.random.default_rng(14)
        inst = rope_instance(rng, 16, 4)
        with pytest.raises(ResourceLimitError, match="budget"):
            fast_attention(inst, monomial_budget=100)

    def test_unreachable_accuracy_raises(self):
        rng = np.random.default_rng(15)
        inst = rope_instance(rng, 8, 4, B=2.0, eps=1e-15)
        with pytest.raises(ApproximationError):
            fast_attention(inst)

    def test_stats_phases_present(self):
        rng = np.random.default_rng(16)
        out = fast_attention(rope_instance(rng, 8, 2))
        for phase in ("plan", "rhs_transform", "monomial_stream", "normalize", "total"):
            assert phase in out.stats["elapsed"]


class TestExactAttention:
    def test_zero_scores_give_column_means(self):
        rng = np.random.default_rng(17)
        inst = rope_instance(rng, 6, 2)
        inst.Q[:] = 0.0
        out = exact_attention(inst)
        np.testing.assert_allclose(out.T, np.tile(inst.V.mean(axis=0), (6, 1)), atol=1e-14)
        np.testing.assert_allclose(out.diag, np.full(6, 6.0), atol=1e-12)

    def test_zero_weights_two_rows(self):
        rng = np.random.default_rng(18)
        gens = (ToeplitzGenerator(2, np.zeros(3)),)
        inst = scripted_instance(
            2, 2,
            rng.uniform(-1, 1, (2, 2)), rng.uniform(-1, 1, (2, 2)),
            rng.uniform(-1, 1, (2, 2)), gens, ((1, 2),),
        )
        out = exact_attention(inst)
        np.testing.assert_allclose(out.diag, [2.0, 2.0], atol=1e-14)

    @pytest.mark.parametrize("seed", range(3))
    def test_row_stochastic_structure(self, seed):
        rng = np.random.default_rng(seed)
        inst = rope_instance(rng, 12, 4)
        out = exact_attention(inst)
        A = np.exp(dense_scores(inst))
        rows = A / out.diag[:, None]
        np.testing.assert_allclose(rows.sum(axis=1), np.ones(12), atol=1e-12)
        assert (rows > 0).all()
        for c in range(4):
            assert out.T[:, c].min() >= inst.V[:, c].min() - 1e-12
            assert out.T[:, c].max() <= inst.V[:, c].max() + 1e-12

    def test_dense_limit(self):
        rng = np.random.default_rng(19)
        inst = rope_instance(rng, 8, 2)
        with pytest.raises(ResourceLimitError, match="dense limit"):
            exact_attention(inst, dense_limit=4)


class TestLinfError:
    def test_identical(self):
        a = np.ones((3, 2))
        assert linf_error(a, a.copy()) == 0.0

    def test_single_perturbation(self):
        a = np.zeros((4, 3))
        b = a.copy()
        b[2, 1] = 1e-3
        assert linf_error(a, b) == pytest.approx(1e-3)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape mismatch"):
            linf_error(np.zeros((2, 2)), np.zeros((2, 3)))

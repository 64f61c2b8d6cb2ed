#!/usr/bin/env python3
"""
Unit tests for the width bounds: orthonormal sets, the spectral dual, the
packing chain and the numerical minimax estimator.
"""

import math
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from config import MinimaxConfig
from errors import InvalidParameterError
from geometry import GramMatrix, assemble_gram, sup_residual
from manifold import HatFunction, WaveSnapshot
from widths import (
    best_dual_lower_bound,
    certified_tail,
    chain_check,
    dual_lower_bound,
    exact_width_orthonormal,
    hat_family_width,
    identity_gram,
    k_fold_pairing_subspace,
    minimax_width,
    optimal_hat_count,
    packing_lower_bound,
    packing_lower_bound_for_grid,
    pairing_subspace,
    pigeonhole_lower_bound,
    width_profile,
    witness_subspace,
)

FAST = MinimaxConfig(restarts=2, max_iterations=100, patience=30, refine_iterations=50)


def wave_gram(grid_size: int) -> GramMatrix:
    return assemble_gram([WaveSnapshot(mu=m / (grid_size - 1)) for m in range(grid_size)])


def random_psd_gram(rng: np.random.Generator, size: int) -> GramMatrix:
    X = rng.standard_normal((size, size)) / math.sqrt(size)
    return GramMatrix(entries=X.T @ X)


def brute_force_width(gram: GramMatrix) -> float:
    """Dense search over unit directions for d_1 of a set with at most 3 members."""
    eigenvalues, eigenvectors = np.linalg.eigh(gram.entries)
    A = np.sqrt(np.clip(eigenvalues, 0.0, None))[:, None] * eigenvectors.T
    norms2 = np.sum(A * A, axis=0)

    def worst(U):
        return np.sqrt(np.clip(norms2[None, :] - (U @ A) ** 2, 0.0, None)).max(axis=1)

    if gram.size == 2:
        theta = np.linspace(0.0, np.pi, 200001)
        return float(worst(np.column_stack([np.cos(theta), np.sin(theta)])).min())

    def sphere(phi, theta):
        P, T = np.meshgrid(phi, theta, indexing="ij")
        return np.column_stack([
            (np.sin(P) * np.cos(T)).ravel(), (np.sin(P) * np.sin(T)).ravel(), np.cos(P).ravel(),
        ])

    phi = np.linspace(0.0, np.pi / 2, 301)
    theta = np.linspace(0.0, 2 * np.pi, 601)
    coarse = worst(sphere(phi, theta))
    i, j = np.unravel_index(int(np.argmin(coarse)), (phi.size, theta.size))
    dphi, dtheta = phi[1] - phi[0], theta[1] - theta[0]
    fine = worst(sphere(
        np.linspace(phi[i] - 2 * dphi, phi[i] + 2 * dphi, 401),
        np.linspace(theta[j] - 2 * dtheta, theta[j] + 2 * dtheta, 401),
    ))
    return float(min(coarse.min(), fine.min()))


class TestOrthonormalSets(unittest.TestCase):

    def test_exact_width_examples(self):
        self.assertEqual(exact_width_orthonormal(2, 7), 0.7071067811865476)
        self.assertEqual(exact_width_orthonormal(1, 5), 0.0)
        self.assertAlmostEqual(exact_width_orthonormal(3, 1), 0.816496580927726, delta=1e-15)

    def test_pigeonhole_examples(self):
        self.assertEqual(pigeonhole_lower_bound(8, 4).value, 0.7071067811865476)
        self.assertEqual(pigeonhole_lower_bound(5, 5), (0.0, True))
        self.assertAlmostEqual(pigeonhole_lower_bound(3, 1).value, 0.816496580927726, delta=1e-15)
        self.assertFalse(pigeonhole_lower_bound(3, 1).degenerate)

    def test_invalid_arguments(self):
        with self.assertRaises(InvalidParameterError):
            exact_width_orthonormal(0, 1)
        with self.assertRaises(InvalidParameterError):
            pigeonhole_lower_bound(4, 0)

    def test_pairing_subspace(self):
        B = pairing_subspace(1)
        np.testing.assert_allclose(B.coeffs[:, 0], [1 / math.sqrt(2)] * 2)
        self.assertAlmostEqual(sup_residual(B.gram, B)[0], 1 / math.sqrt(2), delta=1e-15)
        three = pairing_subspace(3)
        np.testing.assert_allclose(three.coeffs.T @ three.coeffs, np.eye(3), atol=1e-15)

    def test_orthonormal_exactness(self):
        for k in (2, 3, 4):
            for N in (1, 2, 3):
                expected = math.sqrt((k - 1) / k)
                B = k_fold_pairing_subspace(k, N)
                self.assertAlmostEqual(pigeonhole_lower_bound(k * N, N).value, expected, delta=1e-12)
                self.assertAlmostEqual(exact_width_orthonormal(k, N), expected, delta=1e-12)
                self.assertAlmostEqual(sup_residual(B.gram, B)[0], expected, delta=1e-12)
        self.assertAlmostEqual(exact_width_orthonormal(2, 1), 0.70711, places=5)
        self.assertAlmostEqual(exact_width_orthonormal(3, 1), 0.81650, places=5)

    def test_pairing_size_mismatch(self):
        with self.assertRaises(InvalidParameterError):
            k_fold_pairing_subspace(2, 2, identity_gram(5))


class TestDualBound(unittest.TestCase):

    def test_identity_uniform_weights(self):
        for N in (1, 2, 3):
            G = identity_gram(2 * N)
            self.assertAlmostEqual(dual_lower_bound(G, N, np.full(2 * N, 1 / (2 * N))), 1 / math.sqrt(2), delta=1e-12)

    def test_no_tail(self):
        G = wave_gram(3)
        self.assertEqual(dual_lower_bound(G, 3, np.full(3, 1 / 3)), 0.0)

    def test_dual_below_upper(self):
        G = wave_gram(5)
        lower = dual_lower_bound(G, 2, np.full(5, 0.2))
        self.assertGreater(lower, 0.0)
        self.assertLessEqual(lower, minimax_width(G, 2, FAST).upper + 1e-9)

    def test_invalid_weights(self):
        G = identity_gram(2)
        with self.assertRaises(InvalidParameterError):
            dual_lower_bound(G, 1, [0.7, 0.7])
        with self.assertRaises(InvalidParameterError):
            dual_lower_bound(G, 1, [1.0])

    def test_certified_tail_subtracts_allowance(self):
        self.assertEqual(certified_tail(np.array([1.0, 1e-20]), 1), 0.0)
        self.assertAlmostEqual(certified_tail(np.array([1.0, 0.5, 0.25]), 1), 0.75, delta=1e-13)

    def test_best_dual_improves_on_uniform(self):
        G = wave_gram(9)
        uniform = dual_lower_bound(G, 2, np.full(9, 1 / 9))
        self.assertGreaterEqual(best_dual_lower_bound(G, 2, FAST), uniform - 1e-12)


class TestPacking(unittest.TestCase):

    def test_packing_values(self):
        self.assertAlmostEqual(packing_lower_bound(1), 0.25, delta=1e-14)
        self.assertAlmostEqual(packing_lower_bound(4), 0.125, delta=1e-14)
        self.assertAlmostEqual(packing_lower_bound(100), 0.025, delta=1e-14)

    def test_packing_chain_up_to_sixteen(self):
        for N in range(1, 17):
            self.assertAlmostEqual(packing_lower_bound(N), 0.25 / math.sqrt(N), delta=1e-14)

    def test_hat_family_width(self):
        self.assertEqual(hat_family_width(2, 1), 0.5)
        self.assertEqual(hat_family_width(3, 3), 0.0)
        for N in (1, 2, 5, 8):
            self.assertEqual(optimal_hat_count(N), 2 * N)

    def test_grid_packing(self):
        value, M = packing_lower_bound_for_grid(1, 3)
        self.assertEqual(M, 2)
        self.assertAlmostEqual(value, 0.25, delta=1e-14)
        value, M = packing_lower_bound_for_grid(8, 33)
        self.assertEqual(M, 16)
        self.assertAlmostEqual(value, 0.25 / math.sqrt(8), delta=1e-14)

    def test_grid_packing_without_2N(self):
        # 40 intervals hold no M = 6, so N = 3 falls back to the widest divisor family
        value, M = packing_lower_bound_for_grid(3, 41)
        self.assertEqual(M, 5)
        self.assertEqual(value, 0.5 * hat_family_width(M, 3))
        self.assertLess(value, 0.25 / math.sqrt(3))
        self.assertIsNone(packing_lower_bound_for_grid(4, 5))

    def test_chain_check(self):
        report = chain_check(2, 1, FAST)
        self.assertTrue(report.chain_verified)
        self.assertAlmostEqual(report.chain_value, 0.25, delta=1e-14)
        self.assertAlmostEqual(report.psi_tilde_width, 1 / math.sqrt(2), delta=1e-12)
        self.assertAlmostEqual(report.psi_estimate.upper, 0.5, delta=1e-3)
        self.assertTrue(report.numerical_ordering_holds)

    def test_chain_check_two(self):
        report = chain_check(4, 2, numerical=False)
        self.assertAlmostEqual(report.packing_bound, 0.1767766953, delta=1e-10)
        self.assertTrue(report.chain_verified)
        self.assertIsNone(report.phi_estimate)

    def test_chain_check_rejects_other_grids(self):
        with self.assertRaises(InvalidParameterError):
            chain_check(6, 2)
        with self.assertRaises(InvalidParameterError):
            chain_check(0, 0)


class TestMinimax(unittest.TestCase):

    def test_canonical_sets(self):
        for N in range(1, 5):
            estimate = minimax_width(identity_gram(2 * N), N)
            self.assertAlmostEqual(estimate.upper, 1 / math.sqrt(2), delta=1e-3, msg=f"N={N}")
            self.assertAlmostEqual(estimate.lower_dual, 1 / math.sqrt(2), delta=1e-3, msg=f"N={N}")
            self.assertLessEqual(estimate.upper - estimate.lower_dual, 2e-3)

    def test_single_snapshot(self):
        estimate = minimax_width(assemble_gram([WaveSnapshot(mu=0.5)]), 1, FAST)
        self.assertLessEqual(estimate.upper, 1e-7)
        self.assertEqual(estimate.lower_dual, 0.0)
        self.assertTrue(estimate.converged)

    def test_wave_grid_above_packing_bound(self):
        estimate = minimax_width(wave_gram(9), 4, FAST)
        self.assertGreaterEqual(estimate.upper, 0.125)
        self.assertTrue(estimate.bounds_consistent())

    def test_witness_reproduces_upper(self):
        G = wave_gram(9)
        estimate = minimax_width(G, 3, FAST)
        witness = witness_subspace(G, estimate)
        self.assertEqual(witness.dim, 3)
        self.assertAlmostEqual(sup_residual(G, witness)[0], estimate.upper, delta=1e-12)
        self.assertIn("upper", estimate.provenance)

    def test_deterministic(self):
        G = wave_gram(9)
        first = minimax_width(G, 2, FAST.model_copy(update={"threads": 1}))
        second = minimax_width(G, 2, FAST.model_copy(update={"threads": 4}))
        self.assertEqual(first.upper, second.upper)
        self.assertEqual(first.lower_dual, second.lower_dual)

    def test_default_config_reaches_a_decision(self):
        config = MinimaxConfig()
        estimate = minimax_width(wave_gram(33), 4, config)
        self.assertTrue(estimate.converged)
        self.assertLess(estimate.iterations, config.restarts * config.max_iterations)
        self.assertTrue(estimate.bounds_consistent())
        self.assertGreaterEqual(estimate.upper, 0.125)

    def test_invalid_N(self):
        with self.assertRaises(InvalidParameterError):
            minimax_width(wave_gram(3), 0)

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(7)
        for trial in range(10):
            gram = random_psd_gram(rng, 2 if trial < 5 else 3)
            estimate = minimax_width(gram, 1)
            self.assertAlmostEqual(estimate.upper, brute_force_width(gram), delta=1e-3, msg=f"trial {trial}")
            self.assertTrue(estimate.bounds_consistent())

    @settings(max_examples=5, deadline=None)
    @given(st.sampled_from([0.25, 0.5, 2.0, 8.0]))
    def test_scale_equivariance(self, c):
        G = wave_gram(5)
        base = minimax_width(G, 2, FAST)
        scaled = minimax_width(G.scaled(c), 2, FAST)
        self.assertAlmostEqual(scaled.upper, c * base.upper, delta=1e-10 * c * base.upper + 1e-15)
        self.assertAlmostEqual(scaled.lower_dual, c * base.lower_dual, delta=1e-10 * c * base.lower_dual + 1e-15)


class TestWidthProfile(unittest.TestCase):

    def test_monotone_in_N(self):
        G = wave_gram(17)
        estimates = width_profile(G, [1, 2, 3, 4, 6, 8], FAST)
        for smaller, larger in zip(estimates[:-1], estimates[1:]):
            self.assertLessEqual(larger.upper, smaller.upper + 1e-9)
            self.assertLessEqual(larger.lower_dual, smaller.lower_dual + 1e-9)
        for estimate in estimates:
            self.assertTrue(estimate.bounds_consistent())

    def test_keeps_requested_order(self):
        estimates = width_profile(wave_gram(9), [3, 1, 2], FAST)
        self.assertEqual([e.N for e in estimates], [3, 1, 2])

    def test_hat_family_profile(self):
        G = assemble_gram([HatFunction(M=4, m=m) for m in range(1, 5)])
        estimates = width_profile(G, [1, 2], FAST)
        for estimate in estimates:
            self.assertLessEqual(estimate.lower_dual, hat_family_width(4, estimate.N) + 1e-9)
            self.assertGreaterEqual(estimate.upper, hat_family_width(4, estimate.N) - 1e-9)


if __name__ == '__main__':
    unittest.main()

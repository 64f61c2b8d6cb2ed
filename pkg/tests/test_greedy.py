#!/usr/bin/env python3
"""
Unit tests for the strong greedy reduced basis and the decay fits.
"""

import math
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from config import MinimaxConfig
from errors import DecayFitError, InvalidParameterError
from geometry import GramMatrix, assemble_gram
from greedy import fit_decay, positive_prefix, strong_greedy
from manifold import WaveSnapshot
from state import DecayModel
from widths import minimax_width


def wave_gram(grid_size: int) -> GramMatrix:
    return assemble_gram([WaveSnapshot(mu=m / (grid_size - 1)) for m in range(grid_size)])


class TestStrongGreedy(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.wave = wave_gram(129)
        cls.trace = strong_greedy(cls.wave, 16)

    def test_identity(self):
        trace = strong_greedy(GramMatrix(entries=np.eye(4)), 2)
        self.assertEqual(trace.errors, [1.0, 1.0, 1.0])
        self.assertEqual(trace.selected_indices, [0, 1])
        self.assertEqual(trace.stop_reason, "budget")

    def test_single_snapshot(self):
        trace = strong_greedy(GramMatrix(entries=[[2.0]]), 1)
        self.assertAlmostEqual(trace.errors[0], math.sqrt(2.0), delta=1e-15)
        self.assertEqual(trace.errors[1], 0.0)
        self.assertTrue(trace.converged)

    def test_zero_steps(self):
        trace = strong_greedy(self.wave, 0)
        self.assertEqual(trace.errors, [math.sqrt(2.0)])
        self.assertEqual(trace.selected_indices, [])

    def test_budget_out_of_range(self):
        with self.assertRaises(InvalidParameterError):
            strong_greedy(GramMatrix(entries=np.eye(2)), 3)
        with self.assertRaises(InvalidParameterError):
            strong_greedy(GramMatrix(entries=np.eye(2)), -1)

    def test_duplicate_snapshot_breaks_down(self):
        G = assemble_gram([WaveSnapshot(mu=0.5), WaveSnapshot(mu=0.5)])
        trace = strong_greedy(G, 2)
        self.assertEqual(trace.selected_indices, [0])
        self.assertEqual(trace.stop_reason, "breakdown")
        self.assertTrue(trace.converged)

    def test_stop_tolerance(self):
        trace = strong_greedy(self.wave, 16, stop_tol=0.5)
        self.assertEqual(trace.stop_reason, "tolerance")
        self.assertLess(trace.errors[-1], 0.5)
        self.assertLess(len(trace.selected_indices), 16)

    def test_first_pick_is_largest_snapshot(self):
        self.assertEqual(self.trace.selected_indices[0], 0)
        self.assertAlmostEqual(self.trace.errors[0], math.sqrt(2.0), delta=1e-15)

    def test_selected_snapshots_are_distinct(self):
        self.assertEqual(len(set(self.trace.selected_indices)), 16)

    def test_errors_non_increasing(self):
        for n in range(16):
            self.assertLessEqual(self.trace.errors[n + 1], self.trace.errors[n] + 1e-12, msg=f"n={n}")

    def test_errors_above_packing_bound(self):
        for N in (1, 2, 4, 8, 16):
            self.assertGreaterEqual(self.trace.errors[N], 0.25 / math.sqrt(N), msg=f"N={N}")

    def test_algebraic_decay(self):
        fit = fit_decay(self.trace.errors)
        self.assertGreaterEqual(fit.algebraic_exponent, -1.2)
        self.assertLessEqual(fit.algebraic_exponent, -0.35)
        self.assertEqual(fit.better_model, DecayModel.ALGEBRAIC)
        self.assertEqual(fit.n_values, list(range(1, 17)))

    def test_greedy_above_dual_bound(self):
        G = wave_gram(17)
        trace = strong_greedy(G, 4)
        config = MinimaxConfig(restarts=2, max_iterations=100, patience=30, refine_iterations=0)
        for N in (1, 2, 4):
            self.assertGreaterEqual(trace.errors[N], minimax_width(G, N, config).lower_dual - 1e-9)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=2 ** 16))
    def test_random_sets_exhaust(self, size, seed):
        X = np.random.default_rng(seed).standard_normal((size, size)) + 3.0 * np.eye(size)
        trace = strong_greedy(GramMatrix(entries=X.T @ X), size)
        self.assertEqual(trace.errors[-1], 0.0)
        self.assertEqual(sorted(trace.selected_indices), list(range(size)))


class TestDecayFit(unittest.TestCase):

    def test_algebraic_sequence(self):
        errors = [1.0] + [0.25 / math.sqrt(N) for N in range(1, 17)]
        fit = fit_decay(errors)
        self.assertAlmostEqual(fit.algebraic_exponent, -0.5, delta=1e-10)
        self.assertAlmostEqual(fit.algebraic_constant, 0.25, delta=1e-10)
        self.assertAlmostEqual(fit.algebraic_r2, 1.0, delta=1e-12)
        self.assertEqual(fit.better_model, DecayModel.ALGEBRAIC)

    def test_exponential_sequence(self):
        errors = [math.exp(-N) for N in range(0, 13)]
        fit = fit_decay(errors)
        self.assertAlmostEqual(fit.exponential_rate, -1.0, delta=1e-10)
        self.assertEqual(fit.better_model, DecayModel.EXPONENTIAL)

    def test_explicit_n_values(self):
        n = [1, 2, 4, 8]
        fit = fit_decay([1.0 / N for N in n], skip_first=0, n_values=n)
        self.assertAlmostEqual(fit.algebraic_exponent, -1.0, delta=1e-10)
        self.assertEqual(fit.n_values, n)

    def test_constant_sequence_prefers_algebraic(self):
        fit = fit_decay([1.0] * 6)
        self.assertEqual(fit.algebraic_r2, fit.exponential_r2)
        self.assertEqual(fit.better_model, DecayModel.ALGEBRAIC)

    def test_too_few_points(self):
        with self.assertRaises(DecayFitError):
            fit_decay([1.0, 0.5, 0.4, 0.3])

    def test_nonpositive_error(self):
        with self.assertRaises(DecayFitError):
            fit_decay([1.0, 0.5, 0.4, 0.0, 0.1])

    def test_mismatched_n_values(self):
        with self.assertRaises(DecayFitError):
            fit_decay([1.0, 0.5, 0.4, 0.3, 0.2], n_values=[1, 2, 3])

    def test_positive_prefix(self):
        self.assertEqual(positive_prefix([0.5, 0.2, 1e-14, 0.1], 1e-12), [0.5, 0.2])
        self.assertEqual(positive_prefix([0.5, None, 0.3], 0.0), [0.5])
        self.assertEqual(positive_prefix([], 0.0), [])


if __name__ == '__main__':
    unittest.main()

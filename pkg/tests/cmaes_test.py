import unittest
import math
from dataclasses import replace

import numpy as np

from . import SLOW_TESTS
from droid.cmaes import (
    CmaConfig,
    PositivityMask,
    SearchDistribution,
    cma_ask,
    cma_converged,
    cma_init,
    cma_tell,
    fmin,
    sample_masked,
)
from droid.errors import InfeasibleDistributionError, InvalidConfigError, InvalidInputError
from droid.utils import derive_seed


def sphere(x):
    return float(np.sum(np.asarray(x) ** 2))


def rosenbrock(x):
    x = np.asarray(x)
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1 - x[:-1]) ** 2))


class T(unittest.TestCase):

    def test_config(self):
        cfg = CmaConfig.for_dimension(8, population=30, parents=5)
        weights = np.array(cfg["recombination_weights"])
        self.assertEqual(len(weights), 5)
        self.assertAlmostEqual(float(weights.sum()), 1.0, places=12)
        self.assertTrue(np.all(weights > 0))
        self.assertTrue(np.all(np.diff(weights) < 0))
        self.assertTrue(1.0 <= cfg["mueff"] <= 5.0)
        self.assertTrue(0 < cfg["c_1"] + cfg["c_mu"] <= 1)

        standard = CmaConfig.standard(10)
        self.assertEqual(standard["population"], 10)
        self.assertEqual(standard["parents"], 5)

        with self.assertRaisesRegex(InvalidConfigError, "parents"):
            CmaConfig.for_dimension(3, population=4, parents=5)
        with self.assertRaises(InvalidConfigError):
            CmaConfig.for_dimension(0)

    def test_init_errors(self):
        cfg = CmaConfig.for_dimension(2, population=6, parents=3)
        with self.assertRaises(InvalidConfigError):
            cma_init([0.0, 0.0], 0.0, cfg)
        with self.assertRaises(InvalidConfigError):
            cma_init([0.0, math.nan], 1.0, cfg)
        with self.assertRaises(ValueError):
            cma_init([], 1.0, cfg)
        dist = cma_init([1.0, 2.0], 0.5, cfg)
        self.assertEqual(dist.generation, 0)
        np.testing.assert_array_equal(dist.covariance, np.eye(2))
        np.testing.assert_array_equal(dist.path_sigma, np.zeros(2))

    def test_ask_deterministic(self):
        cfg = CmaConfig.for_dimension(3, population=7, parents=3)
        dist = cma_init([0.0, 1.0, 2.0], 1.0, cfg)
        mask = PositivityMask.none(3)
        a = cma_ask(dist, mask, 123)
        b = cma_ask(dist, mask, 123)
        c = cma_ask(dist, mask, 124)
        self.assertEqual(len(a), 7)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)
        self.assertFalse(all(np.array_equal(x, y) for x, y in zip(a, c)))

    def test_ask_moments(self):
        cfg = CmaConfig.for_dimension(3, population=7, parents=3)
        covariance = np.array([[2.0, 0.6, 0.0], [0.6, 1.0, -0.3], [0.0, -0.3, 0.5]])
        dist = replace(cma_init([1.0, -2.0, 0.5], 0.5, cfg), covariance=covariance)
        samples = np.array(cma_ask(dist, PositivityMask.none(3), 11, population=10000))
        self.assertEqual(samples.shape, (10000, 3))
        expected = 0.25 * covariance
        np.testing.assert_allclose(samples.mean(axis=0), dist.mean, atol=0.03)
        np.testing.assert_allclose(np.cov(samples, rowvar=False), expected, atol=0.03)

    def test_tell_errors(self):
        cfg = CmaConfig.for_dimension(2, population=6, parents=3)
        dist = cma_init([0.0, 0.0], 1.0, cfg)
        candidates = cma_ask(dist, PositivityMask.none(2), 1)
        with self.assertRaises(InvalidInputError):
            cma_tell(dist, candidates, [1.0] * 5, cfg)
        with self.assertRaises(InvalidInputError):
            cma_tell(dist, candidates[:2], [1.0, 2.0], cfg)
        # Count must match the configured population
        with self.assertRaises(InvalidInputError):
            cma_tell(dist, candidates[:5], [1.0] * 5, cfg)
        with self.assertRaises(InvalidInputError):
            cma_tell(dist, candidates + candidates[:1], [1.0] * 7, cfg)
        with self.assertRaises(InvalidInputError):
            cma_tell(dist, candidates, [1.0, 2.0, math.inf, 0.0, 1.0, 1.0], cfg)

    def test_covariance_symmetric_psd(self):
        rng = np.random.default_rng(0)
        cfg = CmaConfig.for_dimension(5, population=12, parents=6)
        dist = cma_init(rng.normal(size=5), 2.0, cfg)
        mask = PositivityMask.none(5)
        for g in range(60):
            candidates = cma_ask(dist, mask, derive_seed(7, g))
            # Mix of a real objective and noise so that the paths move around
            fitnesses = [rosenbrock(x) + rng.normal() for x in candidates]
            dist = cma_tell(dist, candidates, fitnesses, cfg)
            np.testing.assert_array_equal(dist.covariance, dist.covariance.T)
            eigenvalues = np.linalg.eigvalsh(dist.covariance)
            self.assertGreaterEqual(float(eigenvalues.min()), -1e-12 * float(eigenvalues.max()))
            self.assertTrue(dist.step_size > 0 and math.isfinite(dist.step_size))
            self.assertEqual(dist.generation, g + 1)

    def test_rank_invariance(self):
        cfg = CmaConfig.for_dimension(4, population=10, parents=5)
        dist = cma_init([1.0, -1.0, 0.5, 2.0], 0.7, cfg)
        candidates = cma_ask(dist, PositivityMask.none(4), 99)
        fit = [sphere(x) for x in candidates]
        a = cma_tell(dist, candidates, fit, cfg)
        b = cma_tell(dist, candidates, [math.exp(f) - 3 for f in fit], cfg)
        np.testing.assert_array_equal(a.mean, b.mean)
        np.testing.assert_array_equal(a.covariance, b.covariance)
        self.assertEqual(a.step_size, b.step_size)

    def test_tell_permutation(self):
        cfg = CmaConfig.for_dimension(4, population=10, parents=5)
        dist = cma_init([1.0, -1.0, 0.5, 2.0], 0.7, cfg)
        candidates = cma_ask(dist, PositivityMask.none(4), 42)
        fit = [sphere(x) for x in candidates]
        perm = np.random.default_rng(3).permutation(10)
        a = cma_tell(dist, candidates, fit, cfg)
        b = cma_tell(dist, [candidates[i] for i in perm], [fit[i] for i in perm], cfg)
        np.testing.assert_allclose(a.mean, b.mean, rtol=0, atol=1e-12)
        np.testing.assert_allclose(a.covariance, b.covariance, rtol=0, atol=1e-12)
        np.testing.assert_allclose(a.path_sigma, b.path_sigma, rtol=0, atol=1e-12)
        self.assertAlmostEqual(a.step_size, b.step_size, delta=1e-12)

    def test_tell_mean_moves(self):
        cfg = CmaConfig.for_dimension(3, population=10, parents=5)
        dist = cma_init([0.3, -1.0, 2.0], 0.5, cfg)
        # Identical candidates at the mean
        same = [dist.mean.copy() for _ in range(10)]
        updated = cma_tell(dist, same, [float(i) for i in range(10)], cfg)
        np.testing.assert_allclose(updated.mean, dist.mean, rtol=0, atol=1e-12)

        # Symmetric along the first axis, fitness is that coordinate
        offsets = np.linspace(-1.0, 1.0, 10)
        symmetric = [dist.mean + np.array([t, 0.0, 0.0]) for t in offsets]
        updated = cma_tell(dist, symmetric, [float(x[0]) for x in symmetric], cfg)
        self.assertLess(updated.mean[0], dist.mean[0])
        np.testing.assert_allclose(updated.mean[1:], dist.mean[1:], rtol=0, atol=1e-12)

    def test_positivity(self):
        cfg = CmaConfig.for_dimension(3, population=50, parents=10)
        dist = cma_init([0.1, 0.1, -1.0], 1.0, cfg)
        mask = PositivityMask(np.array([True, True, False]))
        for x in cma_ask(dist, mask, 5):
            self.assertGreater(x[0], 0)
            self.assertGreater(x[1], 0)

        # Feasibility through an affine map
        scaled = PositivityMask(np.array([True]), offset=np.array([1.0]), scale=np.array([0.5]))
        self.assertTrue(scaled.feasible(np.array([-1.9])))
        self.assertFalse(scaled.feasible(np.array([-2.1])))

        with self.assertRaises(InfeasibleDistributionError):
            sample_masked(
                np.array([-10.0]), np.array([[1e-4]]), PositivityMask.all_positive(1), np.random.default_rng(0), 1
            )
        with self.assertRaises(InvalidInputError):
            sample_masked(np.zeros(2), np.eye(2), PositivityMask.none(3), np.random.default_rng(0), 1)

    def test_converged(self):
        cfg = CmaConfig.for_dimension(2, population=6, parents=3, max_generations=5, fitness_tolerance=1e-3)
        dist = cma_init([0.0, 0.0], 1.0, cfg)
        self.assertFalse(cma_converged(dist, [], cfg))
        self.assertTrue(cma_converged(SearchDistribution(**{**dist.__dict__, "generation": 5}), [], cfg))

        cfg = CmaConfig.for_dimension(2, population=6, parents=3, max_generations=100, fitness_tolerance=1e-3)
        self.assertTrue(cma_converged(dist, [1.0] * 10, cfg))
        self.assertFalse(cma_converged(dist, [1.0] * 9, cfg))
        self.assertFalse(cma_converged(dist, [float(10 - i) for i in range(12)], cfg))

        cfg = CmaConfig.for_dimension(2, population=6, parents=3, max_generations=100, fitness_tolerance=0.0)
        self.assertFalse(cma_converged(dist, [1.0] * 50, cfg))

    def test_resume_from_json(self):
        cfg = CmaConfig.for_dimension(3, population=8, parents=4)
        dist = cma_init([1.0, 2.0, 3.0], 0.5, cfg, names=("a", "b", "c"))
        candidates = cma_ask(dist, PositivityMask.none(3), 3)
        dist = cma_tell(dist, candidates, [sphere(x) for x in candidates], cfg)
        loaded = SearchDistribution.from_json(dist.to_json())
        self.assertEqual(loaded.names, ("a", "b", "c"))
        self.assertEqual(loaded.generation, 1)
        np.testing.assert_array_equal(loaded.path_sigma, dist.path_sigma)
        np.testing.assert_array_equal(loaded.path_cov, dist.path_cov)
        with self.assertRaises(InvalidInputError):
            SearchDistribution.from_json({"mean": [0.0]})

    def test_sphere(self):
        result = fmin(sphere, 3 * np.ones(4), 1.0, max_evaluations=4000, target=1e-10)
        self.assertLess(result.best_fitness, 1e-8)
        self.assertLessEqual(result.evaluations, 4000)
        self.assertAlmostEqual(sphere(result.best), result.best_fitness)

    @unittest.skipUnless(SLOW_TESTS, "Set DROID_SLOW_TESTS=1 to run the benchmark budgets")
    def test_benchmarks(self):
        result = fmin(sphere, 3 * np.ones(10), 1.0, max_evaluations=2000, target=1e-10)
        self.assertLess(result.best_fitness, 1e-10)

        result = fmin(rosenbrock, np.zeros(5), 0.5, max_evaluations=30000, target=1e-6)
        self.assertLess(result.best_fitness, 1e-6)

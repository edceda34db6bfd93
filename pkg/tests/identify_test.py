import unittest
import math
import os
import tempfile

import numpy as np

from . import SLOW_TESTS
from droid.config import DynParams, ExperimentConfig, IdentifyConfig, PARAM_NAMES, WorldConfig
from droid.errors import InvalidInputError
from droid.identify import (
    DIVERGED_FITNESS,
    TORQUE_COMPARE_HEADER,
    IdentifyTrace,
    ParamDistribution,
    bhattacharyya_coefficient,
    candidate_fitness,
    compare_distributions,
    optimize_distribution,
    reduced_grid_cost,
    torque_comparison,
    trajectory_cost,
    write_compare,
    write_torque_compare,
)
from droid.simenv import Trajectory, gen_real_rollouts, playback, synth_demo
from droid.utils import read_csv


def make_trajectory(torque, failed=False, dt=0.001):
    torque = np.asarray(torque, dtype=float)
    n = len(torque)
    return Trajectory(
        dt=dt,
        q_desired=np.zeros((n, 2)),
        q_actual=np.zeros((n, 2)),
        torque=torque,
        door_angle=np.zeros(n),
        failed=failed,
    )


class T(unittest.TestCase):

    def setUp(self):
        self.world = WorldConfig().validate()
        self.phi = DynParams().validate()
        conf = ExperimentConfig.default()
        self.phi_init = ParamDistribution.from_init(conf["phi_init"]["mean"], conf["phi_init"]["std"])

    def test_cost(self):
        real = make_trajectory([[1.0, 1.0], [2.0, 2.0]])
        self.assertEqual(trajectory_cost(make_trajectory([[1.0, 1.0], [2.0, 2.0]]), [real], 10.0), 0.0)
        # Failure penalty with a zero residual is exactly the penalty
        self.assertEqual(trajectory_cost(make_trajectory([[1.0, 1.0], [2.0, 2.0]], failed=True), [real], 10.0), 10.0)
        # Time mean of the per-sample joint residual norm, averaged over the set
        sim = make_trajectory([[4.0, 5.0], [2.0, 2.0]])
        self.assertAlmostEqual(trajectory_cost(sim, [real], 10.0), 2.5)
        self.assertAlmostEqual(trajectory_cost(sim, [real, sim], 10.0), 1.25)
        self.assertGreaterEqual(trajectory_cost(make_trajectory([[4.0, 5.0], [2.0, 2.0]], failed=True), [real], 10.0), 10.0)
        # Shortest common prefix
        self.assertEqual(trajectory_cost(make_trajectory([[1.0, 1.0]]), [real], 10.0), 0.0)

        with self.assertRaises(InvalidInputError):
            trajectory_cost(sim, [], 10.0)
        with self.assertRaises(InvalidInputError):
            trajectory_cost(make_trajectory([[1.0, 1.0]], dt=0.002), [real], 10.0)

    def test_candidate_fitness(self):
        q = synth_demo(self.world, math.radians(20), 0.3)
        real_set = [playback(q, self.phi, self.world)]
        cfg = IdentifyConfig(n_real=1).validate()
        self.assertEqual(candidate_fitness(self.phi, q, real_set, self.world, cfg), trajectory_cost(real_set[0], real_set, 10.0))
        other = DynParams(door_damping=3.0).validate()
        self.assertGreater(candidate_fitness(other, q, real_set, self.world, cfg), 0.0)
        # A diverging candidate gets the sentinel fitness
        q_bad = q.copy()
        q_bad[5:] = np.nan
        self.assertEqual(candidate_fitness(self.phi, q_bad, real_set, self.world, cfg), DIVERGED_FITNESS)

    def test_param_distribution(self):
        self.assertEqual(self.phi_init.names, PARAM_NAMES)
        np.testing.assert_allclose(self.phi_init.std()[0], 0.5)
        self.assertEqual(self.phi_init.mean_params()["door_mass"], 1.144)
        rng = np.random.default_rng(0)
        for _ in range(50):
            sample = self.phi_init.sample(rng)
            self.assertTrue(np.all(sample.to_vector() > 0))
        loaded = ParamDistribution.from_json(self.phi_init.to_json())
        np.testing.assert_array_equal(loaded.covariance, self.phi_init.covariance)
        with self.assertRaises(InvalidInputError):
            ParamDistribution(PARAM_NAMES, np.zeros(3), np.eye(3))
        with self.assertRaises(InvalidInputError):
            ParamDistribution.from_json({"names": ["a"]})

    def test_optimize_distribution(self):
        q = synth_demo(self.world, math.radians(20), 0.2)
        real_set = gen_real_rollouts(q, self.phi, self.world, 2, 0)
        cfg = IdentifyConfig(population=6, parents=3, n_real=2, max_generations=3, seed=11).validate()
        phi_star, trace = optimize_distribution(self.phi_init, q, real_set, self.world, cfg)
        self.assertEqual(len(trace.rows), 3)
        self.assertEqual([r.generation for r in trace.rows], [0, 1, 2])
        self.assertEqual(trace.rows[-1].evaluations, 18)
        # Trace rows hold the distribution before the update
        np.testing.assert_allclose(trace.rows[0].mean, self.phi_init.mean)
        np.testing.assert_allclose(trace.rows[0].std, self.phi_init.std())
        for row in trace.rows:
            self.assertLessEqual(row.best_fit, row.mean_fit)
            self.assertLessEqual(row.mean_fit, row.worst_fit)
        self.assertEqual(phi_star.names, PARAM_NAMES)
        np.testing.assert_array_equal(phi_star.covariance, phi_star.covariance.T)
        self.assertGreaterEqual(float(np.linalg.eigvalsh(phi_star.covariance).min()), -1e-12)

        # Same seed, same result
        again, trace2 = optimize_distribution(self.phi_init, q, real_set, self.world, cfg)
        np.testing.assert_array_equal(again.mean, phi_star.mean)
        self.assertEqual(trace2.rows, trace.rows)

        # Worker processes gather results in submission order
        pooled, _ = optimize_distribution(
            self.phi_init, q, real_set, self.world, IdentifyConfig(dict(cfg, workers=3)).validate()
        )
        np.testing.assert_array_equal(pooled.mean, phi_star.mean)

        with tempfile.TemporaryDirectory() as tmp:
            trace.save(os.path.join(tmp, "trace.csv"))
            rows = read_csv(os.path.join(tmp, "trace.csv"))
        self.assertEqual(rows[0][:5], ["generation", "best_fit", "mean_fit", "door_mass_mean", "door_mass_std"])
        self.assertEqual(rows[0][-2:], ["worst_fit", "evaluations"])
        self.assertEqual(len(rows), 4)

    def test_fixed_parameters(self):
        q = synth_demo(self.world, math.radians(20), 0.2)
        real_set = gen_real_rollouts(q, self.phi, self.world, 1, 0)
        cfg = IdentifyConfig(population=6, parents=3, n_real=1, max_generations=2).validate()
        truth = self.phi.to_vector()
        fixed = {n: float(v) for n, v in zip(PARAM_NAMES, truth) if n not in ("door_stiffness", "door_damping")}
        phi_star, _ = optimize_distribution(self.phi_init, q, real_set, self.world, cfg, fixed=fixed)
        for i, name in enumerate(PARAM_NAMES):
            if name in fixed:
                self.assertEqual(phi_star.mean[i], truth[i])
                self.assertEqual(phi_star.std()[i], 0.0)

        with self.assertRaisesRegex(InvalidInputError, "Unknown parameter"):
            optimize_distribution(self.phi_init, q, real_set, self.world, cfg, fixed={"door_weight": 1.0})
        with self.assertRaisesRegex(InvalidInputError, "No free parameter"):
            optimize_distribution(
                self.phi_init, q, real_set, self.world, cfg, fixed=dict(zip(PARAM_NAMES, truth.tolist()))
            )
        with self.assertRaises(InvalidInputError):
            optimize_distribution(self.phi_init, q, real_set + real_set, self.world, cfg)

    def test_improving(self):
        trace = IdentifyTrace()
        self.assertTrue(trace.improving)
        self.assertEqual(trace.best_fitness(), math.inf)

    def test_compare(self):
        self.assertAlmostEqual(bhattacharyya_coefficient(1.0, 0.5, 1.0, 0.5), 1.0)
        self.assertLess(bhattacharyya_coefficient(0.0, 0.1, 5.0, 0.1), 1e-6)
        self.assertEqual(bhattacharyya_coefficient(1.0, 0.0, 1.0, 0.0), 1.0)
        self.assertEqual(bhattacharyya_coefficient(1.0, 0.0, 1.0, 0.1), 0.0)
        rows = compare_distributions(self.phi_init, self.phi_init)
        self.assertEqual(len(rows), 8)
        for row in rows:
            self.assertAlmostEqual(row.bhattacharyya, 1.0)
        with tempfile.TemporaryDirectory() as tmp:
            write_compare(os.path.join(tmp, "compare.csv"), rows)
            csv_rows = read_csv(os.path.join(tmp, "compare.csv"))
        self.assertEqual(csv_rows[0], ["name", "mean_a", "std_a", "mean_b", "std_b", "bhattacharyya"])
        self.assertEqual(csv_rows[1][0], "door_mass")

    def test_torque_comparison(self):
        q = synth_demo(self.world, math.radians(20), 0.3)
        real = gen_real_rollouts(q, self.phi, self.world, 1, 7)[0]
        clean = playback(q, self.phi, self.world)
        far = DynParams(door_damping=3.0).validate()
        table = torque_comparison(q, real, far, self.phi, self.world)
        self.assertEqual(table.shape, (len(q), 7))
        np.testing.assert_allclose(table[:, 0], real.times)
        np.testing.assert_array_equal(table[:, 1:3], real.torque)
        # Identified columns are the noise-free playback at that mean
        np.testing.assert_array_equal(table[:, 5:7], clean.torque)
        self.assertFalse(np.array_equal(table[:, 3:5], clean.torque))

        short = make_trajectory(real.torque[:10], dt=real.dt)
        self.assertEqual(len(torque_comparison(q, short, self.phi, self.phi, self.world)), 10)

        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "torque_compare.csv")
            write_torque_compare(path, table)
            rows = read_csv(path)
        self.assertEqual(rows[0], TORQUE_COMPARE_HEADER)
        self.assertEqual(len(rows), len(q) + 1)
        self.assertEqual(float(rows[1][5]), clean.torque[0, 0])

    def test_reduced_grid(self):
        q = synth_demo(self.world, math.radians(20), 1.0)
        real_set = [playback(q, self.phi, self.world)]
        grid_k = [0.0, 0.02, 0.04]
        grid_c = [0.25, 0.5, 1.0]
        costs, best = reduced_grid_cost(
            q, real_set, self.world, self.phi, ("door_stiffness", "door_damping"), (grid_k, grid_c), 10.0
        )
        self.assertEqual(costs.shape, (3, 3))
        self.assertEqual(best, (0.02, 0.5))
        self.assertEqual(costs[1, 1], 0.0)

    @unittest.skipUnless(SLOW_TESTS, "Set DROID_SLOW_TESTS=1 to run the identification experiments")
    def test_recovery(self):
        conf = ExperimentConfig.default()
        q = synth_demo(self.world, math.radians(40), 4.0)
        target = math.radians(40)
        real_set = [playback(q, self.phi, self.world)] * conf["identify"]["n_real"]
        phi_star, trace = optimize_distribution(self.phi_init, q, real_set, self.world, conf["identify"], target_angle=target)
        self.assertLessEqual(trace.rows[-1].mean_fit, 0.05 * trace.rows[0].mean_fit)
        self.assertLessEqual(trace.rows[-1].evaluations, 1800)

        # Two free parameters
        truth = self.phi.to_vector()
        fixed = {n: float(v) for n, v in zip(PARAM_NAMES, truth) if n not in ("door_stiffness", "door_damping")}
        reduced, _ = optimize_distribution(
            self.phi_init, q, real_set, self.world, conf["identify"], fixed=fixed, target_angle=target
        )
        for name in ("door_stiffness", "door_damping"):
            i = PARAM_NAMES.index(name)
            self.assertLessEqual(abs(reduced.mean[i] - truth[i]), 0.3 * truth[i])
        grid_k = np.linspace(0.0, 0.1, 50)
        grid_c = np.linspace(0.0, 2.0, 50)
        _, best = reduced_grid_cost(
            q, real_set, self.world, self.phi, ("door_stiffness", "door_damping"), (grid_k, grid_c), 10.0
        )
        self.assertLessEqual(abs(best[0] - truth[3]), 0.3 * truth[3] + grid_k[1])
        self.assertLessEqual(abs(best[1] - truth[4]), 0.3 * truth[4] + grid_c[1])

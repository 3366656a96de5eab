import unittest

import numpy as np

from PySubstructuring.decomposition import build_three_component, build_two_component, from_masks
from PySubstructuring.diffusion_operator import apply, assemble_diffusion
from PySubstructuring.exceptions import InvalidArgumentError
from PySubstructuring.grid import GridFunction, build_grid, inner_product
from PySubstructuring.hyperbolic import (
    HyperbolicState,
    init_second_level,
    integrate,
    step_regularized_hyperbolic,
    step_threelevel_weighted,
    threshold,
)
from PySubstructuring.parabolic import sample_source
from PySubstructuring.stability import EnergyFunctional, evaluate_energy

TIGHT = 1e-13


def unit(x1, x2):
    return 1.0


def source(x1, x2, t):
    return np.sin(3.0 * x1 + t) * x2


class TestSingleNode(unittest.TestCase):
    def setUp(self):
        self.grid = build_grid(1.0, 1.0, 2, 2)
        self.A = assemble_diffusion(self.grid, unit, 1.0)
        self.zero = GridFunction.zeros(self.grid)

    def test_second_level(self):
        state = init_second_level(GridFunction([1.0], self.grid), self.zero, self.A, 0.1, self.zero)
        self.assertAlmostEqual(state.y_curr.values[0], 0.92)
        self.assertEqual(state.y_prev.values[0], 1.0)
        self.assertEqual(state.n, 1)
        self.assertAlmostEqual(state.t, 0.1)

    def test_explicit_step(self):
        state = HyperbolicState(
            GridFunction([0.92], self.grid), GridFunction([1.0], self.grid), 0.1, 1
        )
        result = step_threelevel_weighted(state, self.A, 0.0, 0.1, self.zero)
        self.assertAlmostEqual(result.y_curr.values[0], 0.6928)
        self.assertEqual(result.y_prev.values[0], 0.92)
        self.assertEqual(result.n, 2)

    def test_energy_values(self):
        state = HyperbolicState(
            GridFunction([0.92], self.grid), GridFunction([1.0], self.grid), 0.1, 1
        )
        self.assertAlmostEqual(state.eta(0.1).values[0], -0.8)
        self.assertAlmostEqual(state.zeta.values[0], 0.96)
        quarter = EnergyFunctional("s_hyperbolic_weighted", self.A, 0.25, 0.1)
        half = EnergyFunctional("s_hyperbolic_weighted", self.A, 0.5, 0.1)
        self.assertAlmostEqual(evaluate_energy(quarter, state), 61.5424, places=9)
        self.assertAlmostEqual(evaluate_energy(half, state), 61.6448, places=9)


class TestInitialization(unittest.TestCase):
    def setUp(self):
        self.grid = build_grid(1.0, 1.0, 6, 6)
        self.A = assemble_diffusion(self.grid, unit, 1.0)
        rng = np.random.default_rng(4)
        self.u0 = GridFunction(rng.standard_normal(self.A.n), self.grid)
        self.v0 = GridFunction(rng.standard_normal(self.A.n), self.grid)
        self.zero = GridFunction.zeros(self.grid)

    def test_zero_displacement(self):
        state = init_second_level(self.zero, self.v0, self.A, 0.05, self.zero)
        self.assertTrue(np.allclose(state.y_curr.values, 0.05 * self.v0.values, rtol=0, atol=1e-15))

    def test_zero_step(self):
        state = init_second_level(self.u0, self.v0, self.A, 0.0, self.zero)
        self.assertTrue(np.array_equal(state.y_curr.values, self.u0.values))
        with self.assertRaises(InvalidArgumentError):
            state.eta(0.0)

    def test_zero_step_repeats_difference(self):
        state = HyperbolicState(self.v0, self.u0, 0.0, 1)
        result = step_threelevel_weighted(state, self.A, 0.5, 0.0, self.zero)
        expected = 2.0 * self.v0.values - self.u0.values
        self.assertTrue(np.allclose(result.y_curr.values, expected, rtol=0, atol=1e-14))

    def test_state_validation(self):
        with self.assertRaises(InvalidArgumentError):
            HyperbolicState(self.u0, self.v0, 0.0, 0)
        other = GridFunction.zeros(build_grid(1.0, 1.0, 4, 4))
        with self.assertRaises(InvalidArgumentError):
            HyperbolicState(self.u0, other, 0.1, 1)
        with self.assertRaises(InvalidArgumentError):
            init_second_level(self.u0, self.v0, self.A, -0.1, self.zero)


class TestSchemes(unittest.TestCase):
    def setUp(self):
        self.grid = build_grid(1.0, 1.0, 8, 8)
        self.A = assemble_diffusion(self.grid, lambda x1, x2: 1.0 + x1 * x2, 1.0)
        rng = np.random.default_rng(12)
        self.u0 = GridFunction(rng.standard_normal(self.A.n), self.grid)
        self.v0 = GridFunction(rng.standard_normal(self.A.n), self.grid)
        self.dec = build_two_component(self.grid, 0.5)

    def trajectory(self, kind, sigma, tau, steps, f=None, dec=None):
        return list(
            integrate(
                self.u0, self.v0, self.A, kind, sigma, tau, steps, f, dec, rel_tol=TIGHT
            )
        )

    def test_levels(self):
        states = self.trajectory("weighted", 0.5, 0.01, 6)
        self.assertEqual([s.n for s in states], [1, 2, 3, 4, 5, 6])
        self.assertEqual(states[-1].t, 6 * 0.01)
        self.assertTrue(np.array_equal(states[0].y_prev.values, self.u0.values))

    def test_weighted_conservation(self):
        tau = 0.02
        for sigma in (0.25, 0.5):
            fn = EnergyFunctional("s_hyperbolic_weighted", self.A, sigma, tau)
            energies = [evaluate_energy(fn, s) for s in self.trajectory("weighted", sigma, tau, 50)]
            drift = max(abs(e - energies[0]) for e in energies) / energies[0]
            self.assertLessEqual(drift, 1e-9)

    def test_regularized_conservation(self):
        tau = 0.02
        cases = ((self.dec, 0.5), (build_three_component(self.grid, 0.5, 0), 0.75))
        for dec, sigma in cases:
            fn = EnergyFunctional("s_hyperbolic_regularized", self.A, sigma, tau, dec)
            energies = [
                evaluate_energy(fn, s) for s in self.trajectory("regularized", sigma, tau, 50, dec=dec)
            ]
            drift = max(abs(e - energies[0]) for e in energies) / energies[0]
            self.assertLessEqual(drift, 1e-9)

    def test_energy_identity_with_source(self):
        tau = 0.02
        fn = EnergyFunctional("s_hyperbolic_weighted", self.A, 0.5, tau)
        states = self.trajectory("weighted", 0.5, tau, 20, source)
        for before, after in zip(states, states[1:]):
            phi = sample_source(source, self.grid, before.t)
            work = tau * inner_product(phi, apply(self.A, before.eta(tau) + after.eta(tau)))
            change = evaluate_energy(fn, after) - evaluate_energy(fn, before)
            self.assertAlmostEqual(change, work, delta=1e-9 * evaluate_energy(fn, before))

    def test_single_component_matches_weighted(self):
        whole = from_masks(self.grid, [np.ones(self.A.n)])
        state = init_second_level(self.u0, self.v0, self.A, 0.03, GridFunction.zeros(self.grid))
        phi = sample_source(source, self.grid, state.t)
        weighted = step_threelevel_weighted(state, self.A, 0.7, 0.03, phi, TIGHT)
        regularized = step_regularized_hyperbolic(state, self.A, whole, 0.7, 0.03, phi, TIGHT)
        scale = np.max(np.abs(weighted.y_curr.values))
        difference = np.max(np.abs(weighted.y_curr.values - regularized.y_curr.values))
        self.assertLessEqual(difference, 1e-9 * scale)

    def test_time_reversal(self):
        tau = 0.02
        zero = GridFunction.zeros(self.grid)
        first = init_second_level(self.u0, self.v0, self.A, tau, zero)
        for name, advance in (
            ("weighted", lambda s: step_threelevel_weighted(s, self.A, 0.5, tau, zero, TIGHT)),
            (
                "regularized",
                lambda s: step_regularized_hyperbolic(s, self.A, self.dec, 0.5, tau, zero, TIGHT),
            ),
        ):
            second = advance(first)
            back = advance(HyperbolicState(second.y_prev, second.y_curr, second.t, 2))
            error = np.max(np.abs(back.y_curr.values - first.y_prev.values))
            self.assertLessEqual(error, 1e-9 * np.max(np.abs(self.u0.values)), name)

    def test_threshold_warning(self):
        self.assertEqual(threshold("weighted"), 0.25)
        self.assertEqual(threshold("regularized", self.dec), 0.5)
        with self.assertLogs("PySubstructuring.hyperbolic", level="WARNING"):
            next(integrate(self.u0, self.v0, self.A, "regularized", 0.3, 0.01, 3, None, self.dec))

    def test_invalid_scheme(self):
        with self.assertRaises(InvalidArgumentError):
            next(integrate(self.u0, self.v0, self.A, "factorized", 0.5, 0.01, 3))
        with self.assertRaises(InvalidArgumentError):
            next(integrate(self.u0, self.v0, self.A, "regularized", 0.5, 0.01, 3))


if __name__ == "__main__":
    unittest.main()

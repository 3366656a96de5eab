import math
import unittest
from unittest.mock import patch

import numpy as np

from PySubstructuring.diffusion_operator import (
    apply,
    assemble_diffusion,
    diffusion_expression,
    energy_norm,
    identity_expression,
    masked_expression,
    shifted_expression,
    solve_spd,
    spectral_bound_check,
    spectral_lower_bound,
)
from PySubstructuring.exceptions import (
    CoefficientError,
    ContractError,
    InvalidArgumentError,
    NoConvergenceError,
    SizeError,
)
from PySubstructuring.grid import GridFunction, build_grid, inner_product, sample


def unit(x1, x2):
    return 1.0


def variable(x1, x2):
    return 1.0 + x1 * x2


class TestAssembly(unittest.TestCase):
    def test_single_node(self):
        A = assemble_diffusion(build_grid(1.0, 1.0, 2, 2), unit, 1.0)
        self.assertEqual(A.matrix.shape, (1, 1))
        self.assertAlmostEqual(A.matrix[0, 0], 16.0)

    def test_discrete_eigenfunction(self):
        grid = build_grid(1.0, 1.0, 40, 40)
        A = assemble_diffusion(grid, unit, 1.0)
        u = sample(lambda x1, x2: np.sin(math.pi * x1) * np.sin(math.pi * x2), grid)
        delta = 2 * 4.0 / grid.h1**2 * math.sin(math.pi * grid.h1 / 2.0) ** 2
        residual = apply(A, u) - delta * u
        self.assertLess(np.max(np.abs(residual.values)), 1e-10 * delta)

    def test_exact_symmetry(self):
        A = assemble_diffusion(build_grid(1.0, 2.0, 9, 7), variable, 1.0)
        difference = A.matrix - A.matrix.T
        self.assertEqual(abs(difference).max(), 0.0)

    def test_coefficient_below_kappa(self):
        grid = build_grid(1.0, 1.0, 4, 4)
        with self.assertRaises(CoefficientError) as context:
            assemble_diffusion(grid, lambda x1, x2: 0.5 + x1, 1.0)
        self.assertIn("below kappa", str(context.exception))

    def test_kappa_must_be_positive(self):
        with self.assertRaises(InvalidArgumentError):
            assemble_diffusion(build_grid(1.0, 1.0, 4, 4), unit, 0.0)


class TestExpressions(unittest.TestCase):
    def setUp(self):
        self.grid = build_grid(1.0, 1.0, 6, 6)
        self.A = assemble_diffusion(self.grid, variable, 1.0)
        self.dense = self.A.matrix.toarray()
        rng = np.random.default_rng(7)
        self.u = GridFunction(rng.standard_normal(self.A.n), self.grid)
        self.mask = rng.uniform(0.0, 1.0, self.A.n)
        self.mask[:5] = 0.0

    def test_flags(self):
        E = identity_expression(self.A)
        A = diffusion_expression(self.A)
        self.assertTrue((E + 0.1 * A).is_spd)
        self.assertTrue(A.is_symmetric)
        self.assertFalse(masked_expression(self.A, self.mask).is_symmetric)
        self.assertFalse((E - 10.0 * A).is_spd)
        self.assertIsNotNone(shifted_expression(self.A, 0.5, self.mask).resolvent)

    def test_products_are_capped_at_two_factors(self):
        A = diffusion_expression(self.A)
        A @ A
        with self.assertRaises(InvalidArgumentError):
            A @ A @ A

    def test_sum_of_products(self):
        A = diffusion_expression(self.A)
        D = A + 0.25 * (A @ A)
        expected = self.dense @ self.u.values + 0.25 * self.dense @ (self.dense @ self.u.values)
        self.assertTrue(np.allclose(apply(D, self.u).values, expected, rtol=1e-13, atol=0.0))

    def test_masked_application(self):
        result = apply(masked_expression(self.A, self.mask), self.u).values
        self.assertTrue(np.allclose(result, self.mask * (self.dense @ self.u.values)))
        self.assertTrue(np.all(result[:5] == 0.0))


class TestSolveSpd(unittest.TestCase):
    def setUp(self):
        self.grid = build_grid(1.0, 1.0, 8, 8)
        self.A = assemble_diffusion(self.grid, variable, 1.0)
        self.dense = self.A.matrix.toarray()
        rng = np.random.default_rng(3)
        self.rhs = GridFunction(rng.standard_normal(self.A.n), self.grid)
        self.mask = rng.uniform(0.0, 1.0, self.A.n)
        self.mask[::4] = 0.0

    def test_shifted_operator(self):
        x = solve_spd(shifted_expression(self.A, 0.3), self.rhs, rel_tol=1e-13)
        expected = np.linalg.solve(np.eye(self.A.n) + 0.3 * self.dense, self.rhs.values)
        self.assertLess(np.max(np.abs(x.values - expected)), 1e-9 * np.max(np.abs(expected)))

    def test_masked_resolvent(self):
        op = shifted_expression(self.A, 0.7, self.mask)
        x = solve_spd(op, self.rhs, rel_tol=1e-13)
        matrix = np.eye(self.A.n) + 0.7 * self.mask[:, None] * self.dense
        expected = np.linalg.solve(matrix, self.rhs.values)
        self.assertLess(np.max(np.abs(x.values - expected)), 1e-9 * np.max(np.abs(expected)))
        # rows off the mask are copied
        self.assertTrue(np.all(x.values[::4] == self.rhs.values[::4]))

    def test_zero_rhs(self):
        x = solve_spd(shifted_expression(self.A, 1.0), GridFunction.zeros(self.grid))
        self.assertTrue(np.all(x.values == 0.0))

    def test_non_spd_rejected(self):
        with self.assertRaises(ContractError):
            solve_spd(shifted_expression(self.A, -10.0), self.rhs)
        with self.assertRaises(ContractError):
            solve_spd(masked_expression(self.A, self.mask), self.rhs)

    def test_no_convergence(self):
        # cg reporting an exhausted iteration budget
        stalled = (np.zeros(self.A.n), 10 * self.A.n)
        with patch("scipy.sparse.linalg.cg", return_value=stalled):
            with self.assertRaises(NoConvergenceError) as context:
                solve_spd(shifted_expression(self.A, 1.0), self.rhs)
        self.assertAlmostEqual(context.exception.residual, 1.0)
        self.assertIn("did not converge", str(context.exception))


class TestEnergyNorm(unittest.TestCase):
    def setUp(self):
        self.grid = build_grid(1.0, 1.0, 6, 6)
        self.A = assemble_diffusion(self.grid, unit, 1.0)
        self.u = GridFunction(np.random.default_rng(1).standard_normal(25), self.grid)

    def test_a_norm(self):
        expected = math.sqrt(inner_product(apply(self.A, self.u), self.u))
        self.assertAlmostEqual(energy_norm(self.A, self.u), expected, places=12)

    def test_zero_form_clamps(self):
        E = identity_expression(self.A)
        self.assertEqual(energy_norm(E - E, self.u), 0.0)

    def test_negative_form_rejected(self):
        with self.assertRaises(ContractError):
            energy_norm(-1.0 * diffusion_expression(self.A), self.u)

    def test_non_symmetric_rejected(self):
        with self.assertRaises(ContractError):
            energy_norm(masked_expression(self.A, np.full(25, 0.5)), self.u)


class TestSpectralBound(unittest.TestCase):
    def test_unit_coefficient_equality(self):
        for n in (4, 8, 16):
            A = assemble_diffusion(build_grid(1.0, 1.0, n, n), unit, 1.0)
            lambda_min, bound = spectral_bound_check(A)
            self.assertAlmostEqual(lambda_min, bound, delta=1e-9)

    def test_rectangle_variable_coefficient(self):
        A = assemble_diffusion(build_grid(1.0, 2.0, 10, 12), variable, 1.0)
        lambda_min, bound = spectral_bound_check(A)
        self.assertGreaterEqual(lambda_min, bound - 1e-9)
        self.assertEqual(bound, spectral_lower_bound(A))

    def test_size_cap(self):
        A = assemble_diffusion(build_grid(1.0, 1.0, 66, 66), unit, 1.0)
        with self.assertRaises(SizeError):
            spectral_bound_check(A)


if __name__ == "__main__":
    unittest.main()

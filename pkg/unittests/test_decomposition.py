import unittest

import numpy as np

from PySubstructuring.decomposition import (
    build_decomposition,
    build_three_component,
    build_two_component,
    from_masks,
    masked_operator,
    verify_partition,
)
from PySubstructuring.diffusion_operator import apply, assemble_diffusion
from PySubstructuring.exceptions import (
    AlignmentError,
    DegenerateDecompositionError,
    InvalidArgumentError,
    OverlapCollisionError,
)
from PySubstructuring.grid import GridFunction, build_grid


def unit(x1, x2):
    return 1.0


class TestTwoComponent(unittest.TestCase):
    def setUp(self):
        self.grid = build_grid(1.0, 1.0, 8, 8)
        self.dec = build_two_component(self.grid, 0.5)

    def test_interface_count_coarse(self):
        self.assertEqual(self.dec.p, 2)
        self.assertEqual(int(np.count_nonzero(self.dec.interface)), 13)
        self.assertEqual(int(np.count_nonzero(self.dec.crossing)), 1)

    def test_interface_count_basic_grid(self):
        dec = build_two_component(build_grid(1.0, 1.0, 40, 40), 0.5)
        self.assertEqual(int(np.count_nonzero(dec.interface)), 77)

    def test_interface_count_formula(self):
        for N, hhat in ((16, 0.25), (12, 0.25), (40, 0.25), (24, 1.0 / 6.0)):
            lines = round(1.0 / hhat) - 1
            dec = build_two_component(build_grid(1.0, 1.0, N, N), hhat)
            expected = 2 * lines * (N - 1) - lines**2
            self.assertEqual(int(np.count_nonzero(dec.interface)), expected)

    def test_partition_is_exact(self):
        chi1, chi2 = self.dec.masks
        self.assertTrue(np.all(chi1 + chi2 == 1.0))
        self.assertTrue(self.dec.is_crisp)

    def test_crisp_masks_idempotent_and_orthogonal(self):
        chi1, chi2 = self.dec.masks
        self.assertTrue(np.array_equal(chi1 * chi1, chi1))
        self.assertTrue(np.array_equal(chi2 * chi2, chi2))
        self.assertTrue(np.all(chi1 * chi2 == 0.0))

    def test_alignment_errors(self):
        with self.assertRaises(AlignmentError):
            build_two_component(self.grid, 0.3)
        with self.assertRaises(AlignmentError):
            build_two_component(build_grid(1.0, 1.0, 12, 12), 0.75)

    def test_degenerate(self):
        with self.assertRaises(DegenerateDecompositionError):
            build_two_component(self.grid, 1.0)

    def test_lines_along_one_axis(self):
        dec = build_two_component(build_grid(1.0, 2.0, 4, 8), 1.0)
        self.assertEqual(int(np.count_nonzero(dec.interface)), 3)
        self.assertEqual(int(np.count_nonzero(dec.crossing)), 0)


class TestThreeComponent(unittest.TestCase):
    def setUp(self):
        self.grid = build_grid(1.0, 1.0, 8, 8)

    def test_crisp(self):
        dec = build_three_component(self.grid, 0.5, 0)
        counts = dec.class_counts()
        self.assertEqual(counts["interface_cross"], 1)
        self.assertEqual(counts["interface_segment"], 12)
        self.assertTrue(dec.is_crisp)
        self.assertEqual(dec.mask(3)[self.grid.flat_index(4, 4)], 1.0)
        total = dec.masks[0] + dec.masks[1] + dec.masks[2]
        self.assertTrue(np.all(total == 1.0))

    def test_overlap_band(self):
        dec = build_three_component(self.grid, 0.5, 2)
        self.assertEqual(int(np.count_nonzero(dec.crossing)), 9)
        chi1, chi2, chi3 = dec.masks
        self.assertTrue(np.all((chi2 + chi3)[dec.interface] == 1.0))
        self.assertTrue(np.all(chi1[~dec.interface] == 1.0))
        self.assertFalse(dec.is_crisp)
        # linear ramp: d / (w + 1) at distance d from the cross
        self.assertAlmostEqual(chi2[self.grid.flat_index(5, 4)], 1.0 / 3.0)
        self.assertAlmostEqual(chi2[self.grid.flat_index(4, 2)], 2.0 / 3.0)
        self.assertEqual(chi2[self.grid.flat_index(4, 1)], 1.0)
        self.assertEqual(chi3[self.grid.flat_index(4, 4)], 1.0)

    def test_overlap_report(self):
        report = verify_partition(build_three_component(self.grid, 0.5, 2))
        self.assertTrue(report.passed)
        low, high = report.band_weight_range
        self.assertGreater(low, 0.0)
        self.assertLess(high, 1.0)

    def test_overlap_collisions(self):
        with self.assertRaises(OverlapCollisionError):
            build_three_component(self.grid, 0.5, 4)
        with self.assertRaises(OverlapCollisionError):
            build_three_component(build_grid(1.0, 1.0, 16, 16), 0.25, 2)
        build_three_component(build_grid(1.0, 1.0, 16, 16), 0.25, 1)

    def test_negative_overlap(self):
        with self.assertRaises(InvalidArgumentError):
            build_three_component(self.grid, 0.5, -1)

    def test_build_by_name(self):
        self.assertEqual(build_decomposition(self.grid, 0.5, "two").p, 2)
        self.assertEqual(build_decomposition(self.grid, 0.5, "three").splitting, "three")
        dec = build_decomposition(self.grid, 0.5, "three-overlap", 1)
        self.assertEqual(dec.overlap_halfwidth, 1)
        with self.assertRaises(InvalidArgumentError):
            build_decomposition(self.grid, 0.5, "four")


class TestMaskedOperator(unittest.TestCase):
    def setUp(self):
        self.grid = build_grid(1.0, 1.0, 8, 8)
        self.A = assemble_diffusion(self.grid, lambda x1, x2: 1.0 + x1, 1.0)
        rng = np.random.default_rng(11)
        self.u = GridFunction(rng.standard_normal(self.A.n), self.grid)

    def test_sum_reproduces_operator(self):
        full = apply(self.A, self.u).values
        for dec in (
            build_two_component(self.grid, 0.5),
            build_three_component(self.grid, 0.5, 0),
            build_three_component(self.grid, 0.5, 2),
        ):
            total = np.zeros(self.A.n)
            for alpha in range(1, dec.p + 1):
                total += apply(masked_operator(self.A, dec, alpha), self.u).values
            self.assertLessEqual(np.max(np.abs(total - full)), 1e-14 * np.max(np.abs(full)))

    def test_indicator_support(self):
        dec = build_two_component(self.grid, 0.5)
        full = apply(self.A, self.u).values
        masked = apply(masked_operator(self.A, dec, 2), self.u).values
        self.assertTrue(np.array_equal(masked[dec.interface], full[dec.interface]))
        self.assertTrue(np.all(masked[~dec.interface] == 0.0))

    def test_basic_grid_support_size(self):
        grid = build_grid(1.0, 1.0, 40, 40)
        A = assemble_diffusion(grid, lambda x1, x2: 1.0, 1.0)
        dec = build_two_component(grid, 0.5)
        u = GridFunction(np.random.default_rng(5).uniform(1.0, 2.0, A.n), grid)
        masked = apply(masked_operator(A, dec, 2), u).values
        self.assertEqual(int(np.count_nonzero(masked)), 77)

    def test_index_out_of_range(self):
        dec = build_two_component(self.grid, 0.5)
        with self.assertRaises(InvalidArgumentError):
            masked_operator(self.A, dec, 0)
        with self.assertRaises(InvalidArgumentError):
            masked_operator(self.A, dec, 3)


class TestVerifyPartition(unittest.TestCase):
    def test_built_decomposition(self):
        report = verify_partition(build_two_component(build_grid(1.0, 1.0, 8, 8), 0.5))
        self.assertEqual(report.max_deviation, 0.0)
        self.assertEqual(report.min_weight, 0.0)
        self.assertEqual(report.counts["interface"], 13)
        self.assertEqual(report.counts["subdomain_interior"], 36)

    def test_corrupted_mask(self):
        grid = build_grid(1.0, 1.0, 8, 8)
        chi1, chi2 = build_two_component(grid, 0.5).masks
        corrupted = chi1.copy()
        corrupted[0] += 0.1
        with self.assertLogs("PySubstructuring.decomposition", level="WARNING"):
            report = verify_partition(from_masks(grid, [corrupted, chi2]))
        self.assertAlmostEqual(report.max_deviation, 0.1)
        self.assertFalse(report.passed)

    def test_from_masks_shape(self):
        grid = build_grid(1.0, 1.0, 8, 8)
        with self.assertRaises(InvalidArgumentError):
            from_masks(grid, [np.ones(3)])


if __name__ == "__main__":
    unittest.main()

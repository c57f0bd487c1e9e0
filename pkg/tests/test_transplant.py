import unittest

import numpy as np

from eigen import Spectrum, dense_eigen_oracle, lowest_eigenpairs
from field import ChargeMode, FieldSpec, Pattern, SplitLine, make_symmetric_field, perturb_block
from geometry import build_gww_pair
from grid import grid_for_subdivisions
from operators import assemble_density_operator, assemble_laplacian, assemble_schrodinger
from transplant import (
    compare_spectra,
    derive_transplantation,
    sign_twisted,
    transplant_matrix,
    verify_intertwining,
)


class DerivationTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.gww_a, cls.gww_b = build_gww_pair(2.0)
        cls.tmap = derive_transplantation(cls.gww_a, cls.gww_b, 0.5)

    def test_coefficients_are_signed_incidences(self):
        matrix = self.tmap.matrix
        self.assertEqual(matrix.shape, (7, 7))
        self.assertTrue(np.all(np.isin(matrix, (-1, 0, 1))))
        self.assertEqual(self.tmap.nonzeros_per_row(), [3] * 7)
        self.assertEqual(self.tmap.nonzeros_per_column(), [3] * 7)
        self.assertNotEqual(round(np.linalg.det(matrix)), 0)

    def test_sign_twist_leaves_an_incidence_pattern(self):
        twisted = sign_twisted(self.tmap, self.gww_a, self.gww_b)
        self.assertTrue(np.all(np.isin(twisted, (0, 1))))

    def test_finer_coarse_grid_gives_same_map(self):
        finer = derive_transplantation(self.gww_a, self.gww_b, 0.25)
        np.testing.assert_array_equal(finer.matrix, self.tmap.matrix)

    def test_domain_with_itself_gives_identity(self):
        tmap = derive_transplantation(self.gww_a, self.gww_a, 0.5)
        np.testing.assert_array_equal(tmap.matrix, np.eye(7, dtype=int))

    def test_transports_are_lattice_isometries(self):
        for target, source, placement in self.tmap.transports:
            self.assertIn(placement.determinant, (-1, 1))
            self.assertEqual(self.tmap.block_transport(target, source), placement)
        zero = next(
            (self.tmap.block_ids[i], self.tmap.block_ids[j]) for i, j in zip(*np.nonzero(self.tmap.matrix == 0))
        )
        with self.assertRaises(KeyError):
            self.tmap.block_transport(*zero)

    def test_text_and_dict(self):
        lines = self.tmap.to_text().splitlines()
        self.assertEqual(lines[0], "# GWW_A -> GWW_B")
        self.assertEqual(len(lines), 9)
        data = self.tmap.to_dict()
        self.assertEqual(data["blocks"], list("ABCDEFG"))
        self.assertEqual(len(data["coeffs"]), 7)

    def test_mismatched_domains_are_rejected(self):
        other_a, _ = build_gww_pair(1.0)
        with self.assertRaises(ValueError):
            derive_transplantation(other_a, self.gww_b, 0.5)


class IntertwiningTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.gww_a, cls.gww_b = build_gww_pair(2.0)
        cls.tmap = derive_transplantation(cls.gww_a, cls.gww_b, 0.5)

    def operators(self, spec, n, assemble, perturb=None):
        grid_a = grid_for_subdivisions(self.gww_a, n)
        grid_b = grid_for_subdivisions(self.gww_b, n)
        field_a = make_symmetric_field(spec, self.gww_a)
        field_b = make_symmetric_field(spec, self.gww_b)
        if perturb is not None:
            field_b = perturb_block(field_b, *perturb)
        return assemble(grid_a, field_a), assemble(grid_b, field_b)

    def test_laplacian_intertwines_exactly(self):
        for n in (8, 16):
            op_a = assemble_laplacian(grid_for_subdivisions(self.gww_a, n))
            op_b = assemble_laplacian(grid_for_subdivisions(self.gww_b, n))
            report = verify_intertwining(self.tmap, op_a, op_b)
            self.assertEqual(report.residual, 0.0)
            self.assertTrue(report.exact)

    def test_reference_patterns_intertwine_exactly(self):
        for pattern in Pattern:
            for n in (8, 16):
                op_a, op_b = self.operators(FieldSpec.split(1.0, 2.0, pattern), n, assemble_density_operator)
                self.assertEqual(verify_intertwining(self.tmap, op_a, op_b).residual, 0.0, (pattern, n))

    def test_homogeneous_density_intertwines_exactly(self):
        op_a, op_b = self.operators(FieldSpec.homogeneous(3.0), 8, assemble_density_operator)
        self.assertEqual(verify_intertwining(self.tmap, op_a, op_b).residual, 0.0)

    def test_linear_potential_intertwines_exactly(self):
        spec = FieldSpec.electric(5.0, direction=(0.6, 0.8), anchor=(0.5, 0.25))
        for n in (8, 16):
            op_a, op_b = self.operators(spec, n, assemble_schrodinger)
            self.assertEqual(verify_intertwining(self.tmap, op_a, op_b).residual, 0.0)

    def test_local_point_charges_intertwine_exactly(self):
        spec = FieldSpec.point_charges(1.0, ChargeMode.LOCAL, cutoff=1 / 16)
        op_a, op_b = self.operators(spec, 16, assemble_schrodinger)
        self.assertEqual(verify_intertwining(self.tmap, op_a, op_b).residual, 0.0)

    def test_parity_class_density_does_not_intertwine(self):
        op_a, op_b = self.operators(FieldSpec.parity_classes(1.0, 2.0), 8, assemble_density_operator)
        self.assertGreater(verify_intertwining(self.tmap, op_a, op_b).residual, 0.0)

    def test_coulomb_charges_do_not_intertwine(self):
        spec = FieldSpec.point_charges(1.0, ChargeMode.COULOMB, cutoff=1 / 16)
        op_a, op_b = self.operators(spec, 8, assemble_schrodinger)
        self.assertGreater(verify_intertwining(self.tmap, op_a, op_b).residual, 0.0)

    def test_perturbed_block_breaks_intertwining(self):
        op_a, op_b = self.operators(FieldSpec.homogeneous(), 8, assemble_density_operator, perturb=("D", 1.1))
        self.assertGreater(verify_intertwining(self.tmap, op_a, op_b).residual, 0.0)

    def test_transplant_carries_eigenvectors(self):
        grid_a = grid_for_subdivisions(self.gww_a, 8)
        grid_b = grid_for_subdivisions(self.gww_b, 8)
        spectrum_a = dense_eigen_oracle(assemble_laplacian(grid_a))
        op_b = assemble_laplacian(grid_b)
        moved = transplant_matrix(self.tmap, grid_a, grid_b) @ spectrum_a.vector(0)
        np.testing.assert_allclose(op_b.matvec(moved), spectrum_a.eigenvalues[0] * moved, atol=1e-8)

    def test_grid_sizes_must_match(self):
        op_a = assemble_laplacian(grid_for_subdivisions(self.gww_a, 8))
        op_b = assemble_laplacian(grid_for_subdivisions(self.gww_b, 16))
        with self.assertRaises(ValueError):
            verify_intertwining(self.tmap, op_a, op_b)


class SpectralAgreementTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.gww_a, cls.gww_b = build_gww_pair(2.0)
        cls.tmap = derive_transplantation(cls.gww_a, cls.gww_b, 0.5)

    def solve_pair(self, spec, n, assemble, k=10, perturb=None):
        ops = []
        for domain in (self.gww_a, self.gww_b):
            field = make_symmetric_field(spec, domain)
            if perturb is not None and domain is self.gww_b:
                field = perturb_block(field, *perturb)
            ops.append(assemble(grid_for_subdivisions(domain, n), field))
        report = verify_intertwining(self.tmap, *ops)
        spectra = [lowest_eigenpairs(op, k) for op in ops]
        return report, spectra

    def assert_isospectral(self, spec, assemble):
        for n in (8, 16, 32):
            report, (spectrum_a, spectrum_b) = self.solve_pair(spec, n, assemble)
            self.assertEqual(report.residual, 0.0, n)
            self.assertLessEqual(compare_spectra(spectrum_a, spectrum_b).max_rel_diff, 1e-10, n)

    def test_pattern_drum_is_isospectral(self):
        spec = FieldSpec.split(1.0, 2.0, Pattern.SPLIT_DIAGONAL, split_line=SplitLine.LIGHT)
        self.assert_isospectral(spec, assemble_density_operator)

    def test_linear_potential_is_isospectral(self):
        # anchored at x = leg so the potential, and every eigenvalue, stays positive
        spec = FieldSpec.electric(5.0, direction=(1.0, 0.0), anchor=(2.0, 0.0))
        self.assert_isospectral(spec, assemble_schrodinger)

    def test_point_charges_are_isospectral(self):
        spec = FieldSpec.point_charges(-1.0, ChargeMode.LOCAL, cutoff=0.25)
        self.assert_isospectral(spec, assemble_schrodinger)

    def test_perturbed_density_splits_the_ground_state(self):
        report, (spectrum_a, spectrum_b) = self.solve_pair(
            FieldSpec.homogeneous(), 32, assemble_density_operator, k=1, perturb=("D", 1.1)
        )
        self.assertGreater(report.residual, 0.0)
        e_a, e_b = spectrum_a.eigenvalues[0], spectrum_b.eigenvalues[0]
        self.assertGreater(abs(e_a - e_b) / max(abs(e_a), abs(e_b)), 1e-6)

    def test_linear_potential_along_the_second_leg(self):
        spec = FieldSpec.electric(5.0, direction=(0.0, 1.0), anchor=(0.0, 0.0))
        report, (spectrum_a, spectrum_b) = self.solve_pair(spec, 64, assemble_schrodinger, k=1)
        self.assertEqual(report.residual, 0.0)
        for spectrum in (spectrum_a, spectrum_b):
            self.assertAlmostEqual(spectrum.eigenvalues[0], -1.21321, delta=1e-4)
            self.assertAlmostEqual(spectrum.eigenvalues[0], -1.21302, delta=1e-2)
        self.assertLessEqual(compare_spectra(spectrum_a, spectrum_b).max_rel_diff, 1e-10)


class CompareSpectraTests(unittest.TestCase):
    def test_identical_spectra(self):
        spectrum = Spectrum(eigenvalues=np.array([1.0, 2.0, 3.0]))
        result = compare_spectra(spectrum, spectrum)
        self.assertEqual((result.max_abs_diff, result.max_rel_diff, result.k), (0.0, 0.0, 3))

    def test_differences(self):
        result = compare_spectra(
            Spectrum(eigenvalues=np.array([1.0, 2.0])),
            Spectrum(eigenvalues=np.array([1.0, 2.5])),
        )
        self.assertEqual(result.max_abs_diff, 0.5)
        self.assertEqual(result.max_rel_diff, 0.2)

    def test_length_mismatch(self):
        with self.assertRaises(ValueError):
            compare_spectra(Spectrum(eigenvalues=np.array([1.0])), Spectrum(eigenvalues=np.array([1.0, 2.0])))

    def test_gww_pair_is_isospectral_on_the_grid(self):
        gww_a, gww_b = build_gww_pair(2.0)
        spectra = [dense_eigen_oracle(assemble_laplacian(grid_for_subdivisions(d, 8))) for d in (gww_a, gww_b)]
        self.assertLess(compare_spectra(*spectra).max_rel_diff, 1e-10)


if __name__ == "__main__":
    unittest.main()

import math
import unittest

import numpy as np

from geometry import (
    EdgeKind,
    FoldLine,
    LineKind,
    Parity,
    build_gww_pair,
    build_square,
    fold_tree_path,
    locate,
    pairwise_vertex_distances,
    reflect_across,
    to_text,
)


class GwwPairTests(unittest.TestCase):
    def setUp(self):
        self.gww_a, self.gww_b = build_gww_pair(2.0)

    def test_each_domain_has_seven_blocks_and_area_fourteen(self):
        for domain in (self.gww_a, self.gww_b):
            self.assertEqual(len(domain.blocks), 7)
            self.assertEqual(domain.area, 14.0)

    def test_parity_classes(self):
        for domain in (self.gww_a, self.gww_b):
            classes = domain.parity_classes()
            self.assertEqual(classes[Parity.EVEN], ("A", "C", "E"))
            self.assertEqual(classes[Parity.ODD], ("B", "D", "F", "G"))

    def test_fold_graph_is_a_tree(self):
        gww_a, _ = build_gww_pair(1.0)
        self.assertEqual(len(gww_a.folds), 6)
        reached = {"A"}
        changed = True
        while changed:
            changed = False
            for fold in gww_a.folds:
                if fold.parent in reached and fold.child not in reached:
                    reached.add(fold.child)
                    changed = True
        self.assertEqual(reached, set(gww_a.block_ids))

    def test_every_fold_relates_placements_by_its_reflection(self):
        for domain in (self.gww_a, self.gww_b):
            for fold in domain.folds:
                parent = domain.block(fold.parent).placement
                child = domain.block(fold.child).placement
                self.assertEqual(parent.reflected(fold.line), child)

    def test_folds_are_shared_edges(self):
        for domain in (self.gww_a, self.gww_b):
            for fold in domain.folds:
                parent = set(domain.block(fold.parent).unit_vertices())
                child = set(domain.block(fold.child).unit_vertices())
                self.assertEqual(len(parent & child), 2)

    def test_equal_perimeter_but_not_isometric(self):
        self.assertAlmostEqual(self.gww_a.perimeter, self.gww_b.perimeter, places=12)
        self.assertNotEqual(
            pairwise_vertex_distances(self.gww_a),
            pairwise_vertex_distances(self.gww_b),
        )

    def test_non_positive_leg_is_rejected(self):
        with self.assertRaises(ValueError):
            build_gww_pair(0.0)
        with self.assertRaises(ValueError):
            build_gww_pair(-1.0)

    def test_path_composition_matches_parity(self):
        for domain in (self.gww_a, self.gww_b):
            for block in domain.blocks:
                path = fold_tree_path(domain, block.id)
                placement = domain.block("A").placement
                for fold in path:
                    placement = placement.reflected(fold.line)
                self.assertEqual(placement, block.placement)
                expected = 1 if len(path) % 2 == 0 else -1
                self.assertEqual(placement.determinant, expected)

    def test_to_text_lists_blocks_and_folds(self):
        text = to_text(self.gww_a)
        lines = text.strip().splitlines()
        self.assertTrue(lines[0].startswith("# GWW_A"))
        self.assertEqual(lines[1].split()[:4], ["A", "+1", "0", "0"])
        self.assertEqual(sum(1 for line in lines if line.startswith("fold ")), 6)


class LocateTests(unittest.TestCase):
    def setUp(self):
        self.gww_a, self.gww_b = build_gww_pair(2.0)

    def centroid(self, domain, block_id):
        block = domain.block(block_id)
        return block.placement.apply((1 / 3, 1 / 3)) * domain.leg

    def test_centroid_of_block_a(self):
        location = locate(self.gww_a, (2 / 3, 2 / 3))
        self.assertEqual(location.block_id, "A")
        np.testing.assert_allclose(location.reference_point, (2 / 3, 2 / 3))

    def test_centroid_of_every_block_maps_to_reference_centroid(self):
        for domain in (self.gww_a, self.gww_b):
            for block_id in domain.block_ids:
                location = locate(domain, self.centroid(domain, block_id))
                self.assertEqual(location.block_id, block_id)
                np.testing.assert_allclose(location.reference_point, (2 / 3, 2 / 3), atol=1e-12)

    def test_far_point_is_outside(self):
        self.assertIsNone(locate(self.gww_a, (100.0, 100.0)))
        self.assertIsNone(locate(self.gww_b, (-50.0, 3.0)))

    def test_shared_edge_goes_to_lower_id(self):
        for domain in (self.gww_a, self.gww_b):
            for fold in domain.folds:
                (x0, y0), (x1, y1) = sorted(
                    set(domain.block(fold.parent).unit_vertices()) & set(domain.block(fold.child).unit_vertices())
                )
                midpoint = ((x0 + x1) / 2 * domain.leg, (y0 + y1) / 2 * domain.leg)
                location = locate(domain, midpoint)
                self.assertEqual(location.block_id, min(fold.parent, fold.child))

    def test_monte_carlo_area(self):
        rng = np.random.default_rng(7)
        x0, y0, x1, y1 = self.gww_a.bounding_box()
        samples = 20000
        points = np.column_stack([rng.uniform(x0, x1, samples), rng.uniform(y0, y1, samples)])
        inside = sum(locate(self.gww_a, p) is not None for p in points)
        estimate = inside / samples * (x1 - x0) * (y1 - y0)
        self.assertAlmostEqual(estimate, 14.0, delta=0.6)


class ReflectionTests(unittest.TestCase):
    def test_vertical_line(self):
        line = FoldLine(LineKind.VERTICAL, 3)
        self.assertEqual(reflect_across(line, (3.5, 2.0)), (2.5, 2.0))

    def test_diagonal_line_swaps_coordinates(self):
        line = FoldLine(LineKind.DIAGONAL, 0)
        self.assertEqual(reflect_across(line, (0.25, 1.75)), (1.75, 0.25))

    def test_two_reflections_rotate(self):
        vertical = FoldLine(LineKind.VERTICAL, 1)
        diagonal = FoldLine(LineKind.DIAGONAL, 0)
        # relative to (1, 1): (a, b) -> (b, -a)
        a, b = 0.25, 0.5
        p = reflect_across(diagonal, reflect_across(vertical, (1 + a, 1 + b)))
        self.assertEqual(p, (1 + b, 1 - a))

    def test_involution_on_every_fold(self):
        gww_a, gww_b = build_gww_pair(2.0)
        rng = np.random.default_rng(3)
        for domain in (gww_a, gww_b):
            for fold in domain.folds:
                for p in rng.integers(-64, 64, size=(20, 2)) / 8:
                    p = (float(p[0]), float(p[1]))
                    self.assertEqual(reflect_across(fold, reflect_across(fold, p, 2.0), 2.0), p)

    def test_reflection_scales_with_leg(self):
        line = FoldLine(LineKind.ANTIDIAGONAL, 1)
        self.assertEqual(reflect_across(line, (0.0, 0.0), leg=2.0), (2.0, 2.0))


class SquareTests(unittest.TestCase):
    def test_square_is_two_blocks_glued_on_the_hypotenuse(self):
        square = build_square(1.0)
        self.assertEqual(square.block_ids, ("A", "B"))
        self.assertEqual(square.folds[0].edge, EdgeKind.HYPOTENUSE)
        self.assertEqual(square.bounding_box(), (0.0, 0.0, 1.0, 1.0))
        self.assertTrue(math.isclose(square.perimeter, 4.0))


if __name__ == "__main__":
    unittest.main()

import io
import json
import tempfile
import time
from fractions import Fraction
from math import factorial
from pathlib import Path

import numpy as np
import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from attribution.audit import (
    AuditReport,
    axiom_audit,
    corner_oracle_deviation,
    random_paths,
    summarize,
    symmetry_deviation,
)
from attribution.boundary import (
    BoundaryTable,
    PathQuery,
    endpoint_radix,
    enumerate_crossings,
    extract_boundaries,
    safe_step,
)
from attribution.continuous_credit import QuadratureConfig, ig_full_path
from attribution.corner_credit import (
    CornerContext,
    EtaTable,
    LiftSpec,
    empty_set_lift,
    eta,
    grand_coalition_lift,
    half_weight_lift,
    half_weight_shapley,
    orthant_weight_vector,
    shapley,
    shapley_lift_oracle,
    zeta_from_values,
)
from attribution.engine import Attribution, AttributionEngine, EngineConfig, ExplainFailure, explain_batch
from attribution.exceptions import InvalidPath, RadixOverflow
from attribution.tasks import explain_rows
from gig_backend.testing import composed_graph, random_network_graph, random_tree_graph, smooth_graph
from model_ir.composition import ensemble_graph, linear_model
from model_ir.graph import CompositionGraph
from model_ir.nodes import DenseLayer, DenseNetworkNode, InputNode, Leaf, ProductNode, Split, TreeEnsemble
from model_ir.serializers import graph_to_document, write_model
from training.datasets import Dataset


def grid_stumps(n_features=2, threshold=0.5):
    """One stump per feature at the same threshold; leaf values differ per feature"""
    trees = tuple(Split(f, threshold, Leaf(0.0), Leaf(float(f + 1))) for f in range(n_features))
    return ensemble_graph(TreeEnsemble(trees), n_features)


def and_gate():
    """1 only when both features are above 0.5"""
    tree = Split(0, 0.5, Leaf(0.0), Split(1, 0.5, Leaf(0.0), Leaf(1.0)))
    return ensemble_graph(TreeEnsemble((tree,)), 2)


def product_graph():
    return CompositionGraph(2, [InputNode('x', features=(0, 1)), ProductNode('p', inputs=('x',))], 'p')


def sin_sum_graph():
    layer = DenseLayer([[1.0], [1.0]], [0.0], 'sin')
    return CompositionGraph(2, [InputNode('x', features=(0, 1)),
                                DenseNetworkNode('net', inputs=('x',), layers=(layer,))], 'net')


def aligned_path(rng, n):
    """Features move 0 -> 1 (crossing the grid together), 0 -> 0.9 or stay put"""
    s = np.zeros(n)
    e = np.zeros(n)
    for f in range(n):
        choice = rng.integers(3)
        if choice == 0:
            e[f] = 1.0
        elif choice == 1:
            e[f] = 0.9
        else:
            s[f] = e[f] = rng.uniform()
    if np.array_equal(s, e):
        e[0] = 1.0
    return PathQuery(s, e)


class EtaTests(SimpleTestCase):

    def test_closed_form_values(self):
        self.assertEqual(eta(1, 0), Fraction(1))
        self.assertEqual(eta(2, 0), Fraction(1, 2))
        self.assertEqual(eta(3, 0), Fraction(1, 3))
        self.assertEqual(eta(3, 1), Fraction(1, 6))
        for k in range(1, 21):
            for j in range(k):
                self.assertEqual(eta(k, j), Fraction(factorial(j) * factorial(k - j - 1), factorial(k)))

    def test_recursion_holds_through_k_max(self):
        self.assertEqual(EtaTable.build(20).recursion_mismatches(), [])

    def test_out_of_range(self):
        with self.assertRaises(RadixOverflow):
            eta(21, 0)
        with self.assertRaises(ValueError):
            eta(3, 3)


class OrthantWeightTests(SimpleTestCase):

    def test_complementary_orthants_have_opposite_weights(self):
        for k in range(1, 7):
            for mask in range(1 << k):
                mismatch = [a for a in range(k) if mask >> a & 1]
                complement = [a for a in range(k) if not mask >> a & 1]
                flipped = [-w for w in orthant_weight_vector(k, complement)]
                self.assertEqual(orthant_weight_vector(k, mismatch), flipped)

    def test_constant_corner_gets_no_credit(self):
        graph = grid_stumps(3)
        ctx = CornerContext(graph, np.array([0.5, 0.5, 0.5]), (0, 1, 2), np.ones(3), 0.1)
        self.assertTrue(all(c == 0 for c in zeta_from_values(ctx, [7.25] * 8)))

    def test_single_split_credit_is_the_jump(self):
        graph = grid_stumps(1)
        q = PathQuery([0.0], [1.0])
        engine = AttributionEngine(graph)
        result = engine.explain(q)
        self.assertEqual(result.zeta_sum[0], 1.0)
        self.assertEqual(result.efficiency_residual, 0.0)

    def test_worked_weight_vectors(self):
        self.assertEqual(orthant_weight_vector(2, [1]), [Fraction(1, 2), Fraction(-1, 2)])
        self.assertEqual(orthant_weight_vector(3, []), [Fraction(1, 3)] * 3)
        self.assertEqual(orthant_weight_vector(3, [2]), [Fraction(1, 6), Fraction(1, 6), Fraction(-1, 3)])
        self.assertEqual(orthant_weight_vector(3, [0, 1, 2]), [Fraction(-1, 3)] * 3)
        self.assertEqual(eta(5, 2), Fraction(1, 30))

    def test_weights_sum_to_one_zero_or_minus_one(self):
        for k in range(1, 11):
            for mask in range(1 << k):
                mismatch = [a for a in range(k) if mask >> a & 1]
                total = sum(orthant_weight_vector(k, mismatch), Fraction(0))
                if not mismatch:
                    self.assertEqual(total, 1)
                elif len(mismatch) == k:
                    self.assertEqual(total, -1)
                else:
                    self.assertEqual(total, 0, (k, mismatch))


class LiftTests(SimpleTestCase):

    def test_trivial_lifts_split_evenly(self):
        f_x = Fraction(7, 3)
        for n in range(1, 11):
            self.assertEqual(shapley(empty_set_lift(f_x, n)), [f_x / n] * n)
            self.assertEqual(shapley(grand_coalition_lift(f_x, n)), [f_x / n] * n)

    def test_half_weight_lift_closed_form(self):
        f_x = Fraction(5)
        for n in range(2, 11):
            phi = shapley(half_weight_lift(f_x, n))
            self.assertEqual(phi, [half_weight_shapley(f_x, n, i) for i in range(1, n + 1)])
            self.assertEqual(sum(phi), f_x)

    def test_float_path_matches_exact(self):
        exact = shapley(half_weight_lift(Fraction(3, 2), 6))
        approx = shapley(half_weight_lift(1.5, 6))
        np.testing.assert_allclose(approx, [float(p) for p in exact], atol=1e-12)

    def test_lift_must_vanish_on_empty_set(self):
        with self.assertRaises(ValueError):
            shapley(LiftSpec(2, lambda mask: 1))


class CornerOracleTests(SimpleTestCase):

    def test_zeta_equals_shapley_lift_on_random_trees(self):
        rng = np.random.default_rng(2024)
        radices = set()
        for _ in range(200):
            n = int(rng.integers(1, 6))
            graph = random_tree_graph(rng, n, n_trees=2, depth=3)
            q = aligned_path(rng, n)
            engine = AttributionEngine(graph)
            crossings, delta, _, _ = engine.plan(q)
            for c in crossings:
                radices.add(c.radix)
                ctx = CornerContext.at_crossing(graph, c, q, delta)
                values = ctx.orthant_values()
                self.assertTrue(all(a == b for a, b in zip(zeta_from_values(ctx, values),
                                                           shapley_lift_oracle(ctx, values))))
            self.assertEqual(corner_oracle_deviation(engine, q)[0], 0.0)
        self.assertTrue({1, 2, 3} <= radices)

    def test_and_gate_splits_the_jump(self):
        result = AttributionEngine(and_gate()).explain(PathQuery([0.0, 0.0], [1.0, 1.0]))
        np.testing.assert_array_equal(result.total, [0.5, 0.5])
        self.assertEqual(result.crossings_used, [(0.5, 2)])

    def test_octant_corner(self):
        # 1 on the octant x0 >= 0.5, x1 >= 0.5, x2 < 0.5
        tree = Split(0, 0.5, Leaf(0.0), Split(1, 0.5, Leaf(0.0), Split(2, 0.5, Leaf(1.0), Leaf(0.0))))
        result = AttributionEngine(ensemble_graph(TreeEnsemble((tree,)), 3)).explain(
            PathQuery([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]))
        self.assertEqual(result.crossings_used, [(0.5, 3)])
        self.assertEqual(list(result.exact_discrete), [Fraction(1, 6), Fraction(1, 6), Fraction(-1, 3)])
        self.assertEqual(result.efficiency_residual, 0.0)


class BoundaryTests(SimpleTestCase):

    def test_simultaneous_hits_merge_into_one_crossing(self):
        table = extract_boundaries(grid_stumps(3))
        crossings = enumerate_crossings(table, PathQuery([0.0, 0.0, 0.2], [1.0, 1.0, 0.9]))
        self.assertEqual([c.radix for c in crossings], [2, 1])
        self.assertEqual(crossings[0].features, (0, 1))
        self.assertAlmostEqual(crossings[1].alpha, 3.0 / 7.0)
        np.testing.assert_array_equal(crossings[0].point[:2], [0.5, 0.5])

    def test_endpoints_on_thresholds_are_not_crossings(self):
        table = extract_boundaries(grid_stumps(2))
        q = PathQuery([0.5, 0.0], [1.0, 0.5])
        self.assertEqual(enumerate_crossings(table, q), [])
        self.assertEqual(endpoint_radix(table, q.s), {0})
        self.assertEqual(endpoint_radix(table, q.e), {1})

    def test_safe_step(self):
        trees = (Split(0, 0.25, Leaf(0.0), Split(0, 0.5, Leaf(1.0), Split(0, 0.75, Leaf(2.0), Leaf(3.0)))),)
        graph = ensemble_graph(TreeEnsemble(trees), 1)
        table = extract_boundaries(graph)
        q = PathQuery([0.1], [0.9])
        delta = safe_step(table, enumerate_crossings(table, q), q)
        self.assertGreater(delta, 0.0)
        self.assertLessEqual(delta, 0.0375 + 1e-15)
        self.assertEqual(safe_step(extract_boundaries(linear_model([1.0])), [], PathQuery([0.0], [1.0])), 1.0)

    def test_same_feature_thresholds_in_one_crossing_are_reported(self):
        table = BoundaryTable({0: np.array([0.5, 0.5 + 1e-14])})
        with self.assertLogs('attribution.boundary', 'WARNING') as logs:
            crossings = enumerate_crossings(table, PathQuery([0.0], [1.0]))
        self.assertEqual(len(crossings), 1)
        self.assertEqual(crossings[0].thresholds, (0.5,))
        self.assertIn('Feature 0', logs.output[0])


class EngineTests(SimpleTestCase):

    def test_linear_model_credit_is_weight_times_travel(self):
        w = np.array([2.0, -1.0, 0.5])
        graph = linear_model(w)
        rng = np.random.default_rng(1)
        for _ in range(5):
            s, e = rng.normal(size=3), rng.normal(size=3)
            result = AttributionEngine(graph).explain(PathQuery(s, e))
            np.testing.assert_allclose(result.total, w * (e - s), rtol=1e-12, atol=1e-12)

    def test_tree_models_are_exactly_efficient_and_reflexive(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            graph = random_tree_graph(rng, 3)
            s, e = rng.uniform(size=3), rng.uniform(size=3)
            engine = AttributionEngine(graph)
            forward = engine.explain(PathQuery(s, e))
            backward = engine.explain(PathQuery(e, s))
            self.assertEqual(forward.efficiency_residual, 0.0)
            self.assertTrue(all(a + b == 0 for a, b in zip(forward.exact_discrete, backward.exact_discrete)))

    def test_constant_and_null_variables_get_nothing(self):
        tree = Split(0, 0.5, Leaf(0.0), Split(1, 0.5, Leaf(1.0), Leaf(3.0)))
        graph = ensemble_graph(TreeEnsemble((tree,)), 3)
        result = AttributionEngine(graph).explain(PathQuery([0.0, 0.7, 0.1], [1.0, 0.7, 0.9]))
        self.assertEqual(result.total[1], 0.0)
        self.assertEqual(result.total[2], 0.0)
        self.assertEqual(result.total[0], 3.0)

    def test_leaves_away_from_the_path_do_not_matter(self):
        tree = Split(0, 0.5, Split(1, 0.3, Leaf(1.0), Leaf(2.0)), Split(1, 0.8, Leaf(5.0), Leaf(7.0)))
        ensemble = TreeEnsemble((tree,))
        q = PathQuery([0.1, 0.1], [0.4, 0.45])
        before = AttributionEngine(ensemble_graph(ensemble, 2)).explain(q)
        # x >= 0.5 is a cell the path never touches
        edited = TreeEnsemble((Split(0, 0.5, tree.left, tree.right.map_leaves(lambda v: -10 * v)),))
        after = AttributionEngine(ensemble_graph(edited, 2)).explain(q)
        np.testing.assert_array_equal(before.total, after.total)
        np.testing.assert_array_equal(before.total, [0.0, 1.0])

    def test_identical_endpoints(self):
        result = AttributionEngine(grid_stumps(2)).explain(PathQuery([0.5, 0.2], [0.5, 0.2]))
        np.testing.assert_array_equal(result.total, [0.0, 0.0])
        self.assertEqual(result.efficiency_residual, 0.0)

    def test_boundary_incident_endpoints(self):
        engine = AttributionEngine(grid_stumps(1))
        leaving = engine.explain(PathQuery([0.5], [0.0]))
        self.assertEqual(leaving.iota_start[0], -1.0)
        self.assertEqual(leaving.total[0], -1.0)
        arriving = engine.explain(PathQuery([0.0], [0.5]))
        self.assertEqual(arriving.iota_end[0], 1.0)
        staying = engine.explain(PathQuery([0.5], [1.0]))
        self.assertEqual(staying.total[0], 0.0)

    def test_tree_free_graphs_reduce_to_integrated_gradients(self):
        rng = np.random.default_rng(9)
        cfg = QuadratureConfig()
        for _ in range(50):
            n = int(rng.integers(2, 5))
            graph = smooth_graph(rng, n)
            q = PathQuery(rng.normal(size=n), rng.normal(size=n))
            result = AttributionEngine(graph, EngineConfig(quadrature=cfg)).explain(q)
            np.testing.assert_array_equal(result.total, ig_full_path(graph, q, cfg))

    def test_ig_refuses_paths_with_crossings(self):
        with self.assertRaises(InvalidPath):
            ig_full_path(grid_stumps(1), PathQuery([0.0], [1.0]), QuadratureConfig())

    def test_worked_examples(self):
        xy = AttributionEngine(product_graph()).explain(PathQuery([0.0, 0.0], [1.0, 1.0]))
        np.testing.assert_allclose(xy.total, [0.5, 0.5], atol=1e-12)
        quarter = np.pi / 4
        wave = AttributionEngine(sin_sum_graph()).explain(PathQuery([0.0, 0.0], [quarter, quarter]))
        np.testing.assert_allclose(wave.total, [0.5, 0.5], atol=1e-12)

    def test_sine_path_credit_follows_travel(self):
        result = AttributionEngine(sin_sum_graph()).explain(PathQuery([0.5, 1.0], [7.0, 3.0]))
        self.assertAlmostEqual(result.total.sum(), np.sin(10.0) - np.sin(1.5), delta=1e-6)
        self.assertLess(abs(result.efficiency_residual), 1e-6)
        np.testing.assert_allclose(result.total[0] / 6.5, result.total[1] / 2.0, rtol=1e-12)

    def test_constant_feature_sitting_on_a_threshold(self):
        # x0 stays at 0.5 for the whole path, so only the x1 split is crossed
        result = AttributionEngine(and_gate()).explain(PathQuery([0.5, 0.0], [0.5, 1.0]))
        self.assertEqual(result.crossings_used, [(0.5, 1)])
        self.assertEqual(list(result.exact_discrete), [Fraction(0), Fraction(1)])
        self.assertEqual(result.efficiency_residual, 0.0)

    def test_constant_coordinate_on_a_threshold_stays_in_its_cell(self):
        tree = Split(1, 0.5, Leaf(0.0), Split(0, 0.75, Leaf(10.0), Leaf(1.0)))
        engine = AttributionEngine(ensemble_graph(TreeEnsemble((tree,)), 2))
        result = engine.explain(PathQuery([0.75, 0.45768132281856233], [0.75, 0.6853196463874445]))
        np.testing.assert_array_equal(result.total, [0.0, 1.0])
        self.assertEqual(result.efficiency_residual, 0.0)
        rng = np.random.default_rng(17)
        for _ in range(200):
            s = [0.75, rng.uniform(0.0, 0.5)]
            e = [0.75, rng.uniform(0.5 + 1e-6, 1.0)]
            result = engine.explain(PathQuery(s, e))
            self.assertEqual(result.efficiency_residual, 0.0, (s, e))
            np.testing.assert_array_equal(result.total, [0.0, 1.0])

    def test_composed_systems_pass_the_axiom_audit(self):
        rng = np.random.default_rng(42)
        for seed in range(3):
            graph = composed_graph(rng, 3, dense_combiner=bool(seed % 2 == 0))
            other = random_network_graph(rng, 3)
            for q in random_paths(graph, rng.uniform(size=(20, 3)), 3, seed=seed, pin_prob=0.2, snap_prob=0.3):
                report = axiom_audit(graph, q, EngineConfig(), other=other, weights=(0.6, -1.2),
                                     perm=rng.permutation(3))
                self.assertTrue(report.passed, report.to_dict())

    def test_axiom_suite_on_a_hundred_composed_systems(self):
        rng = np.random.default_rng(2718)
        started = time.monotonic()
        failed = []
        for seed in range(100):
            graph = composed_graph(rng, 3, dense_combiner=bool(seed % 2 == 0))
            other = random_network_graph(rng, 3)
            paths = random_paths(graph, rng.uniform(size=(40, 3)), 20, seed=seed, pin_prob=0.2, snap_prob=0.3)
            for q in paths:
                report = axiom_audit(graph, q, EngineConfig(), other=other, weights=(0.6, -1.2),
                                     perm=rng.permutation(3))
                if not report.passed:
                    failed.append((seed, report.to_dict()))
        self.assertEqual(failed, [])
        self.assertLess(time.monotonic() - started, 300.0)

    def test_radix_overflow(self):
        engine = AttributionEngine(grid_stumps(2), EngineConfig(max_radix=1))
        with self.assertRaises(RadixOverflow):
            engine.explain(PathQuery([0.0, 0.0], [1.0, 1.0]))


class BatchTests(SimpleTestCase):

    def test_failures_do_not_stop_the_batch(self):
        graph = grid_stumps(2)
        queries = [PathQuery([0.0, 0.0], [1.0, 0.2]), PathQuery([0.0, 0.0], [1.0, 1.0]),
                   PathQuery([0.0, 0.0], [0.2, 1.0])]
        outcomes = explain_batch(graph, queries, EngineConfig(max_radix=1))
        self.assertIsInstance(outcomes[0], Attribution)
        self.assertIsInstance(outcomes[1], ExplainFailure)
        self.assertEqual(outcomes[1].index, 1)
        self.assertEqual(outcomes[1].exit_code, 3)
        self.assertIsInstance(outcomes[2], Attribution)

    def test_threads_keep_input_order(self):
        rng = np.random.default_rng(3)
        graph = random_tree_graph(rng, 3)
        queries = [PathQuery(rng.uniform(size=3), rng.uniform(size=3)) for _ in range(12)]
        serial = explain_batch(graph, queries, jobs=1)
        threaded = explain_batch(graph, queries, jobs=4)
        for a, b in zip(serial, threaded):
            np.testing.assert_array_equal(a.total, b.total)

    def test_worker_task_offsets_failure_indices(self):
        graph = grid_stumps(2)
        config = EngineConfig(max_radix=1).to_dict()
        payload = explain_rows(graph_to_document(graph), [[1.0, 0.2], [1.0, 1.0]], [0.0, 0.0], config, 10)
        self.assertEqual(payload[0]['total'], [1.0, 0.0])
        self.assertTrue(payload[1]['failed'])
        self.assertEqual(payload[1]['index'], 11)


class AuditTests(SimpleTestCase):

    def test_summary_reports_worst_deviation(self):
        rng = np.random.default_rng(8)
        graph = random_tree_graph(rng, 3)
        reports = [axiom_audit(graph, q) for q in random_paths(graph, rng.uniform(size=(10, 3)), 4, seed=1)]
        summary = summarize(reports)
        self.assertTrue(summary.all_passed)
        self.assertEqual(summary.worst['reflexivity_deviation'], 0.0)
        self.assertEqual(summary.worst['corner_oracle_deviation'], 0.0)

    def test_symmetry_compares_discrete_credit_exactly(self):
        rng = np.random.default_rng(12)
        graph = random_tree_graph(rng, 3)
        for q in random_paths(graph, rng.uniform(size=(10, 3)), 5, seed=2, snap_prob=0.3):
            engine = AttributionEngine(graph)
            exact, integral_dev = symmetry_deviation(engine, q, [2, 0, 1])
            self.assertTrue(exact)
            self.assertEqual(integral_dev, 0.0)
            report = axiom_audit(graph, q, perm=[2, 0, 1])
            self.assertTrue(report.symmetry_discrete_exact)
            self.assertTrue(report.checks['symmetry'])

    def test_symmetry_fails_on_discrete_mismatch_alone(self):
        report = AuditReport(
            efficiency_residual=0.0, reflexivity_deviation=0.0, constant_variable_max=0.0,
            null_variable_max=0.0, corner_oracle_deviation=0.0, endpoint_reflexivity_deviation=0.0,
            corners_checked=1, symmetry_deviation=0.0, symmetry_discrete_exact=False,
        )
        self.assertFalse(report.checks['symmetry'])
        self.assertFalse(report.passed)


class CommandTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.base = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write_rows(self, rows, name='rows.csv'):
        rows = np.asarray(rows, dtype=float)
        path = self.base / name
        Dataset(rows, np.zeros(len(rows)), [f"f{i}" for i in range(rows.shape[1])]).write_csv(path)
        return path

    def test_explain_linear_model(self):
        w = [2.0, -1.0, 0.5]
        write_model(linear_model(w), self.base / 'linear.json')
        rows = [[1.0, 2.0, 3.0], [0.0, -1.0, 4.0], [2.0, 0.5, -1.0]]
        data = self.write_rows(rows)
        out = self.base / 'credits.csv'
        call_command('explain', model=str(self.base / 'linear.json'), data=str(data), out=str(out),
                     stdout=io.StringIO())
        frame = pd.read_csv(out)
        baseline = np.median(np.asarray(rows), axis=0)
        credits = frame[['credit_f0', 'credit_f1', 'credit_f2']].to_numpy()
        np.testing.assert_allclose(credits, np.asarray(w) * (np.asarray(rows) - baseline), atol=1e-12)
        mirror = json.loads((self.base / 'credits.json').read_text(encoding='utf-8'))
        self.assertEqual(len(mirror['rows']), 3)
        self.assertIn('integral', mirror['rows'][0])

    def test_explain_tree_model_is_exact(self):
        rng = np.random.default_rng(4)
        write_model(random_tree_graph(rng, 3), self.base / 'trees.json')
        data = self.write_rows(rng.uniform(size=(15, 3)))
        out = self.base / 'credits.csv'
        call_command('explain', model=str(self.base / 'trees.json'), data=str(data), out=str(out),
                     baseline_row=0, rows='1-14', jobs=2, stdout=io.StringIO())
        frame = pd.read_csv(out)
        self.assertEqual(frame['row'].tolist(), list(range(1, 15)))
        self.assertTrue((frame['efficiency_residual'] == 0.0).all())

    def test_missing_model_exits_with_io_code(self):
        data = self.write_rows([[0.0]])
        with self.assertRaises(CommandError) as ctx:
            call_command('explain', model=str(self.base / 'nope.json'), data=str(data),
                         out=str(self.base / 'x.csv'), stdout=io.StringIO())
        self.assertEqual(ctx.exception.returncode, 2)

    def test_arity_mismatch_exits_with_io_code(self):
        write_model(linear_model([1.0, 1.0]), self.base / 'linear.json')
        data = self.write_rows([[0.0, 1.0, 2.0]])
        with self.assertRaises(CommandError) as ctx:
            call_command('explain', model=str(self.base / 'linear.json'), data=str(data),
                         out=str(self.base / 'x.csv'), stdout=io.StringIO())
        self.assertEqual(ctx.exception.returncode, 2)

    def test_capacity_exit_code(self):
        write_model(grid_stumps(2), self.base / 'grid.json')
        data = self.write_rows([[0.0, 0.0], [1.0, 1.0]])
        with self.assertRaises(CommandError) as ctx:
            call_command('explain', model=str(self.base / 'grid.json'), data=str(data), baseline_row=0,
                         out=str(self.base / 'x.csv'), max_radix=1, stdout=io.StringIO())
        self.assertEqual(ctx.exception.returncode, 3)
        self.assertTrue((self.base / 'x.csv').exists())

    def test_audit_command_on_trees(self):
        rng = np.random.default_rng(6)
        write_model(random_tree_graph(rng, 3), self.base / 'trees.json')
        data = self.write_rows(rng.uniform(size=(10, 3)))
        report = self.base / 'audit.json'
        call_command('audit', model=str(self.base / 'trees.json'), data=str(data), n_paths=5,
                     symmetry=True, out=str(report), stdout=io.StringIO())
        summary = json.loads(report.read_text(encoding='utf-8'))['summary']
        self.assertTrue(summary['all_passed'])
        self.assertEqual(summary['worst']['reflexivity_deviation'], 0.0)

    def test_lift_demo(self):
        out = io.StringIO()
        call_command('lift_demo', n=4, fx='3', stdout=out)
        payload = json.loads(out.getvalue())
        self.assertEqual(payload['lifts']['empty']['phi'], ['3/4'] * 4)
        self.assertEqual(payload['lifts']['half']['sum'], '3')

    def test_lift_demo_shows_the_stated_half_weight_values(self):
        out = io.StringIO()
        call_command('lift_demo', n=2, fx='3', lift='half', stdout=out)
        half = json.loads(out.getvalue())['lifts']['half']
        self.assertEqual(half['phi'], ['1', '2'])
        self.assertEqual(half['stated'], ['1', '1/2'])
        self.assertEqual(half['stated_sum'], '3/2')
        self.assertTrue(half['differs_from_stated'])

    def test_explain_accepts_quadrature_flags(self):
        write_model(sin_sum_graph(), self.base / 'wave.json')
        data = self.write_rows([[0.0, 0.0], [0.5, 0.25]])
        out = self.base / 'credits.csv'
        call_command('explain', '--model', str(self.base / 'wave.json'), '--data', str(data),
                     '--out', str(out), '--baseline-row', '0', '--quad-panels', '4', '--no-quad-refine',
                     stdout=io.StringIO())
        config = json.loads((self.base / 'credits.json').read_text(encoding='utf-8'))['config']
        self.assertEqual(config['quadrature']['panels'], 4)
        self.assertFalse(config['quadrature']['refine'])
        frame = pd.read_csv(out)
        np.testing.assert_allclose(frame['efficiency_residual'], 0.0, atol=1e-12)

    def test_boundaries_lists_crossings(self):
        write_model(and_gate(), self.base / 'gate.json')
        out = io.StringIO()
        call_command('boundaries', model=str(self.base / 'gate.json'), start=[0.0, 0.0], end=[1.0, 1.0], stdout=out)
        payload = json.loads(out.getvalue())
        self.assertEqual(payload['thresholds'], {'0': [0.5], '1': [0.5]})
        self.assertEqual(payload['path']['crossings'][0]['radix'], 2)

import io
import json
import tempfile
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from gig_backend.testing import composed_graph, random_tree_graph, smooth_graph
from model_ir.composition import compose, ensemble_graph, linear_model, permute_features
from model_ir.exceptions import ArityMismatch, GraphError, ModelFormatError, NonFiniteValue, ProbeOnBoundary
from model_ir.graph import CellAssignment, CompositionGraph
from model_ir.nodes import (
    CurveNode,
    DenseLayer,
    DenseNetworkNode,
    InputNode,
    Leaf,
    LinearCombinerNode,
    PiecewiseLinearCurve,
    Split,
    TreeEnsemble,
    TreeEnsembleNode,
)
from model_ir.serializers import (
    graph_from_compose_spec,
    graph_from_document,
    graph_to_document,
    read_model,
    write_model,
)


def stump(feature=0, threshold=0.5, left=1.0, right=2.0, base=0.0):
    return TreeEnsemble((Split(feature, threshold, Leaf(left), Leaf(right)),), base)


def trees_plus_linear(weights=(1.0, -2.0)):
    """stump on feature 0 + linear term on both features"""
    nodes = [
        InputNode('x', features=(0, 1)),
        TreeEnsembleNode('trees', inputs=('x',), ensemble=stump()),
        LinearCombinerNode('lin', inputs=('x',), weights=list(weights)),
        LinearCombinerNode('out', inputs=('trees', 'lin'), weights=[1.0, 1.0]),
    ]
    return CompositionGraph(2, nodes, 'out').ensure_valid()


class TreeEnsembleTests(SimpleTestCase):

    def test_value_on_threshold_routes_right(self):
        ensemble = stump()
        np.testing.assert_array_equal(ensemble.predict([[0.49], [0.5], [0.51]]), [1.0, 2.0, 2.0])

    def test_base_score_and_trees_add(self):
        ensemble = TreeEnsemble((Split(0, 0.5, Leaf(1.0), Leaf(2.0)), Leaf(0.25)), base_score=-1.0)
        self.assertEqual(ensemble.predict([[0.0]])[0], 0.25)
        self.assertEqual(ensemble.predict([[1.0]])[0], 1.25)

    def test_graph_split_points_are_sorted_and_unique(self):
        trees = (Split(1, 0.7, Leaf(0.0), Split(1, 0.2, Leaf(1.0), Leaf(2.0))), Split(1, 0.7, Leaf(0.0), Leaf(1.0)))
        graph = ensemble_graph(TreeEnsemble(trees), 2)
        self.assertEqual(list(graph.split_points), [1])
        np.testing.assert_array_equal(graph.split_points[1], [0.2, 0.7])

    def test_map_leaves_keeps_structure(self):
        doubled = stump().map_leaves(lambda v: 2 * v)
        np.testing.assert_array_equal(doubled.predict([[0.0], [1.0]]), [2.0, 4.0])


class ValidationTests(SimpleTestCase):

    def messages(self, graph):
        return [str(d) for d in graph.validate()]

    def test_well_formed_graph_has_no_diagnostics(self):
        self.assertEqual(trees_plus_linear().validate(), [])

    def test_tree_must_read_raw_inputs(self):
        nodes = [
            InputNode('x', features=(0,)),
            LinearCombinerNode('lin', inputs=('x',), weights=[1.0]),
            TreeEnsembleNode('trees', inputs=('lin',), ensemble=stump()),
        ]
        self.assertTrue(any("tree must read raw inputs" in m for m in self.messages(CompositionGraph(1, nodes, 'trees'))))

    def test_combiner_weight_count(self):
        nodes = [InputNode('x', features=(0, 1)), LinearCombinerNode('lin', inputs=('x',), weights=[1.0, 2.0, 3.0])]
        self.assertTrue(any("3 weights for 2 inputs" in m for m in self.messages(CompositionGraph(2, nodes, 'lin'))))

    def test_non_monotone_curve(self):
        curve = PiecewiseLinearCurve([0.0, 1.0, 2.0], [0.0, 0.8, 0.5])
        nodes = [InputNode('x', features=(0,)), CurveNode('c', inputs=('x',), curve=curve)]
        self.assertTrue(any("non-monotone curve" in m for m in self.messages(CompositionGraph(1, nodes, 'c'))))

    def test_cycle_is_reported(self):
        nodes = [
            InputNode('x', features=(0,)),
            LinearCombinerNode('a', inputs=('b',), weights=[1.0]),
            LinearCombinerNode('b', inputs=('a',), weights=[1.0]),
        ]
        self.assertTrue(self.messages(CompositionGraph(1, nodes, 'a')))

    def test_output_must_be_scalar(self):
        nodes = [InputNode('x', features=(0, 1))]
        with self.assertRaises(GraphError):
            CompositionGraph(2, nodes, 'x').ensure_valid()

    def test_layer_shapes_chain(self):
        layers = (DenseLayer(np.ones((2, 3)), np.zeros(3), 'tanh'), DenseLayer(np.ones((2, 1)), np.zeros(1)))
        nodes = [InputNode('x', features=(0, 1)), DenseNetworkNode('net', inputs=('x',), layers=layers)]
        self.assertTrue(any("layer 1 expects 2 inputs" in m for m in self.messages(CompositionGraph(2, nodes, 'net'))))


class EvaluationTests(SimpleTestCase):

    def test_evaluate_routes_trees_at_the_point(self):
        graph = trees_plus_linear()
        self.assertAlmostEqual(graph.evaluate([0.2, 1.0]), 1.0 + 0.2 - 2.0, places=12)
        self.assertAlmostEqual(graph.evaluate([0.5, 0.0]), 2.0 + 0.5, places=12)

    def test_evaluate_split_reads_trees_at_the_probe(self):
        graph = trees_plus_linear()
        value = graph.evaluate_split([0.2, 1.0], CellAssignment([0.9, 0.0]))
        self.assertAlmostEqual(value, 0.2, places=12)

    def test_probe_on_threshold_is_rejected_unless_pinned(self):
        graph = trees_plus_linear()
        with self.assertRaises(ProbeOnBoundary):
            graph.evaluate_split([0.2, 1.0], CellAssignment([0.5, 0.0]))
        value = graph.evaluate_split([0.2, 1.0], CellAssignment([0.5, 0.0], pinned_axes={0}))
        self.assertAlmostEqual(value, 0.2, places=12)

    def test_bad_inputs(self):
        graph = trees_plus_linear()
        with self.assertRaises(ArityMismatch):
            graph.evaluate([0.1, 0.2, 0.3])
        with self.assertRaises(NonFiniteValue):
            graph.evaluate([np.nan, 0.2])

    def test_gradient_ignores_trees(self):
        np.testing.assert_array_equal(trees_plus_linear().gradient([0.3, 0.3]), [1.0, -2.0])

    def test_gradients_match_central_differences(self):
        rng = np.random.default_rng(7)
        h = 1e-5
        for _ in range(100):
            n = int(rng.integers(2, 5))
            graph = smooth_graph(rng, n)
            x = rng.uniform(-1.0, 1.0, size=n)
            numeric = np.array([
                (graph.evaluate(x + h * np.eye(n)[i]) - graph.evaluate(x - h * np.eye(n)[i])) / (2 * h)
                for i in range(n)
            ])
            np.testing.assert_allclose(graph.gradient(x), numeric, atol=1e-5)

    def test_curve_slope_is_right_derivative(self):
        curve = PiecewiseLinearCurve([0.0, 1.0, 2.0], [0.0, 0.5, 1.0 + 0.5])
        np.testing.assert_allclose(curve.derivative([-1.0, 0.0, 0.5, 1.0, 2.0, 3.0]), [0, 0.5, 0.5, 1.0, 0, 0])
        np.testing.assert_allclose(curve([-5.0, 0.5, 9.0]), [0.0, 0.25, 1.5])

    def test_relu_uses_right_derivative_at_zero(self):
        layers = (DenseLayer([[1.0]], [0.0], 'relu'),)
        nodes = [InputNode('x', features=(0,)), DenseNetworkNode('net', inputs=('x',), layers=layers)]
        graph = CompositionGraph(1, nodes, 'net').ensure_valid()
        self.assertEqual(graph.gradient([0.0])[0], 1.0)
        self.assertEqual(graph.gradient([-0.1])[0], 0.0)


class CompositionTests(SimpleTestCase):

    def test_compose_applies_curves_then_combiner(self):
        rng = np.random.default_rng(3)
        a, b = random_tree_graph(rng, 2), linear_model([0.5, 1.5])
        curve = PiecewiseLinearCurve([-2.0, 2.0], [0.0, 1.0])
        graph = compose([('a', a, curve), ('b', b, None)], LinearCombinerNode('c', weights=[2.0, -1.0], bias=0.5))
        for x in rng.uniform(size=(10, 2)):
            expected = 2.0 * curve(a.evaluate(x)) - b.evaluate(x) + 0.5
            self.assertAlmostEqual(graph.evaluate(x), float(expected), places=12)

    def test_compose_rejects_arity_mismatch(self):
        with self.assertRaises(ArityMismatch):
            compose([('a', linear_model([1.0]), None), ('b', linear_model([1.0, 1.0]), None)],
                    LinearCombinerNode('c', weights=[1.0, 1.0]))

    def test_compose_rejects_wrong_weight_count(self):
        with self.assertRaises(GraphError):
            compose([('a', linear_model([1.0]), None), ('b', linear_model([2.0]), None)],
                    LinearCombinerNode('c', weights=[1.0]))

    def test_permute_features_moves_inputs(self):
        graph = linear_model([1.0, 10.0, 100.0])
        permuted = permute_features(graph, [2, 0, 1])
        self.assertEqual(permuted.evaluate([2.0, 3.0, 1.0]), graph.evaluate([1.0, 2.0, 3.0]))

    def test_continuous_and_read_features(self):
        nodes = [
            InputNode('x', features=(0, 1, 2)),
            InputNode('t', features=(2,)),
            TreeEnsembleNode('trees', inputs=('t',), ensemble=stump()),
            LinearCombinerNode('lin', inputs=('x',), weights=[1.0, 0.0, 0.0]),
            LinearCombinerNode('out', inputs=('trees', 'lin'), weights=[1.0, 1.0]),
        ]
        graph = CompositionGraph(3, nodes, 'out').ensure_valid()
        self.assertEqual(graph.continuous_features, frozenset({0, 1, 2}))
        self.assertEqual(set(graph.split_points), {2})


class SerializerTests(SimpleTestCase):

    def test_document_round_trip_preserves_outputs(self):
        rng = np.random.default_rng(11)
        graph = composed_graph(rng)
        again = graph_from_document(json.loads(json.dumps(graph_to_document(graph))))
        X = rng.uniform(size=(50, graph.n_features))
        np.testing.assert_array_equal(again.evaluate_many(X), graph.evaluate_many(X))

    def test_schema_errors_carry_details(self):
        doc = {'version': 1, 'n_features': 1, 'output_id': 'c',
               'nodes': [{'id': 'x', 'kind': 'input', 'features': [0]},
                         {'id': 'c', 'kind': 'pwl_curve', 'inputs': ['x']}]}
        with self.assertRaises(ModelFormatError) as ctx:
            graph_from_document(doc)
        self.assertIn('nodes', ctx.exception.errors)

    def test_bad_tree_document(self):
        doc = {'version': 1, 'n_features': 1, 'output_id': 't',
               'nodes': [{'id': 'x', 'kind': 'input', 'features': [0]},
                         {'id': 't', 'kind': 'tree_ensemble', 'inputs': ['x'],
                          'trees': [{'split': {'feature': 0}, 'left': {'leaf': 1}, 'right': {'leaf': 2}}]}]}
        with self.assertRaises(ModelFormatError):
            graph_from_document(doc)

    def test_future_version_is_rejected(self):
        doc = graph_to_document(linear_model([1.0]))
        doc['version'] = 99
        with self.assertRaises(ModelFormatError):
            graph_from_document(doc)

    def test_read_model_reports_invalid_json(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'broken.json'
            path.write_text('{"version": 1,', encoding='utf-8')
            with self.assertRaises(ModelFormatError):
                read_model(path)

    def test_compose_spec_with_relative_paths(self):
        with tempfile.TemporaryDirectory() as tmp:
            base = Path(tmp)
            write_model(linear_model([1.0, 2.0]), base / 'models' / 'a.json')
            write_model(trees_plus_linear(), base / 'models' / 'b.json')
            curve_doc = graph_to_document(CompositionGraph(
                1, [InputNode('score', features=(0,)),
                    CurveNode('ecdf', inputs=('score',), curve=PiecewiseLinearCurve([-3.0, 3.0], [0.0, 1.0]))],
                'ecdf'))
            (base / 'ecdf.json').write_text(json.dumps(curve_doc), encoding='utf-8')
            spec = {
                'submodels': [{'name': 'a', 'model': 'models/a.json', 'ecdf': 'ecdf.json'},
                              {'name': 'b', 'model': 'models/b.json'}],
                'combiner': {'kind': 'linear_combiner', 'weights': [1.0, 1.0]},
            }
            graph = graph_from_compose_spec(spec, base)
            self.assertEqual(graph.output_id, 'combiner')
            x = [0.3, -0.2]
            expected = np.interp(0.3 - 0.4, [-3.0, 3.0], [0.0, 1.0]) + trees_plus_linear().evaluate(x)
            self.assertAlmostEqual(graph.evaluate(x), float(expected), places=12)

            spec['combiner']['weights'] = [1.0]
            with self.assertRaises(GraphError):
                graph_from_compose_spec(spec, base)


class ComposeCommandTests(SimpleTestCase):

    def test_compose_writes_a_merged_model(self):
        with tempfile.TemporaryDirectory() as tmp:
            base = Path(tmp)
            write_model(linear_model([1.0, 2.0]), base / 'a.json')
            write_model(trees_plus_linear(), base / 'b.json')
            spec = {'submodels': [{'name': 'a', 'model': 'a.json'}, {'name': 'b', 'model': 'b.json'}],
                    'combiner': {'kind': 'linear_combiner', 'weights': [0.5, 2.0], 'bias': 1.0}}
            (base / 'spec.json').write_text(json.dumps(spec), encoding='utf-8')
            call_command('compose', str(base / 'spec.json'), out=str(base / 'merged.json'), stdout=io.StringIO())
            merged = read_model(base / 'merged.json')
            x = [0.7, 0.1]
            expected = 0.5 * linear_model([1.0, 2.0]).evaluate(x) + 2.0 * trees_plus_linear().evaluate(x) + 1.0
            self.assertAlmostEqual(merged.evaluate(x), expected, places=12)

    def test_weight_count_mismatch_exits_with_io_code(self):
        with tempfile.TemporaryDirectory() as tmp:
            base = Path(tmp)
            write_model(linear_model([1.0]), base / 'a.json')
            spec = {'submodels': [{'name': 'a', 'model': 'a.json'}],
                    'combiner': {'kind': 'linear_combiner', 'weights': [1.0, 1.0]}}
            (base / 'spec.json').write_text(json.dumps(spec), encoding='utf-8')
            with self.assertRaises(CommandError) as ctx:
                call_command('compose', str(base / 'spec.json'), out=str(base / 'm.json'), stdout=io.StringIO())
            self.assertEqual(ctx.exception.returncode, 2)
            self.assertFalse((base / 'm.json').exists())

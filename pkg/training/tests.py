import io
import json
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from model_ir.exceptions import ArityMismatch
from model_ir.serializers import graph_to_document, read_model
from training.datasets import (
    LABEL_COLUMN,
    Dataset,
    GenSpec,
    add_nuisance,
    gen_moons,
    gen_ovals,
    generate,
    overlap_centroid,
    overlap_mask,
    train_test_split,
)
from training.gbm import (
    DegenerateData,
    GradientBoostingTrainer,
    TrainParams,
    predict_margin,
    predict_proba,
    roc_auc,
    to_graph,
    train_gbm,
)


def xor_clusters(seed=0, noise=0.1):
    """Four clusters at (+-1, +-1) with unequal counts; label 1 where x * y > 0"""
    rng = np.random.default_rng(seed)
    centers = [((1.0, 1.0), 10, 1), ((-1.0, -1.0), 30, 1), ((1.0, -1.0), 20, 0), ((-1.0, 1.0), 20, 0)]
    X = np.vstack([np.asarray(c) + rng.normal(scale=noise, size=(n, 2)) for c, n, _ in centers])
    y = np.concatenate([np.full(n, label) for _, n, label in centers])
    return Dataset(X, y, ['a', 'b'])


class GradientBoostingTests(SimpleTestCase):

    def test_single_stump_splits_between_the_classes(self):
        data = Dataset([[0.1], [0.2], [0.3], [0.7], [0.8], [0.9]], [0, 0, 0, 1, 1, 1], ['x'])
        ensemble = train_gbm(data, TrainParams(n_trees=1, max_depth=1, min_leaf=1))
        tree = ensemble.trees[0]
        self.assertEqual(tree.feature, 0)
        self.assertAlmostEqual(tree.threshold, 0.5, places=12)
        self.assertLess(tree.left.value, 0.0)
        self.assertGreater(tree.right.value, 0.0)
        self.assertEqual(ensemble.base_score, 0.0)

    def test_unbalanced_xor_is_learned_at_depth_two(self):
        data = xor_clusters()
        trainer = GradientBoostingTrainer(TrainParams(n_trees=50, max_depth=2))
        ensemble = trainer.fit(data)
        predicted = predict_proba(ensemble, data.features) >= 0.5
        self.assertGreaterEqual(np.mean(predicted == (data.labels == 1)), 0.95)
        self.assertGreaterEqual(trainer.report.final_accuracy, 0.95)

    def test_loss_never_increases(self):
        data = xor_clusters(seed=1)
        trainer = GradientBoostingTrainer(TrainParams(n_trees=30, max_depth=2))
        trainer.fit(data)
        losses = [r.loss for r in trainer.report.rounds]
        self.assertEqual(len(losses), 30)
        self.assertTrue(all(b <= a + 1e-12 for a, b in zip(losses, losses[1:])))

    def test_training_is_deterministic(self):
        data = gen_moons(GenSpec(400, 0.2, seed=5))
        params = TrainParams(n_trees=5, max_depth=3)
        first = graph_to_document(to_graph(train_gbm(data, params), 2))
        second = graph_to_document(to_graph(train_gbm(data, params), 2))
        self.assertEqual(first, second)

    def test_exported_graph_matches_predictions(self):
        data = gen_moons(GenSpec(600, 0.2, seed=2))
        ensemble = train_gbm(data, TrainParams(n_trees=10, max_depth=4))
        graph = to_graph(ensemble, 2)
        X = np.random.default_rng(9).uniform(-1.0, 1.0, size=(1000, 2))
        np.testing.assert_allclose(graph.evaluate_many(X), predict_margin(ensemble, X), atol=1e-12)

    def test_single_class_is_degenerate(self):
        data = Dataset(np.random.default_rng(0).uniform(size=(10, 2)), np.ones(10), ['a', 'b'])
        with self.assertRaises(DegenerateData):
            train_gbm(data, TrainParams())

    def test_too_few_rows_is_degenerate(self):
        data = Dataset([[0.0], [1.0]], [0, 1], ['x'])
        with self.assertRaises(DegenerateData):
            train_gbm(data, TrainParams(min_leaf=2))

    def test_invalid_params(self):
        with self.assertRaises(ValueError):
            TrainParams(n_trees=0)
        with self.assertRaises(ValueError):
            TrainParams(learning_rate=0.0)

    def test_predict_rejects_short_rows(self):
        ensemble = train_gbm(xor_clusters(), TrainParams(n_trees=2, max_depth=2))
        with self.assertRaises(ArityMismatch):
            predict_margin(ensemble, [[0.0]])
        with self.assertRaises(ArityMismatch):
            predict_margin(ensemble, [[0.0, 0.0, 0.0]], n_features=2)

    def test_roc_auc(self):
        labels = np.array([0, 0, 1, 1])
        self.assertEqual(roc_auc(labels, [0.1, 0.2, 0.8, 0.9]), 1.0)
        self.assertEqual(roc_auc(labels, [0.9, 0.8, 0.2, 0.1]), 0.0)
        self.assertEqual(roc_auc(labels, [0.5, 0.5, 0.5, 0.5]), 0.5)
        with self.assertRaises(DegenerateData):
            roc_auc([1, 1], [0.1, 0.2])


class DatasetTests(SimpleTestCase):

    def test_noiseless_moons_lie_on_their_arcs(self):
        data = gen_moons(GenSpec(200, noise=0.0, seed=0), normalize=False)
        upper = data.features[data.labels == 0]
        lower = data.features[data.labels == 1]
        np.testing.assert_allclose(np.hypot(upper[:, 0], upper[:, 1]), 1.0, atol=1e-12)
        np.testing.assert_allclose(np.hypot(lower[:, 0] - 1.0, lower[:, 1] - 0.5), 1.0, atol=1e-12)
        self.assertTrue((upper[:, 1] >= -1e-12).all())
        self.assertTrue((lower[:, 1] <= 0.5 + 1e-12).all())

    def test_moons_are_normalized_and_balanced(self):
        data = gen_moons(GenSpec(1001, noise=0.1, seed=3))
        self.assertAlmostEqual(float(np.max(np.abs(data.features))), 1.0, places=12)
        self.assertEqual(int((data.labels == 0).sum()), 500)
        self.assertEqual(int((data.labels == 1).sum()), 501)
        self.assertEqual(data.feature_names, ['x', 'y'])

    def test_generators_are_seeded(self):
        spec = GenSpec(300, 0.1, seed=11, nuisance_mix=0.5)
        for kind in ('moons', 'ovals'):
            a, b = generate(kind, spec), generate(kind, spec)
            np.testing.assert_array_equal(a.features, b.features)
            np.testing.assert_array_equal(a.labels, b.labels)
        other = generate('moons', GenSpec(300, 0.1, seed=12))
        self.assertFalse(np.array_equal(other.features, generate('moons', GenSpec(300, 0.1, seed=11)).features))

    def test_ovals_labels_and_overlap(self):
        data = gen_ovals(GenSpec(2000, seed=1))
        self.assertEqual(int(data.labels.sum()), 1000)
        self.assertTrue(overlap_mask(overlap_centroid())[0])
        self.assertFalse(overlap_mask(np.array([0.0, 1.2]))[0])
        upper = data.features[data.labels == 1]
        self.assertGreater(upper[:, 1].mean(), 0.0)
        inside = overlap_mask(data.features)
        self.assertTrue(0 < inside.sum() < data.n_rows)

    def test_nuisance_copies_the_label_at_full_mix(self):
        data = gen_moons(GenSpec(500, seed=0, nuisance_mix=1.0))
        self.assertEqual(data.feature_names, ['x', 'y', 'nuisance'])
        np.testing.assert_array_equal(data.features[:, 2], data.labels)

    def test_nuisance_correlation_follows_the_mix(self):
        base = gen_moons(GenSpec(20000, seed=0))
        noise = add_nuisance(base, 0.0, seed=4)
        half = add_nuisance(base, 0.5, seed=4)
        self.assertLess(abs(np.corrcoef(noise.features[:, 2], noise.labels)[0, 1]), 0.05)
        corr = np.corrcoef(half.features[:, 2], half.labels)[0, 1]
        self.assertTrue(0.2 < corr < 0.8)

    def test_invalid_specs(self):
        with self.assertRaises(ValueError):
            GenSpec(1)
        with self.assertRaises(ValueError):
            GenSpec(10, nuisance_mix=1.5)
        with self.assertRaises(ValueError):
            generate('spirals', GenSpec(10))

    def test_split_is_disjoint_and_complete(self):
        data = gen_ovals(GenSpec(100, seed=0))
        train, test = train_test_split(data, 0.3, seed=0)
        self.assertEqual((train.n_rows, test.n_rows), (70, 30))
        rows = np.vstack([train.features, test.features])
        self.assertEqual(len({tuple(r) for r in rows}), 100)

    def test_csv_keeps_full_precision(self):
        data = gen_moons(GenSpec(50, seed=7, nuisance_mix=0.5))
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'moons.csv'
            data.write_csv(path)
            frame = pd.read_csv(path)
            self.assertEqual(list(frame.columns)[-1], LABEL_COLUMN)
            loaded = Dataset.read_csv(path)
        np.testing.assert_array_equal(loaded.features, data.features)
        np.testing.assert_array_equal(loaded.labels, data.labels)


class TrainingCommandTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.base = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_generate_then_train(self):
        data_path = self.base / 'moons.csv'
        model_path = self.base / 'gbm.json'
        call_command('gen_data', kind='moons', n=400, nuisance_mix=0.5, seed=3, out=str(data_path),
                     stdout=io.StringIO())
        data = Dataset.read_csv(data_path)
        self.assertEqual(data.feature_names, ['x', 'y', 'nuisance'])

        call_command('train', data=str(data_path), out=str(model_path), n_trees=5, max_depth=3,
                     stdout=io.StringIO())
        graph = read_model(model_path)
        self.assertEqual(graph.n_features, 3)
        report = json.loads((self.base / 'gbm.report.json').read_text(encoding='utf-8'))
        self.assertEqual(len(report['rounds']), 5)
        self.assertEqual(report['feature_names'], ['x', 'y', 'nuisance'])

        ensemble = train_gbm(data, TrainParams(n_trees=5, max_depth=3))
        np.testing.assert_allclose(graph.evaluate_many(data.features), predict_margin(ensemble, data.features),
                                   atol=1e-12)

    def test_train_on_single_class_exits_with_io_code(self):
        data_path = self.base / 'one.csv'
        Dataset(np.random.default_rng(0).uniform(size=(20, 2)), np.zeros(20), ['a', 'b']).write_csv(data_path)
        with self.assertRaises(CommandError) as ctx:
            call_command('train', data=str(data_path), out=str(self.base / 'm.json'), stdout=io.StringIO())
        self.assertEqual(ctx.exception.returncode, 2)

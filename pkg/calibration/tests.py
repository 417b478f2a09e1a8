import io
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from calibration.ecdf import DegenerateScores, derivative, fit_ecdf, transform
from model_ir.composition import linear_model
from model_ir.serializers import read_model, write_model
from training.datasets import Dataset


class FitEcdfTests(SimpleTestCase):

    def test_uniform_grid_midpoint(self):
        fit = fit_ecdf(np.arange(1, 101), knot_count=4)
        np.testing.assert_array_equal(fit.curve.inputs, [1.0, 34.0, 67.0, 100.0])
        self.assertAlmostEqual(float(transform(fit, 50.5)), 0.5, delta=0.02)

    def test_standard_normal_is_centered(self):
        scores = np.random.default_rng(0).normal(size=10_000)
        fit = fit_ecdf(scores, 64)
        self.assertTrue(0.47 <= float(fit.transform(0.0)) <= 0.53)
        self.assertAlmostEqual(float(np.mean(fit.transform(scores))), 0.5, delta=0.02)

    def test_output_is_clamped_and_monotone(self):
        scores = np.random.default_rng(1).exponential(size=500)
        fit = fit_ecdf(scores, 16)
        self.assertEqual(float(fit.transform(-100.0)), 0.0)
        self.assertEqual(float(fit.transform(1e6)), 1.0)
        grid = np.linspace(-1.0, 10.0, 400)
        self.assertTrue(np.all(np.diff(fit.transform(grid)) >= 0))
        self.assertEqual(fit.curve.problems(), [])

    def test_derivative_is_zero_outside_the_knots(self):
        fit = fit_ecdf(np.arange(10.0), 4)
        slopes = derivative(fit, [-1.0, 4.0, 20.0])
        self.assertEqual(slopes[0], 0.0)
        self.assertGreater(slopes[1], 0.0)
        self.assertEqual(slopes[2], 0.0)

    def test_repeated_scores_collapse_knots(self):
        scores = np.concatenate([np.zeros(80), np.linspace(1.0, 2.0, 20)])
        fit = fit_ecdf(scores, 11)
        self.assertTrue(np.all(np.diff(fit.curve.inputs) > 0))
        self.assertLess(fit.curve.inputs.size, 11)
        self.assertEqual(fit.curve.outputs[0], 0.0)
        self.assertEqual(fit.curve.outputs[-1], 1.0)

    def test_constant_scores_are_rejected(self):
        with self.assertRaises(DegenerateScores):
            fit_ecdf(np.full(50, 3.0))

    def test_non_finite_scores_are_rejected(self):
        with self.assertRaises(DegenerateScores):
            fit_ecdf([0.0, 1.0, np.nan])

    def test_knot_count_below_two(self):
        with self.assertRaises(ValueError):
            fit_ecdf([0.0, 1.0], knot_count=1)

    def test_graph_form_evaluates_the_curve(self):
        fit = fit_ecdf(np.random.default_rng(2).uniform(size=300), 8)
        graph = fit.to_graph()
        self.assertEqual(graph.n_features, 1)
        for v in (-0.5, 0.1, 0.37, 0.9, 2.0):
            self.assertAlmostEqual(graph.evaluate([v]), float(fit.transform(v)), places=12)


class FitEcdfCommandTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.base = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_fit_from_score_column(self):
        pd.DataFrame({'score': np.arange(1, 101, dtype=float)}).to_csv(self.base / 'scores.csv', index=False)
        out = self.base / 'ecdf.json'
        call_command('fit_ecdf', scores=str(self.base / 'scores.csv'), knots=4, out=str(out), stdout=io.StringIO())
        graph = read_model(out)
        self.assertAlmostEqual(graph.evaluate([50.5]), 0.5, delta=0.02)

    def test_fit_from_model_scores(self):
        write_model(linear_model([1.0, 1.0]), self.base / 'linear.json')
        rows = np.random.default_rng(3).uniform(size=(200, 2))
        Dataset(rows, np.zeros(200), ['a', 'b']).write_csv(self.base / 'data.csv')
        out = self.base / 'ecdf.json'
        call_command('fit_ecdf', scores=str(self.base / 'data.csv'), model=str(self.base / 'linear.json'),
                     knots=16, out=str(out), stdout=io.StringIO())
        graph = read_model(out)
        self.assertEqual(graph.evaluate([-10.0]), 0.0)
        self.assertEqual(graph.evaluate([10.0]), 1.0)

    def test_missing_column_exits_with_io_code(self):
        pd.DataFrame({'margin': [0.0, 1.0]}).to_csv(self.base / 'scores.csv', index=False)
        with self.assertRaises(CommandError) as ctx:
            call_command('fit_ecdf', scores=str(self.base / 'scores.csv'), out=str(self.base / 'e.json'),
                         stdout=io.StringIO())
        self.assertEqual(ctx.exception.returncode, 2)

    def test_constant_scores_exit_with_io_code(self):
        pd.DataFrame({'score': [1.0] * 10}).to_csv(self.base / 'scores.csv', index=False)
        with self.assertRaises(CommandError) as ctx:
            call_command('fit_ecdf', scores=str(self.base / 'scores.csv'), out=str(self.base / 'e.json'),
                         stdout=io.StringIO())
        self.assertEqual(ctx.exception.returncode, 2)

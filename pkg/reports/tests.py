import io
import json
import tempfile
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from attribution.boundary import PathQuery
from attribution.engine import AttributionEngine, ExplainFailure
from model_ir.composition import linear_model
from reports.experiments import moons_sensitivity, ovals_structure
from reports.plots import plot_attributions
from reports.writers import (
    ReportSchemaError,
    attribution_document,
    attribution_frame,
    credit_names,
    read_attribution_csv,
    write_attribution_csv,
)
from training.datasets import Dataset
from training.gbm import TrainParams

NAMES = ['a', 'b', 'c']


def linear_outcomes(rows, weights=(1.0, -2.0, 0.5)):
    graph = linear_model(list(weights))
    engine = AttributionEngine(graph)
    baseline = np.zeros(len(weights))
    return [engine.explain(PathQuery(baseline, np.asarray(r, dtype=float))) for r in rows], baseline


class WriterTests(SimpleTestCase):

    def test_frame_columns_and_values(self):
        rows = [[1.0, 1.0, 1.0], [2.0, 0.0, -2.0]]
        outcomes, _ = linear_outcomes(rows)
        frame = attribution_frame(outcomes, NAMES, row_ids=[5, 9])
        self.assertEqual(list(frame.columns), ['row', 'credit_a', 'credit_b', 'credit_c',
                                               'efficiency_residual', 'f_baseline', 'f_row', 'error'])
        self.assertEqual(frame['row'].tolist(), [5, 9])
        np.testing.assert_allclose(frame.loc[1, ['credit_a', 'credit_b', 'credit_c']].to_numpy(dtype=float),
                                   [2.0, 0.0, -1.0], atol=1e-12)
        self.assertEqual(credit_names(frame), NAMES)

    def test_failed_row_keeps_its_place(self):
        outcomes, baseline = linear_outcomes([[1.0, 0.0, 0.0]])
        failure = ExplainFailure(1, 'RadixOverflow', "radix 40 exceeds 20", 3)
        frame = attribution_frame([outcomes[0], failure], NAMES)
        self.assertTrue(frame.loc[1, ['credit_a', 'f_row']].isna().all())
        self.assertEqual(frame.loc[1, 'error'], "RadixOverflow: radix 40 exceeds 20")
        doc = attribution_document([outcomes[0], failure], NAMES, baseline, row_ids=[4, 7])
        self.assertEqual([r['row'] for r in doc['rows']], [4, 7])
        self.assertTrue(doc['rows'][1]['failed'])
        self.assertEqual(doc['rows'][1]['index'], 7)

    def test_csv_schema_is_checked(self):
        with tempfile.TemporaryDirectory() as tmp:
            good = Path(tmp) / 'good.csv'
            outcomes, _ = linear_outcomes([[1.0, 2.0, 3.0]])
            write_attribution_csv(attribution_frame(outcomes, NAMES), good)
            self.assertEqual(credit_names(read_attribution_csv(good)), NAMES)

            bad = Path(tmp) / 'bad.csv'
            pd.DataFrame({'row': [0], 'credit_a': [1.0]}).to_csv(bad, index=False)
            with self.assertRaises(ReportSchemaError):
                read_attribution_csv(bad)


class PlotTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.base = Path(self.tmp.name)
        rng = np.random.default_rng(0)
        self.data = Dataset(rng.uniform(size=(40, 3)), rng.integers(0, 2, size=40), NAMES)
        outcomes, _ = linear_outcomes(self.data.features[:25])
        self.frame = attribution_frame(outcomes, NAMES)

    def tearDown(self):
        self.tmp.cleanup()

    def test_one_scatter_per_feature_plus_histograms(self):
        written = plot_attributions(self.frame, self.data, self.base / 'svg', prefix='demo')
        self.assertEqual(sorted(p.name for p in written),
                         ['demo_histograms.svg', 'demo_scatter_a.svg', 'demo_scatter_b.svg', 'demo_scatter_c.svg'])
        for path in written:
            root = ET.parse(path).getroot()
            self.assertTrue(root.tag.endswith('svg'))

    def test_svg_output_is_byte_stable(self):
        first = plot_attributions(self.frame, self.data, self.base / 'one')
        second = plot_attributions(self.frame, self.data, self.base / 'two')
        for a, b in zip(first, second):
            self.assertEqual(a.read_bytes(), b.read_bytes())

    def test_empty_table_writes_nothing(self):
        with self.assertRaises(ReportSchemaError):
            plot_attributions(self.frame.iloc[0:0], self.data, self.base / 'empty')
        self.assertFalse((self.base / 'empty').exists())

    def test_row_ids_must_index_the_dataset(self):
        frame = self.frame.copy()
        frame.loc[0, 'row'] = 400
        with self.assertRaises(ReportSchemaError):
            plot_attributions(frame, self.data, self.base / 'svg')

    def test_plot_command(self):
        csv = self.base / 'credits.csv'
        write_attribution_csv(self.frame, csv)
        self.data.write_csv(self.base / 'data.csv')
        out = io.StringIO()
        call_command('plot', attributions=str(csv), data=str(self.base / 'data.csv'),
                     out_dir=str(self.base / 'figs'), stdout=out)
        self.assertEqual(len(out.getvalue().split()), 4)
        self.assertTrue((self.base / 'figs' / 'histograms.svg').exists())

    def test_plot_command_on_empty_table(self):
        csv = self.base / 'empty.csv'
        write_attribution_csv(self.frame.iloc[0:0], csv)
        self.data.write_csv(self.base / 'data.csv')
        with self.assertRaises(CommandError) as ctx:
            call_command('plot', attributions=str(csv), data=str(self.base / 'data.csv'),
                         out_dir=str(self.base / 'figs'), stdout=io.StringIO())
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertFalse((self.base / 'figs').exists())


class ExperimentTests(SimpleTestCase):

    def test_moons_nuisance_share_grows_with_the_mix(self):
        runs, summary = moons_sensitivity(n_samples=3000, params=TrainParams(n_trees=10, max_depth=3),
                                          n_explain=60, seed=0)
        self.assertEqual([r['rho'] for r in summary['runs']], [0.0, 0.5, 1.0])
        shares = [r['credit_share']['nuisance'] for r in summary['runs']]
        self.assertLess(shares[0], shares[1])
        self.assertLess(shares[1], shares[2])

        copy = runs[2]
        self.assertEqual(copy.summary['rows_failed'], 0)
        credits = copy.credits()
        np.testing.assert_array_equal(credits[:, :2], 0.0)
        self.assertEqual(copy.summary['max_abs_residual'], 0.0)

    def test_ovals_credit_sign_follows_the_oval(self):
        runs, summary = ovals_structure(n_samples=1500, params=TrainParams(n_trees=20, max_depth=4),
                                        n_explain=150, seed=1)
        stats = summary['runs'][0]
        self.assertEqual(summary['baseline'], [0.0, 0.0])
        self.assertGreaterEqual(stats['upper_positive_rate'], 0.8)
        self.assertGreaterEqual(stats['lower_negative_rate'], 0.8)
        self.assertEqual(len(runs[0].row_ids), 150)

    def test_run_experiment_command_writes_artifacts(self):
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp)
            call_command('run_experiment', 'ovals', out_dir=str(out), n=600, n_trees=5, max_depth=3,
                         n_explain=30, stdout=io.StringIO())
            summary = json.loads((out / 'ovals_summary.json').read_text(encoding='utf-8'))
            self.assertEqual(summary['experiment'], 'ovals')
            self.assertTrue((out / 'ovals.csv').exists())
            self.assertTrue((out / 'ovals_rows.csv').exists())
            self.assertTrue((out / 'svg' / 'ovals_histograms.svg').exists())
            frame = read_attribution_csv(out / 'ovals.csv')
            self.assertEqual(len(frame), 30)

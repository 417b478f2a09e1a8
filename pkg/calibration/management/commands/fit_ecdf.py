import pandas as pd

from calibration.ecdf import DEFAULT_KNOT_COUNT, fit_ecdf
from model_ir.serializers import read_model, write_model
from training.datasets import Dataset

from gig_backend.commands import EXIT_IO, GigCommand


class Command(GigCommand):
    help = "Fit a smoothed ECDF to a score column (or to a model's scores on a dataset) and write it as a curve JSON"

    def add_arguments(self, parser):
        parser.add_argument('--scores', required=True, help="CSV holding the scores or the dataset to score")
        parser.add_argument('--column', default='score', help="score column name")
        parser.add_argument('--model', default=None, help="score the CSV rows with this model instead of reading a column")
        parser.add_argument('--knots', type=int, default=DEFAULT_KNOT_COUNT)
        parser.add_argument('--out', required=True)

    def run(self, *args, **options):
        if options['model']:
            graph = read_model(options['model'])
            data = Dataset.read_csv(options['scores'])
            scores = graph.evaluate_many(data.features)
        else:
            frame = pd.read_csv(options['scores'])
            if options['column'] not in frame.columns:
                self.fail(f"Column '{options['column']}' not in {list(frame.columns)}", EXIT_IO)
            scores = frame[options['column']].to_numpy(dtype=float)

        fit = fit_ecdf(scores, options['knots'])
        write_model(fit.to_graph(), options['out'])
        self.stdout.write(self.style.SUCCESS(
            f"{len(fit.curve.inputs)} knots from {fit.samples_seen} scores -> {options['out']}"))

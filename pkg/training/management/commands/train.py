from pathlib import Path

from model_ir.serializers import write_model
from training.datasets import Dataset
from training.gbm import GradientBoostingTrainer, TrainParams, to_graph

from gig_backend.commands import GigCommand


class Command(GigCommand):
    help = "Train a gradient-boosted tree classifier and write its margin as a model JSON"

    def add_arguments(self, parser):
        parser.add_argument('--data', required=True, help="training CSV (label column last)")
        parser.add_argument('--out', required=True, help="model JSON to write")
        parser.add_argument('--n-trees', type=int, default=25)
        parser.add_argument('--max-depth', type=int, default=6)
        parser.add_argument('--learning-rate', type=float, default=0.1)
        parser.add_argument('--min-leaf', type=int, default=2)
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--report', default=None,
                            help="training report JSON (default: <out>.report.json)")

    def run(self, *args, **options):
        data = Dataset.read_csv(options['data'])
        params = TrainParams(
            n_trees=options['n_trees'],
            max_depth=options['max_depth'],
            learning_rate=options['learning_rate'],
            min_leaf=options['min_leaf'],
            seed=options['seed'],
        )
        trainer = GradientBoostingTrainer(params)
        ensemble = trainer.fit(data)
        write_model(to_graph(ensemble, data.n_features), options['out'])

        report_path = options['report'] or str(Path(options['out']).with_suffix('.report.json'))
        self.write_json(report_path, {**trainer.report.to_dict(), 'feature_names': data.feature_names})
        self.stdout.write(self.style.SUCCESS(
            f"{len(ensemble.trees)} trees, training accuracy {trainer.report.final_accuracy:.4f} -> {options['out']}"))

from pathlib import Path

from django.conf import settings

from reports.experiments import EXPERIMENTS
from reports.plots import plot_attributions
from reports.writers import attribution_document, write_attribution_csv, write_json
from training.gbm import TrainParams

from gig_backend.commands import EXIT_TOLERANCE, GigCommand


class Command(GigCommand):
    help = ("Run a synthetic experiment end to end (generate, train, explain, plot): "
            "'moons' sweeps the nuisance mix over 0, 0.5 and 1; 'ovals' explains against the overlap centroid")

    def add_arguments(self, parser):
        parser.add_argument('experiment', choices=sorted(EXPERIMENTS))
        parser.add_argument('--out-dir', required=True)
        parser.add_argument('--n', type=int, default=None, help="dataset size (moons 20000, ovals 5000)")
        parser.add_argument('--n-trees', type=int, default=None, help="moons 25, ovals 50")
        parser.add_argument('--max-depth', type=int, default=6)
        parser.add_argument('--n-explain', type=int, default=500, help="test rows to explain (0: all)")
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--jobs', type=int, default=None)
        parser.add_argument('--no-plots', action='store_true')
        parser.add_argument('--strict', action='store_true', help="exit 1 when a summary check fails")

    def run(self, *args, **options):
        name = options['experiment']
        defaults = {'moons': (20000, 25), 'ovals': (5000, 50)}[name]
        n_samples = options['n'] or defaults[0]
        params = TrainParams(n_trees=options['n_trees'] or defaults[1], max_depth=options['max_depth'],
                             seed=options['seed'])
        jobs = options['jobs'] or getattr(settings, 'GIG_JOBS', 1)
        runs, summary = EXPERIMENTS[name](n_samples=n_samples, params=params, n_explain=options['n_explain'] or None,
                                          seed=options['seed'], jobs=jobs)

        out = Path(options['out_dir'])
        for run in runs:
            frame = run.frame
            write_attribution_csv(frame, out / f"{run.name}.csv")
            write_json(attribution_document(run.outcomes, run.data.feature_names, run.baseline, run.row_ids,
                                            extra={'summary': run.summary}), out / f"{run.name}.json")
            run.data.write_csv(out / f"{run.name}_rows.csv")
            if not options['no_plots'] and run.attributions:
                plot_attributions(frame.dropna(subset=['f_row']), run.data, out / 'svg', prefix=run.name)
        write_json(summary, out / f"{name}_summary.json")

        for check, ok in summary['checks'].items():
            self.stdout.write(f"{check}: {'ok' if ok else 'FAILED'}")
        if options['strict'] and not all(summary['checks'].values()):
            self.fail(f"{name} summary checks failed", EXIT_TOLERANCE)

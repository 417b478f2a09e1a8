from pathlib import Path

from django.conf import settings

from attribution.engine import Attribution, ExplainFailure
from attribution.jobs import DEFAULT_CHUNK_SIZE, ExplainJob, explain_rows_celery, explain_rows_local, parse_rows
from reports.plots import plot_attributions
from reports.writers import attribution_document, attribution_frame, write_attribution_csv, write_json

from gig_backend.commands import EXIT_CAPACITY, EXIT_TOLERANCE, GigCommand

from ._engine_options import add_engine_arguments, engine_config


class Command(GigCommand):
    help = ("Explain dataset rows against a baseline: per-feature credit, efficiency residual, "
            "f(baseline) and f(row) to CSV, with the corner / endpoint / integral split in a JSON mirror")

    def add_arguments(self, parser):
        parser.add_argument('--model', required=True)
        parser.add_argument('--data', required=True, help="CSV of rows (label column optional)")
        parser.add_argument('--baseline-row', type=int, default=None,
                            help="row index used as baseline (default: feature-wise median)")
        parser.add_argument('--rows', default='all', help="'all' or a list such as 0,3,10-20")
        parser.add_argument('--out', required=True, help="attribution CSV")
        parser.add_argument('--json', default=None, help="JSON mirror (default: <out>.json)")
        parser.add_argument('--svg-dir', default=None, help="also write credit plots here")
        parser.add_argument('--jobs', type=int, default=None, help="worker threads (GIG_JOBS)")
        parser.add_argument('--celery', action='store_true', help="dispatch row chunks to Celery workers")
        parser.add_argument('--chunk-size', type=int, default=DEFAULT_CHUNK_SIZE)
        parser.add_argument('--progress', action='store_true')
        add_engine_arguments(parser)

    def run(self, *args, **options):
        config = engine_config(options)
        job = ExplainJob(options['model'], options['data'], options['baseline_row'],
                         parse_rows(options['rows']), config)
        graph, data = job.load()
        baseline = job.baseline(data)
        row_ids = job.row_ids(data)

        if options['celery']:
            outcomes = explain_rows_celery(graph, data, baseline, row_ids, config, options['chunk_size'])
        else:
            jobs = options['jobs'] or getattr(settings, 'GIG_JOBS', 1)
            outcomes = explain_rows_local(graph, data, baseline, row_ids, config, jobs, options['progress'])

        frame = attribution_frame(outcomes, data.feature_names, row_ids)
        write_attribution_csv(frame, options['out'])
        json_path = options['json'] or str(Path(options['out']).with_suffix('.json'))
        write_json(attribution_document(outcomes, data.feature_names, baseline, row_ids,
                                        extra={'config': config.to_dict()}), json_path)
        if options['svg_dir'] and any(isinstance(o, Attribution) for o in outcomes):
            plot_attributions(frame.dropna(subset=['f_row']), data, options['svg_dir'])

        failures = [o for o in outcomes if isinstance(o, ExplainFailure)]
        over = [a for a in outcomes if isinstance(a, Attribution) and not a.within(config.efficiency_tol)]
        self.stdout.write(f"explained {len(outcomes) - len(failures)}/{len(outcomes)} rows -> {options['out']}")
        if any(f.exit_code == EXIT_CAPACITY for f in failures):
            self.fail(f"{len(failures)} row(s) failed, including radix capacity errors", EXIT_CAPACITY)
        if failures:
            self.fail(f"{len(failures)} row(s) failed; see {json_path}", EXIT_TOLERANCE)
        if over:
            self.fail(f"{len(over)} row(s) exceed efficiency tolerance {config.efficiency_tol:g}", EXIT_TOLERANCE)
        self.stdout.write(self.style.SUCCESS("all rows within tolerance"))

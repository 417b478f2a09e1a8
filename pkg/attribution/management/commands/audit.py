import numpy as np

from attribution.audit import axiom_audit, random_paths, summarize
from attribution.exceptions import RadixOverflow
from model_ir.serializers import read_model
from training.datasets import Dataset

from gig_backend.commands import EXIT_CAPACITY, EXIT_TOLERANCE, GigCommand, exit_code_for

from ._engine_options import add_engine_arguments, engine_config


class Command(GigCommand):
    help = ("Check the attribution axioms on random endpoint pairs: efficiency, reflexivity, constant and "
            "null variables, corner oracle agreement, and optionally linearity and symmetry")

    def add_arguments(self, parser):
        parser.add_argument('--model', required=True)
        parser.add_argument('--data', required=True, help="CSV whose rows serve as path endpoints")
        parser.add_argument('--n-paths', type=int, default=20)
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--pin-prob', type=float, default=0.2,
                            help="chance a feature is held constant along a path")
        parser.add_argument('--snap-prob', type=float, default=0.2,
                            help="chance a start coordinate is moved onto a split threshold")
        parser.add_argument('--other', default=None, help="second model for the linearity check")
        parser.add_argument('--symmetry', action='store_true', help="also check a random feature relabelling")
        parser.add_argument('--out', default=None, help="report JSON (default: stdout)")
        add_engine_arguments(parser)

    def run(self, *args, **options):
        config = engine_config(options)
        graph = read_model(options['model'])
        other = read_model(options['other']) if options['other'] else None
        data = Dataset.read_csv(options['data'])
        paths = random_paths(graph, data.features, options['n_paths'], options['seed'],
                             options['pin_prob'], options['snap_prob'])
        rng = np.random.default_rng(options['seed'])

        reports, errors = [], []
        for index, q in enumerate(paths):
            perm = rng.permutation(graph.n_features) if options['symmetry'] else None
            try:
                reports.append(axiom_audit(graph, q, config, other=other, perm=perm))
            except Exception as e:
                errors.append({'path': index, 'error_type': type(e).__name__, 'message': str(e),
                               'exit_code': exit_code_for(e)})
                if not isinstance(e, RadixOverflow):
                    self.stderr.write(f"path {index}: {type(e).__name__}: {e}")

        summary = summarize(reports, errors)
        payload = {'summary': summary.to_dict(), 'reports': [r.to_dict() for r in reports],
                   'config': config.to_dict()}
        if options['out']:
            self.write_json(options['out'], payload)
        else:
            self.write_json_stdout(payload)

        if any(e['exit_code'] == EXIT_CAPACITY for e in errors):
            self.fail("radix capacity exceeded on some paths", EXIT_CAPACITY)
        if not summary.all_passed:
            self.fail(f"{summary.paths - summary.passed}/{summary.paths} paths failed the audit", EXIT_TOLERANCE)
        if options['out']:
            self.stdout.write(self.style.SUCCESS(
                f"{summary.paths} paths, {summary.corners_checked} corners: all checks passed"))

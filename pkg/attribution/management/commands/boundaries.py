from attribution.boundary import PathQuery
from attribution.engine import AttributionEngine
from model_ir.serializers import read_model

from gig_backend.commands import EXIT_IO, GigCommand

from ._engine_options import add_engine_arguments, engine_config


def _vector(text):
    return [float(v) for v in text.split(',')]


class Command(GigCommand):
    help = ("Print a model's split thresholds per feature as JSON; with --start/--end also the path's "
            "crossings, boundary-incident endpoints and corner probe step")

    def add_arguments(self, parser):
        parser.add_argument('--model', required=True)
        parser.add_argument('--start', type=_vector, default=None, help="comma-separated start point")
        parser.add_argument('--end', type=_vector, default=None, help="comma-separated end point")
        add_engine_arguments(parser)

    def run(self, *args, **options):
        graph = read_model(options['model'])
        engine = AttributionEngine(graph, engine_config(options))
        payload = {'n_features': graph.n_features, 'thresholds': engine.table.to_dict()}
        if options['start'] is not None or options['end'] is not None:
            if options['start'] is None or options['end'] is None:
                self.fail("--start and --end go together", EXIT_IO)
            q = PathQuery.for_graph(graph, options['start'], options['end'])
            crossings, delta, start_axes, end_axes = engine.plan(q)
            payload['path'] = {
                'start': q.s.tolist(),
                'end': q.e.tolist(),
                'delta': delta,
                'start_incident_features': start_axes,
                'end_incident_features': end_axes,
                'crossings': [
                    {'alpha': c.alpha, 'radix': c.radix, 'features': list(c.features),
                     'thresholds': list(c.thresholds), 'point': c.point.tolist()}
                    for c in crossings
                ],
            }
        self.write_json_stdout(payload)

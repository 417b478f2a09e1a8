from pathlib import Path

import numpy as np

from model_ir.serializers import graph_from_compose_spec, write_model
from training.datasets import Dataset

from gig_backend.commands import GigCommand


class Command(GigCommand):
    help = ("Compose sub-models (each optionally through an ECDF) behind a linear or dense combiner, "
            "optionally followed by a final ECDF, and write the merged model JSON")

    def add_arguments(self, parser):
        parser.add_argument('spec', help="compose spec JSON; model paths are relative to it")
        parser.add_argument('--out', required=True)
        parser.add_argument('--check-rows', default=None,
                            help="optional CSV of rows to spot-check evaluation on")

    def run(self, *args, **options):
        spec_path = Path(options['spec'])
        graph = graph_from_compose_spec(self.read_json(spec_path), spec_path.parent)
        write_model(graph, options['out'])
        if options['check_rows']:
            rows = Dataset.read_csv(options['check_rows']).features
            values = graph.evaluate_many(rows)
            self.stdout.write(f"spot-check: {len(values)} rows, outputs in [{np.min(values):.6g}, {np.max(values):.6g}]")
        self.stdout.write(self.style.SUCCESS(f"{graph} -> {options['out']}"))

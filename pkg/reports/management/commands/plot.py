from reports.plots import plot_attributions
from reports.writers import read_attribution_csv
from training.datasets import Dataset

from gig_backend.commands import GigCommand


class Command(GigCommand):
    help = "Render credit scatter plots (one per feature) and a credit histogram panel as SVG"

    def add_arguments(self, parser):
        parser.add_argument('--attributions', required=True, help="CSV written by explain")
        parser.add_argument('--data', required=True, help="dataset the rows were taken from")
        parser.add_argument('--out-dir', required=True)
        parser.add_argument('--prefix', default=None)

    def run(self, *args, **options):
        frame = read_attribution_csv(options['attributions'])
        data = Dataset.read_csv(options['data'])
        written = plot_attributions(frame.dropna(subset=['f_row']), data, options['out_dir'], options['prefix'])
        for path in written:
            self.stdout.write(str(path))

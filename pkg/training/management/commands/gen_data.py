from training.datasets import GENERATORS, GenSpec, generate

from gig_backend.commands import GigCommand


class Command(GigCommand):
    help = "Generate a synthetic moons/ovals dataset as CSV (label column last)"

    def add_arguments(self, parser):
        parser.add_argument('--kind', choices=sorted(GENERATORS), required=True)
        parser.add_argument('--n', type=int, default=20000, help="number of rows")
        parser.add_argument('--noise', type=float, default=0.1, help="Gaussian noise scale (moons)")
        parser.add_argument('--nuisance-mix', type=float, default=None,
                            help="append a nuisance feature rho * label + (1 - rho) * noise")
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--out', required=True)

    def run(self, *args, **options):
        spec = GenSpec(options['n'], options['noise'], options['seed'], options['nuisance_mix'])
        data = generate(options['kind'], spec)
        data.write_csv(options['out'])
        self.stdout.write(self.style.SUCCESS(
            f"{options['kind']}: {data.n_rows} rows, features {', '.join(data.feature_names)} -> {options['out']}"))

from fractions import Fraction

from attribution.corner_credit import (
    empty_set_lift,
    grand_coalition_lift,
    half_weight_lift,
    half_weight_shapley,
    shapley,
)

from gig_backend.commands import EXIT_TOLERANCE, GigCommand

LIFTS = {
    'empty': empty_set_lift,
    'grand': grand_coalition_lift,
    'half': half_weight_lift,
}


class Command(GigCommand):
    help = "Exact Shapley values of the trivial lifts of a point value f(x) over N players"

    def add_arguments(self, parser):
        parser.add_argument('--n', type=int, default=5, help="number of players")
        parser.add_argument('--fx', default='1', help="f(x) as an integer or fraction, e.g. 7/3")
        parser.add_argument('--lift', choices=sorted(LIFTS) + ['all'], default='all')

    def run(self, *args, **options):
        n, f_x = options['n'], Fraction(options['fx'])
        names = sorted(LIFTS) if options['lift'] == 'all' else [options['lift']]
        payload = {'n': n, 'f_x': str(f_x), 'lifts': {}}
        broken = []
        for name in names:
            if name == 'half' and n < 2:
                continue
            phi = shapley(LIFTS[name](f_x, n))
            if name == 'half':
                expected = [half_weight_shapley(f_x, n, i + 1) for i in range(n)]
            else:
                expected = [f_x / n] * n
            if phi != expected or sum(phi) != f_x:
                broken.append(name)
            payload['lifts'][name] = {
                'phi': [str(p) for p in phi],
                'phi_float': [float(p) for p in phi],
                'expected': [str(p) for p in expected],
                'sum': str(sum(phi)),
            }
            if name == 'half':
                # the commonly quoted closed form, which does not sum to f(x)
                stated = [(f_x - i) / n for i in range(1, n + 1)]
                payload['lifts'][name].update({
                    'stated': [str(p) for p in stated],
                    'stated_sum': str(sum(stated)),
                    'differs_from_stated': phi != stated,
                })
        self.write_json_stdout(payload)
        if broken:
            self.fail(f"Lift values disagree with their closed forms: {broken}", EXIT_TOLERANCE)

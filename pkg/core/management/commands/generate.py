import numpy as np
from django.core.management.base import BaseCommand

from core.exceptions import SortitionError
from core.instances import FAMILIES, gen_instance
from core.management.commands.helper import parse_panel, resolve_seed, usage_error

RANDOM_FAMILIES = ('random-family', 'euclidean')

# parameters each family needs on the command line
REQUIRED = {
    'example1': (),
    'det-lower': ('n', 'k', 'eps'),
    'fair-lower': ('n', 'k', 'eps'),
    'two-block': ('n', 'k'),
    'fgc-line-k2': ('n', 'delta'),
    'bad-fair-line': ('n', 'delta'),
    'random-family': ('n', 'm', 'eps'),
    'euclidean': ('n', 'm', 'dim'),
}


class Command(BaseCommand):
    help = 'Write a generated instance as JSON'

    def add_arguments(self, parser):
        parser.add_argument('family', choices=FAMILIES)
        parser.add_argument('--n', type=int)
        parser.add_argument('--k', type=int)
        parser.add_argument('--m', type=int)
        parser.add_argument('--eps', type=float)
        parser.add_argument('--delta', type=float)
        parser.add_argument('--dim', type=int, default=2)
        parser.add_argument('--panel', help='Comma-separated panel for det-lower (default: agents 0..k-1)')
        parser.add_argument('--seed', type=int)
        parser.add_argument('--output', help='File to write instead of stdout')

    def handle(self, *args, **options):
        family = options['family']
        missing = [name for name in REQUIRED[family] if options[name] is None]
        if missing:
            raise usage_error(f"{family} needs " + ', '.join(f'--{name}' for name in missing))

        rng = None
        if family in RANDOM_FAMILIES:
            rng = np.random.default_rng(resolve_seed(self, options['seed']))

        params = {name: options[name] for name in REQUIRED[family]}
        if family == 'det-lower':
            params['panel'] = parse_panel(options['panel'])
        try:
            instance = gen_instance(family, rng=rng, **params)
        except (SortitionError, ValueError) as e:
            raise usage_error(str(e))

        if options['output']:
            with open(options['output'], 'w', encoding='utf-8') as f:
                f.write(instance.to_json())
            self.stderr.write(self.style.SUCCESS(
                f"Wrote {family} instance ({instance.n} agents, {instance.m} alternatives) to {options['output']}"))
        else:
            self.stdout.write(instance.to_json())

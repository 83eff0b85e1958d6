from collections import Counter

from django.core.management.base import BaseCommand

from core.bounds import checks_to_json
from core.management.commands.helper import check_failed, format_table, resolve_seed
from core.suites import SUITES, run_suite


class Command(BaseCommand):
    help = 'Run one of the inequality sweeps and print a pass/fail table'

    def add_arguments(self, parser):
        parser.add_argument('suite', choices=sorted(SUITES))
        parser.add_argument('--seed', type=int)
        parser.add_argument('--instances', type=int, help='Random instances (fairness, thm2, thm6)')
        parser.add_argument('--draws', type=int, help='Sampled panels for the fairness suite')
        parser.add_argument('--vectors', type=int, help='Weight vectors (serfling)')
        parser.add_argument('--trials', type=int, help='Monte Carlo trials per vector (serfling)')
        parser.add_argument('--max-n', type=int, dest='max_n')
        parser.add_argument('--max-k', type=int, dest='max_k', help='Largest k (lemma-19-21)')
        parser.add_argument('--include-k2', action='store_true', dest='include_k2',
                            help='Add the k=2 line instance to thm6 as an expected failure')
        parser.add_argument('--all', action='store_true', help='List passing checks too')
        parser.add_argument('--json', action='store_true')

    def handle(self, *args, **options):
        seed = resolve_seed(self, options['seed'])
        extra = {name: options[name] for name in ('instances', 'draws', 'vectors', 'trials', 'max_n', 'max_k')
                 if options[name] is not None}
        if options['include_k2']:
            extra['include_k2'] = True
        checks = run_suite(options['suite'], seed=seed, **extra)

        if options['json']:
            self.stdout.write(checks_to_json(checks))
        else:
            shown = checks if options['all'] else [c for c in checks if not c.holds]
            if shown:
                rows = [(c.name, c.status, c.lhs, c.rhs,
                         ' '.join(f'{key}={value}' for key, value in c.params.items())) for c in shown]
                self.stdout.write(format_table(('check', 'status', 'lhs', 'rhs', 'params'), rows,
                                               [20, 14, 14, 14, 1]))
            for status, count in sorted(Counter(c.status for c in checks).items()):
                self.stdout.write(f"{status}: {count}")

        failed = [c for c in checks if not c.ok]
        if failed:
            raise check_failed(f"{len(failed)} of {len(checks)} checks in {options['suite']} failed")
        if not options['json']:
            self.stdout.write(self.style.SUCCESS(f"{options['suite']}: all {len(checks)} checks ok"))

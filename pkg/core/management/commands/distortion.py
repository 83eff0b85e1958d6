import numpy as np
from django.core.management.base import BaseCommand

from core.distortion import ex_ante_exact, ex_ante_mc, social_costs
from core.exceptions import SortitionError
from core.management.commands.helper import (add_algorithm_arguments, build_distribution, build_sampler,
                                             format_table, load_instance, parse_panel, resolve_seed, usage_error)


class Command(BaseCommand):
    help = 'Ex-ante and ex-post distortion of a selection algorithm on an instance'

    def add_arguments(self, parser):
        parser.add_argument('instance', help='Instance JSON file')
        add_algorithm_arguments(parser)
        parser.add_argument('--mode', choices=('exact', 'mc'), default='exact')
        parser.add_argument('--trials', type=int, default=100000, help='Monte Carlo trials')
        parser.add_argument('--seed', type=int)
        parser.add_argument('--json', action='store_true', help='Print the report as JSON only')

    def handle(self, *args, **options):
        instance = load_instance(options['instance'])
        panel = parse_panel(options['panel'])
        algorithm, k, fill = options['algorithm'], options['k'], options['fill']
        if k is not None and not 1 <= k <= instance.n:
            raise usage_error(f"--k must lie in [1, {instance.n}], got {k}")

        try:
            if options['mode'] == 'exact':
                report = ex_ante_exact(instance, build_distribution(instance, algorithm, k, fill, panel))
            else:
                if options['trials'] < 1:
                    raise usage_error(f"--trials must be at least 1, got {options['trials']}")
                rng = np.random.default_rng(resolve_seed(self, options['seed']))
                sampler = build_sampler(instance, algorithm, k, fill, panel)
                report = ex_ante_mc(instance, sampler, options['trials'], rng)
        except (SortitionError, ValueError) as e:
            raise usage_error(str(e))

        if options['json']:
            self.stdout.write(report.to_json())
            return

        sc = social_costs(instance.costs)
        rows = [(instance.label(alt), float(sc[alt]), report.win_prob[alt]) for alt in range(instance.m)]
        self.stdout.write(format_table(('alternative', 'SC', 'win_prob'), rows))

        optimum = instance.label(report.optimal_alternative)
        self.stdout.write(f"optimum: {optimum} (SC={report.optimal_cost:g})")
        if report.method == 'exact':
            self.stdout.write(self.style.SUCCESS(f"ex-ante distortion: {report.ex_ante:.10f}"))
            self.stdout.write(self.style.SUCCESS(f"ex-post distortion: {report.ex_post:.10f}"))
        else:
            self.stdout.write(self.style.SUCCESS(
                f"ex-ante distortion: {report.ex_ante:.6f} +- {report.ci_halfwidth:.6f} ({report.trials} trials)"))
            self.stdout.write(self.style.WARNING(f"ex-post distortion >= {report.ex_post:.6f} (largest observed)"))

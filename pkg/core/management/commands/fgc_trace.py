from django.core.management.base import BaseCommand

from core.codecs import dumps
from core.management.commands.helper import load_instance, usage_error
from core.selection import fair_fill_plan, fgc_ball_trace


class Command(BaseCommand):
    help = 'Show the groups Fair Greedy Capture builds on an instance'

    def add_arguments(self, parser):
        parser.add_argument('instance', help='Instance JSON file')
        parser.add_argument('--k', type=int, required=True)
        parser.add_argument('--json', action='store_true')

    def handle(self, *args, **options):
        instance = load_instance(options['instance'])
        k = options['k']
        if not 1 <= k <= instance.n:
            raise usage_error(f"--k must lie in [1, {instance.n}], got {k}")

        trace = fgc_ball_trace(instance.agent_dist, k)
        plan = fair_fill_plan(trace)
        if options['json']:
            data = trace.to_dict()
            data['fill_plan'] = {'with_leftover_draw': plan.with_leftover_draw,
                                 'without_leftover_draw': plan.without_leftover_draw}
            self.stdout.write(dumps(data))
            return

        self.stdout.write(f"n={trace.n} k={k} group size={trace.q}")
        for index, (group, radius) in enumerate(zip(trace.groups, trace.radii), start=1):
            self.stdout.write(f"S{index}: radius={radius:.6g} agents={list(group)}")
        self.stdout.write(f"leftover: {list(trace.leftover)}")
        self.stdout.write(f"expected leftover fill: {plan.with_leftover_draw:.6g} after a leftover draw, "
                          f"{plan.without_leftover_draw:.6g} otherwise")

from django.core.management.base import BaseCommand

from core.codecs import dumps
from core.distortion import ex_ante_exact
from core.instances import gen_example1
from core.management.commands.helper import format_table
from core.selection import uniform_support


def figure1_rows():
    """Win probabilities of c1..c3 and ex-ante distortion of uniform panels, k = 1..10"""
    instance = gen_example1()
    rows = []
    for k in range(1, instance.n + 1):
        report = ex_ante_exact(instance, uniform_support(instance.n, k))
        rows.append({'k': k, 'win_prob': list(report.win_prob), 'ex_ante': report.ex_ante})
    return rows


class Command(BaseCommand):
    help = 'Exact win probabilities on the Figure 1 instance for every panel size'

    def add_arguments(self, parser):
        parser.add_argument('--json', action='store_true')

    def handle(self, *args, **options):
        rows = figure1_rows()
        if options['json']:
            self.stdout.write(dumps(rows))
            return
        table = [(row['k'], *row['win_prob'], row['ex_ante']) for row in rows]
        self.stdout.write(format_table(('k', 'c1', 'c2', 'c3', 'ex_ante'), table))

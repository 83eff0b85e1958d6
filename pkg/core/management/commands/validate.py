from django.core.management.base import BaseCommand

from core.codecs import dumps
from core.management.commands.helper import check_failed, load_instance
from core.metric import validate_metric


class Command(BaseCommand):
    help = 'Check that an instance file holds a pseudo-metric'

    def add_arguments(self, parser):
        parser.add_argument('instance', help='Instance JSON file')
        parser.add_argument('--tol', type=float, default=0.0, help='Allowed violation size')
        parser.add_argument('--json', action='store_true', help='Print violations as JSON')

    def handle(self, *args, **options):
        instance = load_instance(options['instance'])
        violations = validate_metric(instance.metric, tol=options['tol'])

        if options['json']:
            self.stdout.write(dumps([v.to_dict() for v in violations]))
        else:
            for v in violations:
                self.stdout.write(f"{v.kind:<10} {str(v.points):<16} excess={v.excess:.3g}")

        if violations:
            raise check_failed(f"{len(violations)} metric violations in {options['instance']}")
        if not options['json']:
            self.stdout.write(self.style.SUCCESS(
                f"Valid pseudo-metric: {instance.n} agents, {instance.m} alternatives"))

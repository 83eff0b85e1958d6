import os

from django.conf import settings
from django.core.management.base import BaseCommand

from core.codecs import dumps
from core.exceptions import SortitionError
from core.management.commands.helper import format_table, resolve_seed, usage_error
from core.selection import FAIR_FILL, FILL_MODES
from experiments.datasets import parse_schema
from experiments.models import ExperimentRun
from experiments.protocol import ExperimentConfig, run_experiment, write_outputs
from experiments.tasks import run_experiment_job


class Command(BaseCommand):
    help = 'Average distortion of uniform and FGC panels under random feature weights of a CSV dataset'

    def add_arguments(self, parser):
        parser.add_argument('dataset', help='CSV file with a header row')
        parser.add_argument('--schema', required=True, help='Columns to use, e.g. sex:categorical,age:continuous')
        parser.add_argument('--k-min', type=int, default=1, dest='k_min')
        parser.add_argument('--k-max', type=int, default=40, dest='k_max')
        parser.add_argument('--metrics', type=int, default=10, help='Random metrics per panel size')
        parser.add_argument('--panels', type=int, default=50, help='Panels per metric')
        parser.add_argument('--algorithms', default='uniform,fgc')
        parser.add_argument('--fill', choices=FILL_MODES, default=FAIR_FILL)
        parser.add_argument('--seed', type=int)
        parser.add_argument('--agent-subsample', type=int, dest='agent_subsample',
                            help=f'Cap on agents (default {settings.SORTITION_AGENT_SUBSAMPLE_CAP})')
        parser.add_argument('--round', action='store_true', help='Round stored samples to 2 decimals')
        parser.add_argument('--output-dir', dest='output_dir')
        parser.add_argument('--compress', action='store_true', help='Write samples.json.gz')
        parser.add_argument('--async', action='store_true', dest='run_async',
                            help='Queue the run on the Celery worker instead of running it here')
        parser.add_argument('--json', action='store_true')

    def handle(self, *args, **options):
        seed = resolve_seed(self, options['seed'])
        try:
            config = ExperimentConfig(
                dataset=options['dataset'],
                schema=parse_schema(options['schema']),
                k_min=options['k_min'],
                k_max=options['k_max'],
                metrics_per_run=options['metrics'],
                panels_per_metric=options['panels'],
                algorithms=tuple(a.strip() for a in options['algorithms'].split(',') if a.strip()),
                seed=seed,
                agent_subsample=options['agent_subsample'],
                round_samples=options['round'],
                fill=options['fill'],
            )
        except (SortitionError, ValueError) as e:
            raise usage_error(str(e))
        if not os.path.isfile(config.dataset):
            raise usage_error(f"Dataset not found: {config.dataset}")

        if options['run_async']:
            run = ExperimentRun.objects.create(dataset=config.dataset, config=config.to_dict(),
                                               compress_samples=options['compress'])
            run_experiment_job.delay(run.pk)
            self.stdout.write(self.style.SUCCESS(f"Queued experiment run {run.pk}"))
            return

        try:
            rows = run_experiment(config)
        except (SortitionError, ValueError) as e:
            raise usage_error(str(e))

        directory = options['output_dir'] or os.path.join(settings.SORTITION_DATA_ROOT, f'experiment_{seed}')
        paths = write_outputs(config, rows, directory, compress=options['compress'])

        if options['json']:
            self.stdout.write(dumps([row.to_dict(include_samples=False) for row in rows]))
            return
        table = [(row.algorithm, row.k, row.mean_distortion, row.ci95_low, row.ci95_high) for row in rows]
        self.stdout.write(format_table(('algorithm', 'k', 'mean', 'ci_low', 'ci_high'), table))
        self.stdout.write(self.style.SUCCESS(f"Wrote {paths['rows']} and {paths['samples']}"))

from celery import shared_task
import logging

from experiments.models import ExperimentRun
from experiments.protocol import execute_run

logger = logging.getLogger(__name__)


@shared_task
def run_experiment_job(run_id):
    """Run a queued experiment in the worker"""
    try:
        run = ExperimentRun.objects.get(pk=run_id)
        rows = execute_run(run)
        logger.info(f"Experiment run {run_id} completed with {len(rows)} rows")
        return f"Experiment run {run_id} completed"
    except Exception as e:
        logger.error(f"Experiment run {run_id} failed: {str(e)}")
        raise

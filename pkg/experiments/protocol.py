"""
Dataset experiments: random feature weights give a metric over the individuals,
who serve as agents and as alternatives; panels are drawn per metric and the
decision of each panel is compared with the optimum.
"""
import logging
import os
from dataclasses import dataclass, field
from math import fsum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from django.conf import settings
from django.utils import timezone
from scipy import stats

from core.codecs import create_compressed_json, write_json
from core.distortion import optimum, panel_decisions, social_costs
from core.metric import FeatureTable
from core.selection import FAIR_FILL, FILL_MODES, fair_fill_plan, fgc_ball_trace, sample_from_trace, uniform_sample
from experiments.datasets import Schema, load_dataset, sample_metric, subsample

logger = logging.getLogger(__name__)

UNIFORM = 'uniform'
FGC = 'fgc'
ALGORITHMS = (UNIFORM, FGC)

# seed streams: [seed, METRIC_STREAM, metric], [seed, PANEL_STREAM, alg, k, metric, panel]
METRIC_STREAM, PANEL_STREAM, SUBSAMPLE_STREAM = 0, 1, 2


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    schema: Schema
    k_min: int = 1
    k_max: int = 40
    metrics_per_run: int = 10
    panels_per_metric: int = 50
    algorithms: Tuple[str, ...] = ALGORITHMS
    seed: int = 0
    agent_subsample: Optional[int] = None
    round_samples: bool = False
    fill: str = FAIR_FILL

    def __post_init__(self):
        if self.k_min < 1 or self.k_max < self.k_min:
            raise ValueError(f"Need 1 <= k_min <= k_max, got k_min={self.k_min}, k_max={self.k_max}")
        if self.metrics_per_run < 1 or self.panels_per_metric < 1:
            raise ValueError("metrics_per_run and panels_per_metric must be at least 1")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown or not self.algorithms:
            raise ValueError(f"Unknown algorithms {sorted(unknown)}, expected a subset of {ALGORITHMS}")
        if self.fill not in FILL_MODES:
            raise ValueError(f"Unknown fill mode {self.fill!r}")
        if self.agent_subsample is not None and self.agent_subsample < 1:
            raise ValueError(f"agent_subsample must be positive, got {self.agent_subsample}")
        object.__setattr__(self, 'schema', tuple(tuple(entry) for entry in self.schema))
        object.__setattr__(self, 'algorithms', tuple(self.algorithms))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'dataset': self.dataset, 'schema': [list(entry) for entry in self.schema],
            'k_min': self.k_min, 'k_max': self.k_max,
            'metrics_per_run': self.metrics_per_run, 'panels_per_metric': self.panels_per_metric,
            'algorithms': list(self.algorithms), 'seed': self.seed,
            'agent_subsample': self.agent_subsample, 'round_samples': self.round_samples, 'fill': self.fill,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        return cls(**data)


@dataclass(frozen=True)
class ExperimentRow:
    algorithm: str
    k: int
    mean_distortion: float
    ci95_low: float
    ci95_high: float
    all_samples: Tuple[float, ...] = field(repr=False)

    def to_dict(self, include_samples=True) -> Dict[str, Any]:
        data = {'algorithm': self.algorithm, 'k': self.k, 'mean': self.mean_distortion,
                'ci_low': self.ci95_low, 'ci_high': self.ci95_high}
        if include_samples: data['samples'] = list(self.all_samples)
        return data


def ci95(samples: Sequence[float]) -> Tuple[float, float]:
    """Normal-approximation 95% interval of the mean"""
    if len(samples) < 2:
        raise ValueError(f"Need at least 2 samples for a confidence interval, got {len(samples)}")
    mean = fsum(samples) / len(samples)
    half = 1.96 * float(stats.sem(samples))
    return mean - half, mean + half


def _panel_rng(seed: int, algorithm: str, k: int, metric_index: int, panel_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, PANEL_STREAM, ALGORITHMS.index(algorithm), k, metric_index, panel_index])


def _draw_panels(config: ExperimentConfig, algorithm: str, k: int, metric_index: int,
                 agent_dist: np.ndarray) -> np.ndarray:
    n = agent_dist.shape[0]
    rngs = (_panel_rng(config.seed, algorithm, k, metric_index, p) for p in range(config.panels_per_metric))
    if algorithm == UNIFORM:
        panels = [uniform_sample(n, k, rng).members for rng in rngs]
    else:
        trace = fgc_ball_trace(agent_dist, k)
        plan = fair_fill_plan(trace)
        panels = [sample_from_trace(trace, rng, config.fill, plan).members for rng in rngs]
    return np.array(panels, dtype=np.int64)


def prepare_table(config: ExperimentConfig, table: Optional[FeatureTable] = None) -> FeatureTable:
    table = table or load_dataset(config.dataset, config.schema)
    cap = config.agent_subsample or settings.SORTITION_AGENT_SUBSAMPLE_CAP
    return subsample(table, cap, np.random.default_rng([config.seed, SUBSAMPLE_STREAM]))


def run_experiment(config: ExperimentConfig, table: Optional[FeatureTable] = None) -> List[ExperimentRow]:
    """
    One row per (algorithm, k). Every sample is SC(c(P)) / SC(c(N)) for one panel
    under one random metric; the agents themselves are the alternatives.
    """
    table = prepare_table(config, table)
    n = table.rows
    k_max = min(config.k_max, n)
    if k_max < config.k_max:
        logger.warning("Only %d agents, panel sizes capped at %d", n, k_max)
    if config.k_min > n:
        raise ValueError(f"k_min={config.k_min} exceeds the {n} available agents")

    sizes = range(config.k_min, k_max + 1)
    collected = {(algorithm, k): [] for algorithm in config.algorithms for k in sizes}
    # one n x n matrix alive at a time
    for index in range(config.metrics_per_run):
        dist = sample_metric(table, np.random.default_rng([config.seed, METRIC_STREAM, index])).dist
        best = optimum(dist)[1]
        costs = social_costs(dist)
        for algorithm in config.algorithms:
            for k in sizes:
                decisions = panel_decisions(dist, _draw_panels(config, algorithm, k, index, dist))
                collected[(algorithm, k)].extend((costs[decisions] / best).tolist())
        logger.debug("Metric %d of %d scored", index + 1, config.metrics_per_run)
        del dist, costs

    rows = []
    for algorithm in config.algorithms:
        for k in sizes:
            samples = collected[(algorithm, k)]
            mean = fsum(samples) / len(samples)
            low, high = ci95(samples) if len(samples) > 1 else (mean, mean)
            rows.append(ExperimentRow(algorithm, k, mean, low, high, tuple(samples)))
            logger.debug("%s k=%d: mean %.6f over %d samples", algorithm, k, mean, len(samples))

    logger.info("Experiment on %d agents produced %d rows", n, len(rows))
    return rows


def expost_distribution(config: ExperimentConfig, table: Optional[FeatureTable] = None,
                        rows: Optional[List[ExperimentRow]] = None) -> Dict[Tuple[str, int], List[float]]:
    """Raw per-panel ratios per (algorithm, k), rounded to 2 decimals when the config asks for it"""
    rows = rows if rows is not None else run_experiment(config, table)
    out = {}
    for row in rows:
        samples = np.asarray(row.all_samples)
        if config.round_samples:
            samples = np.round(samples, 2)
        out[(row.algorithm, row.k)] = samples.tolist()
    return out


def write_outputs(config: ExperimentConfig, rows: List[ExperimentRow], directory: str,
                  compress: bool = False) -> Dict[str, str]:
    """rows.csv with the aggregates, samples.json(.gz) with every ratio"""
    os.makedirs(directory, exist_ok=True)
    frame = pd.DataFrame([row.to_dict(include_samples=False) for row in rows],
                         columns=['algorithm', 'k', 'mean', 'ci_low', 'ci_high'])
    rows_path = os.path.join(directory, 'rows.csv')
    frame.to_csv(rows_path, index=False)

    samples = [{'algorithm': algorithm, 'k': k, 'samples': values}
               for (algorithm, k), values in expost_distribution(config, rows=rows).items()]
    payload = {'config': config.to_dict(), 'samples': samples}
    if compress:
        samples_path = os.path.join(directory, 'samples.json.gz')
        create_compressed_json(payload, samples_path)
    else:
        samples_path = os.path.join(directory, 'samples.json')
        write_json(payload, samples_path)
    return {'rows': rows_path, 'samples': samples_path}


def execute_run(run) -> List[ExperimentRow]:
    """Run a stored ExperimentRun and record rows, outputs and status on it"""
    run.status = run.RUNNING
    run.save(update_fields=['status'])
    try:
        config = ExperimentConfig.from_dict(run.config)
        rows = run_experiment(config)
        directory = os.path.join(settings.SORTITION_DATA_ROOT, f'run_{run.pk}')
        write_outputs(config, rows, directory, compress=run.compress_samples)
    except Exception as e:
        run.status = run.FAILED
        run.error = str(e)
        run.finished_at = timezone.now()
        run.save(update_fields=['status', 'error', 'finished_at'])
        raise

    run.status = run.DONE
    run.rows = [row.to_dict(include_samples=False) for row in rows]
    run.output_dir = directory
    run.finished_at = timezone.now()
    run.save(update_fields=['status', 'rows', 'output_dir', 'finished_at'])
    return rows

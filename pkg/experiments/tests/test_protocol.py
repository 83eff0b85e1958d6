import os
import tempfile
import weakref
from unittest import mock

import numpy as np
from django.test import SimpleTestCase

from core.codecs import read_json
from core.distortion import panel_decisions
from core.exceptions import DatasetError, DegenerateOptimum
from experiments.datasets import (load_dataset, parse_schema, sample_metric, schema_of, subsample, two_block_table,
                                  write_dataset)
from experiments.protocol import ExperimentConfig, ci95, expost_distribution, run_experiment, write_outputs


class TempDirMixin:
    def setUp(self):
        super().setUp()
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def write(self, name, text):
        path = os.path.join(self.tmp.name, name)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
        return path


class Ci95Tests(SimpleTestCase):
    def test_half_width(self):
        low, high = ci95([1.0, 3.0])
        self.assertAlmostEqual(low, 2 - 1.96)
        self.assertAlmostEqual(high, 2 + 1.96)

    def test_constant_samples(self):
        self.assertEqual(ci95([1.5] * 10), (1.5, 1.5))

    def test_single_sample(self):
        with self.assertRaises(ValueError):
            ci95([1.0])


class DatasetTests(TempDirMixin, SimpleTestCase):
    schema = (('sex', 'categorical'), ('age', 'continuous'))

    def test_parse_schema(self):
        self.assertEqual(parse_schema('sex:categorical, age:continuous'), self.schema)
        for bad in ('sex', 'sex:ordinal', ''):
            with self.assertRaises(DatasetError):
                parse_schema(bad)

    def test_load(self):
        path = self.write('people.csv', 'sex,age,city\nF,30,x\nM, 45,y\n')
        table = load_dataset(path, self.schema)
        self.assertEqual(table.rows, 2)
        self.assertEqual(table.names, ['sex', 'age'])
        self.assertEqual(table.columns[1].values.tolist(), [30.0, 45.0])

    def test_missing_value(self):
        path = self.write('people.csv', 'sex,age\nF,30\n?,41\n')
        with self.assertRaisesRegex(DatasetError, "row 2, column 'sex'"):
            load_dataset(path, self.schema)

    def test_non_numeric(self):
        path = self.write('people.csv', 'sex,age\nF,30\nM,old\n')
        with self.assertRaisesRegex(DatasetError, "'old'.*row 2, column 'age'"):
            load_dataset(path, self.schema)

    def test_missing_column(self):
        path = self.write('people.csv', 'sex,income\nF,30\n')
        with self.assertRaises(DatasetError):
            load_dataset(path, self.schema)

    def test_missing_file(self):
        with self.assertRaises(DatasetError):
            load_dataset(os.path.join(self.tmp.name, 'none.csv'), self.schema)

    def test_metric_is_deterministic(self):
        table = two_block_table((5, 3))
        first = sample_metric(table, np.random.default_rng([7, 0, 0]))
        second = sample_metric(table, np.random.default_rng([7, 0, 0]))
        np.testing.assert_array_equal(first.dist, second.dist)
        self.assertEqual(first.dist[0, 1], 0.0)
        self.assertGreater(first.dist[0, 7], 0.0)

    def test_subsample(self):
        table = two_block_table((30, 20))
        small = subsample(table, 10, np.random.default_rng(0))
        self.assertEqual(small.rows, 10)
        self.assertIs(subsample(table, 50, np.random.default_rng(0)), table)

    def test_written_dataset_reloads(self):
        table = two_block_table((3, 2))
        path = write_dataset(table, os.path.join(self.tmp.name, 'blocks.csv'))
        loaded = load_dataset(path, schema_of(table))
        self.assertEqual(loaded.columns[0].values.tolist(), table.columns[0].values.tolist())


class ExperimentTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.table = two_block_table((36, 24))
        cls.config = ExperimentConfig('blocks.csv', schema_of(cls.table), k_min=1, k_max=20,
                                      metrics_per_run=10, panels_per_metric=50, seed=11)
        cls.rows = {(row.algorithm, row.k): row for row in run_experiment(cls.config, cls.table)}

    def test_row_grid(self):
        self.assertEqual(len(self.rows), 40)
        row = self.rows[('uniform', 5)]
        self.assertEqual(len(row.all_samples), 500)
        self.assertLessEqual(row.ci95_low, row.mean_distortion)
        self.assertLessEqual(row.mean_distortion, row.ci95_high)

    def test_fair_panels_match_the_blocks(self):
        # groups of three co-located agents: 12 from the larger block and 8 from the smaller
        self.assertEqual(set(self.rows[('fgc', 20)].all_samples), {1.0})
        self.assertEqual(set(self.rows[('fgc', 2)].all_samples), {1.0})

    def test_uniform_samples_take_two_values(self):
        for value in self.rows[('uniform', 2)].all_samples:
            self.assertTrue(value == 1.0 or abs(value - 1.5) < 1e-12)

    def test_larger_panels_do_no_worse(self):
        for algorithm in ('uniform', 'fgc'):
            self.assertLessEqual(self.rows[(algorithm, 20)].mean_distortion,
                                 self.rows[(algorithm, 2)].mean_distortion)

    def test_means_within_the_fair_bound(self):
        for (algorithm, k), row in self.rows.items():
            self.assertGreaterEqual(row.mean_distortion, 1.0)
            self.assertLessEqual(row.mean_distortion, 3 - 2 * k / 60 + 1e-12)

    def test_fgc_worst_panel_no_worse_than_uniform_across_seeds(self):
        wins = 0
        for seed in range(20):
            config = ExperimentConfig('blocks.csv', schema_of(self.table), k_min=20, k_max=20,
                                      metrics_per_run=10, panels_per_metric=50, seed=seed)
            worst = {row.algorithm: max(row.all_samples) for row in run_experiment(config, self.table)}
            wins += worst['fgc'] <= worst['uniform']
        self.assertGreaterEqual(wins, 18)

    def test_fixed_seed_repeats(self):
        again = run_experiment(self.config, self.table)
        self.assertEqual([r.all_samples for r in again], [self.rows[(r.algorithm, r.k)].all_samples for r in again])

    def test_one_metric_matrix_alive_at_a_time(self):
        live, peak = [], []

        def tracked_metric(table, rng):
            metric = sample_metric(table, rng)
            live.append(weakref.ref(metric.dist))
            return metric

        def counting_decisions(costs, members):
            peak.append(sum(ref() is not None for ref in live))
            return panel_decisions(costs, members)

        config = ExperimentConfig('blocks.csv', schema_of(self.table), k_min=2, k_max=3, metrics_per_run=4,
                                  panels_per_metric=5, seed=11)
        with mock.patch('experiments.protocol.sample_metric', new=tracked_metric), \
                mock.patch('experiments.protocol.panel_decisions', new=counting_decisions):
            rows = run_experiment(config, self.table)
        self.assertEqual(len(live), 4)
        self.assertEqual(max(peak), 1)
        self.assertEqual(len(rows[0].all_samples), 20)

    def test_rounded_samples(self):
        config = ExperimentConfig('blocks.csv', schema_of(self.table), k_min=3, k_max=3, metrics_per_run=1,
                                  panels_per_metric=5, round_samples=True)
        samples = expost_distribution(config, self.table)
        self.assertEqual(set(samples), {('uniform', 3), ('fgc', 3)})
        self.assertTrue(all(round(v, 2) == v for values in samples.values() for v in values))


class ExperimentEdgeTests(TempDirMixin, SimpleTestCase):
    def test_single_agent(self):
        table = two_block_table((1,))
        config = ExperimentConfig('one.csv', schema_of(table), k_min=1, k_max=1, metrics_per_run=1)
        with self.assertRaises(DegenerateOptimum):
            run_experiment(config, table)

    def test_full_panels(self):
        table = two_block_table((6, 4))
        config = ExperimentConfig('blocks.csv', schema_of(table), k_min=10, k_max=40, metrics_per_run=2,
                                  panels_per_metric=3)
        rows = run_experiment(config, table)
        self.assertEqual([row.k for row in rows], [10, 10])
        for row in rows:
            self.assertEqual(set(row.all_samples), {1.0})

    def test_k_min_too_large(self):
        table = two_block_table((2, 2))
        config = ExperimentConfig('blocks.csv', schema_of(table), k_min=5, k_max=6)
        with self.assertRaises(ValueError):
            run_experiment(config, table)

    def test_bad_config(self):
        with self.assertRaises(ValueError):
            ExperimentConfig('blocks.csv', (('age', 'continuous'),), algorithms=('random',))
        with self.assertRaises(ValueError):
            ExperimentConfig('blocks.csv', (('age', 'continuous'),), k_min=3, k_max=2)

    def test_config_round_trip(self):
        config = ExperimentConfig('blocks.csv', (('age', 'continuous'),), seed=4, agent_subsample=100)
        self.assertEqual(ExperimentConfig.from_dict(config.to_dict()), config)

    def test_outputs_are_deterministic(self):
        table = two_block_table((6, 4))
        config = ExperimentConfig('blocks.csv', schema_of(table), k_min=1, k_max=3, metrics_per_run=2,
                                  panels_per_metric=4, seed=2)
        rows = run_experiment(config, table)
        contents = []
        for name in ('a', 'b'):
            paths = write_outputs(config, rows, os.path.join(self.tmp.name, name), compress=True)
            with open(paths['samples'], 'rb') as f:
                contents.append(f.read())
        self.assertEqual(contents[0], contents[1])

        payload = read_json(paths['samples'])
        self.assertEqual(payload['config']['seed'], 2)
        self.assertEqual(len(payload['samples']), 6)
        with open(paths['rows'], encoding='utf-8') as f:
            self.assertEqual(f.readline().strip(), 'algorithm,k,mean,ci_low,ci_high')

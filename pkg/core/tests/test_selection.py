from itertools import combinations
from math import comb

import numpy as np
from django.test import SimpleTestCase, override_settings

from core.exceptions import SupportCapExceeded
from core.instances import gen_random_euclidean, gen_two_block, line_instance
from core.selection import (UNIFORM_FILL, Panel, PanelDistribution, bad_fair_algorithm, fair_fill_plan,
                            fgc_ball_trace, fgc_sample, fgc_sampler, fgc_support, fgc_two_stage_sample,
                            fixed_panel_algorithm, inclusion_frequencies, inclusion_probabilities,
                            two_stage_sampler, uniform_sample, uniform_sampler, uniform_support)


def three_sigma(p, draws):
    return 3 * np.sqrt(p * (1 - p) / draws)


class PanelTests(SimpleTestCase):
    def test_of_sorts(self):
        self.assertEqual(Panel.of([3, 1, 2]).members, (1, 2, 3))

    def test_rejects_duplicates_and_unsorted(self):
        with self.assertRaises(ValueError):
            Panel.of([1, 1])
        with self.assertRaises(ValueError):
            Panel((2, 1))

    def test_distribution_invariants(self):
        with self.assertRaises(ValueError):
            PanelDistribution(1, np.array([[0], [1]]), np.array([0.5, 0.4]))
        with self.assertRaises(ValueError):
            PanelDistribution(1, np.array([[0], [0]]), np.array([0.5, 0.5]))
        with self.assertRaises(ValueError):
            PanelDistribution(1, np.array([[0], [1]]), np.array([1.0, 0.0]))


class UniformTests(SimpleTestCase):
    def test_full_panel(self):
        self.assertEqual(uniform_sample(4, 4, np.random.default_rng(0)).members, (0, 1, 2, 3))
        support = uniform_support(5, 5)
        self.assertEqual(len(support), 1)
        self.assertEqual(support.probs[0], 1.0)

    def test_support_sizes(self):
        self.assertEqual(len(uniform_support(4, 2)), 6)
        self.assertEqual(len(uniform_support(10, 2)), 45)
        np.testing.assert_allclose(uniform_support(4, 2).probs, 1 / 6)

    @override_settings(SORTITION_SUPPORT_CAP=100)
    def test_cap_points_to_monte_carlo(self):
        with self.assertRaisesMessage(SupportCapExceeded, 'Monte Carlo'):
            uniform_support(12, 6)

    def test_k_above_n(self):
        with self.assertRaises(ValueError):
            uniform_sample(3, 4, np.random.default_rng(0))

    def test_pair_frequency(self):
        draws = 20000
        rng = np.random.default_rng(5)
        hits = sum(uniform_sample(10, 2, rng).members == (0, 1) for _ in range(draws))
        self.assertLess(abs(hits / draws - 1 / 45), three_sigma(1 / 45, draws))

    def test_marginals(self):
        np.testing.assert_allclose(inclusion_probabilities(uniform_support(4, 2), 4), 0.5)


class BallTraceTests(SimpleTestCase):
    def test_separated_pairs(self):
        trace = fgc_ball_trace(line_instance([0, 0.1, 10, 10.1], [0]).agent_dist, 2)
        self.assertEqual({frozenset(g) for g in trace.groups}, {frozenset({0, 1}), frozenset({2, 3})})
        self.assertEqual(trace.leftover, ())

    def test_leftover(self):
        trace = fgc_ball_trace(line_instance([0, 0, 0, 10, 10], [0]), 2)
        self.assertEqual(trace.groups, ((0, 1, 2),))
        self.assertEqual(trace.leftover, (3, 4))
        self.assertEqual(trace.radii, (0.0,))

    def test_k_equals_n_gives_singletons(self):
        instance = gen_random_euclidean(6, 1, 2, np.random.default_rng(1))
        trace = fgc_ball_trace(instance.agent_dist, 6)
        self.assertEqual(sorted(trace.groups), [(i,) for i in range(6)])

    def test_partition_and_determinism(self):
        for seed in range(20):
            instance = gen_random_euclidean(11, 1, 2, np.random.default_rng(seed))
            for k in range(1, 12):
                trace = fgc_ball_trace(instance.agent_dist, k)
                self.assertEqual(trace, fgc_ball_trace(instance.agent_dist, k))
                agents = [a for g in trace.groups for a in g] + list(trace.leftover)
                self.assertEqual(sorted(agents), list(range(11)))
                self.assertTrue(all(len(g) == trace.q for g in trace.groups))
                self.assertLess(len(trace.leftover), trace.q)

    def test_matches_greedy_over_remaining_submatrix(self):
        def by_submatrix(d, k):
            n = d.shape[0]
            q = -(-n // k)
            remaining, groups = np.arange(n), []
            while len(remaining) >= q:
                sub = d[np.ix_(remaining, remaining)]
                center = int(np.argmin(np.partition(sub, q - 1, axis=1)[:, q - 1]))
                captured = np.sort(remaining[np.lexsort((remaining, sub[center]))[:q]])
                groups.append(tuple(captured.tolist()))
                remaining = np.setdiff1d(remaining, captured, assume_unique=True)
            return tuple(groups), tuple(remaining.tolist())

        rng = np.random.default_rng(4)
        for seed in range(10):
            # integer positions give many equal distances
            positions = rng.integers(0, 9, size=13).astype(float)
            instances = (gen_random_euclidean(13, 1, 2, np.random.default_rng(seed)),
                         line_instance(positions, [0.0]))
            for instance in instances:
                before = instance.agent_dist.copy()
                for k in range(1, 14):
                    trace = fgc_ball_trace(instance.agent_dist, k)
                    self.assertEqual((trace.groups, trace.leftover), by_submatrix(instance.agent_dist, k))
                np.testing.assert_array_equal(instance.agent_dist, before)


class FgcSupportTests(SimpleTestCase):
    def test_separated_pairs_support(self):
        support = fgc_support(line_instance([0, 0.1, 10, 10.1], [0]), 2)
        self.assertEqual(sorted(tuple(row) for row in support.members.tolist()),
                         [(0, 2), (0, 3), (1, 2), (1, 3)])
        np.testing.assert_allclose(support.probs, 0.25)

    def test_full_panel(self):
        instance = gen_random_euclidean(5, 1, 2, np.random.default_rng(2))
        support = fgc_support(instance, 5)
        self.assertEqual(support.members.tolist(), [[0, 1, 2, 3, 4]])

    def test_leftover_agent_gets_k_over_n(self):
        instance = line_instance([0, 0, 0, 10, 10], [0])
        marginals = inclusion_probabilities(fgc_support(instance, 2), 5)
        np.testing.assert_allclose(marginals, 0.4, atol=1e-12)
        self.assertAlmostEqual(fair_fill_plan(fgc_ball_trace(instance, 2)).without_leftover_draw, 0.4)

    def test_literal_uniform_fill_is_not_fair_here(self):
        instance = line_instance([0, 0, 0, 10, 10], [0])
        marginals = inclusion_probabilities(fgc_support(instance, 2, fill=UNIFORM_FILL), 5)
        self.assertAlmostEqual(marginals[3], 5 / 12)

    def test_fair_on_random_instances(self):
        for seed in range(40):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(1, 13))
            instance = gen_random_euclidean(n, 1, 2, rng)
            for k in range(1, n + 1):
                support = fgc_support(instance, k)
                self.assertTrue(np.all(support.members[:, 1:] > support.members[:, :-1]))
                np.testing.assert_allclose(inclusion_probabilities(support, n), k / n, atol=1e-9)

    def test_fair_with_co_located_blocks(self):
        for n, k in ((10, 3), (12, 5), (30, 4), (9, 4)):
            instance = gen_two_block(n, max(1, n // 3))
            np.testing.assert_allclose(inclusion_probabilities(fgc_support(instance, k), n), k / n, atol=1e-9)

    @override_settings(SORTITION_SUPPORT_CAP=10)
    def test_cap(self):
        instance = gen_random_euclidean(12, 1, 2, np.random.default_rng(0))
        with self.assertRaises(SupportCapExceeded):
            fgc_support(instance, 6)


class FgcSamplingTests(SimpleTestCase):
    def test_k_equals_n(self):
        instance = gen_random_euclidean(4, 1, 2, np.random.default_rng(0))
        self.assertEqual(fgc_sample(instance, 4, np.random.default_rng(1)).members, (0, 1, 2, 3))

    def test_sample_marginals_are_k_over_n(self):
        instance = gen_random_euclidean(12, 1, 2, np.random.default_rng(7))
        draws = 20000
        freqs = inclusion_frequencies(fgc_sampler(instance, 4), 12, draws, seed=1)
        self.assertLess(np.abs(freqs - 1 / 3).max(), three_sigma(1 / 3, draws))

    def test_sample_matches_support(self):
        instance = line_instance([0, 0, 0, 10, 10], [0])
        draws = 20000
        freqs = inclusion_frequencies(fgc_sampler(instance, 2), 5, draws, seed=2)
        self.assertLess(np.abs(freqs - 0.4).max(), three_sigma(0.4, draws))

    def test_two_stage_matches_one_stage(self):
        instance = gen_random_euclidean(10, 1, 2, np.random.default_rng(4))
        trace = fgc_ball_trace(instance.agent_dist, 3)
        draws = 20000
        one = inclusion_frequencies(fgc_sampler(instance, 3), 10, draws, seed=3)
        two = inclusion_frequencies(two_stage_sampler(trace), 10, draws, seed=4)
        self.assertLess(np.abs(one - two).max(), 2 * three_sigma(0.3, draws))

    def test_two_stage_always_picks_from_the_group(self):
        trace = fgc_ball_trace(line_instance([0, 0, 0, 10, 10], [0]), 2)
        rng = np.random.default_rng(8)
        for _ in range(200):
            panel = fgc_two_stage_sample(trace, 5, 2, rng)
            self.assertTrue(set(panel.members) & {0, 1, 2})

    def test_two_stage_checks_trace(self):
        trace = fgc_ball_trace(line_instance([0, 0, 0, 10, 10], [0]), 2)
        with self.assertRaises(ValueError):
            fgc_two_stage_sample(trace, 6, 2, np.random.default_rng(0))

    def test_block_streams_are_reproducible(self):
        sampler = uniform_sampler(9, 3)
        a = inclusion_frequencies(sampler, 9, 5000, seed=10, block_size=128)
        b = inclusion_frequencies(sampler, 9, 5000, seed=10, block_size=128)
        np.testing.assert_array_equal(a, b)


class FixedAlgorithmTests(SimpleTestCase):
    def test_fixed_panel(self):
        support = fixed_panel_algorithm(Panel((0, 1)))
        self.assertEqual(support.support, [(Panel((0, 1)), 1.0)])
        self.assertEqual(inclusion_probabilities(support, 4).tolist(), [1.0, 1.0, 0.0, 0.0])

    def test_bad_fair(self):
        support = bad_fair_algorithm(4)
        self.assertEqual(support.members.tolist(), [[0, 1], [2, 3]])
        np.testing.assert_allclose(inclusion_probabilities(support, 4), 0.5)
        with self.assertRaises(ValueError):
            bad_fair_algorithm(5)

    def test_json_shape(self):
        data = uniform_support(3, 2).to_dict()
        self.assertEqual(data['k'], 2)
        self.assertEqual(len(data['support']), comb(3, 2))
        self.assertEqual([entry['members'] for entry in data['support']], [list(c) for c in combinations(range(3), 2)])

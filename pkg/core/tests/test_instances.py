import numpy as np
from django.test import SimpleTestCase, override_settings

from core.distortion import social_cost
from core.exceptions import InvalidInstance, SupportCapExceeded
from core.instances import (Instance, euclidean_instance, gen_bad_fair_line, gen_det_lower, gen_example1,
                            gen_fair_lower, gen_fgc_line_k2, gen_instance, gen_random_euclidean,
                            gen_random_family_sample, gen_two_block, line_instance)
from core.metric import validate_metric
from core.selection import Panel


class Example1Tests(SimpleTestCase):
    def test_social_costs_match_the_figure(self):
        instance = gen_example1()
        self.assertEqual((instance.n, instance.m), (10, 3))
        self.assertEqual([social_cost(instance, alt) for alt in range(3)], [101.0, 39.0, 49.0])

    def test_is_a_pseudo_metric(self):
        self.assertEqual(validate_metric(gen_example1().metric), [])


class ConstructionTests(SimpleTestCase):
    def test_det_lower_distances(self):
        instance = gen_det_lower(6, 2, 0.1, Panel((1, 4)))
        costs = instance.costs
        self.assertAlmostEqual(costs[1, 0], 2.9)
        self.assertAlmostEqual(costs[0, 0], 4.9)
        self.assertEqual(costs[4, 1], 3.0)
        self.assertEqual(costs[2, 1], 1.0)
        self.assertAlmostEqual(instance.dist[6, 7], 3.9)
        self.assertEqual(validate_metric(instance.metric, tol=1e-12), [])

    def test_det_lower_rejects_large_eps(self):
        with self.assertRaises(ValueError):
            gen_det_lower(6, 2, 1.0, Panel((0, 1)))

    def test_fair_lower_has_one_alternative_per_subset(self):
        instance = gen_fair_lower(5, 2, 0.1)
        self.assertEqual(instance.m, 11)
        self.assertTrue(np.allclose(instance.costs[:, 0], 3.1))
        self.assertEqual(sorted(set(instance.costs[:, 1:].ravel())), [3.0, 9.0])
        self.assertTrue(np.all((instance.costs[:, 1:] == 3.0).sum(axis=0) == 2))
        self.assertEqual(validate_metric(instance.metric, tol=1e-12), [])

    @override_settings(SORTITION_FAIR_LOWER_CAP=10)
    def test_fair_lower_respects_the_cap(self):
        with self.assertRaises(SupportCapExceeded):
            gen_fair_lower(5, 2, 0.1)

    def test_two_block(self):
        instance = gen_two_block(10, 2)
        self.assertEqual(social_cost(instance, 0), 8.0)
        self.assertEqual(social_cost(instance, 1), 2.0)
        self.assertEqual(validate_metric(instance.metric), [])

    def test_two_block_needs_k_below_n(self):
        with self.assertRaises(ValueError):
            gen_two_block(4, 4)

    def test_lines(self):
        instance = gen_fgc_line_k2(10, 0.01)
        self.assertAlmostEqual(social_cost(instance, 0), 1 + 10 * 0.01)
        self.assertEqual(social_cost(instance, 1), 9.0)
        half = gen_bad_fair_line(4, 0.25)
        self.assertAlmostEqual(half.costs[0, 0], 0.75)
        self.assertAlmostEqual(half.costs[3, 0], 1.75)
        with self.assertRaises(ValueError):
            gen_bad_fair_line(5, 0.25)

    def test_random_family_structure(self):
        rng = np.random.default_rng(3)
        instance = gen_random_family_sample(10, 6, 1 / 30, rng)
        self.assertTrue(np.allclose(instance.costs[:, 0], 2 - 4 / 30))
        for alt in range(1, 6):
            near = instance.costs[:, alt] == 1.0
            self.assertEqual(near.sum(), 5)
            self.assertTrue(np.all(instance.costs[~near, alt] == 3.0))
        self.assertEqual(validate_metric(instance.metric, tol=1e-12), [])

    def test_random_family_same_seed_same_instance(self):
        a = gen_random_family_sample(8, 4, 0.01, np.random.default_rng(11))
        b = gen_random_family_sample(8, 4, 0.01, np.random.default_rng(11))
        np.testing.assert_array_equal(a.dist, b.dist)

    def test_euclidean(self):
        self.assertEqual(euclidean_instance([[0, 0]], [[0, 0]]).costs[0, 0], 0.0)
        self.assertEqual(euclidean_instance([[0, 0], [1, 0]], [[1, 0]]).costs[:, 0].tolist(), [1.0, 0.0])
        instance = gen_random_euclidean(7, 3, 2, np.random.default_rng(0))
        self.assertEqual(validate_metric(instance.metric, tol=1e-12), [])


class SerializationTests(SimpleTestCase):
    def test_json_round_trip_is_exact(self):
        instance = gen_random_euclidean(5, 2, 3, np.random.default_rng(9))
        again = Instance.from_json(instance.to_json())
        np.testing.assert_array_equal(again.dist, instance.dist)
        self.assertEqual((again.n, again.m), (5, 2))

    def test_labels_survive(self):
        again = Instance.from_json(gen_example1().to_json())
        self.assertEqual(again.labels, ('c1', 'c2', 'c3'))

    def test_wrong_entry_count(self):
        with self.assertRaises(InvalidInstance):
            Instance.from_json('{"n": 1, "m": 1, "dist": [1.0, 2.0]}')

    def test_not_json(self):
        with self.assertRaises(InvalidInstance):
            Instance.from_json('n=1')

    def test_dispatch(self):
        instance = gen_instance('two-block', n=6, k=2)
        self.assertEqual((instance.n, instance.m), (6, 2))
        with self.assertRaises(ValueError):
            gen_instance('hexagon')

    def test_scaling_keeps_shape(self):
        instance = line_instance([0, 1], [2]).scaled(3.0)
        self.assertEqual(instance.costs[:, 0].tolist(), [6.0, 3.0])

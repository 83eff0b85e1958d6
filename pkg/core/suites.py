"""
Property sweeps behind the bounds command. Every suite returns BoundCheck rows,
one per evaluated inequality.
"""
import logging
from typing import Callable, Dict, Iterator, List

import numpy as np
from django.conf import settings

from core.bounds import (BoundCheck, anti_concentration_sweep, check, fair_upper_bound,
                         lemma_19_21_check, serfling_tail, serfling_tail_frequency)
from core.distortion import ex_ante_exact, ex_post_exact
from core.instances import Instance, gen_fgc_line_k2, gen_random_euclidean, gen_two_block
from core.selection import fgc_sampler, fgc_support, inclusion_frequencies, inclusion_probabilities, uniform_support

logger = logging.getLogger(__name__)

FAIRNESS_TOL = 1e-9
THM6_LIMIT = 127


def random_small_instances(count: int, seed: int, max_n: int = 12, max_m: int = 8) -> Iterator[Instance]:
    """Random Euclidean instances in the plane; instance i draws from default_rng([seed, i])"""
    for index in range(count):
        rng = np.random.default_rng([seed, index])
        n = int(rng.integers(1, max_n + 1))
        m = int(rng.integers(1, max_m + 1))
        yield gen_random_euclidean(n, m, 2, rng)


def anti_concentration_suite(max_n: int = 200, **_) -> List[BoundCheck]:
    return anti_concentration_sweep(max_n)


def lemma_19_21_suite(max_k: int = 60, max_n: int = 600, **_) -> List[BoundCheck]:
    return [lemma_19_21_check(n, k) for k in range(3, max_k + 1) for n in range(k, max_n + 1)]


def serfling_suite(seed: int, vectors: int = 20, trials: int = 10 ** 6, **_) -> List[BoundCheck]:
    """Empirical tails at the quartiles of the deviation range, against the bound plus 3 sigma"""
    checks = []
    for index in range(vectors):
        rng = np.random.default_rng([seed, index])
        n = int(rng.integers(2, 51))
        k = int(rng.integers(1, n + 1))
        values = rng.random(n)
        alpha, beta = float(values.min()), float(values.max())
        widest = np.sort(values)[-k:].sum() - k * values.mean()

        for quartile in (0.25, 0.5, 0.75):
            t = quartile * widest
            if t <= 0: continue
            bound = serfling_tail(t, k, alpha, beta)
            freq = serfling_tail_frequency(values, k, t, trials, seed=int(rng.integers(2 ** 63)))
            sigma = np.sqrt(max(bound * (1 - bound), freq.value * (1 - freq.value)) / trials)
            checks.append(check('serfling', freq.value, bound + 3 * sigma, n=n, k=k, t=t, bound=bound))
    return checks


def fairness_suite(seed: int, instances: int = 500, draws: int = 10 ** 5, **_) -> List[BoundCheck]:
    checks = []
    for index, instance in enumerate(random_small_instances(instances, seed)):
        n = instance.n
        for k in range(1, n + 1):
            for name, dist in (('uniform', uniform_support(n, k)), ('fgc', fgc_support(instance, k))):
                gap = np.abs(inclusion_probabilities(dist, n) - k / n).max()
                checks.append(check(f'fairness-{name}', gap, FAIRNESS_TOL, instance=index, n=n, k=k))

    if draws:
        instance = gen_random_euclidean(12, 1, 2, np.random.default_rng([seed, instances]))
        freqs = inclusion_frequencies(fgc_sampler(instance, 4), 12, draws, seed)
        sigma = np.sqrt((1 / 3) * (2 / 3) / draws)
        checks.append(check('fairness-fgc-sampled', np.abs(freqs - 1 / 3).max(), 3 * sigma, n=12, k=4, draws=draws))
    return checks


def thm2_suite(seed: int, instances: int = 500, **_) -> List[BoundCheck]:
    checks = []
    for index, instance in enumerate(random_small_instances(instances, seed)):
        n = instance.n
        for k in range(1, n + 1):
            limit = fair_upper_bound(n, k) + FAIRNESS_TOL
            for name, dist in (('uniform', uniform_support(n, k)), ('fgc', fgc_support(instance, k))):
                report = ex_ante_exact(instance, dist)
                checks.append(check(f'fair-ex-ante-{name}', report.ex_ante, limit, instance=index, n=n, k=k))
    return checks


def thm6_suite(seed: int, instances: int = 500, include_k2: bool = False, **_) -> List[BoundCheck]:
    checks = []
    for index, instance in enumerate(random_small_instances(instances, seed)):
        for k in range(3, instance.n + 1):
            ratio = ex_post_exact(instance, fgc_support(instance, k))
            checks.append(check('fgc-ex-post', ratio, THM6_LIMIT, instance=index, n=instance.n, k=k))

    for n, k in ((10, 3), (12, 4), (20, 5), (30, 10)):
        ratio = ex_post_exact(gen_two_block(n, k), fgc_support(gen_two_block(n, k), k))
        checks.append(check('fgc-ex-post', ratio, THM6_LIMIT, family='two-block', n=n, k=k))
    for n, delta in ((10, 0.01), (50, 0.001)):
        line = gen_fgc_line_k2(n, delta)
        for k in (3, 4, 5):
            ratio = ex_post_exact(line, fgc_support(line, k))
            checks.append(check('fgc-ex-post', ratio, THM6_LIMIT, family='fgc-line-k2', n=n, delta=delta, k=k))

    if include_k2:
        line = gen_fgc_line_k2(200, 0.001)
        ratio = ex_post_exact(line, fgc_support(line, 2))
        checks.append(check('fgc-ex-post', ratio, THM6_LIMIT, expected=False,
                            family='fgc-line-k2', n=200, delta=0.001, k=2))
    return checks


SUITES: Dict[str, Callable[..., List[BoundCheck]]] = {
    'anti-concentration': anti_concentration_suite,
    'serfling': serfling_suite,
    'lemma-19-21': lemma_19_21_suite,
    'fairness': fairness_suite,
    'thm2': thm2_suite,
    'thm6': thm6_suite,
}


def run_suite(name: str, seed: int = None, **options) -> List[BoundCheck]:
    if name not in SUITES:
        raise ValueError(f"Unknown suite {name!r}, expected one of {sorted(SUITES)}")
    seed = settings.SORTITION_DEFAULT_SEED if seed is None else seed
    checks = SUITES[name](seed=seed, **options)
    logger.info("Suite %s: %d checks, %d not ok", name, len(checks), sum(not c.ok for c in checks))
    return checks

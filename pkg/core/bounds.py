import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, comb, exp, log, log2, sqrt
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from django.conf import settings
from scipy.special import gammaln

from core.distortion import best_alternative, optimal_alternative, social_costs
from core.instances import Instance, gen_random_family_sample
from core.selection import Panel

logger = logging.getLogger(__name__)

PASS = 'PASS'
FAIL = 'FAIL'
EXPECTED_FAIL = 'EXPECTED-FAIL'

# binomial arguments above this switch hypergeom_pmf to log-gamma evaluation
EXACT_COMB_LIMIT = 1000


@dataclass(frozen=True)
class BoundCheck:
    """One evaluated inequality lhs <= rhs"""
    name: str
    lhs: float
    rhs: float
    holds: bool
    params: Dict[str, Any] = field(default_factory=dict)
    expected: bool = True

    @property
    def status(self) -> str:
        if self.holds: return PASS
        return FAIL if self.expected else EXPECTED_FAIL

    @property
    def ok(self) -> bool:
        return self.holds or not self.expected

    def to_dict(self):
        return {'name': self.name, 'lhs': self.lhs, 'rhs': self.rhs, 'holds': self.holds,
                'status': self.status, 'params': self.params}


def checks_to_json(checks: Sequence[BoundCheck]) -> str:
    return json.dumps([c.to_dict() for c in checks])


def check(name: str, lhs: float, rhs: float, expected: bool = True, **params) -> BoundCheck:
    return BoundCheck(name, float(lhs), float(rhs), bool(lhs <= rhs), params, expected)


@dataclass(frozen=True)
class Estimate:
    value: float
    ci_low: float
    ci_high: float
    trials: int

    def to_dict(self):
        return {'value': self.value, 'ci_low': self.ci_low, 'ci_high': self.ci_high, 'trials': self.trials}


def _check_sizes(n: int, k: int):
    if not 1 <= k <= n:
        raise ValueError(f"Need 1 <= k <= n, got k={k}, n={n}")


def fair_upper_bound(n: int, k: int) -> float:
    _check_sizes(n, k)
    return 3 - 2 * k / n


def det_lower_value(n: int, k: int, eps: float) -> float:
    _check_sizes(n, k)
    return 5 - 12 * k / (n + 2 * k) - eps


def fair_lower_value(n: int, k: int, eps: float) -> float:
    _check_sizes(n, k)
    return 3 - 2 * k / n - eps


def serfling_tail(t: float, k: int, alpha: float, beta: float) -> float:
    """Bound on Pr[X - E[X] >= t] for a sum X of k draws without replacement from values in [alpha, beta]"""
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if beta <= alpha:
        raise ValueError(f"Need beta > alpha, got alpha={alpha}, beta={beta}")
    return exp(-2 * t * t / (k * (beta - alpha) ** 2))


def serfling_tail_frequency(values: Sequence[float], k: int, t: float, trials: int, seed: int,
                            block_size: Optional[int] = None) -> Estimate:
    """Empirical Pr[X - E[X] >= t] with X the sum of k values drawn without replacement"""
    values = np.asarray(values, dtype=float)
    if not 1 <= k <= len(values):
        raise ValueError(f"Need 1 <= k <= {len(values)}, got {k}")
    block_size = block_size or settings.SORTITION_MC_BLOCK_SIZE
    mean = k * values.mean()

    hits = 0
    for block, start in enumerate(range(0, trials, block_size)):
        rng = np.random.default_rng([seed, block])
        count = min(block_size, trials - start)
        draws = rng.permuted(np.tile(values, (count, 1)), axis=1)[:, :k].sum(axis=1)
        hits += int(np.count_nonzero(draws - mean >= t))

    freq = hits / trials
    half = 1.96 * sqrt(freq * (1 - freq) / trials)
    return Estimate(freq, max(0.0, freq - half), min(1.0, freq + half), trials)


def _log_comb(a: int, b: int) -> float:
    return gammaln(a + 1) - gammaln(b + 1) - gammaln(a - b + 1)


def hypergeom_pmf(N: int, K: int, draws: int, l: int) -> float:
    """Pr[overlap = l] between a fixed K-subset and a uniform draws-subset of N items"""
    if not (0 <= l <= draws <= N and 0 <= K <= N):
        raise ValueError(f"Invalid hypergeometric arguments N={N}, K={K}, draws={draws}, l={l}")
    if l > K or draws - l > N - K:
        return 0.0
    if N <= EXACT_COMB_LIMIT:
        return float(Fraction(comb(K, l) * comb(N - K, draws - l), comb(N, draws)))
    return float(np.exp(_log_comb(K, l) + _log_comb(N - K, draws - l) - _log_comb(N, draws)))


def anti_concentration_lower(k: int, l: int) -> float:
    if k < 10:
        raise ValueError(f"Need k >= 10, got {k}")
    if not (2 * l >= k and 3 * l <= 2 * k):
        raise ValueError(f"Need k/2 <= l <= 2k/3, got k={k}, l={l}")
    return (k / l - 1) ** (2 * l - k) / sqrt(k)


def anti_concentration_sweep(max_n: int = 200, min_k: int = 10) -> List[BoundCheck]:
    """
    Compare hypergeom_pmf(n, n/2, k, l) with anti_concentration_lower(k, l) for every
    even n <= max_n, min_k <= k <= n/2 and integer l in [k/2, 2k/3].

    Panels much smaller than n/2 do break the inequality (n=200, k=10, l=5 is one),
    so the sweep reports instead of asserting.
    """
    checks = []
    for n in range(2 * min_k, max_n + 1, 2):
        for k in range(min_k, n // 2 + 1):
            for l in range(-(-k // 2), 2 * k // 3 + 1):
                lower = anti_concentration_lower(k, l)
                pmf = hypergeom_pmf(n, n // 2, k, l)
                checks.append(check('anti-concentration', lower, pmf, n=n, k=k, l=l))
    failed = sum(not c.holds for c in checks)
    logger.info("Anti-concentration sweep up to n=%d: %d checks, %d violations", max_n, len(checks), failed)
    return checks


def uniform_panel_size(eps: float, m: int) -> int:
    """Smallest multiple of 3 large enough for uniform selection to reach ex-ante distortion 1 + eps"""
    if not 0 < eps <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    if m < 1:
        raise ValueError(f"Need m >= 1, got {m}")
    need = max(25 / (2 * eps ** 2) * log(144 * m / eps), 3 + 3 * log2(72 * m / eps))
    return 3 * ceil(need / 3)


def lemma_19_21_check(n: int, k: int) -> BoundCheck:
    if k < 3:
        raise ValueError(f"Need k >= 3, got {k}")
    if n < k:
        raise ValueError(f"Need n >= k, got n={n}, k={k}")
    two_thirds = -(-2 * k // 3)
    group = -(-n // k)
    lhs = min(Fraction(two_thirds * group - 1, n), 1 - Fraction(k - two_thirds + 1, n))
    rhs = Fraction(19, 21)
    return BoundCheck('lemma-19-21', float(lhs), float(rhs), lhs <= rhs, {'n': n, 'k': k})


def case2_diagnostics(instance: Instance, alt: int, panel: Panel, threshold: float = 72) -> List[BoundCheck]:
    """
    Far-agent checks for a bad alternative alt against the optimum c'.

    L is the set of agents farther than D/4 from c', D = d(alt, c'). The first check
    bounds |L|; the second says alt can only win the panel when L holds a third of it.

    Neither check is gated on Case 2: threshold only sets the case2 flag in params.
    The win check holds on every instance, since each panel member outside L prefers
    c' by at least D/2 and each member of L prefers alt by at most D.
    """
    best, best_cost = optimal_alternative(instance)
    if alt == best:
        raise ValueError(f"Alternative {alt} is the optimum")
    sc = social_costs(instance.costs)
    if sc[alt] <= best_cost:
        raise ValueError(f"Alternative {alt} is not worse than the optimum")

    D = instance.dist[instance.n + alt, instance.n + best]
    far = instance.costs[:, best] > D / 4
    ell = int(far.sum())
    case2 = bool(sc[alt] - best_cost > threshold * best_cost)
    params = {'alt': alt, 'optimum': best, 'ell': ell, 'case2': case2}

    checks = [check('small-ell', ell, 4 * instance.n * best_cost / (sc[alt] - best_cost), **params)]

    far_on_panel = int(far[list(panel.members)].sum())
    wins = best_alternative(instance, panel) == alt
    lhs = len(panel) / 3 if wins else 0.0
    checks.append(check('bad-candidate-wins', lhs, far_on_panel, panel=list(panel.members), wins=wins, **params))
    return checks


def prob_half_hypotheses(n: int, m: int, k: int, eps: float) -> bool:
    """Whether (n, m, k, eps) sits in the regime where Pr[c(P) = c0] <= 1/2 is claimed"""
    if n % 2 or not 0 < eps <= 1 / 30 or m < 1 + 6 ** 9:
        return False
    return k <= min(n / 2, m - 1, log(m - 1) / (288 * eps ** 2))


def prob_c0_estimate(n: int, m: int, k: int, eps: float, panel: Panel, trials: int,
                     rng: np.random.Generator) -> Estimate:
    """Frequency with which the panel picks c0 on random-family instances, with a 95% interval"""
    if len(panel) != k:
        raise ValueError(f"Panel has {len(panel)} members, expected k={k}")
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")

    seed = int(rng.integers(2 ** 63))
    wins = 0
    for trial in range(trials):
        instance = gen_random_family_sample(n, m, eps, np.random.default_rng([seed, trial]))
        wins += best_alternative(instance, panel) == 0

    freq = wins / trials
    half = 1.96 * sqrt(freq * (1 - freq) / trials)
    return Estimate(freq, max(0.0, freq - half), min(1.0, freq + half), trials)

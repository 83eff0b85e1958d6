import json
import logging
from dataclasses import asdict, dataclass
from math import fsum
from typing import Optional, Sequence, Tuple

import numpy as np
from django.conf import settings
from scipy import stats

from core.exceptions import DegenerateOptimum
from core.instances import Instance
from core.selection import Panel, PanelDistribution, Sampler

logger = logging.getLogger(__name__)

EXACT = 'exact'
MONTE_CARLO = 'monte_carlo'

# rows of the support evaluated per chunk, bounded by chunk * k * m entries
CHUNK_ENTRIES = 2 ** 22


@dataclass(frozen=True)
class DistortionReport:
    ex_ante: float
    ex_post: float
    optimal_alternative: int
    optimal_cost: float
    expected_cost: float
    win_prob: Tuple[float, ...]
    method: str = EXACT
    trials: Optional[int] = None
    ci_halfwidth: Optional[float] = None
    ex_post_is_lower_bound: bool = False

    def to_dict(self):
        data = asdict(self)
        data['win_prob'] = list(self.win_prob)
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _check_alt(instance: Instance, alt: int):
    if not 0 <= alt < instance.m:
        raise IndexError(f"Alternative {alt} out of range [0, {instance.m})")


def social_costs(costs: np.ndarray) -> np.ndarray:
    """Column sums of an agents x alternatives cost matrix"""
    return np.asarray(costs, dtype=float).sum(axis=0)


def optimum(costs: np.ndarray) -> Tuple[int, float]:
    sc = social_costs(costs)
    best = int(np.argmin(sc))
    if sc[best] <= 0:
        raise DegenerateOptimum("Optimal social cost is 0, distortion is undefined")
    return best, float(sc[best])


def panel_decisions(costs: np.ndarray, members: np.ndarray) -> np.ndarray:
    """Decision of every panel row, lowest alternative index on ties"""
    members = np.atleast_2d(members)
    rows, k = members.shape
    chunk = max(1, CHUNK_ENTRIES // max(1, k * costs.shape[1]))
    out = np.empty(rows, dtype=np.int64)
    for start in range(0, rows, chunk):
        block = members[start:start + chunk]
        out[start:start + chunk] = costs[block].sum(axis=1).argmin(axis=1)
    return out


def social_cost(instance: Instance, alt: int) -> float:
    _check_alt(instance, alt)
    return fsum(instance.costs[:, alt])


def panel_social_cost(instance: Instance, panel: Panel, alt: int) -> float:
    _check_alt(instance, alt)
    if len(panel) and panel.members[-1] >= instance.n:
        raise IndexError(f"Panel {panel.members} references an agent outside [0, {instance.n})")
    return fsum(instance.costs[list(panel.members), alt])


def best_alternative(instance: Instance, panel: Panel) -> int:
    if not len(panel):
        raise ValueError("An empty panel has no decision")
    if panel.members[-1] >= instance.n:
        raise IndexError(f"Panel {panel.members} references an agent outside [0, {instance.n})")
    return int(panel_decisions(instance.costs, np.array([panel.members]))[0])


def optimal_alternative(instance: Instance) -> Tuple[int, float]:
    sc = social_costs(instance.costs)
    best = int(np.argmin(sc))
    return best, float(sc[best])


def distortion_from_costs(costs: np.ndarray, dist: PanelDistribution) -> DistortionReport:
    costs = np.asarray(costs, dtype=float)
    best, opt = optimum(costs)
    sc = social_costs(costs)
    decisions = panel_decisions(costs, dist.members)

    expected = fsum(dist.probs * sc[decisions])
    win_prob = np.bincount(decisions, weights=dist.probs, minlength=costs.shape[1])
    return DistortionReport(
        ex_ante=expected / opt,
        ex_post=float(sc[decisions].max()) / opt,
        optimal_alternative=best,
        optimal_cost=opt,
        expected_cost=expected,
        win_prob=tuple(win_prob.tolist()),
    )


def ex_ante_exact(instance: Instance, dist: PanelDistribution) -> DistortionReport:
    report = distortion_from_costs(instance.costs, dist)
    logger.info("Exact distortion over %d panels: ex-ante %.6f, ex-post %.6f", len(dist), report.ex_ante, report.ex_post)
    return report


def ex_post_exact(instance: Instance, dist: PanelDistribution) -> float:
    return distortion_from_costs(instance.costs, dist).ex_post


def sample_ratios(costs: np.ndarray, sampler: Sampler, trials: int, seed: int,
                  block_size: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Decision and SC ratio of each trial; block b draws from default_rng([seed, b])"""
    block_size = block_size or settings.SORTITION_MC_BLOCK_SIZE
    _, opt = optimum(costs)
    sc = social_costs(costs)

    decisions = np.empty(trials, dtype=np.int64)
    for block, start in enumerate(range(0, trials, block_size)):
        rng = np.random.default_rng([seed, block])
        count = min(block_size, trials - start)
        panels = np.array([sampler(rng).members for _ in range(count)], dtype=np.int64)
        decisions[start:start + count] = panel_decisions(costs, panels)
    return decisions, sc[decisions] / opt


def ci_halfwidth(ratios: Sequence[float]) -> float:
    """95% normal-approximation half-width of the mean"""
    if len(ratios) < 2:
        return 0.0
    return 1.96 * float(stats.sem(ratios))


def ex_ante_mc(instance: Instance, sampler: Sampler, trials: int, rng: np.random.Generator,
               block_size: Optional[int] = None) -> DistortionReport:
    """
    Monte Carlo estimate of the distortion of a sampler.

    The ex-post value is the largest ratio seen, which only bounds the true
    ex-post distortion from below.
    """
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    seed = int(rng.integers(2 ** 63))
    costs = instance.costs
    best, opt = optimum(costs)
    decisions, ratios = sample_ratios(costs, sampler, trials, seed, block_size)

    mean = fsum(ratios) / trials
    win_prob = np.bincount(decisions, minlength=instance.m) / trials
    report = DistortionReport(
        ex_ante=mean,
        ex_post=float(ratios.max()),
        optimal_alternative=best,
        optimal_cost=opt,
        expected_cost=mean * opt,
        win_prob=tuple(win_prob.tolist()),
        method=MONTE_CARLO,
        trials=trials,
        ci_halfwidth=ci_halfwidth(ratios),
        ex_post_is_lower_bound=True,
    )
    logger.info("Monte Carlo distortion over %d trials: %.6f +- %.6f", trials, mean, report.ci_halfwidth)
    return report

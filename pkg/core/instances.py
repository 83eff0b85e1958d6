import json
import logging
from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from django.conf import settings
from scipy.spatial.distance import pdist, squareform

from core.exceptions import InvalidInstance, SupportCapExceeded
from core.metric import MetricSpace, shortest_path_metric
from core.selection import Panel

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Instance:
    """
    Agents 0..n-1 followed by alternatives n..n+m-1 in one metric space.
    Public functions address alternatives by their offset 0..m-1.
    """
    metric: MetricSpace
    n: int
    m: int
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise InvalidInstance(f"Need n >= 1 and m >= 1, got n={self.n}, m={self.m}")
        if self.metric.size != self.n + self.m:
            raise InvalidInstance(f"Metric has {self.metric.size} points, expected n + m = {self.n + self.m}")
        if self.labels is not None and len(self.labels) != self.m:
            raise InvalidInstance(f"Got {len(self.labels)} labels for {self.m} alternatives")

    @property
    def dist(self) -> np.ndarray:
        return self.metric.dist

    @property
    def costs(self) -> np.ndarray:
        """n x m matrix of agent-to-alternative distances"""
        return self.metric.dist[:self.n, self.n:]

    @property
    def agent_dist(self) -> np.ndarray:
        return self.metric.dist[:self.n, :self.n]

    def label(self, alt: int) -> str:
        if self.labels is not None: return self.labels[alt]
        return f"c{alt}"

    def scaled(self, factor: float) -> 'Instance':
        return Instance(self.metric.scaled(factor), self.n, self.m, self.labels)

    def to_dict(self) -> Dict[str, Any]:
        rows, cols = np.tril_indices(self.metric.size, k=-1)
        data = {'n': self.n, 'm': self.m, 'dist': self.dist[rows, cols].tolist()}
        if self.labels is not None: data['labels'] = list(self.labels)
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Instance':
        try:
            n, m, lower = int(data['n']), int(data['m']), data['dist']
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidInstance(f"Malformed instance document: {e}")

        size = n + m
        if len(lower) != size * (size - 1) // 2:
            raise InvalidInstance(f"Expected {size * (size - 1) // 2} lower-triangle entries, got {len(lower)}")
        dist = np.zeros((size, size))
        rows, cols = np.tril_indices(size, k=-1)
        dist[rows, cols] = np.asarray(lower, dtype=float)
        dist[cols, rows] = dist[rows, cols]
        labels = tuple(data['labels']) if data.get('labels') is not None else None
        return cls(MetricSpace(dist), n, m, labels)

    @classmethod
    def from_json(cls, text: str) -> 'Instance':
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise InvalidInstance(f"Instance file is not valid JSON: {e}")
        return cls.from_dict(data)


def line_instance(agent_positions: Sequence[float], alternative_positions: Sequence[float],
                  labels: Optional[Tuple[str, ...]] = None) -> Instance:
    points = np.concatenate([np.asarray(agent_positions, dtype=float),
                             np.asarray(alternative_positions, dtype=float)])
    dist = np.abs(points[:, None] - points[None, :])
    return Instance(MetricSpace(dist), len(agent_positions), len(alternative_positions), labels)


def euclidean_instance(agent_points: np.ndarray, alternative_points: np.ndarray) -> Instance:
    agent_points = np.atleast_2d(np.asarray(agent_points, dtype=float))
    alternative_points = np.atleast_2d(np.asarray(alternative_points, dtype=float))
    points = np.vstack([agent_points, alternative_points])
    return Instance(MetricSpace(squareform(pdist(points))), len(agent_points), len(alternative_points))


# Figure-1 graph. Agents 1..10 of the drawing are indices 0..9, c1..c3 are 10..12.
# Co-located points share a node through zero-length edges.
EXAMPLE1_EDGES = [
    (0, 1, 0), (0, 10, 0),      # agents 1, 2 sit on c1
    (2, 3, 0),                  # agents 3, 4
    (5, 6, 0),                  # agents 6, 7
    (8, 9, 0),                  # agents 9, 10
    (0, 2, 10),
    (2, 11, 1), (11, 4, 1),     # c2 between {3,4} and 5
    (11, 7, 2),                 # c2 -- agent 8
    (5, 7, 1), (7, 8, 1), (7, 12, 1),
]


def gen_example1() -> Instance:
    metric = shortest_path_metric(13, EXAMPLE1_EDGES)
    return Instance(metric, 10, 3, ('c1', 'c2', 'c3'))


def gen_det_lower(n: int, k: int, eps: float, panel: Panel) -> Instance:
    """Two-alternative instance on which the fixed panel picks the bad alternative a"""
    if not 1 <= k <= n:
        raise ValueError(f"Need 1 <= k <= n, got k={k}, n={n}")
    if len(panel) != k or panel.members[-1] >= n:
        raise ValueError(f"Panel {panel.members} is not a {k}-subset of {n} agents")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")

    a, b = n, n + 1
    dist = np.full((n + 2, n + 2), 2.0)
    in_panel = np.zeros(n, dtype=bool)
    in_panel[list(panel.members)] = True

    dist[:n, a] = np.where(in_panel, 3 - eps, 5 - eps)
    dist[:n, b] = np.where(in_panel, 3.0, 1.0)
    dist[a, b] = 4 - eps
    dist[a, :n], dist[b, :n], dist[b, a] = dist[:n, a], dist[:n, b], dist[a, b]
    np.fill_diagonal(dist, 0.0)
    return Instance(MetricSpace(dist), n, 2, ('a', 'b'))


def gen_fair_lower(n: int, k: int, eps: float, cap: Optional[int] = None) -> Instance:
    """One safe alternative c plus an alternative c_K tailored to every k-subset K"""
    if not 1 <= k <= n:
        raise ValueError(f"Need 1 <= k <= n, got k={k}, n={n}")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    cap = settings.SORTITION_FAIR_LOWER_CAP if cap is None else cap
    m = comb(n, k) + 1
    if m > cap:
        raise SupportCapExceeded(f"gen_fair_lower({n}, {k}) needs {m} alternatives, cap is {cap}")

    size = n + m
    dist = np.full((size, size), 6.0)
    dist[:n, n] = 3 + eps

    subsets = np.zeros((m - 1, n), dtype=bool)
    for row, members in enumerate(combinations(range(n), k)):
        subsets[row, list(members)] = True
    dist[:n, n + 1:] = np.where(subsets.T, 3.0, 9.0)

    dist[n:, :n] = dist[:n, n:].T
    np.fill_diagonal(dist, 0.0)
    labels = ('c',) + tuple('c_' + '-'.join(map(str, members)) for members in combinations(range(n), k))
    logger.info("Built fair lower-bound instance with %d alternatives", m)
    return Instance(MetricSpace(dist), n, m, labels)


def gen_two_block(n: int, k: int) -> Instance:
    if not 1 <= k < n:
        raise ValueError(f"Need 1 <= k < n, got k={k}, n={n}")
    # block 0 holds the first k agents and a, block 1 the rest and b
    blocks = np.array([0] * k + [1] * (n - k) + [0, 1])
    dist = (blocks[:, None] != blocks[None, :]).astype(float)
    return Instance(MetricSpace(dist), n, 2, ('a', 'b'))


def gen_fgc_line_k2(n: int, delta: float) -> Instance:
    if n < 3:
        raise ValueError(f"Need n >= 3, got {n}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return line_instance([0.0] * (n - 1) + [1.0], [-delta, 1.0], ('-delta', '1'))


def gen_bad_fair_line(n: int, delta: float) -> Instance:
    if n % 2:
        raise ValueError(f"n must be even, got {n}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    half = n // 2
    return line_instance([0.0] * half + [1.0] * half, [-1 + delta, 1.0], ('-1+delta', '1'))


def gen_random_family_sample(n: int, m: int, eps: float, rng: np.random.Generator) -> Instance:
    """
    Draw one instance of the random family: c0 sits at 2-4eps from everyone,
    every other c_i is at 1 from a uniform half S_i of the agents and 3 from the rest.
    """
    if n % 2:
        raise ValueError(f"n must be even, got {n}")
    if m < 1:
        raise ValueError(f"Need m >= 1, got {m}")
    if not 0 < eps <= 1 / 30:
        raise ValueError(f"eps must lie in (0, 1/30], got {eps}")

    size = n + m
    dist = np.full((size, size), 2.0)
    dist[:n, n] = 2 - 4 * eps

    # row-wise Fisher-Yates shuffles, the first n/2 entries of each row form S_i
    order = rng.permuted(np.tile(np.arange(n), (m - 1, 1)), axis=1)[:, :n // 2]
    near = np.zeros((m - 1, n), dtype=bool)
    np.put_along_axis(near, order, True, axis=1)
    dist[:n, n + 1:] = np.where(near.T, 1.0, 3.0)

    dist[n:, :n] = dist[:n, n:].T
    np.fill_diagonal(dist, 0.0)
    return Instance(MetricSpace(dist), n, m)


def gen_random_euclidean(n: int, m: int, dim: int, rng: np.random.Generator) -> Instance:
    if dim < 1:
        raise ValueError(f"dim must be at least 1, got {dim}")
    return euclidean_instance(rng.random((n, dim)), rng.random((m, dim)))


def gen_instance(family: str, rng: Optional[np.random.Generator] = None, **params) -> Instance:
    """Dispatch used by the generate command"""
    if family == 'example1': return gen_example1()
    if family == 'det-lower':
        panel = params.get('panel') or Panel.of(range(params['k']))
        return gen_det_lower(params['n'], params['k'], params['eps'], panel)
    if family == 'fair-lower': return gen_fair_lower(params['n'], params['k'], params['eps'])
    if family == 'two-block': return gen_two_block(params['n'], params['k'])
    if family == 'fgc-line-k2': return gen_fgc_line_k2(params['n'], params['delta'])
    if family == 'bad-fair-line': return gen_bad_fair_line(params['n'], params['delta'])
    if family == 'random-family': return gen_random_family_sample(params['n'], params['m'], params['eps'], rng)
    if family == 'euclidean': return gen_random_euclidean(params['n'], params['m'], params['dim'], rng)
    raise ValueError(f"Unknown instance family {family!r}")


FAMILIES = ('example1', 'det-lower', 'fair-lower', 'two-block', 'fgc-line-k2',
            'bad-fair-line', 'random-family', 'euclidean')

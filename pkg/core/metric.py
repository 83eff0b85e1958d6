import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import networkx as nx
import numpy as np

from core.exceptions import DisconnectedGraph, InvalidInstance

logger = logging.getLogger(__name__)

CATEGORICAL = 'categorical'
CONTINUOUS = 'continuous'
FEATURE_KINDS = (CATEGORICAL, CONTINUOUS)


@dataclass(frozen=True, eq=False)
class MetricSpace:
    """Pseudo-metric over agents and alternatives, stored as a dense distance matrix"""
    dist: np.ndarray

    def __post_init__(self):
        dist = np.array(self.dist, dtype=float)
        if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
            raise InvalidInstance(f"Distance matrix must be square, got shape {dist.shape}")
        if dist.shape[0] < 1:
            raise InvalidInstance("Metric space needs at least one point")
        dist.flags.writeable = False
        object.__setattr__(self, 'dist', dist)

    @property
    def size(self) -> int:
        return self.dist.shape[0]

    def scaled(self, factor: float) -> 'MetricSpace':
        return MetricSpace(self.dist * factor)


@dataclass(frozen=True)
class Violation:
    kind: str                 # diagonal | negative | asymmetry | triangle
    points: Tuple[int, ...]
    excess: float

    def to_dict(self):
        return {'kind': self.kind, 'points': list(self.points), 'excess': self.excess}


@dataclass(frozen=True, eq=False)
class FeatureColumn:
    name: str
    kind: str
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class FeatureTable:
    columns: Tuple[FeatureColumn, ...]

    def __post_init__(self):
        if not self.columns:
            raise ValueError("Feature table needs at least one column")
        rows = len(self.columns[0].values)
        for column in self.columns:
            if column.kind not in FEATURE_KINDS:
                raise ValueError(f"Unknown kind {column.kind!r} for column {column.name!r}")
            if len(column.values) != rows:
                raise ValueError(f"Column {column.name!r} has {len(column.values)} values, expected {rows}")
            if column.kind == CONTINUOUS and not np.all(np.isfinite(column.values.astype(float))):
                raise ValueError(f"Continuous column {column.name!r} has non-finite values")

    @property
    def rows(self) -> int:
        return len(self.columns[0].values)

    @property
    def names(self) -> List[str]:
        return [column.name for column in self.columns]


@dataclass(frozen=True)
class FeatureWeights:
    weights: Tuple[float, ...]

    def __post_init__(self):
        for w in self.weights:
            if not 0.0 <= w <= 1.0:
                raise ValueError(f"Feature weight {w} outside [0, 1]")

    def __len__(self): return len(self.weights)


def validate_metric(metric: MetricSpace, tol: float = 0.0) -> List[Violation]:
    """Report every pair or triple breaking a pseudo-metric axiom by more than tol"""
    d = metric.dist
    size = metric.size
    violations: List[Violation] = []

    for i in np.flatnonzero(np.abs(np.diag(d)) > tol):
        violations.append(Violation('diagonal', (int(i),), float(abs(d[i, i]))))

    for i, j in zip(*np.nonzero(d < -tol)):
        violations.append(Violation('negative', (int(i), int(j)), float(-d[i, j])))

    gap = np.abs(d - d.T)
    for i, j in zip(*np.nonzero(np.triu(gap > tol, k=1))):
        violations.append(Violation('asymmetry', (int(i), int(j)), float(gap[i, j])))

    # d(i,j) <= d(i,l) + d(l,j), reported once per unordered pair {i,j}
    upper = np.triu(np.ones((size, size), dtype=bool), k=1)
    for l in range(size):
        excess = d - (d[:, l][:, None] + d[l, :][None, :])
        bad = (excess > tol) & upper
        bad[l, :] = False
        bad[:, l] = False
        for i, j in zip(*np.nonzero(bad)):
            violations.append(Violation('triangle', (int(i), int(j), l), float(excess[i, j])))

    violations.sort(key=lambda v: (v.kind, v.points))
    if violations:
        logger.debug("Metric of size %d has %d violations", size, len(violations))
    return violations


def shortest_path_metric(n_points: int, edges: Sequence[Tuple[int, int, float]]) -> MetricSpace:
    """All-pairs shortest-path distances of an undirected weighted graph"""
    graph = nx.Graph()
    graph.add_nodes_from(range(n_points))
    for i, j, length in edges:
        if length < 0:
            raise ValueError(f"Edge ({i}, {j}) has negative length {length}")
        if not (0 <= i < n_points and 0 <= j < n_points):
            raise ValueError(f"Edge ({i}, {j}) references a point outside [0, {n_points})")
        # parallel edges collapse to the shortest one
        if graph.has_edge(i, j) and graph[i][j]['weight'] <= length: continue
        graph.add_edge(i, j, weight=float(length))

    if not nx.is_connected(graph):
        components = sorted(min(c) for c in nx.connected_components(graph))
        raise DisconnectedGraph(f"Graph is disconnected: no path between points {components[0]} and {components[1]}")

    dist = nx.floyd_warshall_numpy(graph, nodelist=list(range(n_points)), weight='weight')
    return MetricSpace(np.asarray(dist))


def feature_distances(column: FeatureColumn) -> np.ndarray:
    """Per-feature pseudo-metric: 0/1 mismatch or span-normalised absolute difference"""
    values = column.values
    if column.kind == CATEGORICAL:
        return (values[:, None] != values[None, :]).astype(float)

    values = values.astype(float)
    span = float(values.max() - values.min())
    if span == 0.0:
        return np.zeros((len(values), len(values)))
    return np.abs(values[:, None] - values[None, :]) / span


def metric_from_features(table: FeatureTable, weights: FeatureWeights) -> MetricSpace:
    """Weighted sum of per-feature distances between the table's rows"""
    if len(weights) != len(table.columns):
        raise ValueError(f"Got {len(weights)} weights for {len(table.columns)} columns")

    dist = np.zeros((table.rows, table.rows))
    for column, weight in zip(table.columns, weights.weights):
        if weight == 0.0: continue
        dist += weight * feature_distances(column)
    return MetricSpace(dist)

import logging
import os
from typing import Sequence, Tuple

import numpy as np
import pandas as pd

from core.exceptions import DatasetError
from core.metric import (CATEGORICAL, CONTINUOUS, FEATURE_KINDS, FeatureColumn, FeatureTable, FeatureWeights,
                         MetricSpace, metric_from_features)

logger = logging.getLogger(__name__)

Schema = Tuple[Tuple[str, str], ...]

# tokens treated as a missing value ('?' is how census extracts mark them)
MISSING_TOKENS = ('', '?', 'NA', 'NaN', 'nan')


def parse_schema(text: str) -> Schema:
    """'sex:categorical,age:continuous' -> (('sex', 'categorical'), ('age', 'continuous'))"""
    schema = []
    for part in filter(None, (p.strip() for p in text.split(','))):
        name, sep, kind = part.rpartition(':')
        if not sep or not name:
            raise DatasetError(f"Schema entry {part!r} is not name:kind")
        if kind not in FEATURE_KINDS:
            raise DatasetError(f"Unknown column kind {kind!r} for {name!r}, expected one of {FEATURE_KINDS}")
        schema.append((name, kind))
    if not schema:
        raise DatasetError("Schema names no columns")
    return tuple(schema)


def load_dataset(path: str, schema: Schema) -> FeatureTable:
    if not os.path.isfile(path):
        raise DatasetError(f"Dataset not found: {path}")
    for name, kind in schema:
        if kind not in FEATURE_KINDS:
            raise DatasetError(f"Unknown column kind {kind!r} for {name!r}")

    df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    missing_columns = [name for name, _ in schema if name not in df.columns]
    if missing_columns:
        raise DatasetError(f"{path} has no column(s) {missing_columns}; header is {list(df.columns)}")

    columns = []
    for name, kind in schema:
        raw = df[name].str.strip()
        empty = raw.isin(MISSING_TOKENS)
        if empty.any():
            row = int(np.flatnonzero(empty.to_numpy())[0])
            raise DatasetError(f"Missing value in {path} at data row {row + 1}, column {name!r}")

        if kind == CONTINUOUS:
            values = pd.to_numeric(raw, errors='coerce')
            bad = values.isna()
            if bad.any():
                row = int(np.flatnonzero(bad.to_numpy())[0])
                raise DatasetError(
                    f"Non-numeric value {raw.iloc[row]!r} in {path} at data row {row + 1}, column {name!r}")
            columns.append(FeatureColumn(name, kind, values.to_numpy(dtype=float)))
        else:
            columns.append(FeatureColumn(name, kind, raw.to_numpy(dtype=object)))

    table = FeatureTable(tuple(columns))
    logger.info("Loaded %d rows with columns %s from %s", table.rows, table.names, path)
    return table


def subsample(table: FeatureTable, cap: int, rng: np.random.Generator) -> FeatureTable:
    """Keep a uniform cap-subset of rows, in file order"""
    if table.rows <= cap:
        return table
    keep = np.sort(rng.choice(table.rows, size=cap, replace=False))
    logger.info("Subsampled %d of %d rows", cap, table.rows)
    return FeatureTable(tuple(FeatureColumn(c.name, c.kind, c.values[keep]) for c in table.columns))


def sample_metric(table: FeatureTable, rng: np.random.Generator) -> MetricSpace:
    weights = FeatureWeights(tuple(rng.random(len(table.columns)).tolist()))
    return metric_from_features(table, weights)


def two_block_table(sizes: Sequence[int] = (36, 24), ages: Sequence[float] = (30.0, 60.0)) -> FeatureTable:
    """Synthetic table of co-located blocks, block b holding sizes[b] identical rows"""
    groups = np.concatenate([np.full(size, f'block{b}', dtype=object) for b, size in enumerate(sizes)])
    age = np.concatenate([np.full(size, float(ages[b])) for b, size in enumerate(sizes)])
    return FeatureTable((FeatureColumn('group', CATEGORICAL, groups), FeatureColumn('age', CONTINUOUS, age)))


def table_to_frame(table: FeatureTable) -> pd.DataFrame:
    return pd.DataFrame({c.name: c.values for c in table.columns})


def schema_of(table: FeatureTable) -> Schema:
    return tuple((c.name, c.kind) for c in table.columns)


def write_dataset(table: FeatureTable, path: str) -> str:
    table_to_frame(table).to_csv(path, index=False)
    return path

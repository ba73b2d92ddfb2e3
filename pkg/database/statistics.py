"""
Dataset statistics - stability, correlation and coverage.

- stability: variance of each property over an instance's repetitions,
  averaged per class (the class x property variance table)
- correlation: Pearson correlation between properties over instance means
- coverage: five-number summaries of instance means per class and property
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Tuple

import numpy as np
import pandas as pd

from concept_engine.errors import DatasetError
from database.records import ObservationRecord, RecordSet
from extraction.functional import PHYSICAL_COLUMNS

logger = logging.getLogger(__name__)

PROPERTIES = list(PHYSICAL_COLUMNS)
INSTANCE_KEYS = ["class", "instance"]


def _frame(records: Iterable[ObservationRecord]) -> pd.DataFrame:
    record_set = records if isinstance(records, RecordSet) else RecordSet(records)
    return record_set.to_frame()


def instance_means(records: Iterable[ObservationRecord]) -> pd.DataFrame:
    """
    Mean of every property over each instance's repetitions.

    Returns:
        DataFrame indexed by (class, instance); missing values are skipped,
        an instance with no value for a property keeps NaN there
    """
    frame = _frame(records)
    return frame.groupby(INSTANCE_KEYS, sort=True)[PROPERTIES].mean()


# =============================================================================
# Stability
# =============================================================================

@dataclass
class ClassSummary:
    """
    Mean of instance variances per class and property.

    ``table`` has one row per class plus ``prop_mean`` and one column per
    property plus ``class_mean``.
    """

    table: pd.DataFrame
    instance_variances: pd.DataFrame
    variance: str
    excluded_instances: List[Tuple[str, str]] = field(default_factory=list)

    def cell(self, class_label: str, property_label: str) -> float:
        return float(self.table.loc[class_label, property_label])

    @property
    def prop_mean(self) -> pd.Series:
        return self.table.loc["prop_mean"]


def mean_variance_table(records: Iterable[ObservationRecord], variance: str = "population") -> ClassSummary:
    """
    Class x property table of mean within-instance variances.

    Args:
        records: Observation records, several repetitions per instance
        variance: ``population`` (divide by n) or ``sample`` (divide by n - 1)

    Returns:
        ClassSummary
    """
    if variance not in ("population", "sample"):
        raise DatasetError(f"unknown variance flavour '{variance}'")
    ddof = 0 if variance == "population" else 1
    frame = _frame(records)

    counts = frame.groupby(INSTANCE_KEYS).size()
    single = [tuple(key) for key in counts[counts < 2].index]
    if single:
        logger.warning(f"[Stats] excluding {len(single)} single-repetition instance(s): {single[:5]}")
        keep = ~frame.set_index(INSTANCE_KEYS).index.isin(single)
        frame = frame[keep]
    if frame.empty:
        raise DatasetError("no instance has two or more repetitions")

    keys = [frame["class"], frame["instance"]]
    values = frame[PROPERTIES]
    deviations = values - values.groupby(keys).transform("mean")
    squares = (deviations ** 2).groupby(keys).sum(min_count=1)
    observed = values.notna().groupby(keys).sum()
    dof = (observed - ddof).where(observed - ddof > 0)
    per_instance = squares / dof
    per_instance.index.names = INSTANCE_KEYS

    table = per_instance.groupby(level="class").mean()
    table["class_mean"] = table[PROPERTIES].mean(axis=1)
    table.loc["prop_mean"] = table.mean(axis=0)
    table.index.name = "class"
    return ClassSummary(table, per_instance, variance, single)


# =============================================================================
# Correlation and Coverage
# =============================================================================

def pearson_matrix(records: Iterable[ObservationRecord]) -> pd.DataFrame:
    """
    Pearson correlation of every property pair over instance means.

    Missing values are excluded pairwise; a property without variance yields
    NaN. The strict upper triangle is blanked (NaN).
    """
    means = instance_means(records)
    corr = means.corr(method="pearson", min_periods=2).clip(-1.0, 1.0)
    upper = np.triu(np.ones(corr.shape, dtype=bool), k=1)
    return corr.mask(upper)


def coverage_stats(records: Iterable[ObservationRecord]) -> pd.DataFrame:
    """
    Five-number summary (linear interpolation) of instance means.

    Returns:
        Long DataFrame: class, property, count, min, q1, median, q3, max
    """
    means = instance_means(records)
    rows = []
    for class_label, group in means.groupby(level="class"):
        for prop in PROPERTIES:
            series = group[prop].dropna()
            if series.empty:
                quartiles = [np.nan] * 5
            else:
                quartiles = series.quantile([0.0, 0.25, 0.5, 0.75, 1.0], interpolation="linear").tolist()
            rows.append([class_label, prop, int(series.size), *quartiles])
    return pd.DataFrame(rows, columns=["class", "property", "count", "min", "q1", "median", "q3", "max"])

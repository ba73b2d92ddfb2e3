"""
Observation records - the dataset atom.

One record per (class, instance, repetition) with the eight physical property
columns, in the column order of the published variance table.
"""

from typing import Dict, Iterable, Iterator, List, Optional, Tuple

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from concept_engine.errors import DatasetError
from extraction.functional import PHYSICAL_COLUMNS, PhysicalVector

KEY_COLUMNS: Tuple[str, ...] = ("class", "instance", "repetition")
CSV_COLUMNS: Tuple[str, ...] = KEY_COLUMNS + PHYSICAL_COLUMNS

RecordKey = Tuple[str, str, int]


class ObservationRecord(BaseModel):
    """Property values of one observation; roughness may be missing."""

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    class_label: str = Field(alias="class", min_length=1)
    instance_id: str = Field(alias="instance", min_length=1)
    repetition: int = Field(ge=1)
    flatness: float = Field(ge=0, le=1)
    rigidity: float = Field(ge=0, le=1)
    roughness: Optional[float] = Field(None, ge=0, le=1)
    size_length: float = Field(ge=0, le=1)
    size_width: float = Field(ge=0, le=1)
    size_height: float = Field(ge=0, le=1)
    heaviness: float = Field(ge=0)
    hollowness: float = Field(ge=0, le=1)

    @property
    def key(self) -> RecordKey:
        return (self.class_label, self.instance_id, self.repetition)

    @classmethod
    def from_physical(cls, class_label: str, instance_id: str, repetition: int,
                      pv: PhysicalVector) -> "ObservationRecord":
        return cls(class_label=class_label, instance_id=instance_id, repetition=repetition, **pv.columns())

    def to_row(self) -> Dict[str, object]:
        return self.model_dump(by_alias=True)


class RecordSet:
    """
    Immutable collection of observation records, sorted by key.

    Raises:
        DatasetError: Two records share a (class, instance, repetition) key
    """

    def __init__(self, records: Iterable[ObservationRecord] = ()):
        ordered = sorted(records, key=lambda r: r.key)
        for previous, current in zip(ordered, ordered[1:]):
            if previous.key == current.key:
                raise DatasetError(f"duplicate record key {current.key}")
        self._records: Tuple[ObservationRecord, ...] = tuple(ordered)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[ObservationRecord]:
        return iter(self._records)

    def __getitem__(self, index: int) -> ObservationRecord:
        return self._records[index]

    def __eq__(self, other) -> bool:
        return isinstance(other, RecordSet) and self._records == other._records

    def __repr__(self) -> str:
        return f"RecordSet({len(self)} records, {len(self.classes())} classes)"

    def classes(self) -> List[str]:
        return sorted({r.class_label for r in self._records})

    def instances(self) -> List[Tuple[str, str]]:
        return sorted({(r.class_label, r.instance_id) for r in self._records})

    def to_frame(self) -> pd.DataFrame:
        """One row per record, CSV column names, missing roughness as NaN."""
        rows = [r.to_row() for r in self._records]
        frame = pd.DataFrame(rows, columns=list(CSV_COLUMNS))
        frame[list(PHYSICAL_COLUMNS)] = frame[list(PHYSICAL_COLUMNS)].astype(float)
        return frame


def instance_key(class_label: str, instance_id: str) -> str:
    """Dataset-wide identifier of an object instance."""
    return f"{class_label}/{instance_id}"

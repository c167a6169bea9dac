"""
Epileptic seizure recognition CSV ingestion.

Each data row is an optional identifier column, 178 integer samples and a class label in ``1..5``.
An optional header row is recognised by its non-integer label field.
"""
import csv
import io
import logging
from typing import List, Optional, Tuple

import numpy as np

from sigadapt.errors import FormatError, ValidationError
from sigadapt.signal import (
    Dataset,
    DatasetManifest,
    InstanceRecord,
    SignalMatrix,
    source_checksum,
)

log = logging.getLogger(__name__)

SEIZURE_LENGTH = 178

SEIZURE_CLASSES: Tuple[str, ...] = (
    "seizure",
    "tumor_area",
    "healthy_area",
    "eyes_closed",
    "eyes_open",
)

BINARY_CLASSES: Tuple[str, ...] = ("non_seizure", "seizure")


def _is_int(field: str) -> bool:
    try:
        int(field)
    except ValueError:
        return False
    return True


def _group_of(identifier: str) -> Optional[str]:
    # "X21.V1.791": chunk 21 of recording "V1.791"
    _, sep, rest = identifier.partition(".")
    return rest if sep and rest else None


def parse_seizure_csv(
    data: bytes, binary: bool = False, source: str = "seizure.csv"
) -> Dataset:
    """
    Parse the seizure CSV into ``1 x 178`` instances.

    Labels ``1..5`` become ``0..4``; with *binary* set, label 1 becomes class ``seizure`` (1)
    and every other label ``non_seizure`` (0).

    .. code-block:: python3

        >>> row = ",".join(["0"] * 178 + ["1"])
        >>> ds = parse_seizure_csv(row.encode())
        >>> len(ds), ds.shape, ds.signals[0].label, ds.class_count
        (1, (1, 178), 0, 5)
    """
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise FormatError(f"not UTF-8 text: {exc}", source=source) from None
    records: List[InstanceRecord] = []
    signals: List[SignalMatrix] = []
    class_names = BINARY_CLASSES if binary else SEIZURE_CLASSES
    first = True
    for rowno, fields in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not fields or all(not f.strip() for f in fields):
            continue
        fields = [f.strip() for f in fields]
        if first:
            first = False
            if not _is_int(fields[-1]):
                continue
        if len(fields) == SEIZURE_LENGTH + 2:
            identifier: Optional[str] = fields[0]
            sample_fields = fields[1:-1]
        elif len(fields) == SEIZURE_LENGTH + 1:
            identifier = None
            sample_fields = fields[:-1]
        else:
            raise FormatError(
                f"expected {SEIZURE_LENGTH} samples plus label (and optional id), "
                f"found {len(fields)} fields",
                row=rowno,
                source=source,
            )
        try:
            samples = np.array([int(f) for f in sample_fields], dtype=np.float64)
            raw = int(fields[-1])
        except ValueError as exc:
            raise FormatError(f"non-integer field: {exc}", row=rowno, source=source) from None
        if not 1 <= raw <= len(SEIZURE_CLASSES):
            raise FormatError(f"label {raw} outside 1..{len(SEIZURE_CLASSES)}", row=rowno, source=source)
        label = int(raw == 1) if binary else raw - 1
        index = len(signals)
        iid = f"seizure-{index:05d}"
        group = _group_of(identifier) if identifier else None
        records.append(InstanceRecord(iid, source, rowno, label, group))
        signals.append(SignalMatrix(iid, samples[np.newaxis, :], label))
    if not signals:
        raise ValidationError(f"{source}: no data rows")
    manifest = DatasetManifest(
        name="seizure-binary" if binary else "seizure",
        class_names=class_names,
        instances=tuple(records),
        checksum=source_checksum([(source, data)]),
    )
    log.info("parsed seizure CSV", extra={"fields": {"instances": len(signals), "binary": binary}})
    return Dataset(manifest, tuple(signals))

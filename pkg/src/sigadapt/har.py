"""
UCI HAR inertial-signal ingestion.

Each inertial file holds one channel: one instance per row, 128 whitespace-separated reals per row.
Nine such files stack into ``9 x 128`` instances.
"""
import logging
import pathlib
from typing import Mapping, Optional, Tuple

import numpy as np

from sigadapt.errors import ArtifactError, FormatError, ValidationError
from sigadapt.manifest import PathLike
from sigadapt.signal import (
    Dataset,
    DatasetManifest,
    InstanceRecord,
    SignalMatrix,
    source_checksum,
)
from sigadapt.types import FloatArray

log = logging.getLogger(__name__)

HAR_CHANNELS: Tuple[str, ...] = (
    "total_acc_x",
    "total_acc_y",
    "total_acc_z",
    "body_acc_x",
    "body_acc_y",
    "body_acc_z",
    "body_gyro_x",
    "body_gyro_y",
    "body_gyro_z",
)

HAR_CLASSES: Tuple[str, ...] = (
    "WALKING",
    "WALKING_UPSTAIRS",
    "WALKING_DOWNSTAIRS",
    "SITTING",
    "STANDING",
    "LAYING",
)

HAR_LENGTH = 128


def parse_fixed_width_signal_file(
    data: bytes, columns: Optional[int] = None, source: Optional[str] = None
) -> FloatArray:
    """
    Parse whitespace-separated real columns into an ``N x T`` matrix.

    ``T`` is *columns* when given, otherwise the width of the first row.
    Blank lines are skipped; row numbers in errors count every line of the file from 1.

    .. code-block:: python3

        >>> parse_fixed_width_signal_file(b"1 2 3\\n4 5 6\\n").tolist()
        [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]
        >>> parse_fixed_width_signal_file(b"1 2 3\\n4 5\\n")
        Traceback (most recent call last):
        ...
        sigadapt.errors.FormatError: row 2: expected 3 columns, found 2
    """
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise FormatError(f"not an ASCII text file: {exc}", source=source) from None
    rows = []
    width = columns
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if width is None:
            width = len(fields)
        if len(fields) != width:
            raise FormatError(
                f"expected {width} columns, found {len(fields)}", row=lineno, source=source
            )
        try:
            row = np.array(fields, dtype=np.float64)
        except ValueError as exc:
            raise FormatError(str(exc), row=lineno, source=source) from None
        if not np.all(np.isfinite(row)):
            raise FormatError("non-finite value", row=lineno, source=source)
        rows.append(row)
    if not rows:
        return np.zeros((0, width or 0), dtype=np.float64)
    return np.stack(rows)


def parse_label_file(data: bytes, source: Optional[str] = None) -> Tuple[int, ...]:
    """One integer label per non-blank line"""
    labels = []
    for lineno, line in enumerate(data.decode("ascii", "replace").splitlines(), start=1):
        field = line.strip()
        if not field:
            continue
        try:
            labels.append(int(field))
        except ValueError:
            raise FormatError(f"label {field!r} is not an integer", row=lineno, source=source) from None
    return tuple(labels)


def assemble_har_dataset(
    channel_files: Mapping[str, bytes],
    labels: bytes,
    subjects: Optional[bytes] = None,
    partition: str = "train",
) -> Dataset:
    """
    Stack the nine per-channel files into ``9 x 128`` instances.

    *channel_files* maps every name in :data:`HAR_CHANNELS` to that file's bytes;
    channel order is fixed by :data:`HAR_CHANNELS` whatever the mapping order.
    Labels ``1..6`` are remapped to ``0..5``.
    *subjects*, when given, holds one subject id per row and becomes the instance group.
    """
    missing = [c for c in HAR_CHANNELS if c not in channel_files]
    if missing:
        raise ValidationError(f"missing HAR channel file(s): {', '.join(missing)}")
    matrices = []
    for name in HAR_CHANNELS:
        mat = parse_fixed_width_signal_file(channel_files[name], HAR_LENGTH, source=name)
        if matrices and mat.shape[0] != matrices[0].shape[0]:
            raise ValidationError(
                f"{name} has {mat.shape[0]} rows but {HAR_CHANNELS[0]} has {matrices[0].shape[0]}"
            )
        matrices.append(mat)
    n = matrices[0].shape[0]
    raw_labels = parse_label_file(labels, source="labels")
    if len(raw_labels) != n:
        raise ValidationError(f"labels has {len(raw_labels)} rows but channel files have {n}")
    bad = [i for i, y in enumerate(raw_labels, start=1) if not 1 <= y <= len(HAR_CLASSES)]
    if bad:
        raise FormatError(f"label outside 1..{len(HAR_CLASSES)}", row=bad[0], source="labels")
    groups: Tuple[Optional[str], ...] = (None,) * n
    if subjects is not None:
        subject_ids = parse_label_file(subjects, source="subjects")
        if len(subject_ids) != n:
            raise ValidationError(
                f"subjects has {len(subject_ids)} rows but channel files have {n}"
            )
        groups = tuple(f"subject-{s:02d}" for s in subject_ids)

    stack = np.stack(matrices, axis=1)  # N x 9 x 128
    source = f"{partition}/Inertial Signals"
    records = []
    signals = []
    for i in range(n):
        iid = f"har-{partition}-{i:05d}"
        label = raw_labels[i] - 1
        records.append(InstanceRecord(iid, source, i, label, groups[i]))
        signals.append(SignalMatrix(iid, stack[i], label))
    named = [(name, channel_files[name]) for name in HAR_CHANNELS]
    named.append(("labels", labels))
    if subjects is not None:
        named.append(("subjects", subjects))
    manifest = DatasetManifest(
        name=f"har-{partition}",
        class_names=HAR_CLASSES,
        instances=tuple(records),
        checksum=source_checksum(named),
    )
    log.info("assembled HAR partition", extra={"fields": {"partition": partition, "instances": n}})
    return Dataset(manifest, tuple(signals))


def load_har_directory(root: PathLike, partition: str = "train") -> Dataset:
    """
    Load one partition from an extracted ``UCI HAR Dataset`` directory.

    Reads ``<root>/<partition>/Inertial Signals/<channel>_<partition>.txt``,
    ``<root>/<partition>/y_<partition>.txt`` and, when present, ``subject_<partition>.txt``.
    """
    base = pathlib.Path(root) / partition
    signals_dir = base / "Inertial Signals"
    try:
        files = {
            name: (signals_dir / f"{name}_{partition}.txt").read_bytes()
            for name in HAR_CHANNELS
        }
        labels = (base / f"y_{partition}.txt").read_bytes()
    except OSError as exc:
        raise ArtifactError(f"cannot read HAR partition {partition!r}: {exc}") from None
    subject_path = base / f"subject_{partition}.txt"
    subjects = subject_path.read_bytes() if subject_path.is_file() else None
    return assemble_har_dataset(files, labels, subjects, partition)

"""
Labelled signal instances and the manifests describing a dataset of them.
"""
import io
import pathlib
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Iterator, Mapping, Optional, Tuple

import numpy as np
import numpy.typing as npt

from sigadapt.errors import ArtifactError, ValidationError
from sigadapt.manifest import (
    PathLike,
    read_jsonl,
    record_fields,
    require_fields,
    sha256_hex,
    write_bytes,
    write_jsonl,
)
from sigadapt.plane import require_finite
from sigadapt.types import FloatArray

DATASET_MANIFEST = "dataset.jsonl"
DATASET_SAMPLES = "samples.npy"


class SignalMatrix:
    r"""
    One labelled instance: ``channels x length`` finite real samples.

    The channel axis is the spatial dimension and the sample axis the temporal dimension.
    Samples are copied, stored as float64 and made read-only.

    .. code-block:: python3

        >>> m = SignalMatrix("a", [[1, 2, 3], [4, 5, 6]], label=1)
        >>> m.channels, m.length, m.label
        (2, 3, 1)
        >>> m
        SignalMatrix('a', 2x3, label=1)

    Args:
        id: identifier, unique within a dataset
        samples: two-dimensional array-like, channels by samples
        label: 0-based class index
    """

    __slots__ = ("_id", "_samples", "_label")

    def __init__(self, id: str, samples: npt.ArrayLike, label: int) -> None:
        arr = np.array(require_finite(samples, f"instance {id!r}"), copy=True)
        if arr.ndim != 2:
            raise ValidationError(
                f"instance {id!r}: samples must be channels x length, got shape {arr.shape}"
            )
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"instance {id!r}: empty samples {arr.shape}")
        if isinstance(label, bool) or not isinstance(label, (int, np.integer)):
            raise TypeError(f"label must be an int, not {type(label).__qualname__}")
        if label < 0:
            raise ValidationError(f"instance {id!r}: negative label {label}")
        arr.setflags(write=False)
        self._id = str(id)
        self._samples: FloatArray = arr
        self._label = int(label)

    @property
    def id(self) -> str:
        return self._id

    @property
    def samples(self) -> FloatArray:
        """Read-only ``channels x length`` array"""
        return self._samples

    @property
    def label(self) -> int:
        return self._label

    @property
    def channels(self) -> int:
        return int(self._samples.shape[0])

    @property
    def length(self) -> int:
        return int(self._samples.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.channels, self.length)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, type(self)):
            return (
                self._id == other._id
                and self._label == other._label
                and self._samples.shape == other._samples.shape
                and bool(np.array_equal(self._samples, other._samples))
            )
        return NotImplemented

    __hash__: None  # type: ignore

    def __repr__(self) -> str:
        return (
            f"{type(self).__qualname__}({self._id!r}, "
            f"{self.channels}x{self.length}, label={self._label})"
        )


@dataclass(frozen=True)
class InstanceRecord:
    """Where one instance came from: its source file, offset within it, label and group (subject)"""

    id: str
    source: str
    offset: int
    label: int
    group: Optional[str] = None

    def to_record(self) -> Dict[str, Any]:
        rec: Dict[str, Any] = {
            "id": self.id,
            "source": self.source,
            "offset": self.offset,
            "label": self.label,
        }
        if self.group is not None:
            rec["group"] = self.group
        return rec

    @classmethod
    def from_record(cls, rec: Mapping[str, Any], where: str) -> "InstanceRecord":
        require_fields(rec, ("id", "source", "offset", "label"), where)
        group = rec.get("group")
        with record_fields(where):
            out = cls(
                id=str(rec["id"]),
                source=str(rec["source"]),
                offset=int(rec["offset"]),
                label=int(rec["label"]),
                group=None if group is None else str(group),
            )
        return out


@dataclass(frozen=True)
class DatasetManifest:
    """
    Ordered description of a dataset: class names, instance records and a checksum of the raw sources.

    Instance order is the source order and is stable across runs.
    """

    name: str
    class_names: Tuple[str, ...]
    instances: Tuple[InstanceRecord, ...]
    checksum: str

    def __post_init__(self) -> None:
        if not self.class_names:
            raise ValidationError(f"dataset {self.name!r} declares no classes")
        seen = set()
        for rec in self.instances:
            if rec.id in seen:
                raise ValidationError(f"dataset {self.name!r}: duplicate id {rec.id!r}")
            seen.add(rec.id)
            if not 0 <= rec.label < len(self.class_names):
                raise ValidationError(
                    f"dataset {self.name!r}: instance {rec.id!r} has label {rec.label} "
                    f"but only {len(self.class_names)} classes"
                )

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    @property
    def ids(self) -> Tuple[str, ...]:
        return tuple(r.id for r in self.instances)

    @property
    def labels(self) -> Tuple[int, ...]:
        return tuple(r.label for r in self.instances)

    def __len__(self) -> int:
        return len(self.instances)


def source_checksum(sources: Iterable[Tuple[str, bytes]]) -> str:
    """Checksum of named raw sources; changes whenever a name or any byte changes"""
    chunks = []
    for name, data in sources:
        chunks.append(name.encode("utf-8"))
        chunks.append(data)
    return sha256_hex(*chunks)


@dataclass(frozen=True)
class Dataset:
    """
    A :class:`DatasetManifest` plus the :class:`SignalMatrix` instances it describes, in manifest order.

    All instances of a dataset share one ``channels x length`` shape.
    """

    manifest: DatasetManifest
    signals: Tuple[SignalMatrix, ...]

    def __post_init__(self) -> None:
        if len(self.signals) != len(self.manifest.instances):
            raise ValidationError(
                f"{len(self.signals)} signals for {len(self.manifest.instances)} manifest records"
            )
        for rec, sig in zip(self.manifest.instances, self.signals):
            if rec.id != sig.id or rec.label != sig.label:
                raise ValidationError(
                    f"signal {sig.id!r} does not match manifest record {rec.id!r}"
                )
        shapes = {s.shape for s in self.signals}
        if len(shapes) > 1:
            raise ValidationError(
                f"dataset {self.manifest.name!r} mixes instance shapes {sorted(shapes)}"
            )

    @property
    def name(self) -> str:
        return self.manifest.name

    @property
    def class_count(self) -> int:
        return self.manifest.class_count

    @property
    def shape(self) -> Tuple[int, int]:
        """Shared ``(channels, length)`` of the instances; ``(0, 0)`` for an empty dataset"""
        if not self.signals:
            return (0, 0)
        return self.signals[0].shape

    def __len__(self) -> int:
        return len(self.signals)

    def __iter__(self) -> Iterator[SignalMatrix]:
        return iter(self.signals)


def save_dataset(dataset: Dataset, directory: PathLike) -> None:
    """Write ``dataset.jsonl`` and ``samples.npy`` into *directory*"""
    out = pathlib.Path(directory)
    m = dataset.manifest
    channels, length = dataset.shape
    write_jsonl(
        out / DATASET_MANIFEST,
        "dataset",
        {
            "name": m.name,
            "class_names": list(m.class_names),
            "checksum": m.checksum,
            "channels": channels,
            "length": length,
            "count": len(m.instances),
        },
        (r.to_record() for r in m.instances),
    )
    stack = np.zeros((len(dataset), channels, length), dtype="<f8")
    for i, sig in enumerate(dataset.signals):
        stack[i] = sig.samples
    buf = io.BytesIO()
    np.save(buf, stack, allow_pickle=False)
    write_bytes(out / DATASET_SAMPLES, buf.getvalue())


def load_dataset(directory: PathLike) -> Dataset:
    """Read a dataset written by :func:`save_dataset`"""
    base = pathlib.Path(directory)
    path = base / DATASET_MANIFEST
    header, records = read_jsonl(path, "dataset")
    require_fields(header, ("name", "class_names", "checksum", "channels", "length"), f"{path}: line 1")
    instances = tuple(
        InstanceRecord.from_record(rec, f"{path}: line {i}")
        for i, rec in enumerate(records, start=2)
    )
    manifest = DatasetManifest(
        name=str(header["name"]),
        class_names=tuple(str(c) for c in header["class_names"]),
        instances=instances,
        checksum=str(header["checksum"]),
    )
    try:
        stack = np.load(base / DATASET_SAMPLES, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise ArtifactError(f"{base / DATASET_SAMPLES}: cannot read samples: {exc}") from None
    expected = (len(instances), int(header["channels"]), int(header["length"]))
    if stack.shape != expected:
        raise ArtifactError(
            f"{base / DATASET_SAMPLES}: shape {stack.shape} does not match manifest {expected}"
        )
    signals = tuple(
        SignalMatrix(rec.id, stack[i], rec.label) for i, rec in enumerate(instances)
    )
    return Dataset(manifest, signals)

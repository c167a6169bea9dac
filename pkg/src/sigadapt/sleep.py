"""
Sleep-EDF ingestion: single-channel EEG cut into fixed-length epochs labelled from the hypnogram.
"""
import enum
import logging
import math
import pathlib
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from sigadapt.config import parse_key_value_lines
from sigadapt.edf import Annotation, parse_edf, parse_edf_annotations
from sigadapt.errors import ArtifactError, ValidationError
from sigadapt.manifest import PathLike
from sigadapt.plane import require_finite
from sigadapt.signal import (
    Dataset,
    DatasetManifest,
    InstanceRecord,
    SignalMatrix,
    source_checksum,
)
from sigadapt.windows import WindowPartition

log = logging.getLogger(__name__)

EPOCH_SAMPLES = 3000
DEFAULT_CHANNEL = "Fpz-Cz"


@dataclass(frozen=True)
class StageMapping:
    """
    Which hypnogram annotation maps to which class.

    ``classes`` is the ordered list of class names and ``annotations`` pairs each annotation text
    with a class index. Annotations not listed (``Sleep stage ?``, ``Movement time``) are unlabelled.
    """

    classes: Tuple[str, ...]
    annotations: Tuple[Tuple[str, int], ...]

    def __post_init__(self) -> None:
        if not self.classes:
            raise ValidationError("stage mapping declares no classes")
        for text, index in self.annotations:
            if not 0 <= index < len(self.classes):
                raise ValidationError(f"annotation {text!r} maps to unknown class {index}")

    @classmethod
    def default(cls) -> "StageMapping":
        """Five classes W, N1, N2, N3 (stages 3 and 4 merged), REM"""
        return cls(
            classes=("W", "N1", "N2", "N3", "REM"),
            annotations=(
                ("Sleep stage W", 0),
                ("Sleep stage 1", 1),
                ("Sleep stage 2", 2),
                ("Sleep stage 3", 3),
                ("Sleep stage 4", 3),
                ("Sleep stage R", 4),
            ),
        )

    def label_of(self, description: str) -> Optional[int]:
        return dict(self.annotations).get(description.strip())

    def class_index(self, name: str) -> Optional[int]:
        return self.classes.index(name) if name in self.classes else None


def load_stage_mapping(text: str, source: str = "stage mapping") -> StageMapping:
    """
    Parse ``annotation = class`` lines; classes are numbered in order of first appearance.

    .. code-block:: python3

        >>> m = load_stage_mapping('''
        ... Sleep stage W = wake
        ... Sleep stage 1 = sleep
        ... Sleep stage 2 = sleep
        ... ''')
        >>> m.classes, m.label_of("Sleep stage 2")
        (('wake', 'sleep'), 1)
    """
    classes: List[str] = []
    pairs: List[Tuple[str, int]] = []
    for _, key, value in parse_key_value_lines(text, source):
        if value not in classes:
            classes.append(value)
        pairs.append((key, classes.index(value)))
    return StageMapping(tuple(classes), tuple(pairs))


def stage_labels(
    annotations: Sequence[Annotation],
    epoch_count: int,
    epoch_seconds: float,
    mapping: StageMapping,
) -> List[Optional[int]]:
    """
    Label of every epoch, ``None`` where no mapped annotation covers the epoch start.

    An annotation covers epoch ``i`` when ``onset <= i * epoch_seconds < onset + duration``.
    """
    labels: List[Optional[int]] = [None] * epoch_count
    for a in annotations:
        label = mapping.label_of(a.description)
        if label is None or not a.duration:
            continue
        first = math.ceil(a.onset / epoch_seconds - 1e-9)
        stop = math.ceil((a.onset + a.duration) / epoch_seconds - 1e-9)
        for i in range(max(first, 0), min(stop, epoch_count)):
            labels[i] = label
    return labels


def trim_wake(
    labels: Sequence[Optional[int]], wake_label: int, margin_epochs: int
) -> range:
    """
    Epochs to keep when long wake periods at the recording edges are trimmed.

    Keeps ``margin_epochs`` epochs before the first and after the last sleep epoch.
    When the recording holds no sleep epoch every epoch is kept.

    .. code-block:: python3

        >>> trim_wake([0, 0, 0, 1, 2, 0, 0, 0], wake_label=0, margin_epochs=1)
        range(2, 6)
    """
    sleep = [i for i, y in enumerate(labels) if y is not None and y != wake_label]
    if not sleep:
        return range(len(labels))
    return range(max(sleep[0] - margin_epochs, 0), min(sleep[-1] + margin_epochs + 1, len(labels)))


class EpochStatus(enum.Enum):
    OK = "ok"
    SHORT = "short"


@dataclass(frozen=True)
class Epochs:
    """
    Result of cutting one stream into epochs.

    ``epoch_count`` counts every full window, labelled or not, so
    ``epoch_count * epoch_samples + dropped_samples`` is the stream length.
    ``signals`` holds the labelled epochs and ``offsets`` their first sample.
    """

    signals: Tuple[SignalMatrix, ...]
    offsets: Tuple[int, ...]
    epoch_count: int
    dropped_samples: int
    unlabeled: int
    status: EpochStatus


def epoch_sleep_recording(
    stream: npt.ArrayLike,
    epoch_samples: int = EPOCH_SAMPLES,
    labels: Optional[Sequence[Optional[int]]] = None,
    id_prefix: str = "epoch",
) -> Epochs:
    """
    Cut a single-channel stream into consecutive non-overlapping ``1 x epoch_samples`` instances.

    The trailing partial window is dropped.
    Without *labels* every epoch gets label 0; with *labels*, epochs labelled ``None`` (or past the
    end of *labels*) are skipped and counted in ``unlabeled``.
    A stream shorter than one epoch yields no instances and status ``short``.

    .. code-block:: python3

        >>> e = epoch_sleep_recording(np.zeros(9001))
        >>> len(e.signals), e.dropped_samples, e.status.value
        (3, 1, 'ok')
        >>> epoch_sleep_recording(np.zeros(10)).status.value
        'short'
    """
    x = require_finite(stream, "sleep stream")
    if x.ndim != 1:
        raise ValidationError(f"expected a single-channel stream, got shape {x.shape}")
    if epoch_samples < 1:
        raise ValidationError(f"epoch length must be positive, not {epoch_samples}")
    windows = WindowPartition(int(x.size), epoch_samples)
    if windows.complete == 0:
        log.warning(
            "stream shorter than one epoch",
            extra={"fields": {"samples": int(x.size), "epoch_samples": epoch_samples}},
        )
        return Epochs((), (), 0, int(x.size), 0, EpochStatus.SHORT)
    signals = []
    offsets = []
    unlabeled = 0
    for i in range(windows.complete):
        if labels is None:
            label: Optional[int] = 0
        else:
            label = labels[i] if i < len(labels) else None
        if label is None:
            unlabeled += 1
            continue
        w = windows[i]
        signals.append(
            SignalMatrix(f"{id_prefix}-{i:05d}", x[w.start : w.stop][np.newaxis, :], label)
        )
        offsets.append(w.start)
    if unlabeled:
        log.warning(
            "dropped unlabelled epochs",
            extra={"fields": {"recording": id_prefix, "epochs": unlabeled}},
        )
    return Epochs(
        tuple(signals), tuple(offsets), windows.complete, windows.remainder, unlabeled, EpochStatus.OK
    )


def _recording_epochs(
    psg: bytes,
    hypnogram: bytes,
    recording_id: str,
    channel: str,
    epoch_samples: int,
    mapping: StageMapping,
    trim_wake_minutes: Optional[float],
) -> Epochs:
    rec = parse_edf(psg)
    index = rec.channel_index(channel)
    rate = rec.sampling_rates[index]
    if rate <= 0:
        raise ValidationError(f"{recording_id}: channel {channel!r} has no sampling rate")
    stream = rec.physical[index]
    epoch_seconds = epoch_samples / rate
    count = stream.size // epoch_samples
    labels = stage_labels(parse_edf_annotations(parse_edf(hypnogram)), count, epoch_seconds, mapping)
    if trim_wake_minutes is not None:
        wake = mapping.class_index("W")
        if wake is None:
            raise ValidationError("wake trimming needs a class named 'W' in the stage mapping")
        keep = trim_wake(labels, wake, int(round(trim_wake_minutes * 60 / epoch_seconds)))
        labels = [y if i in keep else None for i, y in enumerate(labels)]
    return epoch_sleep_recording(stream, epoch_samples, labels, id_prefix=recording_id)


def load_sleep_edf(
    psg: bytes,
    hypnogram: bytes,
    recording_id: str = "sleep",
    channel: str = DEFAULT_CHANNEL,
    epoch_samples: int = EPOCH_SAMPLES,
    mapping: Optional[StageMapping] = None,
    trim_wake_minutes: Optional[float] = None,
    group: Optional[str] = None,
) -> Dataset:
    """
    Epochs of one recording: the EEG channel *channel* of *psg* labelled by the *hypnogram* annotations.
    """
    return _assemble(
        [(recording_id, psg, hypnogram, group)],
        channel,
        epoch_samples,
        mapping or StageMapping.default(),
        trim_wake_minutes,
        name="sleep-edf",
    )


def _assemble(
    recordings: Sequence[Tuple[str, bytes, bytes, Optional[str]]],
    channel: str,
    epoch_samples: int,
    mapping: StageMapping,
    trim_wake_minutes: Optional[float],
    name: str,
) -> Dataset:
    records: List[InstanceRecord] = []
    signals: List[SignalMatrix] = []
    sources: List[Tuple[str, bytes]] = []
    for recording_id, psg, hypnogram, group in recordings:
        epochs = _recording_epochs(
            psg, hypnogram, recording_id, channel, epoch_samples, mapping, trim_wake_minutes
        )
        for sig, offset in zip(epochs.signals, epochs.offsets):
            records.append(InstanceRecord(sig.id, f"{recording_id}-PSG.edf", offset, sig.label, group))
            signals.append(sig)
        sources.append((f"{recording_id}-PSG.edf", psg))
        sources.append((f"{recording_id}-Hypnogram.edf", hypnogram))
    manifest = DatasetManifest(
        name=name,
        class_names=mapping.classes,
        instances=tuple(records),
        checksum=source_checksum(sources),
    )
    log.info(
        "assembled sleep epochs",
        extra={"fields": {"recordings": len(recordings), "instances": len(signals)}},
    )
    return Dataset(manifest, tuple(signals))


def _subject_of(stem: str) -> str:
    # Sleep-EDF names recordings SC4ssN / ST7ssN with ss the subject number
    if len(stem) >= 5 and stem[:3] in ("SC4", "ST7"):
        return f"{stem[:2]}-{stem[3:5]}"
    return stem


def load_sleep_directory(
    root: PathLike,
    channel: str = DEFAULT_CHANNEL,
    subjects: Optional[int] = None,
    epoch_samples: int = EPOCH_SAMPLES,
    mapping: Optional[StageMapping] = None,
    trim_wake_minutes: Optional[float] = None,
) -> Dataset:
    """
    Load every ``*-PSG.edf`` under *root* with its matching ``*-Hypnogram.edf``.

    Recordings are paired on their first six characters and visited in name order;
    *subjects* keeps only the recordings of the first that many subjects.
    """
    base = pathlib.Path(root)
    psg_files = sorted(base.glob("*-PSG.edf"))
    if not psg_files:
        raise ArtifactError(f"{base}: no *-PSG.edf recordings")
    chosen: Dict[str, None] = {}
    recordings = []
    for psg_path in psg_files:
        stem = psg_path.name[: -len("-PSG.edf")]
        subject = _subject_of(stem)
        if subjects is not None and subject not in chosen and len(chosen) >= subjects:
            continue
        chosen[subject] = None
        matches = sorted(base.glob(f"{stem[:6]}*-Hypnogram.edf"))
        if not matches:
            raise ArtifactError(f"{psg_path}: no matching hypnogram")
        try:
            recordings.append((stem, psg_path.read_bytes(), matches[0].read_bytes(), subject))
        except OSError as exc:
            raise ArtifactError(f"cannot read {stem}: {exc}") from None
    return _assemble(
        recordings,
        channel,
        epoch_samples,
        mapping or StageMapping.default(),
        trim_wake_minutes,
        name="sleep-edf",
    )

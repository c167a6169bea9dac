"""
European Data Format (EDF / EDF+) reading and writing.

Layout: a 256-byte ASCII header, 256 header bytes per signal, then data records.
Each record holds ``samples_per_record`` 16-bit little-endian two's-complement integers for every signal in turn.
Digital values map to physical ones linearly::

    physical = physical_min + (digital - digital_min) * (physical_max - physical_min) / (digital_max - digital_min)

EDF+ annotation signals (label ``EDF Annotations``) carry time-stamped annotation lists (TALs) instead of samples.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from sigadapt.errors import (
    DegenerateCalibrationError,
    FormatError,
    TruncatedError,
    ValidationError,
)
from sigadapt.types import FloatArray

log = logging.getLogger(__name__)

ANNOTATION_LABEL = "EDF Annotations"

_FIXED_HEADER = 256
_SIGNAL_HEADER = 256

# (name, width) in file order; each signal field is stored for all signals before the next field
_HEADER_FIELDS = (
    ("version", 8),
    ("patient", 80),
    ("recording", 80),
    ("start_date", 8),
    ("start_time", 8),
    ("header_bytes", 8),
    ("reserved", 44),
    ("record_count", 8),
    ("record_duration", 8),
    ("signal_count", 4),
)
_SIGNAL_FIELDS = (
    ("label", 16),
    ("transducer", 80),
    ("physical_dimension", 8),
    ("physical_min", 8),
    ("physical_max", 8),
    ("digital_min", 8),
    ("digital_max", 8),
    ("prefiltering", 80),
    ("samples_per_record", 8),
    ("reserved", 32),
)

Int16Array = npt.NDArray[np.int16]


@dataclass(frozen=True)
class EdfSignalHeader:
    """Per-signal header: label, units and the digital to physical calibration"""

    label: str
    physical_min: float
    physical_max: float
    digital_min: int
    digital_max: int
    samples_per_record: int
    transducer: str = ""
    physical_dimension: str = ""
    prefiltering: str = ""

    @property
    def is_annotation(self) -> bool:
        return self.label.strip() == ANNOTATION_LABEL

    @property
    def gain(self) -> float:
        """Physical units per digital step"""
        if self.digital_max == self.digital_min:
            raise DegenerateCalibrationError(
                f"signal {self.label!r}: digital_min == digital_max == {self.digital_min}"
            )
        return (self.physical_max - self.physical_min) / (self.digital_max - self.digital_min)

    def to_physical(self, digital: npt.ArrayLike) -> FloatArray:
        d = np.asarray(digital, dtype=np.float64)
        out: FloatArray = self.physical_min + (d - self.digital_min) * self.gain
        return out

    def to_digital(self, physical: npt.ArrayLike) -> Int16Array:
        """Nearest digital value, clipped to the digital range"""
        p = np.asarray(physical, dtype=np.float64)
        d = np.round((p - self.physical_min) / self.gain) + self.digital_min
        lo, hi = sorted((self.digital_min, self.digital_max))
        return np.clip(d, lo, hi).astype(np.int16)


@dataclass(frozen=True)
class EdfHeader:
    version: str
    patient: str
    recording: str
    start_date: str
    start_time: str
    header_bytes: int
    reserved: str
    record_count: int
    record_duration: float
    signals: Tuple[EdfSignalHeader, ...]

    @property
    def record_samples(self) -> int:
        """Samples in one data record, all signals together"""
        return sum(s.samples_per_record for s in self.signals)

    @property
    def record_bytes(self) -> int:
        return 2 * self.record_samples


@dataclass(frozen=True)
class Annotation:
    """One EDF+ annotation: onset and duration in seconds, and its text"""

    onset: float
    duration: Optional[float]
    description: str


@dataclass(frozen=True)
class EdfRecording:
    """
    A parsed EDF file.

    ``digital`` holds the raw integers of every signal; ``physical`` the calibrated samples
    (empty for annotation signals).
    ``record_count`` is the actual number of records, derived from the file size when the header says ``-1``.
    """

    header: EdfHeader
    record_count: int
    digital: Tuple[Int16Array, ...]
    physical: Tuple[FloatArray, ...]

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(s.label for s in self.header.signals)

    @property
    def sampling_rates(self) -> Tuple[float, ...]:
        """Samples per second of each signal; 0 when the record duration is 0"""
        duration = self.header.record_duration
        return tuple(
            s.samples_per_record / duration if duration > 0 else 0.0
            for s in self.header.signals
        )

    def channel_index(self, name: str) -> int:
        """
        Index of the signal called *name*.

        An exact label match wins; otherwise a label whose last word equals *name*
        (``"Fpz-Cz"`` selects ``"EEG Fpz-Cz"``). Matching ignores case.
        """
        wanted = name.strip().lower()
        labels = [label.strip().lower() for label in self.labels]
        if wanted in labels:
            return labels.index(wanted)
        for i, label in enumerate(labels):
            if label.split()[-1:] == [wanted]:
                return i
        raise ValidationError(f"no signal named {name!r}; available: {', '.join(self.labels)}")

    def channel(self, name: str) -> FloatArray:
        return self.physical[self.channel_index(name)]


def _text(buf: bytes, offset: int, width: int) -> str:
    return buf[offset : offset + width].decode("ascii", "replace").strip()


def _number(text: str, what: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise FormatError(f"{what} {text!r} is not a number") from None
    if not np.isfinite(value):
        raise FormatError(f"{what} {text!r} is not finite")
    return value


def _integer(text: str, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise FormatError(f"{what} {text!r} is not an integer") from None


def parse_edf_header(data: bytes) -> EdfHeader:
    """Parse the fixed and per-signal headers"""
    if len(data) < _FIXED_HEADER:
        raise TruncatedError(_FIXED_HEADER, len(data))
    fixed = {}
    offset = 0
    for name, width in _HEADER_FIELDS:
        fixed[name] = _text(data, offset, width)
        offset += width
    if fixed["version"] != "0":
        raise FormatError(f"not an EDF file (version field {fixed['version']!r})")
    ns = _integer(fixed["signal_count"], "signal count")
    if ns < 1:
        raise FormatError(f"signal count {ns} must be positive")
    header_bytes = _integer(fixed["header_bytes"], "header size")
    expected_header = _FIXED_HEADER + _SIGNAL_HEADER * ns
    if header_bytes != expected_header:
        raise FormatError(
            f"header size field says {header_bytes} bytes, {ns} signals need {expected_header}"
        )
    if len(data) < expected_header:
        raise TruncatedError(expected_header, len(data))

    columns = {}
    offset = _FIXED_HEADER
    for name, width in _SIGNAL_FIELDS:
        columns[name] = [_text(data, offset + i * width, width) for i in range(ns)]
        offset += width * ns

    signals = []
    for i in range(ns):
        label = columns["label"][i]
        spr = _integer(columns["samples_per_record"][i], f"signal {label!r} samples per record")
        if spr < 1:
            raise FormatError(f"signal {label!r}: samples per record {spr} must be positive")
        signals.append(
            EdfSignalHeader(
                label=label,
                transducer=columns["transducer"][i],
                physical_dimension=columns["physical_dimension"][i],
                physical_min=_number(columns["physical_min"][i], f"signal {label!r} physical minimum"),
                physical_max=_number(columns["physical_max"][i], f"signal {label!r} physical maximum"),
                digital_min=_integer(columns["digital_min"][i], f"signal {label!r} digital minimum"),
                digital_max=_integer(columns["digital_max"][i], f"signal {label!r} digital maximum"),
                prefiltering=columns["prefiltering"][i],
                samples_per_record=spr,
            )
        )
    return EdfHeader(
        version=fixed["version"],
        patient=fixed["patient"],
        recording=fixed["recording"],
        start_date=fixed["start_date"],
        start_time=fixed["start_time"],
        header_bytes=header_bytes,
        reserved=fixed["reserved"],
        record_count=_integer(fixed["record_count"], "record count"),
        record_duration=_number(fixed["record_duration"], "record duration"),
        signals=tuple(signals),
    )


def parse_edf(data: bytes) -> EdfRecording:
    """
    Parse an EDF or EDF+ file into calibrated sample streams.

    A record count of ``-1`` is tolerated: the count is derived from the payload size.
    Raises :class:`~sigadapt.errors.TruncatedError` when the payload is shorter than declared and
    :class:`~sigadapt.errors.DegenerateCalibrationError` for an ordinary signal whose digital range is empty.
    """
    header = parse_edf_header(data)
    payload = len(data) - header.header_bytes
    record_bytes = header.record_bytes
    count = header.record_count
    if count == -1:
        count, partial = divmod(payload, record_bytes)
        if partial:
            raise TruncatedError(
                header.header_bytes + (count + 1) * record_bytes, len(data)
            )
        log.warning(
            "EDF record count is -1, derived from file size",
            extra={"fields": {"records": count}},
        )
    elif count < 0:
        raise FormatError(f"record count {count} is negative")
    expected = header.header_bytes + count * record_bytes
    if len(data) < expected:
        raise TruncatedError(expected, len(data))
    if len(data) > expected:
        raise FormatError(
            f"{len(data) - expected} bytes follow the last of {count} declared records"
        )

    if count:
        records = np.frombuffer(
            data, dtype="<i2", count=count * header.record_samples, offset=header.header_bytes
        ).reshape(count, header.record_samples)
    else:
        records = np.zeros((0, header.record_samples), dtype="<i2")
    digital = []
    physical = []
    start = 0
    for sig in header.signals:
        stop = start + sig.samples_per_record
        stream = records[:, start:stop].reshape(-1).astype(np.int16)
        digital.append(stream)
        if sig.is_annotation:
            physical.append(np.zeros(0, dtype=np.float64))
        else:
            physical.append(sig.to_physical(stream))
        start = stop
    return EdfRecording(header, count, tuple(digital), tuple(physical))


def _parse_tal(tal: bytes) -> List[Annotation]:
    parts = tal.split(b"\x14")
    timing = parts[0].decode("latin-1")
    onset_text, _, duration_text = timing.partition("\x15")
    onset = _number(onset_text, "annotation onset")
    duration = _number(duration_text, "annotation duration") if duration_text else None
    return [
        Annotation(onset, duration, p.decode("utf-8", "replace"))
        for p in parts[1:]
        if p
    ]


def parse_edf_annotations(recording: EdfRecording) -> List[Annotation]:
    """
    Every annotation carried by the EDF+ annotation signals, in file order.

    Record time-keeping entries (empty descriptions) are skipped.
    """
    out: List[Annotation] = []
    for sig, stream in zip(recording.header.signals, recording.digital):
        if not sig.is_annotation:
            continue
        per_record = stream.astype("<i2").reshape(recording.record_count, sig.samples_per_record)
        for row in per_record:
            for tal in row.tobytes().split(b"\x00"):
                if tal:
                    out.extend(_parse_tal(tal))
    return out


def encode_annotations(
    annotations: Sequence[Annotation],
    record_count: int,
    samples_per_record: int,
    record_duration: float,
) -> Int16Array:
    """
    Digital stream of an EDF+ annotation signal holding *annotations*.

    Every record starts with its time-keeping TAL; each annotation goes in the record containing its onset.
    """
    per_record: List[List[bytes]] = [[] for _ in range(record_count)]
    for i in range(record_count):
        per_record[i].append(f"+{_format_seconds(i * record_duration)}\x14\x14\x00".encode("ascii"))
    for a in annotations:
        if record_duration > 0:
            index = min(max(int(a.onset // record_duration), 0), record_count - 1)
        else:
            index = 0
        timing = f"{'+' if a.onset >= 0 else '-'}{_format_seconds(abs(a.onset))}"
        if a.duration is not None:
            timing += f"\x15{_format_seconds(a.duration)}"
        per_record[index].append(
            timing.encode("ascii") + b"\x14" + a.description.encode("utf-8") + b"\x14\x00"
        )
    size = 2 * samples_per_record
    chunks = []
    for i, tals in enumerate(per_record):
        blob = b"".join(tals)
        if len(blob) > size:
            raise ValidationError(
                f"annotations of record {i} need {len(blob)} bytes, the signal holds {size}"
            )
        chunks.append(blob.ljust(size, b"\x00"))
    return np.frombuffer(b"".join(chunks), dtype="<i2").astype(np.int16)


def _format_seconds(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def _format_number(value: float, width: int = 8) -> str:
    if float(value).is_integer() and len(str(int(value))) <= width:
        return str(int(value))
    for precision in range(width, 0, -1):
        text = f"{value:.{precision}g}"
        if len(text) <= width:
            return text
    raise ValidationError(f"{value!r} does not fit in {width} characters")


def _pad(text: str, width: int, what: str) -> str:
    if len(text) > width:
        raise ValidationError(f"{what} {text!r} is longer than {width} characters")
    try:
        text.encode("ascii")
    except UnicodeEncodeError:
        raise ValidationError(f"{what} {text!r} is not ASCII") from None
    return text.ljust(width)


def write_edf(
    signals: Sequence[EdfSignalHeader],
    digital: Sequence[npt.ArrayLike],
    record_duration: float = 1.0,
    patient: str = "X X X X",
    recording: str = "Startdate X X X X",
    start_date: str = "01.01.85",
    start_time: str = "00.00.00",
    reserved: str = "",
    unknown_record_count: bool = False,
) -> bytes:
    """
    Serialise digital sample streams into EDF bytes.

    Every stream must hold the same whole number of records.
    With *unknown_record_count* the header declares ``-1`` records.
    """
    if not signals or len(signals) != len(digital):
        raise ValidationError("need one digital stream per signal header")
    streams = [np.asarray(d) for d in digital]
    counts = set()
    for sig, stream in zip(signals, streams):
        if stream.ndim != 1 or stream.size % sig.samples_per_record:
            raise ValidationError(
                f"signal {sig.label!r}: {stream.size} samples are not whole records of "
                f"{sig.samples_per_record}"
            )
        if stream.size and (stream.min() < -32768 or stream.max() > 32767):
            raise ValidationError(f"signal {sig.label!r}: samples exceed 16 bits")
        counts.add(stream.size // sig.samples_per_record)
    if len(counts) != 1:
        raise ValidationError(f"signals disagree on record count: {sorted(counts)}")
    count = counts.pop()
    ns = len(signals)

    head = "".join(
        [
            _pad("0", 8, "version"),
            _pad(patient, 80, "patient"),
            _pad(recording, 80, "recording"),
            _pad(start_date, 8, "start date"),
            _pad(start_time, 8, "start time"),
            _pad(str(_FIXED_HEADER + _SIGNAL_HEADER * ns), 8, "header size"),
            _pad(reserved, 44, "reserved"),
            _pad("-1" if unknown_record_count else str(count), 8, "record count"),
            _pad(_format_number(record_duration), 8, "record duration"),
            _pad(str(ns), 4, "signal count"),
        ]
    )
    per_field = {
        "label": [_pad(s.label, 16, "label") for s in signals],
        "transducer": [_pad(s.transducer, 80, "transducer") for s in signals],
        "physical_dimension": [_pad(s.physical_dimension, 8, "dimension") for s in signals],
        "physical_min": [_pad(_format_number(s.physical_min), 8, "physical minimum") for s in signals],
        "physical_max": [_pad(_format_number(s.physical_max), 8, "physical maximum") for s in signals],
        "digital_min": [_pad(str(s.digital_min), 8, "digital minimum") for s in signals],
        "digital_max": [_pad(str(s.digital_max), 8, "digital maximum") for s in signals],
        "prefiltering": [_pad(s.prefiltering, 80, "prefiltering") for s in signals],
        "samples_per_record": [_pad(str(s.samples_per_record), 8, "samples per record") for s in signals],
        "reserved": [" " * 32 for _ in signals],
    }
    head += "".join("".join(per_field[name]) for name, _ in _SIGNAL_FIELDS)

    blocks = [
        stream.astype("<i2").reshape(count, sig.samples_per_record)
        for sig, stream in zip(signals, streams)
    ]
    payload = np.concatenate(blocks, axis=1) if count else np.zeros((0, 0), dtype="<i2")
    return head.encode("ascii") + payload.astype("<i2").tobytes()

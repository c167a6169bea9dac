"""
Signal to text conversion.

Samples are amplified by ``alpha`` and rounded to integers, reduced to at most ``max_len`` values
with non-overlapping windows, and joined with a separator into one line of text.
"""
import enum
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional

import numpy as np
import numpy.typing as npt

from sigadapt.errors import (
    AdapterMismatchError,
    FormatError,
    OverflowRejectedError,
    ValidationError,
)
from sigadapt.manifest import config_digest, record_fields, require_fields
from sigadapt.plane import require_finite
from sigadapt.resample import round_half_away_from_zero
from sigadapt.signal import SignalMatrix
from sigadapt.types import FloatArray, IntArray
from sigadapt.windows import WindowPartition

log = logging.getLogger(__name__)

TEXT_PRESETS: Mapping[str, int] = {
    "gpt2": 1024,
    "bert": 512,
}

OVERFLOW_FACTOR = 3

_INT64_LIMIT = 2.0**63


class Aggregator(str, enum.Enum):
    MEAN = "mean"
    FIRST = "first"
    MAX_ABS = "max_abs"


class Downsampling(str, enum.Enum):
    WINDOW = "window"
    TRUNCATE = "truncate"


class OverflowStatus(str, enum.Enum):
    FITS = "fits"
    DOWNSAMPLED = "downsampled"
    REJECTED = "rejected"


@dataclass(frozen=True)
class TextAdapterConfig:
    """
    Amplification, token budget and rendering options of the text adapter.

    ``max_len`` counts rendered integers, not subword tokens.
    ``force`` lets instances longer than three budgets through as ``downsampled``.
    ``legacy_flatten`` accepts multi-channel instances by flattening them row-major.
    ``downsampling = truncate`` keeps the first ``max_len`` values instead of windowing.
    """

    alpha: float = 1000.0
    max_len: int = 1024
    aggregator: Aggregator = Aggregator.MEAN
    separator: str = " "
    integer_input: bool = False
    downsampling: Downsampling = Downsampling.WINDOW
    force: bool = False
    legacy_flatten: bool = False

    def __post_init__(self) -> None:
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ValidationError(f"alpha must be a positive real, not {self.alpha}")
        if self.max_len < 1:
            raise ValidationError(f"max_len must be positive, not {self.max_len}")
        if not self.separator or any(
            ch.isdigit() or ch in "+-\r\n" for ch in self.separator
        ):
            raise ValidationError(f"unusable separator {self.separator!r}")
        object.__setattr__(self, "aggregator", Aggregator(self.aggregator))
        object.__setattr__(self, "downsampling", Downsampling(self.downsampling))

    @classmethod
    def from_preset(cls, name: str, **kwargs: Any) -> "TextAdapterConfig":
        try:
            max_len = TEXT_PRESETS[name]
        except KeyError:
            raise ValidationError(
                f"unknown text preset {name!r}; known: {', '.join(sorted(TEXT_PRESETS))}"
            ) from None
        return cls(max_len=max_len, **kwargs)

    @property
    def scale(self) -> float:
        """Factor between rendered integers and the source values"""
        return 1.0 if self.integer_input else float(self.alpha)

    def canonical(self) -> str:
        lines = [
            f"text.alpha={float(self.alpha)!r}",
            f"text.max_len={self.max_len}",
            f"text.aggregator={self.aggregator.value}",
            f"text.separator={self.separator.encode('unicode_escape').decode('ascii')}",
            f"text.integer_input={str(self.integer_input).lower()}",
            f"text.downsampling={self.downsampling.value}",
            f"text.force={str(self.force).lower()}",
            f"text.legacy_flatten={str(self.legacy_flatten).lower()}",
        ]
        return "".join(f"{line}\n" for line in sorted(lines))

    @property
    def config_hash(self) -> str:
        return config_digest(self.canonical())


def amplify_and_round(
    values: npt.ArrayLike, alpha: float = 1000.0, integer_input: bool = False
) -> IntArray:
    """
    Multiply by *alpha* and round half away from zero; with *integer_input* only round.

    .. code-block:: python3

        >>> amplify_and_round([0.1234, -0.0005]).tolist()
        [123, -1]
        >>> amplify_and_round([12.0, -7.0], integer_input=True).tolist()
        [12, -7]
    """
    x = require_finite(values, "text input")
    scaled = x if integer_input else x * alpha
    rounded = round_half_away_from_zero(scaled)
    bad = np.flatnonzero(~(np.abs(rounded) < _INT64_LIMIT))
    if bad.size:
        raise ValidationError(
            f"value at index {int(bad[0])} does not fit a 64-bit integer after amplification"
        )
    out: IntArray = rounded.astype(np.int64)
    return out


def check_overflow(length: int, max_len: int, force: bool = False) -> OverflowStatus:
    """
    .. code-block:: python3

        >>> [check_overflow(t, 10).value for t in (10, 11, 30, 31)]
        ['fits', 'downsampled', 'downsampled', 'rejected']
        >>> check_overflow(31, 10, force=True).value
        'downsampled'
    """
    if length < 1 or max_len < 1:
        raise ValidationError(f"lengths must be positive, got T={length}, L={max_len}")
    if length <= max_len:
        return OverflowStatus.FITS
    if length <= OVERFLOW_FACTOR * max_len or force:
        return OverflowStatus.DOWNSAMPLED
    return OverflowStatus.REJECTED


def _aggregate(values: IntArray, windows: WindowPartition, aggregator: Aggregator) -> IntArray:
    starts = np.fromiter(windows.starts, dtype=np.intp)
    if aggregator is Aggregator.FIRST:
        first: IntArray = values[starts]
        return first
    if aggregator is Aggregator.MEAN:
        return _window_means(values, windows, starts)
    picked = [int(values[w.start + int(np.argmax(np.abs(values[w.start : w.stop])))]) for w in windows]
    return np.array(picked, dtype=np.int64)


def _window_means(values: IntArray, windows: WindowPartition, starts: npt.NDArray[np.intp]) -> IntArray:
    # exact integer sums and half-away-from-zero division; means always fit in int64
    peak = max(-int(values.min()), int(values.max()))
    if peak * windows.size < 2**63:
        sums = np.add.reduceat(values, starts)
        sizes = np.fromiter((len(w) for w in windows), dtype=np.int64)
        q, r = np.divmod(np.abs(sums), sizes)
        means: IntArray = np.sign(sums) * (q + (2 * r >= sizes))
        return means
    out = []
    for w in windows:
        total = sum(int(v) for v in values[w.start : w.stop])
        q, r = divmod(abs(total), len(w))
        out.append((q + (2 * r >= len(w))) * (1 if total >= 0 else -1))
    return np.array(out, dtype=np.int64)


def window_downsample(
    values: npt.ArrayLike, max_len: int, aggregator: Aggregator = Aggregator.MEAN
) -> IntArray:
    """
    Reduce an integer sequence to at most *max_len* values with windows of ``ceil(T / max_len)``.

    The final window may be shorter. Window means are rounded back to integers;
    ``max_abs`` keeps the first value of largest magnitude.

    .. code-block:: python3

        >>> window_downsample([1, 2, 3, 4, 5], 2).tolist()
        [2, 5]
        >>> window_downsample([1, 2, 3, 4, 5], 2, Aggregator.FIRST).tolist()
        [1, 4]
        >>> window_downsample([1, -9, 3, 4, 5], 2, Aggregator.MAX_ABS).tolist()
        [-9, 5]
        >>> len(window_downsample(np.arange(3000), 1024))
        1000
    """
    arr = np.asarray(values, dtype=np.int64)
    if arr.ndim != 1 or arr.size < 1:
        raise ValidationError(f"expected a non-empty 1-D sequence, got shape {arr.shape}")
    windows = WindowPartition.for_budget(int(arr.size), max_len)
    if windows.size == 1:
        return arr.copy()
    return _aggregate(arr, windows, Aggregator(aggregator))


def render_tokens(values: npt.ArrayLike, separator: str = " ") -> str:
    return separator.join(str(int(v)) for v in np.asarray(values).ravel())


def parse_token_text(text: str, separator: str = " ", source: Optional[str] = None) -> IntArray:
    """
    Integers of a rendered text line.

    .. code-block:: python3

        >>> parse_token_text("12 -3 0").tolist()
        [12, -3, 0]
    """
    fields = text.strip("\r\n").split(separator)
    try:
        return np.array([int(f) for f in fields], dtype=np.int64)
    except ValueError as exc:
        raise FormatError(f"not an integer sequence: {exc}", source=source) from None


@dataclass(frozen=True)
class TokenText:
    """One instance rendered as a line of delimiter-separated integers"""

    text: str
    token_count: int
    window_size: int
    overflow_status: OverflowStatus
    instance_id: str
    config_hash: str
    separator: str = " "
    scale: float = 1.0
    label: Optional[int] = None

    def tokens(self) -> IntArray:
        return parse_token_text(self.text, self.separator)

    def features(self) -> FloatArray:
        """Integers divided by the amplification factor"""
        out: FloatArray = self.tokens().astype(np.float64) / self.scale
        return out

    def to_record(self, line: int) -> Dict[str, Any]:
        return {
            "id": self.instance_id,
            "label": self.label,
            "line": line,
            "token_count": self.token_count,
            "window_size": self.window_size,
            "overflow_status": self.overflow_status.value,
            "config_hash": self.config_hash,
        }


def text_from_record(
    record: Mapping[str, Any], text: str, separator: str, scale: float, where: str
) -> TokenText:
    """Rebuild a :class:`TokenText` from a sidecar record and its text line"""
    require_fields(
        record, ("id", "token_count", "window_size", "overflow_status", "config_hash"), where
    )
    label = record.get("label")
    with record_fields(where):
        out = TokenText(
            text=text,
            token_count=int(record["token_count"]),
            window_size=int(record["window_size"]),
            overflow_status=OverflowStatus(record["overflow_status"]),
            instance_id=str(record["id"]),
            config_hash=str(record["config_hash"]),
            separator=separator,
            scale=scale,
            label=None if label is None else int(label),
        )
    return out


def convert_to_text(m: SignalMatrix, config: TextAdapterConfig) -> TokenText:
    """
    Render a single-channel instance as text.

    Multi-channel instances are rejected unless ``legacy_flatten`` is set.

    .. code-block:: python3

        >>> t = convert_to_text(SignalMatrix("x", np.zeros((1, 3000)), 0), TextAdapterConfig())
        >>> t.token_count, t.window_size, t.overflow_status.value
        (1000, 3, 'downsampled')
    """
    if m.channels > 1 and not config.legacy_flatten:
        raise AdapterMismatchError(
            f"instance {m.id!r} has {m.channels} channels; text conversion handles one channel, "
            "use the image adapter for multi-channel data"
        )
    values = m.samples.ravel()
    length = int(values.size)
    status = check_overflow(length, config.max_len, config.force)
    if status is OverflowStatus.REJECTED:
        raise OverflowRejectedError(
            f"instance {m.id!r}: {length} samples exceed {OVERFLOW_FACTOR} x {config.max_len}; "
            "window downsampling would lose too much, use the image adapter instead"
        )
    if status is OverflowStatus.DOWNSAMPLED:
        log.warning(
            "downsampling text",
            extra={"fields": {"id": m.id, "samples": length, "max_len": config.max_len}},
        )
    ints = amplify_and_round(values, config.alpha, config.integer_input)
    if config.downsampling is Downsampling.TRUNCATE:
        tokens = ints[: config.max_len]
        window = 1
    else:
        tokens = window_downsample(ints, config.max_len, config.aggregator)
        window = WindowPartition.for_budget(length, config.max_len).size
    return TokenText(
        text=render_tokens(tokens, config.separator),
        token_count=int(tokens.size),
        window_size=window,
        overflow_status=status,
        instance_id=m.id,
        config_hash=config.config_hash,
        separator=config.separator,
        scale=config.scale,
        label=m.label,
    )

"""
Signal to image conversion.

An instance is turned into a three-plane stack, the planes are optionally reshaped,
resized bilinearly to the model geometry and quantized to 8-bit pixels:

* ``C`` divisible by 3 (scheme A): the channel axis is split into 3 planes of ``C / 3`` rows,
  channel ``i`` landing in plane ``i // (C / 3)``, row ``i % (C / 3)``.
* ``C >= 2`` otherwise (scheme B): every time column is resampled along the channel axis to
  ``3 * ceil(C / 3)`` channels, then split as in scheme A.
* ``C == 1``: the single row is replicated into three identical ``1 x T`` planes.
"""
import enum
import io
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np
import numpy.typing as npt
import png

from sigadapt.errors import AdapterMismatchError, FormatError, ValidationError
from sigadapt.manifest import config_digest, record_fields, require_fields
from sigadapt.plane import Plane, require_finite
from sigadapt.resample import resample_axis, resize_planes, round_half_away_from_zero
from sigadapt.signal import SignalMatrix
from sigadapt.types import FloatArray, PixelArray

log = logging.getLogger(__name__)

IMAGE_PRESETS: Mapping[str, Tuple[int, int]] = {
    "vit": (224, 224),
    "deit": (224, 224),
    "swin": (224, 224),
    "swinv2": (256, 256),
}

MID_GREY = 127


class Scheme(str, enum.Enum):
    A = "A"
    B = "B"
    SINGLE_CHANNEL = "single_channel"


class ReshapePolicy(str, enum.Enum):
    KEEP = "keep"
    NEAR_SQUARE = "near_square"
    AUTO = "auto"


class Normalization(str, enum.Enum):
    PER_INSTANCE = "per_instance"
    GLOBAL = "global"


@dataclass(frozen=True)
class ImageAdapterConfig:
    """
    Target geometry, reshape policy and value normalization of the image adapter.

    ``global_min`` and ``global_max`` are only used, and then required, with global normalization.

    .. code-block:: python3

        >>> ImageAdapterConfig().config_hash == ImageAdapterConfig(224, 224).config_hash
        True
        >>> ImageAdapterConfig.from_preset("swinv2").height
        256
    """

    height: int = 224
    width: int = 224
    reshape: ReshapePolicy = ReshapePolicy.AUTO
    normalization: Normalization = Normalization.PER_INSTANCE
    global_min: Optional[float] = None
    global_max: Optional[float] = None

    def __post_init__(self) -> None:
        if self.height < 2 or self.width < 2:
            raise ValidationError(
                f"image geometry must be at least 2x2, not {self.height}x{self.width}"
            )
        object.__setattr__(self, "reshape", ReshapePolicy(self.reshape))
        object.__setattr__(self, "normalization", Normalization(self.normalization))
        if self.normalization is Normalization.GLOBAL:
            if self.global_min is None or self.global_max is None:
                raise ValidationError("global normalization needs both bounds")
            if not math.isfinite(self.global_min) or not math.isfinite(self.global_max):
                raise ValidationError("global normalization bounds must be finite")
            if not self.global_min < self.global_max:
                raise ValidationError(
                    f"global normalization needs min < max, got {self.global_min} >= {self.global_max}"
                )

    @classmethod
    def from_preset(cls, name: str, **kwargs: Any) -> "ImageAdapterConfig":
        try:
            height, width = IMAGE_PRESETS[name]
        except KeyError:
            raise ValidationError(
                f"unknown image preset {name!r}; known: {', '.join(sorted(IMAGE_PRESETS))}"
            ) from None
        return cls(height, width, **kwargs)

    def canonical(self) -> str:
        lines = [
            f"image.height={self.height}",
            f"image.width={self.width}",
            f"image.reshape={self.reshape.value}",
            f"image.normalization={self.normalization.value}",
        ]
        if self.normalization is Normalization.GLOBAL:
            lines.append(f"image.global_min={float(self.global_min or 0.0)!r}")
            lines.append(f"image.global_max={float(self.global_max or 0.0)!r}")
        return "".join(f"{line}\n" for line in sorted(lines))

    @property
    def config_hash(self) -> str:
        return config_digest(self.canonical())


class RgbStack:
    r"""
    Three real planes of identical shape and the scheme that produced them.

    .. code-block:: python3

        >>> s = build_rgb_stack(SignalMatrix("x", np.arange(18.0).reshape(6, 3), 0))
        >>> s
        RgbStack(scheme=A, 2x3)
        >>> s.planes[1]
        Plane([[6.0, 7.0, 8.0], [9.0, 10.0, 11.0]])
    """

    __slots__ = ("_values", "_scheme")

    def __init__(self, values: npt.ArrayLike, scheme: Scheme) -> None:
        arr = np.array(require_finite(values, "stack"), copy=True)
        if arr.ndim != 3 or arr.shape[0] != 3:
            raise ValidationError(f"a stack holds exactly 3 planes, got shape {arr.shape}")
        if arr.shape[1] < 1 or arr.shape[2] < 1:
            raise ValidationError(f"stack planes are empty: {arr.shape}")
        arr.setflags(write=False)
        self._values: FloatArray = arr
        self._scheme = Scheme(scheme)

    @property
    def values(self) -> FloatArray:
        """Read-only ``3 x A x B`` array"""
        return self._values

    @property
    def scheme(self) -> Scheme:
        return self._scheme

    @property
    def plane_shape(self) -> Tuple[int, int]:
        return (int(self._values.shape[1]), int(self._values.shape[2]))

    @property
    def planes(self) -> Tuple[Plane, Plane, Plane]:
        return (Plane(self._values[0]), Plane(self._values[1]), Plane(self._values[2]))

    def __eq__(self, other: object) -> bool:
        if isinstance(other, type(self)):
            return self._scheme is other._scheme and bool(
                np.array_equal(self._values, other._values)
            )
        return NotImplemented

    __hash__: None  # type: ignore

    def __repr__(self) -> str:
        rows, cols = self.plane_shape
        return f"{type(self).__qualname__}(scheme={self._scheme.value}, {rows}x{cols})"


def select_scheme(channels: int) -> Scheme:
    """
    .. code-block:: python3

        >>> [select_scheme(c).value for c in (1, 2, 3, 7, 9)]
        ['single_channel', 'B', 'A', 'B', 'A']
    """
    if channels < 1:
        raise ValidationError(f"channel count must be positive, not {channels}")
    if channels == 1:
        return Scheme.SINGLE_CHANNEL
    return Scheme.A if channels % 3 == 0 else Scheme.B


def build_rgb_stack(m: SignalMatrix) -> RgbStack:
    """
    Decompose a multi-channel instance into three planes (scheme A or B).

    Single-channel instances are rejected; use :func:`single_channel_stack`.
    """
    c, t = m.shape
    if c < 2:
        raise AdapterMismatchError(
            f"instance {m.id!r} has a single channel; use single_channel_stack"
        )
    if c % 3 == 0:
        return RgbStack(m.samples.reshape(3, c // 3, t), Scheme.A)
    target = 3 * math.ceil(c / 3)
    resampled = resample_axis(m.samples, target, axis=0)
    return RgbStack(resampled.reshape(3, target // 3, t), Scheme.B)


def single_channel_stack(m: SignalMatrix) -> RgbStack:
    """
    Replicate a ``1 x T`` instance into three identical ``1 x T`` planes.

    .. code-block:: python3

        >>> single_channel_stack(SignalMatrix("x", [[5.0]], 0)).values.tolist()
        [[[5.0]], [[5.0]], [[5.0]]]
    """
    if m.channels != 1:
        raise AdapterMismatchError(
            f"instance {m.id!r} has {m.channels} channels; use build_rgb_stack"
        )
    return RgbStack(np.repeat(m.samples[np.newaxis, :, :], 3, axis=0), Scheme.SINGLE_CHANNEL)


def decompose(m: SignalMatrix) -> RgbStack:
    """Stack *m* with whichever scheme its channel count selects"""
    if select_scheme(m.channels) is Scheme.SINGLE_CHANNEL:
        return single_channel_stack(m)
    return build_rgb_stack(m)


def near_square_shape(size: int) -> Tuple[int, int]:
    """
    ``(a, size // a)`` with ``a`` the largest divisor of *size* not above its square root.

    .. code-block:: python3

        >>> near_square_shape(3000)
        (50, 60)
        >>> near_square_shape(7)
        (1, 7)
        >>> near_square_shape(384)
        (16, 24)
    """
    if size < 1:
        raise ValidationError(f"size must be positive, not {size}")
    for a in range(math.isqrt(size), 0, -1):
        if size % a == 0:
            return (a, size // a)
    raise AssertionError("unreachable")  # pragma: no cover


def reshape_planes(stack: RgbStack, policy: ReshapePolicy) -> RgbStack:
    """
    Apply the reshape policy; ``near_square`` refills each plane row-major into a near-square shape.

    ``auto`` means ``near_square`` for single-row planes and ``keep`` otherwise.
    """
    policy = ReshapePolicy(policy)
    rows, cols = stack.plane_shape
    if policy is ReshapePolicy.AUTO:
        policy = ReshapePolicy.NEAR_SQUARE if rows == 1 else ReshapePolicy.KEEP
    if policy is ReshapePolicy.KEEP:
        return stack
    a, b = near_square_shape(rows * cols)
    if (a, b) == (rows, cols):
        return stack
    return RgbStack(stack.values.reshape(3, a, b), stack.scheme)


@dataclass(frozen=True)
class NormRecord:
    """Value range mapped onto pixels 0..255"""

    v_min: float
    v_max: float

    def __post_init__(self) -> None:
        if not self.v_min <= self.v_max:
            raise ValidationError(f"norm record needs v_min <= v_max, got {self.v_min} > {self.v_max}")


@dataclass(frozen=True, eq=False)
class PixelImage:
    """
    A quantized ``3 x H x W`` image with everything needed to trace and invert it.
    """

    pixels: PixelArray
    norm_record: NormRecord
    instance_id: str
    scheme: Scheme
    pre_resize_shape: Tuple[int, int]
    config_hash: str
    label: Optional[int] = None

    def __post_init__(self) -> None:
        arr = np.array(self.pixels, dtype=np.uint8, copy=True)
        if arr.ndim != 3 or arr.shape[0] != 3:
            raise ValidationError(f"pixel image must be 3 x H x W, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[2])

    def features(self) -> FloatArray:
        """Pixels scaled to ``[0, 1]``, flattened plane by plane"""
        out: FloatArray = self.pixels.astype(np.float64).ravel() / 255.0
        return out

    def to_record(self, file: str) -> Dict[str, Any]:
        return {
            "id": self.instance_id,
            "label": self.label,
            "file": file,
            "scheme": self.scheme.value,
            "pre_resize_shape": list(self.pre_resize_shape),
            "norm_record": [self.norm_record.v_min, self.norm_record.v_max],
            "config_hash": self.config_hash,
            "shape": [3, self.height, self.width],
        }

    def __eq__(self, other: object) -> bool:
        if isinstance(other, type(self)):
            return (
                self.instance_id == other.instance_id
                and self.scheme is other.scheme
                and self.norm_record == other.norm_record
                and self.pre_resize_shape == other.pre_resize_shape
                and self.config_hash == other.config_hash
                and self.label == other.label
                and bool(np.array_equal(self.pixels, other.pixels))
            )
        return NotImplemented


def quantize_values(values: npt.ArrayLike, v_min: float, v_max: float) -> PixelArray:
    """
    Map ``[v_min, v_max]`` onto ``0..255``, rounding half away from zero and clamping outside values.

    A degenerate range maps everything to mid grey.

    .. code-block:: python3

        >>> quantize_values([0.0, 0.5, 1.0], 0.0, 1.0).tolist()
        [0, 128, 255]
        >>> quantize_values([4.2, 4.2], 4.2, 4.2).tolist()
        [127, 127]
    """
    x = require_finite(values, "quantizer input")
    if v_max == v_min:
        return np.full(x.shape, MID_GREY, dtype=np.uint8)
    lo, hi = float(v_min), float(v_max)
    # out-of-range values may overflow here; they clamp to 0 or 255 below
    with np.errstate(over="ignore", invalid="ignore"):
        if math.isfinite(255.0 * (hi - lo)):
            ratio = 255.0 * (x - lo) / (hi - lo)
        else:
            ratio = (x / 2.0 - lo / 2.0) / (hi / 2.0 - lo / 2.0) * 255.0
        scaled = round_half_away_from_zero(ratio)
    out: PixelArray = np.clip(scaled, 0, 255).astype(np.uint8)
    return out


def quantize(
    stack: RgbStack,
    config: ImageAdapterConfig,
    instance_id: str = "",
    label: Optional[int] = None,
    pre_resize_shape: Optional[Tuple[int, int]] = None,
) -> PixelImage:
    """
    Quantize all three planes jointly to 8-bit pixels.

    Per-instance normalization uses the joint minimum and maximum of the planes;
    global normalization uses the configured bounds and clamps.
    """
    if config.normalization is Normalization.GLOBAL:
        assert config.global_min is not None and config.global_max is not None
        norm = NormRecord(float(config.global_min), float(config.global_max))
    else:
        norm = NormRecord(float(stack.values.min()), float(stack.values.max()))
    return PixelImage(
        pixels=quantize_values(stack.values, norm.v_min, norm.v_max),
        norm_record=norm,
        instance_id=instance_id,
        scheme=stack.scheme,
        pre_resize_shape=pre_resize_shape or stack.plane_shape,
        config_hash=config.config_hash,
        label=label,
    )


def dequantize(image: PixelImage) -> FloatArray:
    """
    Real planes recovered from *image*, within half a quantization step of the quantized values.
    """
    lo, hi = image.norm_record.v_min, image.norm_record.v_max
    if hi == lo:
        return np.full(image.pixels.shape, lo, dtype=np.float64)
    p = image.pixels.astype(np.float64)
    if math.isfinite(hi - lo):
        out: FloatArray = lo + p * (hi - lo) / 255.0
    else:
        half = lo / 2.0 + p * ((hi / 2.0 - lo / 2.0) / 255.0)
        out = 2.0 * np.clip(half, lo / 2.0, hi / 2.0)
    return out


def convert_to_image(m: SignalMatrix, config: ImageAdapterConfig) -> PixelImage:
    """
    Decompose, reshape, resize to ``config.height x config.width`` and quantize one instance.

    .. code-block:: python3

        >>> img = convert_to_image(SignalMatrix("x", np.zeros((9, 128)), 2), ImageAdapterConfig())
        >>> img.pixels.shape, img.scheme.value, img.pre_resize_shape
        ((3, 224, 224), 'A', (3, 128))
    """
    stack = reshape_planes(decompose(m), config.reshape)
    resized = RgbStack(resize_planes(stack.values, config.height, config.width), stack.scheme)
    return quantize(resized, config, m.id, m.label, stack.plane_shape)


def encode_png(image: PixelImage) -> bytes:
    """8-bit RGB PNG without alpha; identical pixels always give identical bytes"""
    rows = image.pixels.transpose(1, 2, 0).reshape(image.height, image.width * 3)
    writer = png.Writer(
        width=image.width, height=image.height, greyscale=False, alpha=False, bitdepth=8
    )
    buf = io.BytesIO()
    writer.write(buf, rows.tolist())
    return buf.getvalue()


def decode_png(data: bytes, source: Optional[str] = None) -> PixelArray:
    """Pixels of an 8-bit RGB (or convertible) PNG as a ``3 x H x W`` array"""
    try:
        width, height, rows, _ = png.Reader(bytes=data).asRGB8()
        flat = np.vstack([np.asarray(r, dtype=np.uint8) for r in rows])
    except (png.Error, ValueError) as exc:
        raise FormatError(f"not a readable PNG: {exc}", source=source) from None
    out: PixelArray = flat.reshape(height, width, 3).transpose(2, 0, 1).copy()
    return out


def image_from_record(record: Mapping[str, Any], pixels: PixelArray, where: str) -> PixelImage:
    """Rebuild a :class:`PixelImage` from a sidecar record and its decoded pixels"""
    require_fields(
        record, ("id", "scheme", "pre_resize_shape", "norm_record", "config_hash"), where
    )
    label = record.get("label")
    with record_fields(where):
        rows, cols = record["pre_resize_shape"]
        v_min, v_max = record["norm_record"]
        image = PixelImage(
            pixels=pixels,
            norm_record=NormRecord(float(v_min), float(v_max)),
            instance_id=str(record["id"]),
            scheme=Scheme(record["scheme"]),
            pre_resize_shape=(int(rows), int(cols)),
            config_hash=str(record["config_hash"]),
            label=None if label is None else int(label),
        )
    return image

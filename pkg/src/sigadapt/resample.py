"""
Endpoint-aligned linear resampling kernels shared by both adapters.

Output sample ``j`` of an axis resampled from ``n`` to ``m`` points reads the source at coordinate
``j * (n - 1) / (m - 1)``, so the first and last samples are reproduced exactly.
A single output sample reads the source midpoint ``(n - 1) / 2``; a source axis of length one is replicated.
Downsampling uses the same formula with no low-pass prefilter.
All arithmetic is done in float64 whatever the input precision.
"""
from typing import Tuple

import numpy as np
import numpy.typing as npt

from sigadapt.errors import ValidationError
from sigadapt.plane import Plane, require_finite
from sigadapt.types import FloatArray

_IndexArray = npt.NDArray[np.intp]


def round_half_away_from_zero(values: npt.ArrayLike) -> FloatArray:
    """
    Round to the nearest integer, ties away from zero.

    .. code-block:: python3

        >>> round_half_away_from_zero([0.5, -0.5, 2.5, 123.4, -1.49]).tolist()
        [1.0, -1.0, 3.0, 123.0, -1.0]
    """
    x = np.asarray(values, dtype=np.float64)
    whole = np.trunc(x)
    # x - trunc(x) is exact in binary floating point
    frac = x - whole
    return whole + np.where(np.abs(frac) >= 0.5, np.sign(x), 0.0)


def _sample_plan(n: int, m: int) -> Tuple[_IndexArray, _IndexArray, FloatArray]:
    if n == 1:
        zeros = np.zeros(m, dtype=np.intp)
        return zeros, zeros, np.zeros(m, dtype=np.float64)
    if m == 1:
        coords = np.array([(n - 1) / 2.0])
    else:
        coords = np.arange(m, dtype=np.float64) * (n - 1) / (m - 1)
    lo = np.minimum(np.floor(coords).astype(np.intp), n - 2)
    return lo, lo + 1, coords - lo


def resample_axis(values: npt.ArrayLike, target: int, axis: int = -1) -> FloatArray:
    """
    Linearly resample *values* to ``target`` points along one axis.

    Every other axis is left untouched, so each 1-D slice along ``axis`` is resampled independently.

    .. code-block:: python3

        >>> resample_axis([[0.0, 2.0], [10.0, 20.0]], 3).tolist()
        [[0.0, 1.0, 2.0], [10.0, 15.0, 20.0]]
        >>> resample_axis([[0.0, 2.0], [10.0, 20.0]], 3, axis=0).tolist()
        [[0.0, 2.0], [5.0, 11.0], [10.0, 20.0]]
    """
    arr = require_finite(values)
    if arr.ndim == 0:
        raise ValidationError("cannot resample a scalar")
    if target < 1:
        raise ValidationError(f"target size must be positive, not {target}")
    n = arr.shape[axis]
    if n < 1:
        raise ValidationError("cannot resample an empty axis")
    if n == target:
        return arr.copy()
    lo, hi, frac = _sample_plan(n, target)
    shape = [1] * arr.ndim
    shape[axis] = target
    t = frac.reshape(shape)
    a = np.take(arr, lo, axis=axis)
    b = np.take(arr, hi, axis=axis)
    # equal neighbours and the last sample come through unchanged;
    # neighbours whose difference overflows are blended term by term instead
    with np.errstate(over="ignore", invalid="ignore"):
        diff = b - a
        blend = np.where(np.isfinite(diff), a + diff * t, a * (1.0 - t) + b * t)
    out: FloatArray = np.where(t >= 1.0, b, blend)
    return out


def linear_resample_1d(values: npt.ArrayLike, target: int) -> FloatArray:
    """
    Resample a sequence of at least two points to ``target`` points.

    .. code-block:: python3

        >>> linear_resample_1d([0.0, 2.0], 3).tolist()
        [0.0, 1.0, 2.0]
        >>> linear_resample_1d([0.0, 1.0, 4.0], 5).tolist()
        [0.0, 0.5, 1.0, 2.5, 4.0]
        >>> linear_resample_1d([0.0, 1.0, 4.0], 1).tolist()
        [1.0]

    Single-point inputs are rejected; replicate them instead.
    """
    arr = require_finite(values)
    if arr.ndim != 1:
        raise ValidationError(f"expected a 1-D sequence, got shape {arr.shape}")
    if arr.size < 2:
        raise ValidationError(
            f"need at least 2 points to interpolate, got {arr.size}; replicate instead"
        )
    return resample_axis(arr, target)


def resize_planes(values: npt.ArrayLike, rows: int, cols: int) -> FloatArray:
    """
    Bilinear resize over the last two axes of *values*.

    Rows are resampled to ``cols`` columns first, then columns to ``rows`` rows.
    Leading axes (e.g. the three colour planes) are carried along.
    """
    arr = require_finite(values)
    if arr.ndim < 2:
        raise ValidationError(f"expected at least 2 dimensions, got shape {arr.shape}")
    return resample_axis(resample_axis(arr, cols, axis=-1), rows, axis=-2)


def bilinear_resize_2d(plane: Plane, target_rows: int, target_cols: int) -> Plane:
    """
    Resize a :class:`~sigadapt.plane.Plane` with endpoint-aligned bilinear interpolation.

    Works for upsampling and downsampling alike; resizing to the source shape returns an identical plane.

    .. code-block:: python3

        >>> bilinear_resize_2d(Plane([[0, 1], [2, 3]]), 3, 3)
        Plane([[0.0, 0.5, 1.0], [1.0, 1.5, 2.0], [2.0, 2.5, 3.0]])
        >>> bilinear_resize_2d(Plane([[1, 2, 3, 4]]), 2, 4)
        Plane([[1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0]])
    """
    if not isinstance(plane, Plane):
        raise TypeError(f"expected a Plane, not {type(plane).__qualname__}")
    if target_rows < 1 or target_cols < 1:
        raise ValidationError(
            f"target shape must be positive, not {target_rows}x{target_cols}"
        )
    return Plane(resize_planes(plane.values, target_rows, target_cols))

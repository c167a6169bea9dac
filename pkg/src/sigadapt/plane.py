from typing import Iterable, List, Tuple

import numpy as np
import numpy.typing as npt

from sigadapt.errors import NonFiniteError, ValidationError
from sigadapt.types import FloatArray


def require_finite(values: npt.ArrayLike, what: str = "input") -> FloatArray:
    """
    Return *values* as a float64 array, rejecting NaN and infinities.

    The raised :class:`~sigadapt.errors.NonFiniteError` names the flat (row-major) index of the first offender.

    .. code-block:: python3

        >>> require_finite([1, 2]).tolist()
        [1.0, 2.0]
        >>> require_finite([0.0, float("nan")])
        Traceback (most recent call last):
        ...
        sigadapt.errors.NonFiniteError: input contains a non-finite value at index 1
    """
    try:
        arr = np.asarray(values, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{what} is not a real array: {exc}") from None
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise NonFiniteError(int(bad[0]), what)
    return arr


class Plane:
    r"""
    Immutable real matrix; the object the image adapter resizes.

    Planes are built from anything :py:func:`numpy.asarray` accepts as a two-dimensional array.
    Values are stored as 64-bit reals in row-major order and must be finite.

    .. code-block:: python3

        >>> p = Plane([[0.0, 1.0], [2.0, 3.0]])
        >>> p.rows, p.cols
        (2, 2)
        >>> p[1, 0]
        2.0
        >>> Plane.from_flat(1, 3, [1, 2, 3])
        Plane([[1.0, 2.0, 3.0]])

    Planes compare equal when shapes and values are identical.

    .. code-block:: python3

        >>> Plane([[1, 2]]) == Plane([[1.0, 2.0]])
        True
        >>> Plane([[1, 2]]) == Plane([[1], [2]])
        False

    Args:
        values: two-dimensional array-like of finite reals
    """

    __slots__ = ("_values",)

    def __init__(self, values: npt.ArrayLike) -> None:
        arr = np.array(require_finite(values, "plane"), dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise ValidationError(
                f"plane must be two-dimensional, not {arr.ndim}-dimensional"
            )
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"plane of shape {arr.shape} is empty")
        arr.setflags(write=False)
        self._values = arr

    @classmethod
    def from_flat(cls, rows: int, cols: int, values: Iterable[float]) -> "Plane":
        """Construct from a row-major flat sequence of ``rows * cols`` values"""
        flat = np.fromiter(values, dtype=np.float64)
        if flat.size != rows * cols:
            raise ValidationError(
                f"{flat.size} values do not fill a {rows}x{cols} plane"
            )
        return cls(flat.reshape(rows, cols))

    @property
    def rows(self) -> int:
        return int(self._values.shape[0])

    @property
    def cols(self) -> int:
        return int(self._values.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def values(self) -> FloatArray:
        """Read-only view of the underlying ``rows x cols`` array"""
        return self._values

    def to_list(self) -> List[List[float]]:
        return [[float(v) for v in row] for row in self._values]

    def __getitem__(self, item: Tuple[int, int]) -> float:
        if not isinstance(item, tuple) or len(item) != 2:
            raise TypeError("planes are indexed with a (row, col) pair")
        return float(self._values[item])

    def __eq__(self, other: object) -> bool:
        if isinstance(other, type(self)):
            return self.shape == other.shape and bool(
                np.array_equal(self._values, other._values)
            )
        return NotImplemented

    __hash__: None  # type: ignore

    def __repr__(self) -> str:
        return f"{type(self).__qualname__}({self.to_list()!r})"

import numpy as np
import pytest

from sigadapt.errors import NonFiniteError, ValidationError
from sigadapt.plane import Plane, require_finite


def test_construct() -> None:
    p = Plane([[1, 2, 3], [4, 5, 6]])
    assert p.rows == 2
    assert p.cols == 3
    assert p.shape == (2, 3)
    assert p[0, 2] == 3.0
    assert p[1, 0] == 4.0
    assert p.values.dtype == np.float64
    assert p.to_list() == [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]
    with pytest.raises(IndexError):
        p[2, 0]
    with pytest.raises(TypeError):
        p[0]  # type: ignore


def test_from_flat() -> None:
    assert Plane.from_flat(2, 2, [1, 2, 3, 4]) == Plane([[1, 2], [3, 4]])
    with pytest.raises(ValidationError):
        Plane.from_flat(2, 2, [1, 2, 3])


def test_bad_shapes() -> None:
    with pytest.raises(ValidationError):
        Plane([1, 2, 3])
    with pytest.raises(ValidationError):
        Plane([[]])
    with pytest.raises(ValidationError):
        Plane(np.zeros((2, 2, 2)))
    with pytest.raises(ValidationError):
        Plane([["a", "b"]])


def test_non_finite() -> None:
    with pytest.raises(NonFiniteError) as e:
        Plane([[0.0, 1.0], [np.inf, 2.0]])
    assert e.value.index == 2
    with pytest.raises(NonFiniteError) as e:
        require_finite([1.0, 2.0, np.nan])
    assert e.value.index == 2
    assert isinstance(e.value, ValueError)


def test_immutable() -> None:
    src = np.array([[1.0, 2.0]])
    p = Plane(src)
    src[0, 0] = 10.0
    assert p[0, 0] == 1.0
    with pytest.raises(ValueError):
        p.values[0, 0] = 5.0


def test_equality() -> None:
    assert Plane([[1, 2]]) == Plane([[1.0, 2.0]])
    assert Plane([[1, 2]]) != Plane([[1], [2]])
    assert Plane([[1, 2]]) != Plane([[1, 3]])
    assert Plane([[1, 2]]) != [[1, 2]]
    with pytest.raises(TypeError):
        hash(Plane([[1]]))


def test_repr() -> None:
    assert repr(Plane([[1, 2]])) == "Plane([[1.0, 2.0]])"

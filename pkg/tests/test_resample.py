import numpy as np
import pytest

from sigadapt.errors import NonFiniteError, ValidationError
from sigadapt.plane import Plane
from sigadapt.resample import (
    bilinear_resize_2d,
    linear_resample_1d,
    resample_axis,
    resize_planes,
    round_half_away_from_zero,
)


def test_round_half_away_from_zero() -> None:
    got = round_half_away_from_zero([0.5, 1.5, 2.5, -0.5, -1.5, -2.5, 0.49, -0.49, 0.0])
    assert got.tolist() == [1.0, 2.0, 3.0, -1.0, -2.0, -3.0, 0.0, -0.0, 0.0]


def test_linear_resample() -> None:
    assert linear_resample_1d([0.0, 2.0], 3).tolist() == [0.0, 1.0, 2.0]
    assert linear_resample_1d([0.0, 1.0, 4.0], 1).tolist() == [1.0]
    assert linear_resample_1d([3.0, 5.0, 7.0], 3).tolist() == [3.0, 5.0, 7.0]
    with pytest.raises(ValidationError):
        linear_resample_1d([1.0], 4)
    with pytest.raises(ValidationError):
        linear_resample_1d([[1.0, 2.0]], 4)
    with pytest.raises(ValidationError):
        linear_resample_1d([1.0, 2.0], 0)
    with pytest.raises(NonFiniteError):
        linear_resample_1d([1.0, np.nan], 4)


def test_endpoints_preserved() -> None:
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(2, 300))
        m = int(rng.integers(2, 300))
        x = rng.standard_normal(n)
        y = linear_resample_1d(x, m)
        assert y.shape == (m,)
        assert y[0] == x[0]
        assert y[-1] == x[-1]
        assert y.min() >= x.min() - 1e-12
        assert y.max() <= x.max() + 1e-12


def test_linear_function_is_reproduced() -> None:
    rng = np.random.default_rng(4)
    for _ in range(50):
        n = int(rng.integers(2, 100))
        m = int(rng.integers(2, 100))
        a, b = rng.standard_normal(2)
        x = a * np.arange(n) + b
        y = linear_resample_1d(x, m)
        coords = np.arange(m) * (n - 1) / (m - 1)
        assert np.allclose(y, a * coords + b)


def test_resample_axis() -> None:
    x = np.arange(12, dtype=np.float64).reshape(3, 4)
    y = resample_axis(x, 7, axis=1)
    assert y.shape == (3, 7)
    assert np.array_equal(y[:, 0], x[:, 0])
    assert np.allclose(y[:, -1], x[:, -1])
    z = resample_axis(x, 3, axis=1)
    assert z.shape == (3, 3)
    assert np.array_equal(resample_axis(x, 4, axis=1), x)
    replicated = resample_axis([[5.0]], 4, axis=1)
    assert replicated.tolist() == [[5.0, 5.0, 5.0, 5.0]]
    with pytest.raises(ValidationError):
        resample_axis(3.0, 2)


def test_bilinear_resize() -> None:
    p = Plane([[0, 1], [2, 3]])
    assert bilinear_resize_2d(p, 2, 2) == p
    assert bilinear_resize_2d(p, 3, 3) == Plane(
        [[0.0, 0.5, 1.0], [1.0, 1.5, 2.0], [2.0, 2.5, 3.0]]
    )
    assert bilinear_resize_2d(Plane([[7.0]]), 2, 3) == Plane([[7.0] * 3] * 2)
    with pytest.raises(ValidationError):
        bilinear_resize_2d(p, 0, 3)
    with pytest.raises(TypeError):
        bilinear_resize_2d([[0, 1]], 2, 2)  # type: ignore


def test_bilinear_preserves_corners() -> None:
    rng = np.random.default_rng(5)
    for _ in range(30):
        rows, cols = (int(v) for v in rng.integers(2, 40, size=2))
        out_rows, out_cols = (int(v) for v in rng.integers(2, 40, size=2))
        p = Plane(rng.uniform(-10, 10, size=(rows, cols)))
        q = bilinear_resize_2d(p, out_rows, out_cols)
        assert q.shape == (out_rows, out_cols)
        for (i, j), (r, c) in [
            ((0, 0), (0, 0)),
            ((0, -1), (0, cols - 1)),
            ((-1, 0), (rows - 1, 0)),
            ((-1, -1), (rows - 1, cols - 1)),
        ]:
            assert q.values[i, j] == pytest.approx(p.values[r, c], abs=1e-9)


def test_resize_planes_keeps_leading_axes() -> None:
    stack = np.stack([np.full((2, 5), float(k)) for k in range(3)])
    out = resize_planes(stack, 4, 4)
    assert out.shape == (3, 4, 4)
    for k in range(3):
        assert np.allclose(out[k], k)
    with pytest.raises(ValidationError):
        resize_planes([1.0, 2.0], 2, 2)


def test_constant_input_stays_exact() -> None:
    for value in (4.2, -0.1, 1e-300, 123456.789):
        out = resize_planes(np.full((3, 2, 7), value), 13, 5)
        assert (out == value).all()


def test_extreme_values_interpolate_without_overflow() -> None:
    top = 1.7e308
    assert resample_axis([-top, top], 3).tolist() == [-top, 0.0, top]
    out = resample_axis([[-top, top]], 5)
    assert np.isfinite(out).all()
    assert out[0, 0] == -top and out[0, 4] == top
    assert out[0, 1] == pytest.approx(-top / 2, rel=1e-12)
    assert out[0, 2] == 0.0
    assert resample_axis([[top], [top]], 4, axis=0).ravel().tolist() == [top] * 4
    big = resize_planes([[[-top, top], [top, -top]]], 3, 3)
    assert np.isfinite(big).all()
    assert big[0, 1, 1] == 0.0

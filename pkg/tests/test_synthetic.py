import numpy as np
import pytest

from sigadapt.errors import ValidationError
from sigadapt.synthetic import generate_synthetic_dataset


def test_shape_and_labels() -> None:
    ds = generate_synthetic_dataset(4, 32, 3, 5, 2.0, seed=0)
    assert len(ds) == 15
    assert ds.shape == (4, 32)
    assert ds.manifest.class_names == ("class-0", "class-1", "class-2")
    assert ds.manifest.labels == (0,) * 5 + (1,) * 5 + (2,) * 5
    assert ds.manifest.ids[0] == "synth-000000"
    assert ds.manifest.ids[-1] == "synth-000014"
    assert all(r.source == "synthetic" for r in ds.manifest.instances)


def test_seeded() -> None:
    a = generate_synthetic_dataset(2, 16, 2, 3, 1.0, seed=5)
    b = generate_synthetic_dataset(2, 16, 2, 3, 1.0, seed=5)
    c = generate_synthetic_dataset(2, 16, 2, 3, 1.0, seed=6)
    assert a.signals == b.signals
    assert a.manifest.checksum == b.manifest.checksum
    assert a.signals != c.signals
    assert a.manifest.checksum != c.manifest.checksum


def test_separation_moves_class_means() -> None:
    ds = generate_synthetic_dataset(1, 64, 2, 200, 5.0, seed=1)
    means = [
        np.mean([s.samples[0] for s in ds.signals if s.label == k], axis=0) for k in (0, 1)
    ]
    # averaged noise is far below the class sinusoid amplitude
    assert np.max(np.abs(means[0] - means[1])) > 3.0


def test_rejects() -> None:
    with pytest.raises(ValidationError):
        generate_synthetic_dataset(0, 16, 2, 3, 1.0, seed=0)
    with pytest.raises(ValidationError):
        generate_synthetic_dataset(1, 16, 2, 0, 1.0, seed=0)
    with pytest.raises(ValidationError):
        generate_synthetic_dataset(1, 16, 2, 3, -1.0, seed=0)
    with pytest.raises(ValidationError):
        generate_synthetic_dataset(1, 16, 2, 3, float("nan"), seed=0)
    with pytest.raises(ValidationError):
        generate_synthetic_dataset(1, 16, 2, 3, 1.0, seed=-1)

import pathlib

import numpy as np
import pytest

from sigadapt.errors import ArtifactError, NonFiniteError, ValidationError
from sigadapt.signal import (
    Dataset,
    DatasetManifest,
    InstanceRecord,
    SignalMatrix,
    load_dataset,
    save_dataset,
    source_checksum,
)
from sigadapt.synthetic import generate_synthetic_dataset


def test_signal_matrix() -> None:
    m = SignalMatrix("a", [[1, 2, 3], [4, 5, 6]], label=2)
    assert m.id == "a"
    assert m.shape == (2, 3)
    assert m.channels == 2
    assert m.length == 3
    assert m.label == 2
    assert m.samples.dtype == np.float64
    with pytest.raises(ValueError):
        m.samples[0, 0] = 0.0
    assert repr(m) == "SignalMatrix('a', 2x3, label=2)"
    assert m == SignalMatrix("a", [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]], 2)
    assert m != SignalMatrix("a", [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]], 1)
    assert m != SignalMatrix("b", [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]], 2)


def test_signal_matrix_rejects() -> None:
    with pytest.raises(ValidationError):
        SignalMatrix("a", [1, 2, 3], 0)
    with pytest.raises(ValidationError):
        SignalMatrix("a", np.zeros((1, 0)), 0)
    with pytest.raises(NonFiniteError) as e:
        SignalMatrix("a", [[1.0, 2.0], [3.0, np.nan]], 0)
    assert e.value.index == 3
    with pytest.raises(ValidationError):
        SignalMatrix("a", [[1.0]], -1)
    with pytest.raises(TypeError):
        SignalMatrix("a", [[1.0]], True)
    with pytest.raises(TypeError):
        SignalMatrix("a", [[1.0]], 1.0)  # type: ignore


def test_manifest_validation() -> None:
    rec = InstanceRecord("a", "src", 0, 0)
    with pytest.raises(ValidationError):
        DatasetManifest("d", (), (rec,), "")
    with pytest.raises(ValidationError):
        DatasetManifest("d", ("x",), (rec, rec), "")
    with pytest.raises(ValidationError):
        DatasetManifest("d", ("x",), (InstanceRecord("a", "src", 0, 1),), "")
    m = DatasetManifest("d", ("x", "y"), (rec, InstanceRecord("b", "src", 1, 1, "g")), "c")
    assert m.ids == ("a", "b")
    assert m.labels == (0, 1)
    assert m.class_count == 2
    assert len(m) == 2


def test_dataset_validation() -> None:
    manifest = DatasetManifest("d", ("x",), (InstanceRecord("a", "s", 0, 0),), "c")
    with pytest.raises(ValidationError):
        Dataset(manifest, ())
    with pytest.raises(ValidationError):
        Dataset(manifest, (SignalMatrix("b", [[1.0]], 0),))
    two = DatasetManifest(
        "d", ("x",), (InstanceRecord("a", "s", 0, 0), InstanceRecord("b", "s", 1, 0)), "c"
    )
    with pytest.raises(ValidationError):
        Dataset(two, (SignalMatrix("a", [[1.0]], 0), SignalMatrix("b", [[1.0, 2.0]], 0)))


def test_record_round_trip() -> None:
    rec = InstanceRecord("a", "src", 4, 1, "subject-01")
    assert InstanceRecord.from_record(rec.to_record(), "here") == rec
    assert "group" not in InstanceRecord("a", "src", 4, 1).to_record()
    with pytest.raises(ArtifactError):
        InstanceRecord.from_record({"id": "a"}, "here")
    malformed = {**rec.to_record(), "offset": "start"}
    with pytest.raises(ArtifactError, match="here: malformed field"):
        InstanceRecord.from_record(malformed, "here")


def test_source_checksum() -> None:
    assert source_checksum([("a", b"1")]) == source_checksum([("a", b"1")])
    assert source_checksum([("a", b"1")]) != source_checksum([("b", b"1")])
    assert source_checksum([("a", b"1")]) != source_checksum([("a", b"2")])


def test_save_load(tmp_path: pathlib.Path) -> None:
    ds = generate_synthetic_dataset(3, 20, 2, 4, 1.0, seed=9)
    save_dataset(ds, tmp_path)
    back = load_dataset(tmp_path)
    assert back.manifest == ds.manifest
    assert back.signals == ds.signals
    first = (tmp_path / "samples.npy").read_bytes()
    save_dataset(back, tmp_path)
    assert (tmp_path / "samples.npy").read_bytes() == first


def test_load_rejects_mismatched_samples(tmp_path: pathlib.Path) -> None:
    save_dataset(generate_synthetic_dataset(3, 20, 2, 4, 1.0, seed=9), tmp_path / "a")
    save_dataset(generate_synthetic_dataset(3, 21, 2, 4, 1.0, seed=9), tmp_path / "b")
    (tmp_path / "a" / "samples.npy").write_bytes((tmp_path / "b" / "samples.npy").read_bytes())
    with pytest.raises(ArtifactError):
        load_dataset(tmp_path / "a")
    (tmp_path / "a" / "samples.npy").write_bytes(b"garbage")
    with pytest.raises(ArtifactError):
        load_dataset(tmp_path / "a")
    with pytest.raises(ArtifactError):
        load_dataset(tmp_path / "missing")

import json
import pathlib
from typing import List, Tuple

import pytest

from sigadapt.config import PipelineConfig, parse_config
from sigadapt.errors import ArtifactError, ValidationError
from sigadapt.features import feature_batch
from sigadapt.image import ImageAdapterConfig, PixelImage
from sigadapt.manifest import tree_digest
from sigadapt.pipeline import (
    FAILED,
    SUMMARY,
    convert_images,
    convert_texts,
    evaluate_directory,
    evaluation_records,
    inspect,
    load_converted,
    ordered_map,
    probe_directory,
    run_pipeline,
)
from sigadapt.probe import FeatureBatch, TrainConfig, evaluate, train
from sigadapt.split import Partition, load_split, split_dataset
from sigadapt.synthetic import generate_synthetic_dataset
from sigadapt.text import TextAdapterConfig, TokenText
from sigadapt.types import Converted

IMAGE_RUN = """
dataset.channels = 3
dataset.length = 32
dataset.classes = 2
dataset.per_class = 20
image.height = 16
image.width = 16
probe.epochs = 30
probe.learning_rate = 0.5
"""

TEXT_RUN = """
adapter = text
dataset.channels = 1
dataset.length = 40
dataset.classes = 2
dataset.per_class = 10
text.alpha = 10
probe.epochs = 5
probe.learning_rate = 0.01
"""


def _config(text: str, root: pathlib.Path, **extra: int) -> PipelineConfig:
    lines = [text, f"output_root = {root}"]
    lines.extend(f"{k} = {v}" for k, v in extra.items())
    return parse_config("\n".join(lines))


def _rewrite_record(path: pathlib.Path, lineno: int, **fields: object) -> None:
    lines = path.read_text(encoding="utf-8").splitlines()
    record = json.loads(lines[lineno - 1])
    record.update(fields)
    lines[lineno - 1] = json.dumps(record)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def test_ordered_map() -> None:
    items = [-x for x in range(20)]
    assert ordered_map(abs, items) == list(range(20))
    assert ordered_map(abs, items, parallelism=3) == list(range(20))
    assert ordered_map(abs, [], parallelism=3) == []


def test_image_run(tmp_path: pathlib.Path) -> None:
    config = _config(IMAGE_RUN, tmp_path)
    report = run_pipeline(config)
    assert report.status == 0
    assert report.error is None
    root = tmp_path / config.config_hash
    assert report.directory == root
    for name in (
        "manifests/dataset.jsonl",
        "manifests/samples.npy",
        "manifests/split.jsonl",
        "images/manifest.jsonl",
        "images/synth-000000.png",
        "images/synth-000039.png",
        "probe/head.bin",
        "probe/metrics.jsonl",
        SUMMARY,
    ):
        assert (root / name).is_file(), name
    for stage in ("ingest", "split", "convert", "probe"):
        recorded = (root / f".stage-{stage}").read_text(encoding="ascii").split()
        assert recorded[0] == config.config_hash
        assert len(recorded[1]) == 64
    assert not (root / FAILED).exists()

    summary = json.loads((root / SUMMARY).read_text(encoding="ascii"))
    assert summary == report.summary
    assert summary["config_hash"] == config.config_hash
    assert summary["adapter_hash"] == config.image.config_hash
    assert summary["dataset"] == {"name": "synthetic", "instances": 40, "classes": 2, "shape": [3, 32]}
    assert summary["split"] == {"train": 24, "valid": 8, "test": 8}
    assert summary["conversion"] == {"count": 40, "schemes": {"A": 40}}
    assert summary["probe"]["train"]["accuracy"] >= 0.9
    for part in ("train", "valid", "test"):
        assert 0.0 <= summary["probe"][part]["macro_f1"] <= 1.0


def test_text_run(tmp_path: pathlib.Path) -> None:
    config = _config(TEXT_RUN, tmp_path)
    report = run_pipeline(config)
    assert report.status == 0
    root = report.directory
    assert report.summary["adapter"] == "text"
    assert report.summary["conversion"] == {"count": 20, "overflow": {"fits": 20}}
    lines = (root / "texts" / "train.txt").read_text(encoding="utf-8").splitlines()
    assert len(lines) == report.summary["split"]["train"]
    assert all(len(line.split(" ")) == 40 for line in lines)
    header, items = load_converted(root / "texts")
    assert header["scale"] == 10.0
    assert all(isinstance(t, TokenText) for t, _ in items)
    assert "probe" in report.summary


def test_parallel_run_is_identical(tmp_path: pathlib.Path) -> None:
    serial = run_pipeline(_config(IMAGE_RUN, tmp_path / "serial"))
    parallel = run_pipeline(_config(IMAGE_RUN, tmp_path / "parallel", parallelism=8))
    assert serial.status == parallel.status == 0
    assert serial.directory.name == parallel.directory.name
    assert tree_digest(serial.directory) == tree_digest(parallel.directory)


def test_rerun_reuses_stages(tmp_path: pathlib.Path) -> None:
    config = _config(IMAGE_RUN, tmp_path)
    first = run_pipeline(config)
    digest = tree_digest(first.directory)
    again = run_pipeline(config)
    assert again.summary == first.summary
    assert tree_digest(again.directory) == digest

    head = first.directory / "probe" / "head.bin"
    head.write_bytes(b"stale")
    assert run_pipeline(config).status == 0
    assert head.read_bytes() != b"stale"
    assert tree_digest(first.directory) == digest

    # a changed split reruns the split stage and every stage after it
    split = first.directory / "manifests" / "split.jsonl"
    split.write_text(split.read_text(encoding="utf-8") + "\n", encoding="utf-8")
    (first.directory / "probe" / "metrics.jsonl").unlink()
    assert run_pipeline(config).status == 0
    assert tree_digest(first.directory) == digest

    head.write_bytes(b"stale")
    assert run_pipeline(config, fresh=True).status == 0
    assert tree_digest(first.directory) == digest


def test_disabled_probe(tmp_path: pathlib.Path) -> None:
    report = run_pipeline(_config(IMAGE_RUN + "probe.enabled = false\n", tmp_path))
    assert report.status == 0
    assert "probe" not in report.summary
    assert not (report.directory / "probe").exists()


def test_failed_run(tmp_path: pathlib.Path) -> None:
    config = parse_config(
        f"dataset.format = seizure-csv\ndataset.path = {tmp_path / 'absent.csv'}\n"
        f"output_root = {tmp_path / 'out'}\n"
    )
    report = run_pipeline(config)
    assert report.status == 2
    assert report.summary == {"config_hash": config.config_hash, "failed_stage": "ingest"}
    assert report.error is not None
    failed = (report.directory / FAILED).read_text(encoding="utf-8")
    assert failed.startswith("stage ingest:")
    assert not (report.directory / SUMMARY).exists()


def test_convert_and_probe_directories(tmp_path: pathlib.Path) -> None:
    dataset = generate_synthetic_dataset(1, 24, 2, 6, 3.0, seed=2)
    split = split_dataset(dataset.manifest, (0.5, 0.25, 0.25), seed=0)

    convert_images(dataset, split, ImageAdapterConfig(8, 8), tmp_path / "images")
    header, items = load_converted(tmp_path / "images")
    assert header["class_names"] == ["class-0", "class-1"]
    assert [c.instance_id for c, _ in items] == [s.id for s in dataset.signals]
    assert all(isinstance(c, PixelImage) and c.scheme.value == "single_channel" for c, _ in items)
    assert [p for _, p in items] == [split.as_dict()[c.instance_id] for c, _ in items]

    head, history, scores = probe_directory(tmp_path / "images", TrainConfig(epochs=3), pool=2)
    assert head.features == 3 * 4 * 4
    assert len(history) == 4
    assert set(scores) == {Partition.TRAIN, Partition.VALID, Partition.TEST}
    again = evaluate_directory(head, tmp_path / "images", pool=2)
    assert evaluation_records(again) == evaluation_records(scores)
    records = evaluation_records(scores)
    assert [r["partition"] for r in records] == ["train", "valid", "test"]
    assert sum(map(sum, records[0]["confusion"])) == 6

    convert_texts(dataset, split, TextAdapterConfig(alpha=10.0), tmp_path / "texts")
    _, texts = load_converted(tmp_path / "texts")
    assert [t.instance_id for t, _ in texts] == [s.id for s in dataset.signals]
    _, _, text_scores = probe_directory(tmp_path / "texts", TrainConfig(epochs=2))
    assert Partition.TRAIN in text_scores


def test_convert_rejects_foreign_split(tmp_path: pathlib.Path) -> None:
    dataset = generate_synthetic_dataset(1, 8, 2, 3, 1.0, seed=0)
    other = generate_synthetic_dataset(1, 8, 2, 3, 1.0, seed=1)
    with pytest.raises(ValidationError):
        convert_images(dataset, split_dataset(other.manifest), ImageAdapterConfig(4, 4), tmp_path)


def test_inspect(tmp_path: pathlib.Path) -> None:
    report = run_pipeline(_config(IMAGE_RUN, tmp_path))
    root = report.directory
    lines = inspect(root / "images")
    assert lines[0] == "kind: images"
    assert "records: 40" in lines
    png_lines = inspect(root / "images" / "synth-000000.png")
    assert png_lines[0] == "id: synth-000000"
    assert "pixels: 3x16x16" in png_lines
    assert inspect(root / "probe" / "head.bin") == ["probe head: 2 classes, 768 features"]
    assert inspect(root / "manifests" / "samples.npy") == ["samples: 40x3x32 float64"]
    assert json.loads(inspect(root)[0]) == report.summary
    with pytest.raises(ArtifactError):
        inspect(root / "nothing-here")
    (tmp_path / "notes.md").write_text("x", encoding="utf-8")
    with pytest.raises(ArtifactError):
        inspect(tmp_path / "notes.md")


def test_inspect_text(tmp_path: pathlib.Path) -> None:
    report = run_pipeline(_config(TEXT_RUN, tmp_path))
    lines = inspect(report.directory / "texts" / "train.txt")
    assert lines[0] == "line 1: 40 tokens"
    assert len(lines[1].split(" ")) == 1 + 1 + 10
    assert lines[1].startswith("first tokens: ")


def test_malformed_sidecar_fields_are_artifact_errors(tmp_path: pathlib.Path) -> None:
    report = run_pipeline(_config(IMAGE_RUN, tmp_path))
    images = report.directory / "images"
    sidecar = images / "manifest.jsonl"
    pristine = sidecar.read_text(encoding="utf-8")
    png = images / json.loads(pristine.splitlines()[1])["file"]

    for fields in ({"pre_resize_shape": "bad"}, {"pre_resize_shape": 5}, {"norm_record": [0.0]}):
        sidecar.write_text(pristine, encoding="utf-8")
        _rewrite_record(sidecar, 2, **fields)
        with pytest.raises(ArtifactError, match="line 2: malformed field"):
            inspect(png)
        with pytest.raises(ArtifactError, match="line 2: malformed field"):
            load_converted(images)

    for partition in (7, "holdout"):
        sidecar.write_text(pristine, encoding="utf-8")
        _rewrite_record(sidecar, 2, partition=partition)
        with pytest.raises(ArtifactError, match="line 2: malformed field"):
            load_converted(images)


def test_malformed_text_sidecar_fields_are_artifact_errors(tmp_path: pathlib.Path) -> None:
    report = run_pipeline(_config(TEXT_RUN, tmp_path))
    sidecar = report.directory / "texts" / "manifest.jsonl"
    pristine = sidecar.read_text(encoding="utf-8")
    for fields in ({"partition": "holdout"}, {"line": "first"}, {"token_count": [1]}, {"label": "x"}):
        sidecar.write_text(pristine, encoding="utf-8")
        _rewrite_record(sidecar, 3, **fields)
        with pytest.raises(ArtifactError, match="line 3: malformed field"):
            load_converted(report.directory / "texts")
    sidecar.write_text(pristine, encoding="utf-8")
    _rewrite_record(sidecar, 1, scale="ten")
    with pytest.raises(ArtifactError, match="line 1: malformed field"):
        load_converted(report.directory / "texts")


def test_changed_split_is_regenerated_and_malformed_split_reported(tmp_path: pathlib.Path) -> None:
    config = _config(IMAGE_RUN, tmp_path)
    first = run_pipeline(config)
    split = first.directory / "manifests" / "split.jsonl"
    _rewrite_record(split, 1, seed="zero")
    # the changed split is regenerated, not trusted
    assert run_pipeline(config).status == 0
    _rewrite_record(split, 2, partition="holdout")
    with pytest.raises(ArtifactError, match="line 2: malformed field"):
        load_split(split)


SEPARABLE_IMAGES = """
image.height = 3
image.width = 128
probe.epochs = 30
probe.learning_rate = 0.01
"""

SEPARABLE_TEXTS = """
adapter = text
dataset.channels = 1
dataset.length = 178
dataset.classes = 2
dataset.per_class = 100
probe.epochs = 20
probe.learning_rate = 0.001
"""

INDISTINGUISHABLE_TEXTS = """
adapter = text
dataset.channels = 1
dataset.length = 32
dataset.classes = 2
dataset.per_class = 1100
dataset.separation = 0
split.ratios = 0.1,0.1,0.8
split.stratify = true
probe.epochs = 10
probe.learning_rate = 0.01
"""


def _labelled(
    items: List[Tuple[Converted, Partition]], part: Partition, shift: int, classes: int
) -> FeatureBatch:
    chosen = [c for c, p in items if p is part]
    return feature_batch(chosen, [(int(c.label or 0) + shift) % classes for c in chosen])


def test_separable_images_are_learned(tmp_path: pathlib.Path) -> None:
    # six classes of 9 x 128, separation 3, 300 instances split 60/20/20
    report = run_pipeline(_config(SEPARABLE_IMAGES, tmp_path))
    assert report.status == 0
    assert report.summary["split"] == {"train": 180, "valid": 60, "test": 60}
    assert report.summary["conversion"] == {"count": 300, "schemes": {"A": 300}}
    assert report.summary["probe"]["test"]["accuracy"] >= 0.95

    # relabelling the training classes moves the predictions with them
    _, items = load_converted(report.directory / "images")
    config = TrainConfig(learning_rate=0.01, epochs=30)
    head = train(_labelled(items, Partition.TRAIN, 1, 6), 6, config).head
    assert evaluate(head, _labelled(items, Partition.TEST, 0, 6)).accuracy <= 0.05
    assert evaluate(head, _labelled(items, Partition.TEST, 1, 6)).accuracy >= 0.95


def test_separable_texts_are_learned(tmp_path: pathlib.Path) -> None:
    report = run_pipeline(_config(SEPARABLE_TEXTS, tmp_path))
    assert report.status == 0
    assert report.summary["conversion"] == {"count": 200, "overflow": {"fits": 200}}
    assert report.summary["probe"]["test"]["accuracy"] >= 0.95


def test_indistinguishable_classes_stay_near_chance(tmp_path: pathlib.Path) -> None:
    report = run_pipeline(_config(INDISTINGUISHABLE_TEXTS, tmp_path))
    assert report.status == 0
    assert report.summary["split"]["test"] == 1760
    assert abs(report.summary["probe"]["test"]["accuracy"] - 0.5) <= 0.05

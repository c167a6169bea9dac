"""
End-to-end orchestration: ingest, split, convert and probe.

A run writes everything below ``<output root>/<config hash>/``::

    manifests/dataset.jsonl, manifests/samples.npy, manifests/split.jsonl
    images/<id>.png, images/manifest.jsonl        (image adapter)
    texts/{train,valid,test}.txt, texts/manifest.jsonl  (text adapter)
    probe/head.bin, probe/metrics.jsonl
    summary.json

Each finished stage leaves a ``.stage-<name>`` marker holding the config hash and a digest of its
outputs, and is skipped when the run is repeated with those outputs unchanged.
A failing run leaves a ``FAILED`` file with the error.
Artifacts never depend on the degree of parallelism or on completion order.
"""
import concurrent.futures
import logging
import pathlib
import shutil
from collections import Counter
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from sigadapt.config import AdapterKind, DatasetFormat, DatasetSpec, PipelineConfig
from sigadapt.errors import AdapterMismatchError, ArtifactError, SigAdaptError, ValidationError
from sigadapt.features import feature_batch
from sigadapt.har import load_har_directory
from sigadapt.image import (
    ImageAdapterConfig,
    convert_to_image,
    decode_png,
    encode_png,
    image_from_record,
)
from sigadapt.manifest import (
    PathLike,
    Record,
    dumps_record,
    read_jsonl,
    record_fields,
    require_fields,
    sha256_hex,
    tree_digest,
    write_bytes,
    write_jsonl,
)
from sigadapt.probe import (
    Evaluation,
    FeatureBatch,
    ProbeHead,
    TrainConfig,
    decode_head,
    evaluate,
    save_head,
    train,
)
from sigadapt.seizure import parse_seizure_csv
from sigadapt.signal import (
    DATASET_MANIFEST,
    DATASET_SAMPLES,
    Dataset,
    SignalMatrix,
    load_dataset,
    save_dataset,
)
from sigadapt.sleep import load_sleep_directory, load_stage_mapping
from sigadapt.split import PARTITIONS, Partition, SplitManifest, load_split, save_split, split_dataset
from sigadapt.synthetic import generate_synthetic_dataset
from sigadapt.text import TextAdapterConfig, convert_to_text, text_from_record
from sigadapt.types import Converted, FloatArray

log = logging.getLogger(__name__)

FAILED = "FAILED"
SUMMARY = "summary.json"
IMAGES_DIR = "images"
TEXTS_DIR = "texts"
SIDECAR = "manifest.jsonl"
METRICS = "metrics.jsonl"
HEAD = "head.bin"

_T = TypeVar("_T")
_R = TypeVar("_R")


def ordered_map(
    fn: Callable[[_T], _R], items: Sequence[_T], parallelism: int = 1
) -> List[_R]:
    """
    ``[fn(i) for i in items]``, fanned out over *parallelism* worker processes.

    Results always come back in input order.
    """
    if parallelism <= 1 or len(items) < 2:
        return [fn(i) for i in items]
    chunk = max(1, len(items) // (4 * parallelism))
    with concurrent.futures.ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


_Task = Tuple[str, FloatArray, int, Any]


def _image_task(task: _Task) -> Tuple[bytes, Dict[str, Any]]:
    iid, samples, label, config = task
    image = convert_to_image(SignalMatrix(iid, samples, label), config)
    return encode_png(image), image.to_record(f"{iid}.png")


def _text_task(task: _Task) -> Tuple[str, Dict[str, Any]]:
    iid, samples, label, config = task
    text = convert_to_text(SignalMatrix(iid, samples, label), config)
    return text.text, text.to_record(0)


def _tasks(dataset: Dataset, config: Any) -> List[_Task]:
    return [(s.id, np.array(s.samples), s.label, config) for s in dataset.signals]


def ingest(spec: DatasetSpec) -> Dataset:
    """Load or generate the dataset described by *spec*"""
    if spec.format is DatasetFormat.SYNTH:
        return generate_synthetic_dataset(
            spec.channels, spec.length, spec.classes, spec.per_class, spec.separation, spec.seed
        )
    assert spec.path is not None
    path = pathlib.Path(spec.path)
    if spec.format is DatasetFormat.HAR:
        return load_har_directory(path, spec.partition)
    if spec.format is DatasetFormat.SEIZURE_CSV:
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise ArtifactError(f"cannot read {path}: {exc}") from None
        return parse_seizure_csv(data, binary=spec.binary, source=path.name)
    mapping = None
    if spec.stage_mapping:
        try:
            text = pathlib.Path(spec.stage_mapping).read_text(encoding="utf-8")
        except OSError as exc:
            raise ArtifactError(f"cannot read stage mapping: {exc}") from None
        mapping = load_stage_mapping(text, spec.stage_mapping)
    return load_sleep_directory(
        path,
        channel=spec.channel,
        subjects=spec.subjects,
        mapping=mapping,
        trim_wake_minutes=spec.trim_wake_minutes,
    )


def _assignments(dataset: Dataset, split: SplitManifest) -> Dict[str, Partition]:
    if split.checksum and split.checksum != dataset.manifest.checksum:
        raise ValidationError(f"split manifest was made for another dataset than {dataset.name!r}")
    parts = split.as_dict()
    missing = [s.id for s in dataset.signals if s.id not in parts]
    if missing:
        raise ValidationError(f"split manifest does not assign {missing[0]!r}")
    return parts


def convert_images(
    dataset: Dataset,
    split: SplitManifest,
    config: ImageAdapterConfig,
    out: PathLike,
    parallelism: int = 1,
) -> None:
    """One PNG per instance named by its id, plus the ``manifest.jsonl`` sidecar in dataset order"""
    base = pathlib.Path(out)
    parts = _assignments(dataset, split)
    results = ordered_map(_image_task, _tasks(dataset, config), parallelism)
    records = []
    for sig, (data, record) in zip(dataset.signals, results):
        write_bytes(base / f"{sig.id}.png", data)
        records.append({**record, "partition": parts[sig.id].value})
    write_jsonl(
        base / SIDECAR,
        "images",
        {
            "config_hash": config.config_hash,
            "count": len(records),
            "class_names": list(dataset.manifest.class_names),
        },
        records,
    )
    log.info("converted images", extra={"fields": {"count": len(records)}})


def convert_texts(
    dataset: Dataset,
    split: SplitManifest,
    config: TextAdapterConfig,
    out: PathLike,
    parallelism: int = 1,
) -> None:
    """One text file per partition, one instance per line, plus the ``manifest.jsonl`` sidecar"""
    base = pathlib.Path(out)
    parts = _assignments(dataset, split)
    results = ordered_map(_text_task, _tasks(dataset, config), parallelism)
    lines: Dict[Partition, List[str]] = {p: [] for p in PARTITIONS}
    records = []
    for sig, (text, record) in zip(dataset.signals, results):
        part = parts[sig.id]
        record = {**record, "line": len(lines[part]) + 1, "partition": part.value}
        lines[part].append(text)
        records.append(record)
    for part in PARTITIONS:
        write_bytes(base / f"{part.value}.txt", "".join(f"{t}\n" for t in lines[part]).encode("utf-8"))
    write_jsonl(
        base / SIDECAR,
        "texts",
        {
            "config_hash": config.config_hash,
            "count": len(records),
            "class_names": list(dataset.manifest.class_names),
            "separator": config.separator,
            "scale": config.scale,
        },
        records,
    )
    log.info("converted texts", extra={"fields": {"count": len(records)}})


def load_converted(directory: PathLike) -> Tuple[Record, List[Tuple[Converted, Partition]]]:
    """
    The sidecar header and the converted instances of an ``images`` or ``texts`` directory,
    each with its partition, in sidecar order.
    """
    base = pathlib.Path(directory)
    header, items = _load_converted(base)
    require_fields(header, ("class_names",), f"{base / SIDECAR}: line 1")
    return header, items


def _load_converted(base: pathlib.Path) -> Tuple[Record, List[Tuple[Converted, Partition]]]:
    header, records = read_jsonl(base / SIDECAR)
    out: List[Tuple[Converted, Partition]] = []
    if header["kind"] == "images":
        for lineno, rec in enumerate(records, start=2):
            where = f"{base / SIDECAR}: line {lineno}"
            require_fields(rec, ("file", "partition"), where)
            with record_fields(where):
                part = Partition(rec["partition"])
            try:
                data = (base / str(rec["file"])).read_bytes()
            except OSError as exc:
                raise ArtifactError(f"{where}: {exc}") from None
            image = image_from_record(rec, decode_png(data, str(rec["file"])), where)
            out.append((image, part))
        return header, out
    if header["kind"] == "texts":
        require_fields(header, ("separator", "scale"), f"{base / SIDECAR}: line 1")
        with record_fields(f"{base / SIDECAR}: line 1"):
            separator, scale = str(header["separator"]), float(header["scale"])
        files: Dict[Partition, List[str]] = {}
        for lineno, rec in enumerate(records, start=2):
            where = f"{base / SIDECAR}: line {lineno}"
            require_fields(rec, ("line", "partition"), where)
            with record_fields(where):
                part = Partition(rec["partition"])
                index = int(rec["line"]) - 1
            if part not in files:
                try:
                    files[part] = (base / f"{part.value}.txt").read_text(encoding="utf-8").splitlines()
                except (OSError, UnicodeDecodeError) as exc:
                    raise ArtifactError(f"{where}: {exc}") from None
            if not 0 <= index < len(files[part]):
                raise ArtifactError(f"{where}: {part.value}.txt has no line {rec['line']}")
            text = text_from_record(rec, files[part][index], separator, scale, where)
            out.append((text, part))
        return header, out
    raise ArtifactError(f"{base / SIDECAR}: not a converted-instance manifest ({header['kind']!r})")


def _batch(
    items: Iterable[Tuple[Converted, Partition]], part: Partition, pool: int
) -> Optional[FeatureBatch]:
    chosen = [c for c, p in items if p is part]
    labels = []
    for c in chosen:
        if c.label is None:
            raise ArtifactError(f"converted instance {c.instance_id!r} carries no label")
        labels.append(c.label)
    if not chosen:
        return None
    return feature_batch(chosen, labels, pool)


def _resplit(
    items: List[Tuple[Converted, Partition]], split: Optional[SplitManifest]
) -> List[Tuple[Converted, Partition]]:
    if split is None:
        return items
    parts = split.as_dict()
    missing = [c.instance_id for c, _ in items if c.instance_id not in parts]
    if missing:
        raise ValidationError(f"split manifest does not assign {missing[0]!r}")
    return [(c, parts[c.instance_id]) for c, _ in items]


def probe_directory(
    directory: PathLike,
    config: TrainConfig = TrainConfig(),
    pool: int = 1,
    split: Optional[SplitManifest] = None,
) -> Tuple[ProbeHead, Tuple[float, ...], Dict[Partition, Evaluation]]:
    """
    Train a head on the ``train`` partition of a converted directory and evaluate every partition.

    Partitions come from the sidecar unless *split* reassigns them.
    """
    header, items = load_converted(directory)
    items = _resplit(items, split)
    train_batch = _batch(items, Partition.TRAIN, pool)
    if train_batch is None:
        raise ValidationError("no converted training instances")
    result = train(train_batch, len(header["class_names"]), config)
    scores = {}
    for part in PARTITIONS:
        batch = _batch(items, part, pool)
        if batch is not None:
            scores[part] = evaluate(result.head, batch)
    return result.head, result.history, scores


def evaluate_directory(
    head: ProbeHead,
    directory: PathLike,
    pool: int = 1,
    split: Optional[SplitManifest] = None,
) -> Dict[Partition, Evaluation]:
    """Score *head* on every partition of a converted directory"""
    _, items = load_converted(directory)
    items = _resplit(items, split)
    scores = {}
    for part in PARTITIONS:
        batch = _batch(items, part, pool)
        if batch is not None:
            scores[part] = evaluate(head, batch)
    if not scores:
        raise ValidationError("nothing to evaluate")
    return scores


def evaluation_records(scores: Dict[Partition, Evaluation]) -> List[Dict[str, Any]]:
    return [
        {
            "partition": part.value,
            "accuracy": e.accuracy,
            "macro_f1": e.macro_f1,
            "confusion": [list(row) for row in e.confusion],
        }
        for part, e in scores.items()
    ]


@dataclass(frozen=True)
class RunReport:
    """Outcome of :func:`run_pipeline`; ``status`` is the process exit status"""

    status: int
    directory: pathlib.Path
    summary: Dict[str, Any]
    error: Optional[str] = None


class _Run:
    """
    Run directory bookkeeping.

    A stage marker holds the config hash and a digest of the stage's output files. A stage is
    reused only while both still match, and once one stage reruns every later stage reruns too.
    """

    def __init__(self, config: PipelineConfig, fresh: bool) -> None:
        self.config = config
        self.root = pathlib.Path(config.output_root) / config.config_hash
        if fresh and self.root.exists():
            shutil.rmtree(self.root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / FAILED).unlink(missing_ok=True)
        self.stale = False

    def marker(self, stage: str) -> pathlib.Path:
        return self.root / f".stage-{stage}"

    def outputs(self, stage: str) -> List[pathlib.Path]:
        manifests = self.root / "manifests"
        return {
            "ingest": [manifests / DATASET_MANIFEST, manifests / DATASET_SAMPLES],
            "split": [manifests / "split.jsonl"],
            "convert": [self.converted],
            "probe": [self.root / "probe"],
        }[stage]

    def digest(self, stage: str) -> Optional[str]:
        chunks: List[bytes] = []
        for p in self.outputs(stage):
            if p.is_dir():
                chunks.append(tree_digest(p).encode("ascii"))
            elif p.is_file():
                chunks.append(p.read_bytes())
            else:
                return None
        return sha256_hex(*chunks)

    def done(self, stage: str) -> bool:
        if self.stale:
            return False
        m = self.marker(stage)
        recorded = m.read_text(encoding="ascii").split() if m.is_file() else []
        if recorded and recorded == [self.config.config_hash, self.digest(stage)]:
            return True
        if recorded:
            log.warning("stage outputs changed, rerunning", extra={"fields": {"stage": stage}})
        self.stale = True
        return False

    def finish(self, stage: str) -> None:
        text = f"{self.config.config_hash}\n{self.digest(stage)}\n"
        write_bytes(self.marker(stage), text.encode("ascii"))
        log.info("stage finished", extra={"fields": {"stage": stage, "config_hash": self.config.config_hash}})

    @property
    def converted(self) -> pathlib.Path:
        name = IMAGES_DIR if self.config.adapter is AdapterKind.IMAGE else TEXTS_DIR
        return self.root / name


def _check_adapter(config: PipelineConfig, dataset: Dataset) -> None:
    channels = dataset.shape[0]
    if config.adapter is AdapterKind.TEXT and channels > 1 and not config.text.legacy_flatten:
        raise AdapterMismatchError(
            f"dataset {dataset.name!r} has {channels} channels; use the image adapter "
            "or enable legacy flattening"
        )


def _summary(run: _Run) -> Dict[str, Any]:
    config = run.config
    summary: Dict[str, Any] = {
        "config_hash": config.config_hash,
        "adapter": config.adapter.value,
        "adapter_hash": config.adapter_hash,
    }
    dheader, drecords = read_jsonl(run.root / "manifests" / "dataset.jsonl", "dataset")
    summary["dataset"] = {
        "name": dheader["name"],
        "instances": len(drecords),
        "classes": len(dheader["class_names"]),
        "shape": [dheader["channels"], dheader["length"]],
    }
    sheader, _ = read_jsonl(run.root / "manifests" / "split.jsonl", "split")
    summary["split"] = dict(zip((p.value for p in PARTITIONS), sheader["sizes"]))
    _, crecords = read_jsonl(run.converted / SIDECAR)
    if config.adapter is AdapterKind.IMAGE:
        counts = Counter(str(r["scheme"]) for r in crecords)
        summary["conversion"] = {"count": len(crecords), "schemes": dict(sorted(counts.items()))}
    else:
        counts = Counter(str(r["overflow_status"]) for r in crecords)
        summary["conversion"] = {"count": len(crecords), "overflow": dict(sorted(counts.items()))}
    metrics = run.root / "probe" / METRICS
    if config.probe.enabled and metrics.is_file():
        mheader, mrecords = read_jsonl(metrics, "metrics")
        summary["probe"] = {
            "objective": mheader["history"][-1],
            **{r["partition"]: {"accuracy": r["accuracy"], "macro_f1": r["macro_f1"]} for r in mrecords},
        }
    return summary


def run_pipeline(config: PipelineConfig, fresh: bool = False) -> RunReport:
    """
    Run ingest, split, convert and (when enabled) probe for *config*.

    Completed stages of an earlier run with the same config hash are reused unless *fresh*.
    Failures are reported through the returned status, with a ``FAILED`` file left in the run directory.
    """
    run = _Run(config, fresh)
    stage = "ingest"
    try:
        manifests = run.root / "manifests"
        if run.done("ingest"):
            dataset = load_dataset(manifests)
            _check_adapter(config, dataset)
        else:
            dataset = ingest(config.dataset)
            _check_adapter(config, dataset)
            save_dataset(dataset, manifests)
            run.finish("ingest")

        stage = "split"
        if run.done("split"):
            split = load_split(manifests / "split.jsonl")
        else:
            split = split_dataset(
                dataset.manifest,
                config.split.ratios,
                config.split.seed,
                stratify=config.split.stratify,
                by_group=config.split.by_group,
            )
            save_split(split, manifests / "split.jsonl")
            run.finish("split")

        stage = "convert"
        if not run.done("convert"):
            if config.adapter is AdapterKind.IMAGE:
                convert_images(dataset, split, config.image, run.converted, config.parallelism)
            else:
                convert_texts(dataset, split, config.text, run.converted, config.parallelism)
            run.finish("convert")

        stage = "probe"
        if config.probe.enabled and not run.done("probe"):
            head, history, scores = probe_directory(
                run.converted, config.probe.train, config.probe.pool
            )
            save_head(head, run.root / "probe" / HEAD)
            write_jsonl(
                run.root / "probe" / METRICS,
                "metrics",
                {"config_hash": config.config_hash, "history": list(history)},
                evaluation_records(scores),
            )
            run.finish("probe")

        summary = _summary(run)
        write_bytes(run.root / SUMMARY, (dumps_record(summary) + "\n").encode("ascii"))
    except (SigAdaptError, OSError) as exc:
        status = exc.exit_code if isinstance(exc, SigAdaptError) else 2
        write_bytes(run.root / FAILED, f"stage {stage}: {exc}\n".encode("utf-8"))
        log.error("pipeline failed", extra={"fields": {"stage": stage, "error": str(exc)}})
        return RunReport(status, run.root, {"config_hash": config.config_hash, "failed_stage": stage}, str(exc))
    log.info("pipeline finished", extra={"fields": {"config_hash": config.config_hash}})
    return RunReport(0, run.root, summary)


def _describe_image(path: pathlib.Path) -> Iterator[str]:
    sidecar = path.parent / SIDECAR
    pixels = decode_png(path.read_bytes(), str(path))
    if sidecar.is_file():
        _, records = read_jsonl(sidecar, "images")
        for lineno, rec in enumerate(records, start=2):
            if rec.get("file") == path.name:
                image = image_from_record(rec, pixels, f"{sidecar}: line {lineno}")
                yield f"id: {image.instance_id}"
                yield f"label: {image.label}"
                yield f"scheme: {image.scheme.value}"
                yield f"pre-resize shape: {image.pre_resize_shape[0]}x{image.pre_resize_shape[1]}"
                yield f"norm record: [{image.norm_record.v_min!r}, {image.norm_record.v_max!r}]"
                yield f"config hash: {image.config_hash}"
                break
    yield f"pixels: 3x{pixels.shape[1]}x{pixels.shape[2]}"
    for k, plane in enumerate(pixels):
        yield f"plane {k}: min {int(plane.min())} max {int(plane.max())} mean {float(plane.mean()):.3f}"


def _describe_text(path: pathlib.Path) -> Iterator[str]:
    separator: Optional[str] = None
    sidecar = path.parent / SIDECAR
    if sidecar.is_file():
        header, _ = read_jsonl(sidecar, "texts")
        separator = str(header.get("separator", " "))
    try:
        first = path.read_text(encoding="utf-8").splitlines()[:1]
    except (OSError, UnicodeDecodeError) as exc:
        raise ArtifactError(f"{path}: {exc}") from None
    if not first:
        yield "empty text file"
        return
    fields = first[0].split(separator)
    yield f"line 1: {len(fields)} tokens"
    yield "first tokens: " + " ".join(fields[:10])


def _describe_manifest(path: pathlib.Path) -> Iterator[str]:
    header, records = read_jsonl(path)
    yield f"kind: {header['kind']}"
    for key in sorted(header):
        if key not in ("kind", "version"):
            yield f"{key}: {header[key]}"
    yield f"records: {len(records)}"
    if records:
        yield f"first record: {dumps_record(records[0])}"


def inspect(path: PathLike) -> List[str]:
    """Human-readable description of a sigadapt artifact"""
    p = pathlib.Path(path)
    if p.is_dir():
        for name in (SIDECAR, "dataset.jsonl", SUMMARY):
            if (p / name).is_file():
                p = p / name
                break
        else:
            raise ArtifactError(f"{p}: no sigadapt manifest in this directory")
    if not p.is_file():
        raise ArtifactError(f"{p}: no such artifact")
    if p.suffix == ".png":
        return list(_describe_image(p))
    if p.suffix == ".txt":
        return list(_describe_text(p))
    if p.suffix == ".jsonl":
        return list(_describe_manifest(p))
    if p.suffix == ".npy":
        try:
            arr = np.load(p, allow_pickle=False, mmap_mode="r")
        except (OSError, ValueError) as exc:
            raise ArtifactError(f"{p}: {exc}") from None
        return [f"samples: {'x'.join(str(d) for d in arr.shape)} {arr.dtype}"]
    if p.suffix == ".bin":
        head = decode_head(p.read_bytes(), str(p))
        return [f"probe head: {head.classes} classes, {head.features} features"]
    if p.name == SUMMARY:
        return [p.read_text(encoding="ascii").strip()]
    raise ArtifactError(f"{p}: unknown artifact type")

"""
Deterministic train / valid / test split manifests.
"""
import enum
import logging
import math
import pathlib
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Sequence, Tuple

import numpy as np

from sigadapt.errors import ValidationError
from sigadapt.manifest import PathLike, read_jsonl, record_fields, require_fields, write_jsonl
from sigadapt.signal import DatasetManifest

log = logging.getLogger(__name__)

DEFAULT_RATIOS = (0.6, 0.2, 0.2)


class Partition(str, enum.Enum):
    TRAIN = "train"
    VALID = "valid"
    TEST = "test"


PARTITIONS: Tuple[Partition, ...] = (Partition.TRAIN, Partition.VALID, Partition.TEST)


def _check_ratios(ratios: Sequence[float]) -> Tuple[float, float, float]:
    if len(ratios) != 3:
        raise ValidationError(f"expected three ratios, got {len(ratios)}")
    if any(not (r > 0) for r in ratios):
        raise ValidationError(f"ratios must be positive, got {tuple(ratios)}")
    if abs(math.fsum(ratios) - 1.0) > 1e-9:
        raise ValidationError(f"ratios must sum to 1, got {math.fsum(ratios)!r}")
    return (float(ratios[0]), float(ratios[1]), float(ratios[2]))


def parse_ratios(text: str) -> Tuple[float, float, float]:
    """
    .. code-block:: python3

        >>> parse_ratios("0.6,0.2,0.2")
        (0.6, 0.2, 0.2)
    """
    try:
        values = [float(f) for f in text.split(",")]
    except ValueError:
        raise ValidationError(f"ratios {text!r} are not comma-separated numbers") from None
    return _check_ratios(values)


def split_counts(n: int, ratios: Sequence[float]) -> Tuple[int, int, int]:
    """
    Partition sizes by the largest-remainder rule, so each size is within 1 of ``ratio * n``.

    .. code-block:: python3

        >>> split_counts(10, (0.6, 0.2, 0.2))
        (6, 2, 2)
        >>> split_counts(11500, (0.6, 0.2, 0.2))
        (6900, 2300, 2300)
        >>> split_counts(11, (0.6, 0.2, 0.2))
        (7, 2, 2)
    """
    r = _check_ratios(ratios)
    exact = [ri * n for ri in r]
    counts = [int(math.floor(e + 1e-9)) for e in exact]
    order = sorted(range(3), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return (counts[0], counts[1], counts[2])


@dataclass(frozen=True)
class SplitManifest:
    """
    Assignment of every instance id of a dataset to one partition.

    ``assignment`` follows the dataset order. ``checksum`` is the checksum of the split dataset.
    """

    seed: int
    ratios: Tuple[float, float, float]
    assignment: Tuple[Tuple[str, Partition], ...]
    checksum: str = ""
    stratify: bool = False
    by_group: bool = False

    def partition(self, name: Partition) -> Tuple[str, ...]:
        """Ids assigned to *name*, in dataset order"""
        return tuple(i for i, p in self.assignment if p is Partition(name))

    def as_dict(self) -> Dict[str, Partition]:
        return dict(self.assignment)

    @property
    def sizes(self) -> Tuple[int, int, int]:
        sizes = [0, 0, 0]
        for _, p in self.assignment:
            sizes[PARTITIONS.index(p)] += 1
        return (sizes[0], sizes[1], sizes[2])

    def __len__(self) -> int:
        return len(self.assignment)


def _stratified_order(order: Sequence[int], labels: Sequence[int]) -> List[int]:
    # interleave classes by their within-class rank so each contiguous slice mirrors the class mix
    per_class: Dict[int, List[int]] = {}
    for i in order:
        per_class.setdefault(labels[i], []).append(i)
    keyed = []
    for members in per_class.values():
        n = len(members)
        for rank, i in enumerate(members):
            keyed.append(((rank + 0.5) / n, labels[i], i))
    keyed.sort()
    return [i for _, _, i in keyed]


def _group_assignment(
    manifest: DatasetManifest, counts: Tuple[int, int, int], rng: np.random.Generator
) -> List[Partition]:
    groups: Dict[str, List[int]] = {}
    for i, rec in enumerate(manifest.instances):
        groups.setdefault(rec.group if rec.group is not None else rec.id, []).append(i)
    names = sorted(groups)
    bounds = np.cumsum(counts)
    out: List[Partition] = [Partition.TRAIN] * len(manifest)
    position = 0
    for g in rng.permutation(len(names)):
        members = groups[names[int(g)]]
        middle = position + len(members) / 2
        index = min(int(np.searchsorted(bounds, middle, side="right")), 2)
        for i in members:
            out[i] = PARTITIONS[index]
        position += len(members)
    return out


def split_dataset(
    manifest: DatasetManifest,
    ratios: Sequence[float] = DEFAULT_RATIOS,
    seed: int = 0,
    stratify: bool = False,
    by_group: bool = False,
) -> SplitManifest:
    """
    Shuffle the instance ids with a generator keyed by *seed*, then cut the order into contiguous partitions.

    With *stratify*, the shuffled order is rearranged so each partition keeps the global class mix.
    With *by_group*, whole groups (subjects) are shuffled and assigned instead of instances;
    partition sizes then only approximate the ratios.

    .. code-block:: python3

        >>> from sigadapt.synthetic import generate_synthetic_dataset
        >>> ds = generate_synthetic_dataset(1, 4, 2, 5, 1.0, seed=0)
        >>> split_dataset(ds.manifest, seed=7).sizes
        (6, 2, 2)
    """
    r = _check_ratios(ratios)
    n = len(manifest)
    if n < 3:
        raise ValidationError(f"cannot split {n} instances into three partitions")
    if seed < 0:
        raise ValidationError(f"seed must be unsigned, not {seed}")
    if stratify and by_group:
        raise ValidationError("stratified and group splits are exclusive")
    counts = split_counts(n, r)
    rng = np.random.default_rng(seed)
    if by_group:
        parts = _group_assignment(manifest, counts, rng)
    else:
        order = [int(i) for i in rng.permutation(n)]
        if stratify:
            order = _stratified_order(order, manifest.labels)
        parts = [Partition.TRAIN] * n
        cut = np.cumsum(counts)
        for position, i in enumerate(order):
            parts[i] = PARTITIONS[int(np.searchsorted(cut, position, side="right"))]
    split = SplitManifest(
        seed=seed,
        ratios=r,
        assignment=tuple(zip(manifest.ids, parts)),
        checksum=manifest.checksum,
        stratify=stratify,
        by_group=by_group,
    )
    log.info(
        "split dataset",
        extra={"fields": {"dataset": manifest.name, "sizes": list(split.sizes), "seed": seed}},
    )
    return split


def save_split(split: SplitManifest, path: PathLike) -> None:
    header: Mapping[str, Any] = {
        "seed": split.seed,
        "ratios": list(split.ratios),
        "checksum": split.checksum,
        "stratify": split.stratify,
        "by_group": split.by_group,
        "sizes": list(split.sizes),
    }
    write_jsonl(
        path,
        "split",
        header,
        ({"id": i, "partition": p.value} for i, p in split.assignment),
    )


def load_split(path: PathLike) -> SplitManifest:
    header, records = read_jsonl(path, "split")
    where = f"{pathlib.Path(path)}: line 1"
    require_fields(header, ("seed", "ratios"), where)
    assignment = []
    for lineno, rec in enumerate(records, start=2):
        at = f"{pathlib.Path(path)}: line {lineno}"
        require_fields(rec, ("id", "partition"), at)
        with record_fields(at):
            assignment.append((str(rec["id"]), Partition(rec["partition"])))
    with record_fields(where):
        split = SplitManifest(
            seed=int(header["seed"]),
            ratios=_check_ratios([float(x) for x in header["ratios"]]),
            assignment=tuple(assignment),
            checksum=str(header.get("checksum", "")),
            stratify=bool(header.get("stratify", False)),
            by_group=bool(header.get("by_group", False)),
        )
    return split

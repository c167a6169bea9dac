"""
Pipeline configuration.

Configuration files are line-oriented ``key = value`` text with ``#`` comments and dotted keys::

    dataset.format = synth
    adapter = image
    image.height = 64
    split.ratios = 0.6,0.2,0.2
    probe.epochs = 20

Values may be double-quoted JSON strings (``text.separator = "\\t"``).
The canonical form lists every meaningful setting as sorted ``key=value`` lines;
its hash stamps every artifact the pipeline writes.
"""
import enum
import json
import os
from dataclasses import dataclass, fields, replace
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

from sigadapt.errors import ArtifactError, ValidationError
from sigadapt.har import HAR_CHANNELS
from sigadapt.image import ImageAdapterConfig
from sigadapt.manifest import PathLike, config_digest
from sigadapt.probe import TrainConfig
from sigadapt.split import DEFAULT_RATIOS, parse_ratios
from sigadapt.text import TextAdapterConfig

OUTPUT_ROOT_ENV = "SIGADAPT_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "sigadapt-out"


def parse_key_value_lines(text: str, source: str = "config") -> List[Tuple[int, str, str]]:
    """
    ``(line number, key, value)`` of every setting; blank lines and ``#`` comments are skipped.

    .. code-block:: python3

        >>> parse_key_value_lines("# comment\\na = 1\\n\\nb.c=x y\\n")
        [(2, 'a', '1'), (4, 'b.c', 'x y')]
    """
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ValidationError(f"{source}, line {lineno}: expected 'key = value', got {raw!r}")
        value = value.strip()
        if len(value) >= 2 and value[0] == value[-1] == '"':
            try:
                value = str(json.loads(value))
            except json.JSONDecodeError:
                raise ValidationError(f"{source}, line {lineno}: bad quoted value {value}") from None
        out.append((lineno, key, value))
    return out


class DatasetFormat(str, enum.Enum):
    HAR = "har"
    SEIZURE_CSV = "seizure-csv"
    EDF = "edf"
    SYNTH = "synth"


class AdapterKind(str, enum.Enum):
    IMAGE = "image"
    TEXT = "text"


@dataclass(frozen=True)
class DatasetSpec:
    """Where the instances come from; the ``synth`` parameters only matter for the synthetic format"""

    format: DatasetFormat = DatasetFormat.SYNTH
    path: Optional[str] = None
    partition: str = "train"
    binary: bool = False
    channel: str = "Fpz-Cz"
    subjects: Optional[int] = None
    trim_wake_minutes: Optional[float] = None
    stage_mapping: Optional[str] = None
    channels: int = 9
    length: int = 128
    classes: int = 6
    per_class: int = 50
    separation: float = 3.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "format", DatasetFormat(self.format))
        object.__setattr__(self, "separation", float(self.separation))
        if self.format is not DatasetFormat.SYNTH and not self.path:
            raise ValidationError(f"dataset format {self.format.value!r} needs dataset.path")
        if self.subjects is not None and self.subjects < 1:
            raise ValidationError(f"dataset.subjects must be positive, not {self.subjects}")

    @property
    def instance_channels(self) -> int:
        """Channel count every instance of this dataset will have"""
        if self.format is DatasetFormat.HAR:
            return len(HAR_CHANNELS)
        if self.format is DatasetFormat.SYNTH:
            return self.channels
        return 1


@dataclass(frozen=True)
class SplitSpec:
    ratios: Tuple[float, float, float] = DEFAULT_RATIOS
    seed: int = 0
    stratify: bool = False
    by_group: bool = False


@dataclass(frozen=True)
class ProbeSpec:
    enabled: bool = True
    train: TrainConfig = TrainConfig()
    pool: int = 1


@dataclass(frozen=True)
class PipelineConfig:
    """
    Everything a pipeline run needs.

    ``output_root`` and ``parallelism`` do not change any artifact and stay out of the canonical form.

    .. code-block:: python3

        >>> a = PipelineConfig()
        >>> a.config_hash == replace(a, parallelism=8).config_hash
        True
        >>> a.config_hash == replace(a, split=SplitSpec(seed=1)).config_hash
        False
    """

    dataset: DatasetSpec = DatasetSpec()
    adapter: AdapterKind = AdapterKind.IMAGE
    image: ImageAdapterConfig = ImageAdapterConfig()
    text: TextAdapterConfig = TextAdapterConfig()
    split: SplitSpec = SplitSpec()
    probe: ProbeSpec = ProbeSpec()
    output_root: str = DEFAULT_OUTPUT_ROOT
    parallelism: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "adapter", AdapterKind(self.adapter))
        if self.parallelism < 1:
            raise ValidationError(f"parallelism must be positive, not {self.parallelism}")
        if (
            self.adapter is AdapterKind.TEXT
            and self.dataset.instance_channels > 1
            and not self.text.legacy_flatten
        ):
            raise ValidationError(
                f"the text adapter needs single-channel data but {self.dataset.format.value} instances "
                f"have {self.dataset.instance_channels} channels; use adapter = image "
                "or set text.legacy_flatten = true"
            )

    def canonical(self) -> str:
        lines = [f"adapter={self.adapter.value}"]
        for f in fields(self.dataset):
            lines.append(f"dataset.{f.name}={_render(getattr(self.dataset, f.name))}")
        for f in fields(self.split):
            lines.append(f"split.{f.name}={_render(getattr(self.split, f.name))}")
        lines.append(f"probe.enabled={_render(self.probe.enabled)}")
        lines.append(f"probe.pool={self.probe.pool}")
        for f in fields(self.probe.train):
            lines.append(f"probe.{f.name}={_render(getattr(self.probe.train, f.name))}")
        adapter = self.image if self.adapter is AdapterKind.IMAGE else self.text
        lines.extend(adapter.canonical().splitlines())
        return "".join(f"{line}\n" for line in sorted(lines))

    @property
    def config_hash(self) -> str:
        return config_digest(self.canonical())

    @property
    def adapter_hash(self) -> str:
        return (self.image if self.adapter is AdapterKind.IMAGE else self.text).config_hash


def _render(value: Any) -> str:
    if isinstance(value, enum.Enum):
        return str(value.value)
    if isinstance(value, bool):
        return str(value).lower()
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_render(v) for v in value)
    return str(value)


def _bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"{text!r} is not a boolean")


def _optional(parse: Callable[[str], Any]) -> Callable[[str], Any]:
    def inner(text: str) -> Any:
        return None if text in ("", "none") else parse(text)

    return inner


_SECTIONS: Mapping[str, Mapping[str, Callable[[str], Any]]] = {
    "dataset": {
        "format": DatasetFormat,
        "path": str,
        "partition": str,
        "binary": _bool,
        "channel": str,
        "subjects": _optional(int),
        "trim_wake_minutes": _optional(float),
        "stage_mapping": _optional(str),
        "channels": int,
        "length": int,
        "classes": int,
        "per_class": int,
        "separation": float,
        "seed": int,
    },
    "image": {
        "preset": str,
        "height": int,
        "width": int,
        "reshape": str,
        "normalization": str,
        "global_min": _optional(float),
        "global_max": _optional(float),
    },
    "text": {
        "preset": str,
        "alpha": float,
        "max_len": int,
        "aggregator": str,
        "separator": str,
        "integer_input": _bool,
        "downsampling": str,
        "force": _bool,
        "legacy_flatten": _bool,
    },
    "split": {
        "ratios": parse_ratios,
        "seed": int,
        "stratify": _bool,
        "by_group": _bool,
    },
    "probe": {
        "enabled": _bool,
        "pool": int,
        "learning_rate": float,
        "epochs": int,
        "batch_size": int,
        "seed": int,
        "l2": float,
    },
    "": {
        "adapter": AdapterKind,
        "output_root": str,
        "parallelism": int,
    },
}

_TRAIN_KEYS = frozenset(f.name for f in fields(TrainConfig))


def _image(kwargs: Dict[str, Any]) -> ImageAdapterConfig:
    preset = kwargs.pop("preset", None)
    if preset is not None:
        base = ImageAdapterConfig.from_preset(preset)
        kwargs.setdefault("height", base.height)
        kwargs.setdefault("width", base.width)
    return ImageAdapterConfig(**kwargs)


def _text(kwargs: Dict[str, Any]) -> TextAdapterConfig:
    preset = kwargs.pop("preset", None)
    if preset is not None:
        kwargs.setdefault("max_len", TextAdapterConfig.from_preset(preset).max_len)
    return TextAdapterConfig(**kwargs)


def parse_config(text: str, source: str = "config") -> PipelineConfig:
    """
    Build a :class:`PipelineConfig` from ``key = value`` text; unset keys keep their defaults.

    .. code-block:: python3

        >>> c = parse_config("adapter = text\\ndataset.channels = 1\\ntext.preset = bert\\n")
        >>> c.adapter.value, c.text.max_len
        ('text', 512)
    """
    settings: Dict[str, Dict[str, Any]] = {name: {} for name in _SECTIONS}
    for lineno, key, value in parse_key_value_lines(text, source):
        section, _, name = key.rpartition(".")
        parsers = _SECTIONS.get(section)
        if parsers is None or name not in parsers:
            raise ValidationError(f"{source}, line {lineno}: unknown key {key!r}")
        try:
            settings[section][name] = parsers[name](value)
        except (ValueError, ValidationError) as exc:
            raise ValidationError(f"{source}, line {lineno}: bad value for {key!r}: {exc}") from None
    try:
        probe = dict(settings["probe"])
        train = TrainConfig(**{k: probe.pop(k) for k in list(probe) if k in _TRAIN_KEYS})
        return PipelineConfig(
            dataset=DatasetSpec(**settings["dataset"]),
            image=_image(dict(settings["image"])),
            text=_text(dict(settings["text"])),
            split=SplitSpec(**settings["split"]),
            probe=ProbeSpec(train=train, **probe),
            **settings[""],
        )
    except ValueError as exc:
        raise ValidationError(f"{source}: {exc}") from None


def load_config(
    path: Optional[PathLike] = None,
    environ: Optional[Mapping[str, str]] = None,
    **overrides: Any,
) -> PipelineConfig:
    """
    Read a configuration file (or start from defaults), then apply the output-root environment variable.

    *overrides* replace top-level :class:`PipelineConfig` fields after everything else.
    """
    if path is None:
        config = PipelineConfig()
    else:
        try:
            with open(path, encoding="utf-8") as f:
                text = f.read()
        except OSError as exc:
            raise ArtifactError(f"cannot read config {path}: {exc}") from None
        config = parse_config(text, str(path))
    env = os.environ if environ is None else environ
    root = env.get(OUTPUT_ROOT_ENV)
    if root:
        config = replace(config, output_root=root)
    if overrides:
        config = replace(config, **overrides)
    return config

"""
The ``sigadapt`` command line.

Data goes to files, results to standard output and log events to standard error.
Exit status: 0 success, 1 invalid input or configuration, 2 unreadable or corrupt artifacts,
3 numeric failure.
"""
import logging
import pathlib
from typing import Any, Dict, List, Optional, Sequence

import click

from sigadapt.config import DatasetFormat, DatasetSpec, load_config
from sigadapt.errors import SigAdaptError
from sigadapt.image import IMAGE_PRESETS, ImageAdapterConfig, Normalization, ReshapePolicy
from sigadapt.logs import configure_logging
from sigadapt.manifest import dumps_record
from sigadapt.pipeline import (
    convert_images,
    convert_texts,
    evaluate_directory,
    evaluation_records,
    ingest,
    inspect,
    probe_directory,
    run_pipeline,
)
from sigadapt.probe import TrainConfig, load_head, save_head
from sigadapt.signal import load_dataset, save_dataset
from sigadapt.split import load_split, parse_ratios, save_split, split_dataset
from sigadapt.text import TEXT_PRESETS, Aggregator, Downsampling, TextAdapterConfig
from sigadapt.version import __version__

_LEVELS = ("debug", "info", "warning", "error")


@click.group()
@click.version_option(__version__, prog_name="sigadapt")
@click.option("--log-level", type=click.Choice(_LEVELS), default="info", show_default=True)
def cli(log_level: str) -> None:
    """
    Convert multi-channel time series into model-ready images and text
    """
    configure_logging(getattr(logging, log_level.upper()))


@cli.command("ingest")
@click.option(
    "--format",
    "fmt",
    type=click.Choice([f.value for f in DatasetFormat]),
    required=True,
)
@click.option("--path", type=click.Path(exists=True), help="source file or directory")
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--partition", default="train", show_default=True, help="HAR partition")
@click.option("--binary", is_flag=True, help="seizure vs non-seizure labels")
@click.option("--channel", default="Fpz-Cz", show_default=True, help="sleep EEG channel")
@click.option("--subjects", type=click.IntRange(min=1), help="keep the first N sleep subjects")
@click.option("--trim-wake-minutes", type=float, help="trim wake beyond this margin")
@click.option("--stage-mapping", type=click.Path(exists=True, dir_okay=False))
@click.option("--channels", type=int, default=9, show_default=True)
@click.option("--length", type=int, default=128, show_default=True)
@click.option("--classes", type=int, default=6, show_default=True)
@click.option("--per-class", type=int, default=50, show_default=True)
@click.option("--separation", type=float, default=3.0, show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
def ingest_command(fmt: str, out: str, **kwargs: Any) -> None:
    """
    Parse a dataset (or generate a synthetic one) into OUT.
    """
    dataset = ingest(DatasetSpec(format=DatasetFormat(fmt), **kwargs))
    save_dataset(dataset, out)
    click.echo(dumps_record({"dataset": dataset.name, "instances": len(dataset), "out": out}))


@cli.command("split")
@click.option("--dataset", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--ratios", default="0.6,0.2,0.2", show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--stratify", is_flag=True, help="keep the class mix in every partition")
@click.option("--by-group", is_flag=True, help="split whole subjects")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def split_command(
    dataset: str, ratios: str, seed: int, stratify: bool, by_group: bool, out: str
) -> None:
    """
    Assign every instance of DATASET to train, valid or test.
    """
    manifest = load_dataset(dataset).manifest
    split = split_dataset(manifest, parse_ratios(ratios), seed, stratify=stratify, by_group=by_group)
    save_split(split, out)
    train, valid, test = split.sizes
    click.echo(dumps_record({"train": train, "valid": valid, "test": test, "out": out}))


@cli.group("convert")
def convert() -> None:
    """
    Convert a split dataset into images or text
    """


_dataset_option = click.option(
    "--dataset", type=click.Path(exists=True, file_okay=False), required=True
)
_split_option = click.option("--split", "split_path", type=click.Path(exists=True, dir_okay=False), required=True)
_config_option = click.option(
    "--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="pipeline config file"
)


@convert.command("image")
@_dataset_option
@_split_option
@_config_option
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--preset", type=click.Choice(sorted(IMAGE_PRESETS)))
@click.option("--height", type=int)
@click.option("--width", type=int)
@click.option("--reshape", type=click.Choice([p.value for p in ReshapePolicy]))
@click.option(
    "--norm",
    type=click.Choice(["per-instance", "global"]),
    help="per-instance min-max or fixed global bounds",
)
@click.option("--global-min", type=float)
@click.option("--global-max", type=float)
@click.option("--parallelism", type=click.IntRange(min=1))
def convert_image_command(
    dataset: str,
    split_path: str,
    config_path: Optional[str],
    out: str,
    preset: Optional[str],
    norm: Optional[str],
    parallelism: Optional[int],
    **flags: Any,
) -> None:
    """
    Write one PNG per instance plus a sidecar manifest into OUT.
    """
    config = load_config(config_path)
    base = config.image
    if preset is not None:
        base = ImageAdapterConfig.from_preset(
            preset, reshape=base.reshape, normalization=base.normalization,
            global_min=base.global_min, global_max=base.global_max,
        )
    settings: Dict[str, Any] = {
        "height": base.height,
        "width": base.width,
        "reshape": base.reshape,
        "normalization": base.normalization,
        "global_min": base.global_min,
        "global_max": base.global_max,
    }
    settings.update({k: v for k, v in flags.items() if v is not None})
    if norm is not None:
        settings["normalization"] = Normalization(norm.replace("-", "_"))
    image = ImageAdapterConfig(**settings)
    convert_images(
        load_dataset(dataset), load_split(split_path), image, out, parallelism or config.parallelism
    )
    click.echo(dumps_record({"config_hash": image.config_hash, "out": out}))


@convert.command("text")
@_dataset_option
@_split_option
@_config_option
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--preset", type=click.Choice(sorted(TEXT_PRESETS)))
@click.option("--alpha", type=float)
@click.option("--max-len", type=int)
@click.option("--aggregator", type=click.Choice([a.value for a in Aggregator]))
@click.option("--downsampling", type=click.Choice([d.value for d in Downsampling]))
@click.option("--separator")
@click.option("--integer-input/--no-integer-input", default=None)
@click.option("--force/--no-force", default=None, help="convert even beyond three budgets")
@click.option("--legacy-flatten/--no-legacy-flatten", default=None)
@click.option("--parallelism", type=click.IntRange(min=1))
def convert_text_command(
    dataset: str,
    split_path: str,
    config_path: Optional[str],
    out: str,
    preset: Optional[str],
    parallelism: Optional[int],
    **flags: Any,
) -> None:
    """
    Write one text file per partition plus a sidecar manifest into OUT.
    """
    config = load_config(config_path)
    base = config.text
    settings: Dict[str, Any] = {
        "alpha": base.alpha,
        "max_len": TEXT_PRESETS[preset] if preset is not None else base.max_len,
        "aggregator": base.aggregator,
        "separator": base.separator,
        "integer_input": base.integer_input,
        "downsampling": base.downsampling,
        "force": base.force,
        "legacy_flatten": base.legacy_flatten,
    }
    settings.update({k: v for k, v in flags.items() if v is not None})
    text = TextAdapterConfig(**settings)
    convert_texts(
        load_dataset(dataset), load_split(split_path), text, out, parallelism or config.parallelism
    )
    click.echo(dumps_record({"config_hash": text.config_hash, "out": out}))


@cli.group("probe")
def probe() -> None:
    """
    Train and evaluate the linear probe on converted instances
    """


_in_option = click.option("--in", "directory", type=click.Path(exists=True, file_okay=False), required=True)
_probe_split_option = click.option(
    "--split", "split_path", type=click.Path(exists=True, dir_okay=False),
    help="reassign partitions from this split manifest",
)
_pool_option = click.option("--pool", type=click.IntRange(min=1), default=1, show_default=True)


def _print_scores(records: Sequence[Any]) -> None:
    for record in records:
        click.echo(dumps_record(record))


@probe.command("train")
@_in_option
@_probe_split_option
@_pool_option
@click.option("--epochs", type=click.IntRange(min=0), default=20, show_default=True)
@click.option("--lr", type=float, default=1e-2, show_default=True)
@click.option("--batch-size", type=click.IntRange(min=1), default=16, show_default=True)
@click.option("--l2", type=float, default=0.0, show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def probe_train_command(
    directory: str,
    split_path: Optional[str],
    pool: int,
    epochs: int,
    lr: float,
    batch_size: int,
    l2: float,
    seed: int,
    out: str,
) -> None:
    """
    Fit a head on the train partition, save it to OUT and print the scores of every partition.
    """
    config = TrainConfig(learning_rate=lr, epochs=epochs, batch_size=batch_size, seed=seed, l2=l2)
    split = load_split(split_path) if split_path else None
    head, history, scores = probe_directory(directory, config, pool, split)
    save_head(head, out)
    click.echo(dumps_record({"objective": history[-1], "epochs": epochs}))
    _print_scores(evaluation_records(scores))


@probe.command("eval")
@click.option("--head", "head_path", type=click.Path(exists=True, dir_okay=False), required=True)
@_in_option
@_probe_split_option
@_pool_option
def probe_eval_command(head_path: str, directory: str, split_path: Optional[str], pool: int) -> None:
    """
    Print accuracy, macro-F1 and the confusion matrix of every partition.
    """
    split = load_split(split_path) if split_path else None
    _print_scores(evaluation_records(evaluate_directory(load_head(head_path), directory, pool, split)))


@cli.command("inspect")
@click.argument("path", type=click.Path(exists=True))
def inspect_command(path: str) -> None:
    """
    Describe an artifact: manifest, PNG, text file, samples or probe head.
    """
    for line in inspect(path):
        click.echo(line)


@cli.command("run")
@_config_option
@click.option("--output-root", type=click.Path(file_okay=False), help="overrides config and environment")
@click.option("--parallelism", type=click.IntRange(min=1))
@click.option("--fresh", is_flag=True, help="discard results of earlier runs")
@click.pass_context
def run_command(
    ctx: click.Context,
    config_path: Optional[str],
    output_root: Optional[str],
    parallelism: Optional[int],
    fresh: bool,
) -> None:
    """
    Run ingest, split, convert and probe, printing the summary.
    """
    overrides: Dict[str, Any] = {}
    if output_root is not None:
        overrides["output_root"] = str(pathlib.Path(output_root))
    if parallelism is not None:
        overrides["parallelism"] = parallelism
    report = run_pipeline(load_config(config_path, **overrides), fresh=fresh)
    click.echo(dumps_record({**report.summary, "directory": str(report.directory)}))
    if report.status:
        click.echo(f"error: {report.error}", err=True)
        ctx.exit(report.status)


def main(argv: Optional[List[str]] = None) -> int:
    """Run the command line and return its exit status"""
    try:
        rv = cli.main(args=argv, prog_name="sigadapt", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except SigAdaptError as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.exit_code
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return rv if isinstance(rv, int) else 0

"""
Command line entry point: `python -m src.cli <command>`. Every option can be set through an environment variable
named SBD_<COMMAND>_<OPTION>, e.g. SBD_DEBUG_TREES=50.
"""
from __future__ import annotations

import json
import logging
import sys
from contextlib import contextmanager
from pathlib import Path

import click
import numpy as np

from src.base import CompareStrategy, FairnessMetric, ForestParams, SearchConfig
from src.config import RunConfig
from src.dare_forest import DareForest
from src.dataset import Dataset, discretize, load_dataset, split_dataset
from src.errors import ConfigError, DatasetError, DebuggerError, UnbiasedModelError
from src.fairness import model_bias
from src.harness import run_bench, run_fidelity
from src.lattice import LatticeSearch, verify_top_k
from src.plotter import plot_fidelity, plot_runtime
from src.report import EXTENSIONS, diagnose, render_tables

logger = logging.getLogger(__name__)

LEVELS = [logging.WARNING, logging.INFO, logging.DEBUG]


class NothingToDebug(click.ClickException):
    exit_code = 2


@contextmanager
def stage(name: str):
    """
    Turn library errors raised inside a pipeline stage into click errors carrying the stage name.
    """
    try:
        yield
    except UnbiasedModelError as err:
        raise NothingToDebug(str(err)) from err
    except (DebuggerError, OSError) as err:
        raise click.ClickException(f"{name} failed: {err}") from err


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")


def _require_categorical(d: Dataset) -> Dataset:
    for spec in d.schema.attributes:
        if not spec.is_categorical:
            raise DatasetError(f"attribute {spec.name!r} is continuous, run `prepare` first")
    return d


def _load(cfg: RunConfig) -> tuple:
    """
    Ingest, split and discretize; test bins reuse the training cut-points.
    """
    raw = load_dataset(cfg.train_path, cfg.schema_path, role="train")
    if cfg.test_path is not None:
        raw_test = load_dataset(cfg.test_path, cfg.schema_path, role="test", like=raw)
        raw_train = raw
    else:
        raw_train, raw_test = split_dataset(raw, cfg.test_split, cfg.forest.seed)
    train = discretize(raw_train, cfg.bins)
    test = discretize(raw_test, cfg.bins, reference=train.schema)
    logger.info("train n=%d, test n=%d, p=%d", train.n, test.n, train.p)
    return train, test


def _forest_params(trees, max_depth, d_rand, k_thresholds, seed, threads) -> ForestParams:
    return ForestParams(
        n_trees=trees, max_depth=max_depth, d_rand=d_rand, k_thresholds=k_thresholds, seed=seed, n_jobs=threads
    )


def _metric(name: str) -> FairnessMetric:
    return FairnessMetric.from_name(name)


def _strategy(name: str) -> CompareStrategy:
    try:
        return CompareStrategy(name)
    except ValueError:
        raise ConfigError(f"unknown compare strategy {name!r}, expected normal or perInstance") from None


def _options(*decorators):
    def apply(func):
        for decorator in reversed(decorators):
            func = decorator(func)
        return func

    return apply


DATA_OPTIONS = _options(
    click.option("--train", "train_path", required=True, help="Training CSV, or the full dataset with --test-split."),
    click.option("--test", "test_path", default=None, help="Test CSV."),
    click.option("--schema", "schema_path", required=True, help="JSON schema file."),
    click.option("--test-split", type=float, default=None, help="Held-out fraction (0.2 when --test is absent)."),
    click.option("--bins", type=int, default=4, show_default=True, help="Quantile bins per continuous attribute."),
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--out", "out_dir", default="out", show_default=True, help="Output directory."),
)

FOREST_OPTIONS = _options(
    click.option("--trees", type=int, default=100, show_default=True),
    click.option("--max-depth", type=int, default=10, show_default=True),
    click.option("--d-rand", type=int, default=2, show_default=True, help="Levels split at random."),
    click.option("--k-thresholds", type=int, default=5, show_default=True, help="Cached candidates per attribute."),
    click.option("--threads", type=int, default=1, show_default=True, help="Worker cap (-1 for every core)."),
)

METRIC_OPTION = click.option("--metric", default="sp", show_default=True, help="sp, pp or eo.")


@click.group(context_settings={"auto_envvar_prefix": "SBD", "help_option_names": ["-h", "--help"]})
@click.option("-v", "--verbose", count=True, help="-v for progress, -vv for debugging output.")
def main(verbose: int) -> None:
    """
    Find the training-data subsets most responsible for the bias of a random forest.
    """
    logging.basicConfig(
        level=LEVELS[min(verbose, len(LEVELS) - 1)],
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


@main.command()
@DATA_OPTIONS
def prepare(train_path, test_path, schema_path, test_split, bins, seed, out_dir) -> None:
    """
    Ingest, split and discretize; write the prepared CSVs and the binned schema.
    """
    with stage("config"):
        cfg = RunConfig(
            train_path=Path(train_path),
            schema_path=Path(schema_path),
            out_dir=Path(out_dir),
            test_path=None if test_path is None else Path(test_path),
            test_split=test_split,
            bins=bins,
            forest=ForestParams(seed=seed),
        ).validate()
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        cfg.write_resolved()
    with stage("ingest"):
        train, test = _load(cfg)
        train.save(cfg.out_dir / "train.csv", cfg.out_dir / "schema.json")
        test.save(cfg.out_dir / "test.csv")
    click.echo(f"prepared {train.n} training and {test.n} test rows in {cfg.out_dir}")


@main.command()
@click.option("--train", "train_path", required=True, help="Prepared training CSV.")
@click.option("--schema", "schema_path", required=True, help="Prepared JSON schema.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", default="out", show_default=True)
@FOREST_OPTIONS
def fit(train_path, schema_path, seed, out_dir, trees, max_depth, d_rand, k_thresholds, threads) -> None:
    """
    Fit a forest on prepared data and save it as JSON.
    """
    out = Path(out_dir)
    with stage("config"):
        params = _forest_params(trees, max_depth, d_rand, k_thresholds, seed, threads).validate()
        out.mkdir(parents=True, exist_ok=True)
    with stage("ingest"):
        train = _require_categorical(load_dataset(train_path, schema_path, role="train"))
    with stage("fit"):
        forest = DareForest(params).fit(train)
        forest.save(out / "forest.json")
    click.echo(f"saved a {params.n_trees}-tree forest to {out / 'forest.json'}")


@main.command()
@click.option("--forest", "forest_path", required=True, help="Forest JSON written by `fit`.")
@click.option("--test", "test_path", required=True, help="Prepared test CSV.")
@click.option("--schema", "schema_path", required=True, help="Prepared JSON schema.")
@click.option("--out", "out_dir", default="out", show_default=True)
@METRIC_OPTION
def bias(forest_path, test_path, schema_path, out_dir, metric) -> None:
    """
    Measure the bias of a saved forest on prepared test data.
    """
    out = Path(out_dir)
    with stage("config"):
        fairness = _metric(metric)
        out.mkdir(parents=True, exist_ok=True)
    with stage("ingest"):
        test = _require_categorical(load_dataset(test_path, schema_path, role="test"))
    with stage("bias"):
        forest = DareForest.load(forest_path)
        report, acc = model_bias(forest, test, fairness)
        _write_json(out / "bias.json", {**report.to_dict(), "accuracy": acc})
    click.echo(f"{fairness.value}: {report.value:+.4f} (bias {report.magnitude:.4f}, accuracy {acc:.4f})")


@main.command()
@DATA_OPTIONS
@FOREST_OPTIONS
@METRIC_OPTION
@click.option("--support-min", type=float, default=0.05, show_default=True)
@click.option("--support-max", type=float, default=0.15, show_default=True)
@click.option("--max-literals", type=int, default=2, show_default=True)
@click.option("--compare-strategy", default="normal", show_default=True, help="normal or perInstance.")
@click.option("--compare-original-parity", type=click.BOOL, default=True, show_default=True)
@click.option("--compare-parents/--no-compare-parents", default=True, show_default=True)
@click.option("--k", "k", type=int, default=5, show_default=True, help="Number of explanations.")
@click.option("--verify/--no-verify", default=False, help="Verify every explanation by retraining.")
@click.option("--trace/--no-trace", default=False, help="Write every visited subset to trace.jsonl.")
@click.option("--retrain-diagnostics/--no-retrain-diagnostics", default=False)
@click.option("--format", "fmt", default="csv", show_default=True, help="csv, json or markdown.")
def debug(
    train_path,
    test_path,
    schema_path,
    test_split,
    bins,
    seed,
    out_dir,
    trees,
    max_depth,
    d_rand,
    k_thresholds,
    threads,
    metric,
    support_min,
    support_max,
    max_literals,
    compare_strategy,
    compare_original_parity,
    compare_parents,
    k,
    verify,
    trace,
    retrain_diagnostics,
    fmt,
) -> None:
    """
    Full pipeline: ingest, fit, measure bias, search, verify and report the top-k explanations.
    """
    out = Path(out_dir)
    with stage("config"):
        search = SearchConfig(
            max_literals=max_literals,
            support_range=(support_min, support_max),
            compare_strategy=_strategy(compare_strategy),
            compare_original_parity=compare_original_parity,
            k=k,
            metric=_metric(metric),
            compare_parents=compare_parents,
            n_jobs=threads,
            trace_path=out / "trace.jsonl" if trace else None,
        )
        cfg = RunConfig(
            train_path=Path(train_path),
            schema_path=Path(schema_path),
            out_dir=out,
            test_path=None if test_path is None else Path(test_path),
            test_split=test_split,
            bins=bins,
            forest=_forest_params(trees, max_depth, d_rand, k_thresholds, seed, threads),
            search=search,
            verify=verify,
            trace=trace,
            fmt=fmt,
            retrain_diagnostics=retrain_diagnostics,
        ).validate()
        out.mkdir(parents=True, exist_ok=True)
        cfg.write_resolved()
    with stage("ingest"):
        train, test = _load(cfg)
    with stage("fit"):
        forest = DareForest(cfg.forest).fit(train)
    with stage("bias"):
        before, acc = model_bias(forest, test, search.metric)
        _write_json(out / "bias_before.json", {**before.to_dict(), "accuracy": acc})
        if before.exact_magnitude == 0:
            raise UnbiasedModelError()
    with stage("search"):
        explanations = LatticeSearch(search).fit(train, test, forest).explanations_
    if cfg.verify:
        with stage("verify"):
            verify_top_k(explanations, train, test, search, cfg.forest)
    with stage("report"):
        diagnostics = diagnose(explanations, forest, train, cfg.forest, cfg.retrain_diagnostics)
        table = render_tables(explanations, diagnostics, cfg.fmt)
        (out / f"explanations.{EXTENSIONS[cfg.fmt]}").write_text(table, encoding="utf-8")
        _write_json(
            out / "explanations_full.json",
            {
                "explanations": [e.to_dict() for e in explanations],
                "diagnostics": [d.to_dict() for d in diagnostics],
            },
        )
    if not explanations:
        click.echo("no responsible subset found", err=True)
    click.echo(table, nl=False)


@main.command()
@DATA_OPTIONS
@FOREST_OPTIONS
@METRIC_OPTION
@click.option("--n-random", type=int, default=100, show_default=True)
@click.option("--n-coherent", type=int, default=100, show_default=True)
@click.option("--band-min", type=float, default=0.0, show_default=True)
@click.option("--band-max", type=float, default=0.05, show_default=True)
@click.option("--max-literals", type=int, default=2, show_default=True)
@click.option("--plot/--no-plot", default=False, help="Write the fidelity scatter plot.")
def fidelity(
    train_path,
    test_path,
    schema_path,
    test_split,
    bins,
    seed,
    out_dir,
    trees,
    max_depth,
    d_rand,
    k_thresholds,
    threads,
    metric,
    n_random,
    n_coherent,
    band_min,
    band_max,
    max_literals,
    plot,
) -> None:
    """
    Compare unlearned and retrained fairness on random and coherent subsets.
    """
    out = Path(out_dir)
    with stage("config"):
        cfg = RunConfig(
            train_path=Path(train_path),
            schema_path=Path(schema_path),
            out_dir=out,
            test_path=None if test_path is None else Path(test_path),
            test_split=test_split,
            bins=bins,
            forest=_forest_params(trees, max_depth, d_rand, k_thresholds, seed, threads),
            search=SearchConfig(max_literals=max_literals, support_range=(band_min, band_max), metric=_metric(metric)),
            plot=plot,
        ).validate()
        if n_random < 0 or n_coherent < 0:
            raise ConfigError("subset counts must be >= 0")
        out.mkdir(parents=True, exist_ok=True)
        cfg.write_resolved()
    with stage("ingest"):
        train, test = _load(cfg)
    with stage("fit"):
        forest = DareForest(cfg.forest).fit(train)
    with stage("fidelity"):
        report = run_fidelity(
            train, test, forest, cfg.search.metric, n_random, n_coherent, cfg.search.support_range, max_literals, seed
        )
        report.pairs.to_csv(out / "fidelity_pairs.csv", index=False, lineterminator="\n")
        _write_json(out / "fidelity_summary.json", {"metric": report.metric.value, "summary": report.summary})
    if plot:
        with stage("plot"):
            plot_fidelity(report.pairs, out / "fidelity.png", cfg.search.metric.value)
    click.echo(json.dumps(report.summary["all"], indent=2, sort_keys=True))


def _parse_sizes(ctx, param, value: str) -> list:
    try:
        sizes = [tuple(int(x) for x in item.lower().split("x")) for item in value.split(",") if item.strip()]
    except ValueError:
        raise click.BadParameter("expected a comma separated list such as 1000x5,2000x5") from None
    if any(len(size) != 2 or min(size) < 1 for size in sizes):
        raise click.BadParameter("every size must read NxM with positive N and M")
    return sizes


@main.command()
@click.option("--sizes", default="1000x5,2000x5,4000x5", show_default=True, callback=_parse_sizes, help="NxM list.")
@click.option("--subset-fraction", type=float, default=0.05, show_default=True)
@click.option("--search/--no-search", "with_search", default=False, help="Time the lattice search as well.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", default="out", show_default=True)
@click.option("--plot/--no-plot", default=False, help="Write the runtime curve.")
@FOREST_OPTIONS
def bench(sizes, subset_fraction, with_search, seed, out_dir, trees, max_depth, d_rand, k_thresholds, threads, plot) -> None:
    """
    Runtime of fitting, unlearning and retraining on synthetic data of growing size.
    """
    out = Path(out_dir)
    with stage("config"):
        params = _forest_params(trees, max_depth, d_rand, k_thresholds, seed, threads).validate()
        if not 0 < subset_fraction < 1:
            raise ConfigError("subset fraction must lie in (0, 1)")
        out.mkdir(parents=True, exist_ok=True)
    with stage("bench"):
        table = run_bench(sizes, params, SearchConfig(n_jobs=threads) if with_search else None, subset_fraction, seed)
        table.to_csv(out / "bench.csv", index=False, lineterminator="\n")
    if plot:
        with stage("plot"):
            plot_runtime(table, out / "runtime.png")
    click.echo(table.to_csv(index=False, lineterminator="\n"), nl=False)


if __name__ == "__main__":
    main()

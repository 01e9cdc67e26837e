"""
Command-line interface for the taxonomy acceptability experiments.
Every command reads one run config and writes into its own subdirectory of the run directory.
"""
from functools import wraps
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import pandas as pd
import structlog
import typer
from rich.console import Console
from rich.table import Table

from config.settings import (
    BINARY_BASELINE_STRATEGY, RunConfig, Settings, dataset_handles, load_run_config,
)
from core.augment import augment_binary_corpus, dedupe_against, translate_corpus
from core.baseline import (
    TfidfSvmClassifier, fit_tfidf, load_model, predict_scores, save_model, sweep_regressors,
    train_regressor,
)
from core.container import Container, create_container
from core.corpus import (
    extract_patterns, load_task_file, make_corpus, parse_template, read_corpus_tsv, read_df_index,
    read_patterns_list, read_patterns_tsv, read_split_tsv, write_corpus_tsv, write_df_index,
    write_patterns_list, write_patterns_tsv, write_split_tsv, split_dev_validation,
)
from core.data_models import Corpus, DevValSplit, Language, Pattern, TaskMode
from core.evaluation import (
    MetricsReport, PatternErrorReport, RegressorSweepReport, ablation_table, binary_metrics,
    emit_global, emit_report, per_pattern_errors, spearman_rho,
)
from core.exceptions import (
    ConfigError, InfeasibleSplitError, MissingArtifactError, ShapeError, StageFailedError,
    TaxonomyError,
)
from core.factory import load_backend
from core.pipeline import (
    TrainingPlan, build_training_plan, execute_plan, load_commonsense_file, predict_labels,
    write_trace,
)
from core.run_manager import RunDirectory
from utils.logging import log_execution_time, setup_logging

# Initialize Typer app
app = typer.Typer(help="Taxonomy acceptability experiment pipeline")

# Initialize Rich console
console = Console()
err_console = Console(stderr=True)

logger = structlog.get_logger(__name__)

CONFIG_OPTION = typer.Option(..., "--config", "-c", help="Run config file (YAML)")
SEED_OPTION = typer.Option(None, "--seed", help="Override the config seed")
RUN_DIR_OPTION = typer.Option(None, "--run-dir", help="Override paths.run_dir")
LANGUAGE_OPTION = typer.Option(None, "--language", help="Override the run language (en, fr, it)")
STRATEGY_OPTION = typer.Option(None, "--strategy", help="Override the strategy")
OVERWRITE_OPTION = typer.Option(False, "--overwrite", help="Replace this command's existing artifacts")


class RunContext(NamedTuple):
    config: RunConfig
    settings: Settings
    container: Container
    run: RunDirectory


def handle_errors(func):
    """Zamienia wyjątki potoku na komunikat i kod wyjścia."""

    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (typer.Exit, typer.Abort):
            raise
        except TaxonomyError as e:
            err_console.print(f"[red]{type(e).__name__}: {e}[/red]")
            raise typer.Exit(e.exit_code)
        except Exception as e:
            logger.exception("command_failed", command=func.__name__, error=str(e))
            err_console.print(f"[red]Unexpected error: {e}[/red]")
            raise typer.Exit(1)

    return wrapper


def _bootstrap(
    config: Path,
    seed: Optional[int] = None,
    run_dir: Optional[Path] = None,
    language: Optional[str] = None,
    strategy: Optional[str] = None,
) -> RunContext:
    run_config = load_run_config(
        config, {"seed": seed, "run_dir": run_dir, "language": language, "strategy": strategy},
    )
    container = create_container(run_config)
    settings = container.settings()
    setup_logging(settings.log_level, settings.log_dir / "taxacc.log")
    logger.info(
        "run_config_loaded", config=str(config), task=run_config.task.value,
        language=run_config.language.value, strategy=run_config.strategy, seed=run_config.seed,
    )
    return RunContext(run_config, settings, container, RunDirectory(run_config.paths.run_dir))


def _load_input(config: RunConfig, language: Language) -> Corpus:
    return load_task_file(config.paths.inputs[language], config.task, language=language)


def _read_split(ctx: RunContext) -> DevValSplit:
    cfg = ctx.config
    held_out = read_patterns_list(ctx.run.require("prepare", "held_out_patterns.tsv"), cfg.language)
    return read_split_tsv(ctx.run.require("prepare", "split.tsv"), cfg.language, cfg.task, held_out)


def _write_tsv(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, sep="\t", index=False, lineterminator="\n")
    return path


def _print_artifacts(command: str, artifacts: List[Path]) -> None:
    table = Table(title=f"{command}: artifacts")
    table.add_column("file")
    for path in artifacts:
        table.add_row(str(path))
    console.print(table)


def _print_frame(title: str, frame: pd.DataFrame) -> None:
    table = Table(title=title)
    for column in frame.columns:
        table.add_column(str(column))
    for row in frame.itertuples(index=False):
        table.add_row(*(str(v) for v in row))
    console.print(table)


@app.command()
@handle_errors
@log_execution_time()
def prepare(
    config: Path = CONFIG_OPTION,
    seed: Optional[int] = SEED_OPTION,
    run_dir: Optional[Path] = RUN_DIR_OPTION,
    language: Optional[str] = LANGUAGE_OPTION,
    strategy: Optional[str] = STRATEGY_OPTION,
    overwrite: bool = OVERWRITE_OPTION,
):
    """Split the run-language corpus into dev/val and extract nouns and patterns."""
    ctx = _bootstrap(config, seed, run_dir, language, strategy)
    cfg = ctx.config
    held_out = [parse_template(text, cfg.language) for text in cfg.split.complex_patterns]

    corpus = _load_input(cfg, cfg.language)
    flagged, records = extract_patterns(corpus, threshold=cfg.split.df_threshold)
    try:
        split = split_dev_validation(
            flagged,
            dev_fraction=cfg.split.dev_fraction,
            complex_patterns=held_out,
            seed=cfg.seed,
            example_patterns={r.example_id: r.pattern for r in records},
            stratify=cfg.split.stratify,
        )
    except InfeasibleSplitError as e:
        raise InfeasibleSplitError(
            f"{e} (config {config}: split.dev_fraction={cfg.split.dev_fraction}, "
            f"split.complex_patterns={len(cfg.split.complex_patterns)})"
        ) from e

    out = ctx.run.command_dir("prepare", overwrite)
    artifacts = [
        write_split_tsv(split, out / "split.tsv"),
        write_df_index(flagged.df_index, out / "df_index.tsv"),
        write_patterns_tsv(records, out / "patterns.tsv"),
        write_patterns_list(held_out, out / "held_out_patterns.tsv"),
    ]
    ctx.run.record(
        "prepare", cfg.snapshot(), cfg.seed, artifacts,
        {"original": corpus.fingerprint(), "dev": split.dev.fingerprint(), "val": split.val.fingerprint()},
    )
    console.print(
        f"[green]dev {len(split.dev)} / val {len(split.val)}, "
        f"{len({r.pattern for r in records})} patterns[/green]"
    )
    _print_artifacts("prepare", artifacts)


@app.command()
@handle_errors
@log_execution_time()
def augment(
    config: Path = CONFIG_OPTION,
    seed: Optional[int] = SEED_OPTION,
    run_dir: Optional[Path] = RUN_DIR_OPTION,
    language: Optional[str] = LANGUAGE_OPTION,
    strategy: Optional[str] = STRATEGY_OPTION,
    overwrite: bool = OVERWRITE_OPTION,
):
    """Build the nlpaug dataset and the translated, deduplicated datasets."""
    ctx = _bootstrap(config, seed, run_dir, language, strategy)
    cfg = ctx.config
    if cfg.task is not TaskMode.BINARY:
        raise ConfigError("augment is defined for the binary task only")
    translator = None
    if cfg.augment.translate_from:
        translator = ctx.container.translator()
        # Brak poświadczeń ma wyjść przed jakąkolwiek pracą
        translator.validate()

    split = _read_split(ctx)
    out = ctx.run.command_dir("augment", overwrite)
    fill = ctx.container.fill_model(reference=split.dev)
    nlpaug = augment_binary_corpus(
        split.dev, fill, seed=cfg.seed, max_edits=cfg.augment.max_edits,
        variants_per_example=cfg.augment.variants_per_example,
    )
    artifacts = [write_corpus_tsv(nlpaug, out / "nlpaug.tsv")]
    fingerprints = {"nlpaug": nlpaug.fingerprint()}

    if translator is not None:
        reference = _load_input(cfg, cfg.language)
        val_ids = set(split.val.ids())
        cache = ctx.container.translation_cache()
        for source in cfg.augment.translate_from:
            foreign = _load_input(cfg, source)
            foreign = make_corpus(
                [e for e in foreign.examples if e.id not in val_ids], source, TaskMode.BINARY,
            )
            translated = translate_corpus(
                foreign, cfg.language, translator, cache,
                max_in_flight=cfg.augment.max_in_flight,
                retries=cfg.augment.retries,
                backoff_seconds=cfg.augment.backoff_seconds,
                failure_threshold=cfg.augment.failure_threshold,
            )
            result = dedupe_against(translated, reference)
            name = f"translated_{source.value}"
            artifacts.append(write_corpus_tsv(result.corpus, out / f"{name}.tsv"))
            fingerprints[name] = result.corpus.fingerprint()
            console.print(
                f"{source.value} -> {cfg.language.value}: kept {len(result.corpus)}, "
                f"dropped {result.dropped} (dedupe rate {result.dropped_fraction:.2%})"
            )

    ctx.run.record("augment", cfg.snapshot(), cfg.seed, artifacts, fingerprints)
    console.print(f"[green]nlpaug: {len(nlpaug)} examples from {len(split.dev)} dev examples[/green]")
    _print_artifacts("augment", artifacts)


def _load_datasets(ctx: RunContext, handles: List[str], split: DevValSplit) -> Dict[str, Corpus]:
    cfg = ctx.config
    datasets: Dict[str, Corpus] = {}
    for handle in handles:
        if handle == "original":
            datasets[handle] = split.dev
        elif handle == "nlpaug":
            datasets[handle] = read_corpus_tsv(
                ctx.run.require("augment", "nlpaug.tsv"), cfg.language, TaskMode.BINARY,
            )
        elif handle == "translated":
            parts = [
                read_corpus_tsv(
                    ctx.run.require("augment", f"translated_{source.value}.tsv"),
                    cfg.language, TaskMode.BINARY,
                )
                for source in cfg.augment.translate_from
            ]
            datasets[handle] = make_corpus(
                [e for part in parts for e in part.examples], cfg.language, TaskMode.BINARY,
            )
        elif handle == "commonsense":
            datasets[handle] = load_commonsense_file(cfg.paths.commonsense, cfg.language)
    return datasets


def _features(ctx: RunContext, texts: List[str], vectorizer: Any = None) -> Tuple[Any, Any]:
    """Cechy dla regresora: embeddingi enkodera albo TF-IDF."""
    cfg = ctx.config
    if cfg.regression.features == "tfidf":
        if vectorizer is None:
            vectorizer = fit_tfidf(texts, cfg.baseline.ngram_max, cfg.baseline.analyzer)
        return vectorizer.transform(texts), vectorizer
    return ctx.container.encoder().encode(texts), None


def _train_pipeline(ctx: RunContext, out: Path) -> Tuple[List[Path], Dict[str, str], List[Dict[str, Any]]]:
    cfg = ctx.config
    split = _read_split(ctx)
    df_index = read_df_index(ctx.run.require("prepare", "df_index.tsv"))
    plan = build_training_plan(cfg.strategy, cfg.language, dataset_handles(cfg), cfg.hyperparameters)
    datasets = _load_datasets(ctx, plan.dataset_handles(), split)

    plan_path = out / "plan.yaml"
    with open(plan_path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(plan.to_yaml())
    try:
        result = execute_plan(plan, ctx.container.backend(), cfg.seed, datasets, df_index)
    except StageFailedError as e:
        write_trace(e.trace, out / "trace.jsonl")
        raise
    artifacts = [
        plan_path,
        write_trace(result.trace, out / "trace.jsonl"),
        result.backend.save(out / "model.bin"),
    ]
    fingerprints = {handle: corpus.fingerprint() for handle, corpus in datasets.items()}
    fingerprints["model"] = result.backend.fingerprint()
    for record in result.trace:
        console.print(
            f"stage {record.stage}: {', '.join(record.datasets)} "
            f"lr={record.learning_rate} examples={record.examples} [{record.status}]"
        )
    return artifacts, fingerprints, [record.model_dump(mode="json") for record in result.trace]


@app.command()
@handle_errors
@log_execution_time()
def train(
    config: Path = CONFIG_OPTION,
    seed: Optional[int] = SEED_OPTION,
    run_dir: Optional[Path] = RUN_DIR_OPTION,
    language: Optional[str] = LANGUAGE_OPTION,
    strategy: Optional[str] = STRATEGY_OPTION,
    overwrite: bool = OVERWRITE_OPTION,
):
    """Train the configured model on the dev split (and augmented data)."""
    ctx = _bootstrap(config, seed, run_dir, language, strategy)
    cfg = ctx.config
    ctx.run.require("prepare", "split.tsv")
    out = ctx.run.command_dir("train", overwrite)
    trace = None

    if cfg.task is TaskMode.LIKERT:
        dev = _read_split(ctx).dev
        features, vectorizer = _features(ctx, dev.texts())
        model = train_regressor(
            features, dev.targets(), cfg.regression.kind, k=cfg.regression.k,
            epsilon=cfg.regression.epsilon, C=cfg.regression.C, seed=cfg.seed,
        )
        envelope = {"regressor": model, "vectorizer": vectorizer, "features": cfg.regression.features}
        artifacts = [save_model(envelope, "regressor", out / "model.bin")]
        fingerprints = {"original": dev.fingerprint()}
    elif cfg.strategy == BINARY_BASELINE_STRATEGY:
        dev = _read_split(ctx).dev
        model = TfidfSvmClassifier.fit(dev, cfg.baseline.ngram_max, cfg.baseline.analyzer)
        artifacts = [save_model(model, TfidfSvmClassifier.kind, out / "model.bin")]
        fingerprints = {"original": dev.fingerprint()}
    else:
        artifacts, fingerprints, trace = _train_pipeline(ctx, out)

    ctx.run.record("train", cfg.snapshot(), cfg.seed, artifacts, fingerprints, trace)
    _print_artifacts("train", artifacts)


@app.command()
@handle_errors
@log_execution_time()
def predict(
    config: Path = CONFIG_OPTION,
    seed: Optional[int] = SEED_OPTION,
    run_dir: Optional[Path] = RUN_DIR_OPTION,
    language: Optional[str] = LANGUAGE_OPTION,
    strategy: Optional[str] = STRATEGY_OPTION,
    overwrite: bool = OVERWRITE_OPTION,
    input_file: Optional[Path] = typer.Option(
        None, "--input", help="Task file to label instead of the validation split"
    ),
):
    """Predict labels (binary) or scores (likert) aligned with the input order."""
    ctx = _bootstrap(config, seed, run_dir, language, strategy)
    cfg = ctx.config
    model_path = ctx.run.require("train", "model.bin")
    if input_file is None:
        corpus = _read_split(ctx).val
    else:
        corpus = load_task_file(input_file, cfg.task, language=cfg.language)

    if cfg.task is TaskMode.LIKERT:
        envelope = load_model(model_path, "regressor")
        features, _ = _features(ctx, corpus.texts(), envelope["vectorizer"])
        scores = predict_scores(envelope["regressor"], features, clamp=cfg.regression.clamp)
        values = [repr(float(s)) for s in scores]
    elif cfg.strategy == BINARY_BASELINE_STRATEGY:
        values = load_model(model_path, TfidfSvmClassifier.kind).predict(corpus.texts())
    else:
        plan = TrainingPlan.from_yaml(ctx.run.require("train", "plan.yaml").read_text(encoding="utf-8"))
        backend = load_backend(cfg.providers.backend, model_path)
        df_index = read_df_index(ctx.run.require("prepare", "df_index.tsv"))
        values = predict_labels(backend, corpus, plan.prompt_mode, df_index)

    out = ctx.run.command_dir("predict", overwrite)
    path = _write_tsv(pd.DataFrame({"id": corpus.ids(), "prediction": values}), out / "predictions.tsv")
    ctx.run.record("predict", cfg.snapshot(), cfg.seed, [path], {"input": corpus.fingerprint()})
    console.print(f"[green]{len(values)} predictions[/green]")
    _print_artifacts("predict", [path])


def _run_metrics(run: RunDirectory, task: TaskMode) -> Tuple[Language, Any, List[Any], Corpus]:
    """(język, metryka, predykcje, zbiór val) dla jednego katalogu przebiegu."""
    manifest = run.load_manifest()
    if "language" not in manifest.config:
        raise MissingArtifactError(f"{run.root}/manifest.json", "prepare")
    language = Language(manifest.config["language"])
    if TaskMode(manifest.config["task"]) is not task:
        raise ConfigError(f"run {run.root} is a {manifest.config['task']} run, expected {task.value}")
    held_out = read_patterns_list(run.require("prepare", "held_out_patterns.tsv"), language)
    gold = read_split_tsv(run.require("prepare", "split.tsv"), language, task, held_out).val
    frame = pd.read_csv(run.require("predict", "predictions.tsv"), sep="\t", dtype=str, keep_default_na=False)
    if len(frame) != len(gold):
        raise ShapeError(f"{run.root}: {len(frame)} predictions for {len(gold)} validation examples")
    if list(frame["id"]) != gold.ids():
        raise ShapeError(f"{run.root}: prediction ids are not aligned with the validation split")
    if task is TaskMode.BINARY:
        preds: List[Any] = [int(v) for v in frame["prediction"]]
        return language, binary_metrics(preds, gold.targets()), preds, gold
    preds = [float(v) for v in frame["prediction"]]
    return language, spearman_rho(preds, gold.targets()), preds, gold


def _pattern_report(run: RunDirectory, language: Language, preds: List[int], gold: Corpus,
                    model: str) -> PatternErrorReport:
    by_id: Dict[str, Pattern] = {
        r.example_id: r.pattern for r in read_patterns_tsv(run.require("prepare", "patterns.tsv"), language)
    }
    held_out = read_patterns_list(run.require("prepare", "held_out_patterns.tsv"), language)
    dev = read_split_tsv(run.require("prepare", "split.tsv"), language, TaskMode.BINARY, held_out).dev
    training_patterns = [by_id[i] for i in dev.ids() if i in by_id]
    return per_pattern_errors(
        preds, gold.targets(), [by_id.get(i) for i in gold.ids()], training_patterns, model=model,
    )


@app.command()
@handle_errors
@log_execution_time()
def evaluate(
    config: Path = CONFIG_OPTION,
    seed: Optional[int] = SEED_OPTION,
    run_dir: Optional[Path] = RUN_DIR_OPTION,
    language: Optional[str] = LANGUAGE_OPTION,
    strategy: Optional[str] = STRATEGY_OPTION,
    overwrite: bool = OVERWRITE_OPTION,
    with_run: Optional[List[Path]] = typer.Option(
        None, "--with-run", help="Run directory of another language to include (repeatable)"
    ),
):
    """Score predictions against the validation split (F1 for binary, Spearman rho for likert)."""
    ctx = _bootstrap(config, seed, run_dir, language, strategy)
    cfg = ctx.config
    own_language, own_metric, preds, gold = _run_metrics(ctx.run, cfg.task)
    per_language = {own_language: own_metric}
    for other in with_run or []:
        other_language, other_metric, _, _ = _run_metrics(RunDirectory(other), cfg.task)
        if other_language in per_language:
            raise ConfigError(f"language '{other_language.value}' is covered twice")
        per_language[other_language] = other_metric

    out = ctx.run.command_dir("evaluate", overwrite)
    report = MetricsReport(task=cfg.task, per_language=per_language)
    stem = f"metrics_{own_language.value}"
    artifacts = [
        emit_report(report, "tsv", out / f"{stem}.tsv"),
        emit_report(report, "markdown", out / f"{stem}.md"),
        emit_report(report, "plot-data", out / f"{stem}_plot.tsv"),
    ]
    if report.global_value is not None:
        artifacts.append(emit_global(report, out / "global.tsv"))
    if cfg.task is TaskMode.BINARY:
        patterns = _pattern_report(ctx.run, own_language, preds, gold, cfg.strategy)
        artifacts.append(emit_report(patterns, "tsv", out / "pattern_errors.tsv"))

    ctx.run.record("evaluate", cfg.snapshot(), cfg.seed, artifacts)
    _print_frame("metrics", report.to_frame())
    if report.global_value is not None:
        _print_frame("global", report.global_frame())
    _print_artifacts("evaluate", artifacts)


def _parse_named_run(value: str) -> Tuple[str, Path]:
    name, sep, path = value.partition("=")
    if not sep or not name or not path:
        raise ConfigError(f"--run expects NAME=DIR, got '{value}'")
    return name, Path(path)


@app.command()
@handle_errors
@log_execution_time()
def analyze(
    config: Path = CONFIG_OPTION,
    seed: Optional[int] = SEED_OPTION,
    run_dir: Optional[Path] = RUN_DIR_OPTION,
    language: Optional[str] = LANGUAGE_OPTION,
    strategy: Optional[str] = STRATEGY_OPTION,
    overwrite: bool = OVERWRITE_OPTION,
    runs: Optional[List[str]] = typer.Option(
        None, "--run", help="Named run to compare, NAME=DIR (repeatable)"
    ),
):
    """Compare runs: per-pattern error rates and the ablation table."""
    ctx = _bootstrap(config, seed, run_dir, language, strategy)
    cfg = ctx.config
    if cfg.task is not TaskMode.BINARY:
        raise ConfigError("analyze is defined for the binary task only")
    named = [_parse_named_run(value) for value in runs or []] or [(cfg.strategy, cfg.paths.run_dir)]

    reports = []
    ablation_runs = []
    for name, path in named:
        run = RunDirectory(path)
        run_language, metrics, preds, gold = _run_metrics(run, TaskMode.BINARY)
        reports.append(_pattern_report(run, run_language, preds, gold, name))
        plan_path = run.root / "train" / "plan.yaml"
        if plan_path.exists():
            plan = TrainingPlan.from_yaml(plan_path.read_text(encoding="utf-8"))
            ablation_runs.append((name, plan.model_dump(mode="json"), metrics))
        else:
            logger.warning("ablation_run_without_plan", run=name)

    out = ctx.run.command_dir("analyze", overwrite)
    combined = PatternErrorReport.combine(*reports)
    artifacts = [
        emit_report(combined, "tsv", out / "pattern_errors.tsv"),
        emit_report(combined, "plot-data", out / "pattern_errors_plot.tsv"),
    ]
    if ablation_runs:
        ablation = ablation_table(ablation_runs)
        artifacts.append(emit_report(ablation, "tsv", out / "ablation.tsv"))
        artifacts.append(emit_report(ablation, "markdown", out / "ablation.md"))
        _print_frame("ablation", ablation.to_frame())

    ctx.run.record("analyze", cfg.snapshot(), cfg.seed, artifacts)
    _print_artifacts("analyze", artifacts)


@app.command()
@handle_errors
@log_execution_time()
def sweep(
    config: Path = CONFIG_OPTION,
    seed: Optional[int] = SEED_OPTION,
    run_dir: Optional[Path] = RUN_DIR_OPTION,
    language: Optional[str] = LANGUAGE_OPTION,
    strategy: Optional[str] = STRATEGY_OPTION,
    overwrite: bool = OVERWRITE_OPTION,
):
    """Train every configured regressor kind on dev and report rho on val (likert task)."""
    ctx = _bootstrap(config, seed, run_dir, language, strategy)
    cfg = ctx.config
    if cfg.task is not TaskMode.LIKERT:
        raise ConfigError("sweep is defined for the likert task only")
    split = _read_split(ctx)
    train_features, vectorizer = _features(ctx, split.dev.texts())
    eval_features, _ = _features(ctx, split.val.texts(), vectorizer)
    results = sweep_regressors(
        train_features, split.dev.targets(), eval_features, split.val.targets(),
        kinds=cfg.regression.sweep_kinds, seed=cfg.seed,
    )

    out = ctx.run.command_dir("sweep", overwrite)
    report = RegressorSweepReport(results={cfg.language: results})
    artifacts = [
        emit_report(report, "tsv", out / "regressor_sweep.tsv"),
        emit_report(report, "plot-data", out / "regressor_sweep_plot.tsv"),
    ]
    ctx.run.record("sweep", cfg.snapshot(), cfg.seed, artifacts)
    _print_frame("regressor sweep", report.to_frame())
    _print_artifacts("sweep", artifacts)


if __name__ == "__main__":
    app()

"""
Metryki ewaluacji (F1 klasy pozytywnej, rho Spearmana), wynik globalny,
analiza błędów per wzorzec oraz zapis raportów w stałym formacie.
"""

from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict, Field

from core.data_models import Language, Pattern, TaskMode
from core.exceptions import (
    PreconditionError, ReportFormatError, ShapeError, UndefinedCorrelationError,
)

logger = structlog.get_logger(__name__)

REPORT_FORMATS = ("tsv", "markdown", "plot-data")
LANGUAGE_ORDER = (Language.EN, Language.FR, Language.IT)
LANGUAGE_NAMES = {Language.EN: "English", Language.FR: "French", Language.IT: "Italian"}


class BinaryMetrics(BaseModel):
    model_config = ConfigDict(frozen=True)

    precision: float = Field(ge=0, le=1)
    recall: float = Field(ge=0, le=1)
    f1: float = Field(ge=0, le=1)
    tp: int
    fp: int
    fn: int
    tn: int
    flags: Tuple[str, ...] = ()

    @property
    def support(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def primary(self) -> float:
        return self.f1


class RhoResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    rho: float = Field(ge=-1, le=1)
    n: int = Field(ge=2)
    tie_policy: str = "average"

    @property
    def primary(self) -> float:
        return self.rho


def f1_from_precision_recall(precision: float, recall: float) -> float:
    """Średnia harmoniczna P i R; 0 gdy P + R = 0."""
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _check_aligned(preds: Sequence, golds: Sequence, minimum: int) -> None:
    if len(preds) != len(golds):
        raise ShapeError(f"{len(preds)} predictions but {len(golds)} gold values")
    if len(golds) < minimum:
        raise PreconditionError(f"need at least {minimum} values, got {len(golds)}")


def binary_metrics(preds: Sequence[int], golds: Sequence[int]) -> BinaryMetrics:
    """
    Precyzja, czułość i F1 dla klasy pozytywnej (etykieta 1).

    A zero denominator defines the metric as 0 and adds a flag naming it.
    """
    _check_aligned(preds, golds, 1)
    p = np.asarray(preds, dtype=int)
    g = np.asarray(golds, dtype=int)
    if not set(np.unique(np.concatenate([p, g]))) <= {0, 1}:
        raise PreconditionError("binary metrics need labels in {0, 1}")
    tp = int(np.sum((p == 1) & (g == 1)))
    fp = int(np.sum((p == 1) & (g == 0)))
    fn = int(np.sum((p == 0) & (g == 1)))
    tn = int(np.sum((p == 0) & (g == 0)))
    flags: List[str] = []
    precision = tp / (tp + fp) if tp + fp else 0.0
    if tp + fp == 0:
        flags.append("precision_undefined")
    recall = tp / (tp + fn) if tp + fn else 0.0
    if tp + fn == 0:
        flags.append("recall_undefined")
    return BinaryMetrics(
        precision=precision, recall=recall, f1=f1_from_precision_recall(precision, recall),
        tp=tp, fp=fp, fn=fn, tn=tn, flags=tuple(flags),
    )


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """Rangi 1..n, remisy dostają średnią rangę."""
    return pd.Series(np.asarray(values, dtype=float)).rank(method="average").to_numpy()


def spearman_rho(preds: Sequence[float], golds: Sequence[float]) -> RhoResult:
    """
    Współczynnik Spearmana jako korelacja Pearsona wektorów rang.

    Raises:
        UndefinedCorrelationError: Jeden z wektorów jest stały
    """
    _check_aligned(preds, golds, 2)
    x = average_ranks(preds)
    y = average_ranks(golds)
    x = x - x.mean()
    y = y - y.mean()
    denominator = np.sqrt((x @ x) * (y @ y))
    if denominator == 0:
        raise UndefinedCorrelationError("Spearman rho is undefined for a constant vector")
    rho = float(np.clip((x @ y) / denominator, -1.0, 1.0))
    return RhoResult(rho=rho, n=len(x))


def global_score(per_language: Mapping[Union[Language, str], float]) -> float:
    """
    Średnia arytmetyczna metryki głównej po trzech językach.

    Raises:
        PreconditionError: Brakuje któregoś z języków (z jego nazwą)
    """
    values = {Language(k): v for k, v in per_language.items()}
    for language in LANGUAGE_ORDER:
        if language not in values:
            raise PreconditionError(f"global score needs language '{language.value}'")
    return float(np.mean([values[language] for language in LANGUAGE_ORDER]))


def format_percent(value: float) -> str:
    """Ułamek jako procent z dwoma miejscami po przecinku."""
    return str(Decimal(repr(value * 100)).quantize(Decimal("0.01"), rounding=ROUND_HALF_EVEN))


def format_rho(value: float) -> str:
    if np.isnan(value):
        return "nan"
    return str(Decimal(repr(value)).quantize(Decimal("0.001"), rounding=ROUND_HALF_EVEN))


class MetricsReport(BaseModel):
    """Metryki per język oraz wynik globalny (gdy obecne są wszystkie trzy języki)."""

    task: TaskMode
    per_language: Dict[Language, Union[BinaryMetrics, RhoResult]]

    @property
    def global_value(self) -> Optional[float]:
        if set(self.per_language) != set(LANGUAGE_ORDER):
            return None
        return global_score({k: v.primary for k, v in self.per_language.items()})

    def _languages(self) -> List[Language]:
        return [language for language in LANGUAGE_ORDER if language in self.per_language]

    def to_frame(self) -> pd.DataFrame:
        rows = []
        languages = self._languages()
        if self.task is TaskMode.BINARY:
            for language in languages:
                m = self.per_language[language]
                rows.append([LANGUAGE_NAMES[language], format_percent(m.recall),
                             format_percent(m.precision), format_percent(m.f1)])
            if len(languages) > 1:
                metrics = [self.per_language[language] for language in languages]
                rows.append(["Average"] + [
                    format_percent(float(np.mean([getattr(m, name) for m in metrics])))
                    for name in ("recall", "precision", "f1")
                ])
            return pd.DataFrame(rows, columns=["language", "recall", "precision", "f1"])
        for language in languages:
            rows.append([LANGUAGE_NAMES[language], format_rho(self.per_language[language].rho)])
        if len(languages) > 1:
            rows.append(["Average", format_rho(float(np.mean(
                [self.per_language[language].rho for language in languages]
            )))])
        return pd.DataFrame(rows, columns=["language", "rho"])

    def plot_frame(self) -> pd.DataFrame:
        metric = "f1" if self.task is TaskMode.BINARY else "rho"
        rows = [
            [language.value, metric, repr(float(self.per_language[language].primary))]
            for language in self._languages()
        ]
        return pd.DataFrame(rows, columns=["language", "metric", "value"])

    def global_frame(self) -> pd.DataFrame:
        value = self.global_value
        if value is None:
            raise PreconditionError("global report needs en, fr and it")
        metric = "f1" if self.task is TaskMode.BINARY else "rho"
        formatted = format_percent(value) if self.task is TaskMode.BINARY else format_rho(value)
        return pd.DataFrame([[metric, formatted]], columns=["metric", "global"])


class PatternErrorRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    pattern: str
    model: str
    error_pct: float = Field(ge=0, le=100)
    seen: bool
    occurrences: int = Field(ge=1)
    wrong: int = Field(ge=0)


class PatternErrorReport(BaseModel):
    rows: Tuple[PatternErrorRow, ...] = ()

    @classmethod
    def combine(cls, *reports: "PatternErrorReport") -> "PatternErrorReport":
        """Łączy raporty kilku modeli, grupując wiersze po wzorcu."""
        rows = [row for report in reports for row in report.rows]
        return cls(rows=tuple(sorted(rows, key=lambda r: (r.pattern, r.model))))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [[r.pattern, r.model, f"{r.error_pct:.2f}", str(r.seen).lower(), r.occurrences, r.wrong]
             for r in self.rows],
            columns=["pattern", "model", "error_pct", "seen", "occurrences", "wrong"],
        )

    def plot_frame(self) -> pd.DataFrame:
        return self.to_frame()[["pattern", "model", "error_pct", "seen"]].rename(columns={"error_pct": "pct"})


def per_pattern_errors(
    preds: Sequence[int],
    golds: Sequence[int],
    patterns: Sequence[Optional[Pattern]],
    training_patterns: Iterable[Pattern] = (),
    model: str = "model",
) -> PatternErrorReport:
    """
    Procent błędnych predykcji dla każdego wzorca.

    Denominators are pattern frequencies in the evaluated set; examples
    without a pattern are left out.
    """
    _check_aligned(preds, golds, 0)
    if len(patterns) != len(golds):
        raise ShapeError(f"{len(patterns)} patterns for {len(golds)} examples")
    seen_patterns = set(training_patterns)
    counts: Dict[Pattern, List[int]] = {}
    for pred, gold, pattern in zip(preds, golds, patterns):
        if pattern is None:
            continue
        occurrences, wrong = counts.get(pattern, [0, 0])
        counts[pattern] = [occurrences + 1, wrong + int(int(pred) != int(gold))]
    rows = [
        PatternErrorRow(
            pattern=pattern.display(), model=model,
            error_pct=100.0 * wrong / occurrences, seen=pattern in seen_patterns,
            occurrences=occurrences, wrong=wrong,
        )
        for pattern, (occurrences, wrong) in counts.items()
    ]
    return PatternErrorReport(rows=tuple(sorted(rows, key=lambda r: (r.pattern, r.model))))


class AblationRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    run: str
    strategy: str
    stage1: Tuple[str, ...]
    stage2: Tuple[str, ...] = ()
    metrics: BinaryMetrics


class AblationReport(BaseModel):
    rows: Tuple[AblationRow, ...] = ()

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [[r.run, r.strategy, "+".join(r.stage1), "+".join(r.stage2) or "-",
              format_percent(r.metrics.recall), format_percent(r.metrics.precision),
              format_percent(r.metrics.f1)] for r in self.rows],
            columns=["run", "strategy", "stage1", "stage2", "recall", "precision", "f1"],
        )

    def plot_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [[r.run, repr(r.metrics.f1)] for r in self.rows], columns=["run", "f1"],
        )


def ablation_table(runs: Sequence[Tuple[str, Mapping[str, object], BinaryMetrics]]) -> AblationReport:
    """
    Tabela ablacji: dla każdego przebiegu zbiory etapu 1 i 2 oraz R, P, F1.

    Args:
        runs: (nazwa, plan jako dict z kluczami strategy/stages, metryki)
    """
    rows = []
    for name, plan, metrics in runs:
        stages = [tuple(stage["datasets"]) for stage in plan["stages"]]  # type: ignore[index]
        rows.append(AblationRow(
            run=name, strategy=str(plan["strategy"]), stage1=stages[0],
            stage2=stages[1] if len(stages) > 1 else (), metrics=metrics,
        ))
    return AblationReport(rows=tuple(rows))


class RegressorSweepReport(BaseModel):
    """rho per (język, regresor)."""

    results: Dict[Language, Dict[str, float]]

    def to_frame(self) -> pd.DataFrame:
        models = sorted({m for per_model in self.results.values() for m in per_model})
        rows = [
            [LANGUAGE_NAMES[language]] + [format_rho(self.results[language].get(m, float("nan"))) for m in models]
            for language in LANGUAGE_ORDER if language in self.results
        ]
        return pd.DataFrame(rows, columns=["language"] + models)

    def plot_frame(self) -> pd.DataFrame:
        rows = [
            [language.value, model, repr(float(rho))]
            for language in LANGUAGE_ORDER if language in self.results
            for model, rho in sorted(self.results[language].items())
        ]
        return pd.DataFrame(rows, columns=["language", "model", "rho"])


Report = Union[MetricsReport, PatternErrorReport, AblationReport, RegressorSweepReport]


def _markdown(frame: pd.DataFrame) -> str:
    # komórki są już sformatowanymi napisami, tabulate nie może ich parsować jako liczb
    return frame.to_markdown(index=False, tablefmt="pipe", disable_numparse=True) + "\n"


def emit_report(report: Report, fmt: str, path: Union[str, Path]) -> Path:
    """
    Zapisuje raport do pliku; ten sam raport daje zawsze identyczne bajty.

    Raises:
        ReportFormatError: Nieznany format (z listą obsługiwanych)
    """
    if fmt not in REPORT_FORMATS:
        raise ReportFormatError(fmt, list(REPORT_FORMATS))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "markdown":
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(_markdown(report.to_frame()))
    else:
        frame = report.to_frame() if fmt == "tsv" else report.plot_frame()
        frame.to_csv(path, sep="\t", index=False, lineterminator="\n")
    logger.info("report_written", path=str(path), format=fmt, kind=type(report).__name__)
    return path


def emit_global(report: MetricsReport, path: Union[str, Path]) -> Path:
    """Zapisuje wynik globalny (średnia po en, fr, it) do `global.tsv`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    report.global_frame().to_csv(path, sep="\t", index=False, lineterminator="\n")
    logger.info("report_written", path=str(path), format="tsv", kind="global")
    return path

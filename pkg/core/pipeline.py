"""
Plany treningu wieloetapowego: deklaratywne strategie, wykonanie na backendzie
klasyfikatora i zapis śladu wykonania.
"""

from enum import Enum
from pathlib import Path
from typing import (
    Any, Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union,
)

import numpy as np
import pandas as pd
import structlog
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from core.backends import ClassifierBackend
from core.corpus import extract_nouns_with_fallback, make_corpus, usable_examples
from core.data_models import Corpus, Example, Language, NounPair, TaskMode
from core.exceptions import (
    BackendError, MissingDatasetError, ParameterError, PlanError, PreconditionError, SchemaError,
    StageFailedError, UnknownStrategyError,
)
from utils.logging import log_execution_time

logger = structlog.get_logger(__name__)

DEFAULT_EPOCHS = 4
DEFAULT_BATCH_SIZE = 8
STAGE1_LEARNING_RATE = 3e-5
STAGE2_LEARNING_RATE = 4e-5
OPTIMIZERS = ("adamw",)
LR_SCHEDULES = ("linear", "constant")
DATASET_HANDLES = ("original", "nlpaug", "translated", "commonsense")
SEP_TOKEN = "[SEP]"


class PromptMode(str, Enum):
    SENTENCE = "sentence"
    ENRICHED = "enriched"


class StageConfig(BaseModel):
    """Jeden etap dostrajania: zbiory danych i hiperparametry."""

    model_config = ConfigDict(frozen=True)

    datasets: Tuple[str, ...] = Field(min_length=1)
    learning_rate: float = Field(gt=0)
    epochs: int = Field(default=DEFAULT_EPOCHS, ge=1)
    batch_size: int = Field(default=DEFAULT_BATCH_SIZE, ge=1)
    optimizer: str = "adamw"
    lr_schedule: str = "linear"

    @field_validator("optimizer")
    @classmethod
    def known_optimizer(cls, v: str) -> str:
        if v not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got '{v}'")
        return v

    @field_validator("lr_schedule")
    @classmethod
    def known_schedule(cls, v: str) -> str:
        if v not in LR_SCHEDULES:
            raise ValueError(f"lr_schedule must be one of {LR_SCHEDULES}, got '{v}'")
        return v


class TrainingPlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    strategy: str
    stages: Tuple[StageConfig, ...] = Field(min_length=1, max_length=2)
    language: Language
    prompt_mode: PromptMode = PromptMode.SENTENCE
    head: Optional[str] = None

    @model_validator(mode="after")
    def uu_tax_learning_rates_increase(self) -> "TrainingPlan":
        if self.strategy == "uu_tax" and len(self.stages) == 2:
            first, second = self.stages
            if not first.learning_rate < second.learning_rate:
                raise PlanError(
                    f"uu_tax needs a lower stage-1 learning rate: "
                    f"{first.learning_rate} >= {second.learning_rate}"
                )
        return self

    def dataset_handles(self) -> List[str]:
        """Unikalne uchwyty zbiorów w kolejności pierwszego użycia."""
        return list(dict.fromkeys(h for stage in self.stages for h in stage.datasets))

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False, allow_unicode=True)

    @classmethod
    def from_yaml(cls, text: str) -> "TrainingPlan":
        return cls.model_validate(yaml.safe_load(text))


class HyperParameters(BaseModel):
    """Nadpisania hiperparametrów z konfiguracji przebiegu."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    epochs: int = DEFAULT_EPOCHS
    batch_size: int = DEFAULT_BATCH_SIZE
    stage1_learning_rate: float = STAGE1_LEARNING_RATE
    stage2_learning_rate: float = STAGE2_LEARNING_RATE
    optimizer: str = "adamw"
    lr_schedule: str = "linear"
    stage1_with_original: bool = False


class StrategySpec(NamedTuple):
    # (datasets, 1 = stage-1 learning rate, 2 = stage-2 learning rate)
    stages: Tuple[Tuple[Tuple[str, ...], int], ...]
    prompt_mode: PromptMode = PromptMode.SENTENCE
    head: Optional[str] = None


STRATEGIES: Dict[str, StrategySpec] = {
    "uu_tax": StrategySpec(((("nlpaug",), 1), (("translated", "original"), 2))),
    "ablation1": StrategySpec(((("nlpaug",), 1), (("original",), 2))),
    "ablation2": StrategySpec(((("translated",), 1), (("original",), 2))),
    "single_stage_1": StrategySpec(((("original",), 2),)),
    "single_stage_2": StrategySpec(((("nlpaug", "translated", "original"), 2),)),
    "multi_task": StrategySpec(((("commonsense",), 1), (("nlpaug", "original"), 2))),
    "data_enriched": StrategySpec(
        ((("nlpaug", "original"), 2),), prompt_mode=PromptMode.ENRICHED, head="bilstm",
    ),
}


def build_training_plan(
    strategy: str,
    language: Union[Language, str],
    data: Iterable[str],
    hp: Optional[Union[HyperParameters, Mapping[str, Any]]] = None,
) -> TrainingPlan:
    """
    Buduje plan treningu dla nazwanej strategii.

    Args:
        strategy: Identyfikator strategii (patrz `STRATEGIES`)
        language: Język przebiegu
        data: Dostępne uchwyty zbiorów danych
        hp: Nadpisania hiperparametrów

    Raises:
        UnknownStrategyError: Nieznana strategia (z listą poprawnych)
        MissingDatasetError: Brak wymaganego zbioru danych
        ParameterError: Niepoprawne hiperparametry
    """
    if strategy not in STRATEGIES:
        raise UnknownStrategyError(strategy, sorted(STRATEGIES))
    recipe = STRATEGIES[strategy]
    try:
        hp = hp if isinstance(hp, HyperParameters) else HyperParameters(**(hp or {}))
    except ValidationError as e:
        raise ParameterError(f"invalid hyper-parameters: {e.errors()[0]['msg']}") from e
    available = set(data)
    rates = {1: hp.stage1_learning_rate, 2: hp.stage2_learning_rate}

    stages = []
    for index, (datasets, rate_slot) in enumerate(recipe.stages):
        if strategy == "uu_tax" and index == 0 and hp.stage1_with_original:
            datasets = datasets + ("original",)
        for handle in datasets:
            if handle not in available:
                raise MissingDatasetError(handle, strategy)
        try:
            stages.append(StageConfig(
                datasets=datasets,
                learning_rate=rates[rate_slot],
                epochs=hp.epochs,
                batch_size=hp.batch_size,
                optimizer=hp.optimizer,
                lr_schedule=hp.lr_schedule,
            ))
        except ValidationError as e:
            raise ParameterError(f"invalid stage {index + 1}: {e.errors()[0]['msg']}") from e

    plan = TrainingPlan(
        strategy=strategy, stages=tuple(stages), language=Language(language),
        prompt_mode=recipe.prompt_mode, head=recipe.head,
    )
    logger.info(
        "plan_built", strategy=strategy, language=plan.language.value,
        stages=[(list(s.datasets), s.learning_rate) for s in plan.stages],
    )
    return plan


class EnrichedPrompt(BaseModel):
    """Zdanie wzbogacone o oba rzeczowniki, rozdzielone separatorem."""

    model_config = ConfigDict(frozen=True)

    sentence: str
    noun1: str
    noun2: str
    sep: str = SEP_TOKEN

    @property
    def segments(self) -> Tuple[str, str, str]:
        return self.sentence, self.noun1, self.noun2

    @property
    def text(self) -> str:
        return f" {self.sep} ".join(self.segments)


def build_enriched_prompt(example: Example, nouns: NounPair, sep: str = SEP_TOKEN) -> EnrichedPrompt:
    """Sentence, noun1 and noun2 joined by `sep`; framing tokens are left to the backend."""
    nouns.check_against(example.text)
    return EnrichedPrompt(sentence=example.text, noun1=nouns.noun1, noun2=nouns.noun2, sep=sep)


def render_inputs(
    examples: Sequence[Example],
    prompt_mode: PromptMode,
    df_index: Optional[Mapping[str, float]] = None,
) -> List[str]:
    """Teksty wejściowe dla backendu w zależności od trybu promptu."""
    if prompt_mode is PromptMode.SENTENCE:
        return [e.text for e in examples]
    if df_index is None:
        df_index = make_corpus(examples, examples[0].language, examples[0].task).df_index if examples else {}
    prompts = []
    for example in examples:
        nouns, _ = extract_nouns_with_fallback(example, df_index)
        prompts.append(build_enriched_prompt(example, nouns).text)
    return prompts


class StageTrace(BaseModel):
    """Wpis śladu wykonania jednego etapu."""

    stage: int
    datasets: Dict[str, str]
    learning_rate: float
    epochs: int
    batch_size: int
    examples: int
    status: str
    fingerprint_before: str
    fingerprint_after: Optional[str] = None
    error: Optional[str] = None


class ExecutionResult(NamedTuple):
    backend: ClassifierBackend
    trace: List[StageTrace]


@log_execution_time()
def execute_plan(
    plan: TrainingPlan,
    backend: ClassifierBackend,
    seed: int,
    datasets: Mapping[str, Corpus],
    df_index: Optional[Mapping[str, float]] = None,
) -> ExecutionResult:
    """
    Wykonuje etapy planu ściśle po kolei na jednym backendzie.

    Each stage concatenates its datasets (failed translations dropped),
    shuffles them with the run seed and fine-tunes the backend in place.

    Raises:
        MissingDatasetError: Plan odwołuje się do nieobecnego zbioru
        StageFailedError: Backend zawiódł; ślad zawiera etap oznaczony jako failed
    """
    for handle in plan.dataset_handles():
        if handle not in datasets:
            raise MissingDatasetError(handle, plan.strategy)
        if datasets[handle].task is not TaskMode.BINARY:
            raise PreconditionError(f"dataset '{handle}' is not a binary corpus")
    backend.configure_head(plan.head)

    trace: List[StageTrace] = []
    for index, stage in enumerate(plan.stages):
        examples = [e for h in stage.datasets for e in usable_examples(datasets[h]).examples]
        order = np.random.default_rng([seed, index]).permutation(len(examples))
        examples = [examples[i] for i in order]
        record = StageTrace(
            stage=index + 1,
            datasets={h: datasets[h].fingerprint() for h in stage.datasets},
            learning_rate=stage.learning_rate,
            epochs=stage.epochs,
            batch_size=stage.batch_size,
            examples=len(examples),
            status="running",
            fingerprint_before=backend.fingerprint(),
        )
        logger.info(
            "stage_started", stage=index + 1, datasets=list(stage.datasets),
            learning_rate=stage.learning_rate, examples=len(examples),
        )
        try:
            texts = render_inputs(examples, plan.prompt_mode, df_index)
            backend.fine_tune(texts, [e.label for e in examples], stage, seed=(seed, index))
        except Exception as e:
            trace.append(record.model_copy(update={"status": "failed", "error": str(e)}))
            logger.error("stage_failed", stage=index + 1, error=str(e))
            raise StageFailedError(index, trace, e) from e
        trace.append(record.model_copy(
            update={"status": "completed", "fingerprint_after": backend.fingerprint()}
        ))
    return ExecutionResult(backend, trace)


def write_trace(trace: Sequence[StageTrace], path: Union[str, Path]) -> Path:
    """Zapisuje ślad jako JSON lines, jeden etap na linię."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for record in trace:
            handle.write(record.model_dump_json() + "\n")
    return path


def read_trace(path: Union[str, Path]) -> List[StageTrace]:
    with open(path, encoding="utf-8") as handle:
        return [StageTrace.model_validate_json(line) for line in handle if line.strip()]


def _as_validity(value: Any) -> bool:
    text = str(value).strip().casefold()
    if text in ("1", "true", "yes", "valid"):
        return True
    if text in ("0", "false", "no", "invalid"):
        return False
    raise SchemaError("valid", f"cannot interpret '{value}' as validity")


def relabel_commonsense(
    records: Iterable[Mapping[str, Any]],
    language: Union[Language, str] = Language.EN,
) -> Corpus:
    """
    Zamienia zdania ze zbioru zdroworozsądkowego na korpus binarny.

    Label 1 marks a sensible sentence, 0 a nonsensical one.

    Raises:
        SchemaError: Brak pola `valid` lub `sentence`
    """
    language = Language(language)
    examples = []
    for position, record in enumerate(records):
        for field in ("sentence", "valid"):
            if field not in record:
                raise SchemaError(field, f"record {position} has no '{field}' field")
        examples.append(Example(
            id=str(record.get("id", f"cs-{position}")),
            text=record["sentence"],
            language=language,
            label=int(_as_validity(record["valid"])),
        ))
    if not examples:
        logger.warning("commonsense_empty")
    return make_corpus(examples, language, TaskMode.BINARY)


def explode_commonsense_pairs(rows: Iterable[Mapping[str, Any]]) -> List[Dict[str, Any]]:
    """
    Rozbija pary (sent0, sent1, label) na pojedyncze zdania z ważnością.

    `label` is the index of the nonsensical sentence in the pair.
    """
    records = []
    for position, row in enumerate(rows):
        for field in ("sent0", "sent1", "label"):
            if field not in row:
                raise SchemaError(field, f"pair {position} has no '{field}' field")
        nonsensical = int(row["label"])
        if nonsensical not in (0, 1):
            raise SchemaError("label", f"pair {position} points at sentence {nonsensical}")
        pair_id = str(row.get("id", position))
        for slot in (0, 1):
            records.append({
                "id": f"{pair_id}-{slot}",
                "sentence": row[f"sent{slot}"],
                "valid": slot != nonsensical,
            })
    return records


def load_commonsense_file(path: Union[str, Path], language: Union[Language, str] = Language.EN) -> Corpus:
    """Wczytuje TSV w formacie par (sent0/sent1/label) albo zdań (sentence/valid)."""
    frame = pd.read_csv(path, sep="\t", dtype=str, keep_default_na=False)
    rows = frame.to_dict(orient="records")
    if "sent0" in frame.columns:
        rows = explode_commonsense_pairs(rows)
    return relabel_commonsense(rows, language)


def predict_labels(
    backend: ClassifierBackend,
    corpus: Corpus,
    prompt_mode: PromptMode = PromptMode.SENTENCE,
    df_index: Optional[Mapping[str, float]] = None,
) -> List[int]:
    """Etykiety {0, 1} wyrównane z kolejnością korpusu."""
    labels = backend.predict(render_inputs(corpus.examples, prompt_mode, df_index))
    if len(labels) != len(corpus):
        raise BackendError(f"backend returned {len(labels)} labels for {len(corpus)} examples")
    return [int(label) for label in labels]

from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import yaml
from pydantic import (
    AliasChoices, BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator,
)
from pydantic_settings import BaseSettings, SettingsConfigDict

from core.data_models import MAX_EDITS, Language, TaskMode
from core.exceptions import ConfigError
from core.pipeline import STRATEGIES, HyperParameters

BINARY_BASELINE_STRATEGY = "tfidf_svm"
LIKERT_STRATEGY = "regressor"


class Settings(BaseSettings):
    """Ustawienia procesu i poświadczenia (tylko ze zmiennych środowiskowych)."""

    model_config = SettingsConfigDict(
        env_prefix="TAXACC_", env_file=".env", env_file_encoding="utf-8", extra="ignore",
    )

    log_level: str = "INFO"
    log_dir: Path = Path("logs")
    cache_dir: Path = Path(".cache/taxacc")

    # Tłumacz Google
    google_api_key: Optional[str] = Field(
        default=None,
        validation_alias=AliasChoices("TAXACC_GOOGLE_API_KEY", "GOOGLE_TRANSLATE_API_KEY"),
    )
    translate_endpoint: str = "https://translation.googleapis.com/language/translate/v2"
    request_timeout: int = 30


def get_settings() -> Settings:
    """Zwraca instancję ustawień."""
    return Settings()


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PathsConfig(_Section):
    inputs: Dict[Language, Path]
    run_dir: Path
    commonsense: Optional[Path] = None
    lexicon: Optional[Path] = None

    @model_validator(mode="after")
    def inputs_exist(self) -> "PathsConfig":
        for path in [*self.inputs.values(), self.commonsense, self.lexicon]:
            if path is not None and not path.exists():
                raise ValueError(f"path does not exist: {path}")
        return self


class SplitConfig(_Section):
    dev_fraction: float = Field(default=0.3, gt=0, lt=1)
    df_threshold: float = Field(default=0.05, gt=0, le=1)
    stratify: bool = True
    complex_patterns: List[str] = Field(default_factory=list)


class AugmentConfig(_Section):
    max_edits: int = Field(default=MAX_EDITS, ge=1, le=MAX_EDITS)
    variants_per_example: int = Field(default=1, ge=1)
    translate_from: List[Language] = Field(default_factory=list)
    max_in_flight: int = Field(default=4, ge=1)
    retries: int = Field(default=3, ge=1)
    backoff_seconds: float = Field(default=0.5, ge=0)
    failure_threshold: int = Field(default=5, ge=1)


class ProvidersConfig(_Section):
    fill_model: str = "bigram"
    fill_candidates: List[str] = Field(default_factory=list)
    translator: str = "dictionary"
    backend: str = "hashed_linear"
    encoder: str = "hashing"
    model_name: str = "google/electra-base-discriminator"
    fill_model_name: str = "bert-base-multilingual-cased"
    encoder_model: str = "distiluse-base-multilingual-cased-v1"
    encoder_dimension: int = Field(default=64, ge=1)
    lr_scale: float = Field(default=1e4, gt=0)


class BaselineConfig(_Section):
    ngram_max: int = Field(default=3, ge=1)
    analyzer: str = "word"

    @field_validator("analyzer")
    @classmethod
    def known_analyzer(cls, v: str) -> str:
        if v not in ("word", "char"):
            raise ValueError(f"analyzer must be 'word' or 'char', got '{v}'")
        return v


class RegressionConfig(_Section):
    features: str = "encoder"
    kind: str = "svr"
    k: int = Field(default=5, ge=1)
    epsilon: float = Field(default=0.2, ge=0)
    C: float = Field(default=1.0, gt=0)
    clamp: bool = False
    sweep_kinds: List[str] = Field(default_factory=lambda: ["ols", "knn", "tree", "svr"])

    @field_validator("features")
    @classmethod
    def known_features(cls, v: str) -> str:
        if v not in ("encoder", "tfidf"):
            raise ValueError(f"features must be 'encoder' or 'tfidf', got '{v}'")
        return v


class RunConfig(_Section):
    """Konfiguracja przebiegu eksperymentu wczytywana z pliku YAML."""

    task: TaskMode
    language: Language
    strategy: str
    seed: int = 0
    paths: PathsConfig
    split: SplitConfig = Field(default_factory=SplitConfig)
    augment: AugmentConfig = Field(default_factory=AugmentConfig)
    providers: ProvidersConfig = Field(default_factory=ProvidersConfig)
    hyperparameters: HyperParameters = Field(default_factory=HyperParameters)
    baseline: BaselineConfig = Field(default_factory=BaselineConfig)
    regression: RegressionConfig = Field(default_factory=RegressionConfig)

    @model_validator(mode="after")
    def consistent(self) -> "RunConfig":
        if self.language not in self.paths.inputs:
            raise ValueError(f"paths.inputs has no file for run language '{self.language.value}'")
        if self.task is TaskMode.LIKERT:
            if self.strategy != LIKERT_STRATEGY:
                raise ValueError(f"likert runs use strategy '{LIKERT_STRATEGY}', got '{self.strategy}'")
        else:
            valid = sorted(STRATEGIES) + [BINARY_BASELINE_STRATEGY]
            if self.strategy not in valid:
                raise ValueError(f"unknown strategy '{self.strategy}'; valid: {', '.join(valid)}")
            if self.strategy == "multi_task" and self.paths.commonsense is None:
                raise ValueError("strategy 'multi_task' needs paths.commonsense")
        for language in self.augment.translate_from:
            if language is self.language:
                raise ValueError("augment.translate_from must not contain the run language")
            if language not in self.paths.inputs:
                raise ValueError(f"augment.translate_from lists '{language.value}' without an input file")
        if self.providers.translator == "dictionary" and self.augment.translate_from and self.paths.lexicon is None:
            raise ValueError("translator 'dictionary' needs paths.lexicon")
        return self

    def snapshot(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


def _resolve_paths(raw: Dict[str, Any], base: Path) -> None:
    paths = raw.get("paths")
    if not isinstance(paths, dict):
        return

    def resolve(value: Any) -> Any:
        if value is None:
            return None
        path = Path(value)
        return str(path if path.is_absolute() else base / path)

    for key in ("run_dir", "commonsense", "lexicon"):
        if key in paths:
            paths[key] = resolve(paths[key])
    if isinstance(paths.get("inputs"), dict):
        paths["inputs"] = {lang: resolve(p) for lang, p in paths["inputs"].items()}


def _format_errors(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item["loc"]) or "config"
        parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)


def load_run_config(path: Path, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Wczytuje i waliduje konfigurację przebiegu.

    Relative paths inside the file resolve against the file's directory.
    Overrides (seed, run_dir, language, strategy from the CLI) are applied
    before validation.

    Raises:
        ConfigError: Plik nie istnieje, nie jest poprawnym YAML albo nie przechodzi walidacji
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"Config file {path} is not valid YAML: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"Config file {path} must contain a mapping")
    _resolve_paths(raw, path.parent)

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "run_dir":
            raw.setdefault("paths", {})["run_dir"] = str(value)
        else:
            raw[key] = value
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}: {_format_errors(e)}") from e


def dataset_handles(config: RunConfig) -> Tuple[str, ...]:
    """Uchwyty zbiorów, które może dostarczyć przebieg o tej konfiguracji."""
    handles = ["original", "nlpaug"]
    if config.augment.translate_from:
        handles.append("translated")
    if config.paths.commonsense is not None:
        handles.append("commonsense")
    return tuple(handles)

import importlib
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

from config.settings import RunConfig, Settings
from core.backends import ClassifierBackend, HashedLinearBackend
from core.data_models import Corpus
from core.exceptions import ConfigError, ProviderError
from core.providers import (
    BigramFillModel, ContextualFillModel, DictionaryTranslator, HashingSentenceEncoder,
    IdentityTranslator, SentenceEncoder, StaticFillModel, TranslationProvider,
)
from utils.cache import TranslationCache

logger = logging.getLogger(__name__)

Target = Union[Callable[..., Any], str]


class ComponentRegistry:
    """Rejestr komponentów (modele uzupełniania, tłumacze, backendy, enkodery) wybieranych po nazwie."""

    # Ciężkie adaptery jako ścieżki "moduł:atrybut", importowane dopiero przy użyciu
    _components: Dict[str, Dict[str, Target]] = {
        "fill_model": {
            "static": StaticFillModel,
            "bigram": BigramFillModel.from_corpus,
            "huggingface": "modules.hf_fill_model:HuggingFaceFillModel",
        },
        "translator": {
            "identity": IdentityTranslator,
            "dictionary": DictionaryTranslator.from_tsv,
            "google": "modules.google_translate:GoogleTranslateProvider",
        },
        "backend": {
            "hashed_linear": HashedLinearBackend,
            "transformers": "modules.transformer_backend:TransformersBackend",
        },
        "encoder": {
            "hashing": HashingSentenceEncoder,
            "sentence_transformers": "modules.sentence_encoder:SentenceTransformerEncoder",
        },
    }

    @classmethod
    def available(cls, kind: str) -> List[str]:
        return sorted(cls._components.get(kind, {}))

    @classmethod
    def _resolve(cls, kind: str, name: str) -> Callable[..., Any]:
        if kind not in cls._components:
            raise ConfigError(f"Unknown component kind '{kind}'")
        if name not in cls._components[kind]:
            raise ConfigError(
                f"Unknown {kind} '{name}'. Available: {', '.join(cls.available(kind))}"
            )
        target = cls._components[kind][name]
        if isinstance(target, str):
            module_name, attribute = target.split(":")
            try:
                module = importlib.import_module(module_name)
            except ImportError as e:
                raise ProviderError(f"{kind} '{name}' needs optional dependencies: {e}") from e
            target = getattr(module, attribute)
        return target

    @classmethod
    def create(cls, kind: str, name: str, **config: Any) -> Any:
        """
        Tworzy komponent danego rodzaju na podstawie nazwy i konfiguracji.

        Raises:
            ConfigError: Nieznany rodzaj lub nazwa (z listą dostępnych)
            ProviderError: Brak opcjonalnych zależności adaptera
        """
        factory = cls._resolve(kind, name)
        logger.info(f"Creating {kind} '{name}'")
        return factory(**config)

    @classmethod
    def register(cls, kind: str, name: str, target: Target) -> None:
        """Rejestruje nowy komponent (klasę, fabrykę albo ścieżkę 'moduł:atrybut')."""
        cls._components.setdefault(kind, {})[name] = target
        logger.info(f"Registered {kind} '{name}'")


def build_fill_model(
    run_config: RunConfig,
    reference: Optional[Corpus] = None,
) -> ContextualFillModel:
    name = run_config.providers.fill_model
    if name == "bigram":
        if reference is None:
            raise ConfigError("fill model 'bigram' needs a reference corpus")
        return ComponentRegistry.create("fill_model", name, corpus=reference)
    if name == "static":
        return ComponentRegistry.create("fill_model", name, candidates=run_config.providers.fill_candidates)
    if name == "huggingface":
        return ComponentRegistry.create("fill_model", name, model_name=run_config.providers.fill_model_name)
    return ComponentRegistry.create("fill_model", name)


def build_translator(run_config: RunConfig, settings: Settings) -> TranslationProvider:
    name = run_config.providers.translator
    if name == "dictionary":
        if run_config.paths.lexicon is None:
            raise ConfigError("translator 'dictionary' needs paths.lexicon")
        return ComponentRegistry.create("translator", name, path=run_config.paths.lexicon)
    if name == "google":
        return ComponentRegistry.create(
            "translator", name, api_key=settings.google_api_key,
            endpoint=settings.translate_endpoint, timeout=settings.request_timeout,
        )
    return ComponentRegistry.create("translator", name)


def build_backend(run_config: RunConfig) -> ClassifierBackend:
    name = run_config.providers.backend
    if name == "hashed_linear":
        return ComponentRegistry.create("backend", name, lr_scale=run_config.providers.lr_scale)
    if name == "transformers":
        return ComponentRegistry.create("backend", name, model_name=run_config.providers.model_name)
    return ComponentRegistry.create("backend", name)


def build_encoder(run_config: RunConfig) -> SentenceEncoder:
    name = run_config.providers.encoder
    if name == "hashing":
        return ComponentRegistry.create("encoder", name, dimension=run_config.providers.encoder_dimension)
    if name == "sentence_transformers":
        return ComponentRegistry.create("encoder", name, model_name=run_config.providers.encoder_model)
    return ComponentRegistry.create("encoder", name)


def open_translation_cache(run_config: RunConfig, settings: Settings) -> TranslationCache:
    # Osobny plik na dostawcę: klucz cache'a nie zawiera nazwy tłumacza
    return TranslationCache(settings.cache_dir / run_config.providers.translator / "translations.tsv")


def load_backend(name: str, path: Path) -> ClassifierBackend:
    """Wczytuje zapisany backend klasy zarejestrowanej pod daną nazwą."""
    backend_cls = ComponentRegistry._resolve("backend", name)
    if not hasattr(backend_cls, "load"):
        raise ConfigError(f"backend '{name}' cannot be loaded from disk")
    return backend_cls.load(path)

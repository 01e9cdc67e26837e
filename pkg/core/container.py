"""
Moduł implementujący kontener wstrzykiwania zależności dla przebiegu eksperymentu.
"""

from typing import Optional

from dependency_injector import containers, providers
from dotenv import load_dotenv

from config.settings import RunConfig, Settings, get_settings
from core.factory import (
    build_backend, build_encoder, build_fill_model, build_translator, open_translation_cache,
)

# Load environment variables
load_dotenv()


class Container(containers.DeclarativeContainer):
    """Kontener wstrzykiwania zależności."""

    # Zwalidowana konfiguracja przebiegu
    run_config = providers.Dependency(instance_of=RunConfig)

    settings = providers.Singleton(get_settings)

    translation_cache = providers.Singleton(open_translation_cache, run_config=run_config, settings=settings)

    translator = providers.Singleton(build_translator, run_config=run_config, settings=settings)

    # Model uzupełniania dostaje korpus referencyjny przy wywołaniu
    fill_model = providers.Factory(build_fill_model, run_config=run_config)

    # Każdy trening startuje od świeżego backendu
    backend = providers.Factory(build_backend, run_config=run_config)

    encoder = providers.Singleton(build_encoder, run_config=run_config)


def create_container(run_config: RunConfig, settings: Optional[Settings] = None) -> Container:
    """Tworzy kontener dla danej konfiguracji (i opcjonalnie gotowych ustawień)."""
    container = Container()
    container.run_config.override(providers.Object(run_config))
    if settings is not None:
        container.settings.override(providers.Object(settings))
    return container

import pytest
import yaml

from config.settings import Settings, dataset_handles, load_run_config
from core.backends import HashedLinearBackend
from core.container import create_container
from core.data_models import Language, TaskMode
from core.exceptions import ConfigError
from core.factory import ComponentRegistry, build_fill_model, load_backend
from core.providers import DictionaryTranslator, IdentityTranslator, StaticFillModel
from tests.conftest import CONFIG_DIR, TOY_DIR


def _write(tmp_path, raw, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw), encoding="utf-8")
    return path


def _minimal(**extra):
    raw = {
        "task": "binary",
        "language": "en",
        "strategy": "single_stage_1",
        "paths": {"inputs": {"en": str(TOY_DIR / "task1_en.tsv")}, "run_dir": "runs/x"},
    }
    raw.update(extra)
    return raw


def test_toy_configs_load():
    binary = load_run_config(CONFIG_DIR / "toy_binary.yaml")
    assert binary.task is TaskMode.BINARY
    assert binary.augment.translate_from == [Language.FR, Language.IT]
    assert binary.paths.inputs[Language.EN].exists()
    likert = load_run_config(CONFIG_DIR / "toy_likert.yaml")
    assert likert.regression.kind == "svr"


def test_relative_paths_resolve_against_config_file(tmp_path):
    """Ścieżki względne liczone od katalogu pliku konfiguracji."""
    path = _write(tmp_path, _minimal())
    config = load_run_config(path)
    assert config.paths.run_dir == tmp_path / "runs" / "x"


def test_overrides_apply_before_validation(tmp_path):
    path = _write(tmp_path, _minimal())
    config = load_run_config(path, {"seed": 7, "run_dir": tmp_path / "other", "strategy": None})
    assert config.seed == 7
    assert config.paths.run_dir == tmp_path / "other"
    assert config.strategy == "single_stage_1"
    with pytest.raises(ConfigError):
        load_run_config(path, {"language": "fr"})


def test_missing_or_broken_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "absent.yaml")
    broken = tmp_path / "broken.yaml"
    broken.write_text("task: [binary\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_run_config(broken)


@pytest.mark.parametrize("extra, fragment", [
    ({"strategy": "three_stage"}, "three_stage"),
    ({"strategy": "multi_task"}, "commonsense"),
    ({"task": "likert"}, "regressor"),
    ({"augment": {"translate_from": ["en"]}}, "run language"),
    ({"augment": {"translate_from": ["fr"]}}, "without an input file"),
    ({"split": {"dev_fraction": 1.5}}, "dev_fraction"),
    ({"unknown_section": {}}, "unknown_section"),
])
def test_invalid_configs_are_rejected(tmp_path, extra, fragment):
    with pytest.raises(ConfigError) as excinfo:
        load_run_config(_write(tmp_path, _minimal(**extra)))
    assert fragment in str(excinfo.value)


def test_nonexistent_input_path_rejected(tmp_path):
    raw = _minimal()
    raw["paths"]["inputs"]["en"] = str(tmp_path / "missing.tsv")
    with pytest.raises(ConfigError):
        load_run_config(_write(tmp_path, raw))


def test_dataset_handles_follow_config():
    config = load_run_config(CONFIG_DIR / "toy_binary.yaml")
    assert dataset_handles(config) == ("original", "nlpaug", "translated", "commonsense")


def test_settings_read_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("GOOGLE_TRANSLATE_API_KEY", "secret")
    settings = Settings()
    assert settings.google_api_key == "secret"
    assert settings.cache_dir == tmp_path / "cache"


def test_registry_lists_available_components():
    with pytest.raises(ConfigError) as excinfo:
        ComponentRegistry.create("translator", "babelfish")
    assert "dictionary" in str(excinfo.value)
    assert "hashed_linear" in ComponentRegistry.available("backend")


def test_container_builds_configured_components(tmp_path):
    """Kontener składa komponenty według sekcji providers."""
    config = load_run_config(CONFIG_DIR / "toy_binary.yaml")
    container = create_container(config)
    assert isinstance(container.translator(), DictionaryTranslator)
    backend = container.backend()
    assert isinstance(backend, HashedLinearBackend)
    assert backend.lr_scale == 1e4
    assert container.backend() is not backend
    cache = container.translation_cache()
    assert cache.path == tmp_path / "cache" / "dictionary" / "translations.tsv"
    with pytest.raises(ConfigError):
        container.fill_model()


def test_static_fill_model_uses_configured_candidates(tmp_path):
    path = _write(tmp_path, _minimal(providers={"fill_model": "static", "fill_candidates": ["really"], "translator": "identity"}))
    config = load_run_config(path)
    fill = build_fill_model(config)
    assert isinstance(fill, StaticFillModel)
    assert isinstance(create_container(config).translator(), IdentityTranslator)


def test_backend_round_trip_through_registry(tmp_path):
    backend = HashedLinearBackend()
    restored = load_backend("hashed_linear", backend.save(tmp_path / "model.bin"))
    assert restored.fingerprint() == backend.fingerprint()

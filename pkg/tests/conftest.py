from pathlib import Path
from typing import List, Sequence

import pytest

from core.corpus import make_corpus
from core.data_models import Corpus, Example, Language, TaskMode

ROOT = Path(__file__).resolve().parents[1]
TOY_DIR = ROOT / "data" / "toy"
CONFIG_DIR = ROOT / "configs"


def binary_examples(rows: Sequence[tuple], language: Language = Language.EN) -> List[Example]:
    return [Example(id=i, text=text, language=language, label=label) for i, text, label in rows]


def binary_corpus(rows: Sequence[tuple], language: Language = Language.EN) -> Corpus:
    return make_corpus(binary_examples(rows, language), language, TaskMode.BINARY)


@pytest.fixture(autouse=True)
def isolated_environment(tmp_path, monkeypatch):
    """Cache tłumaczeń i logi trafiają do katalogu tymczasowego testu."""
    monkeypatch.setenv("TAXACC_CACHE_DIR", str(tmp_path / "cache"))
    monkeypatch.setenv("TAXACC_LOG_DIR", str(tmp_path / "logs"))
    monkeypatch.setenv("TAXACC_LOG_LEVEL", "WARNING")


@pytest.fixture
def toy_dir() -> Path:
    return TOY_DIR


@pytest.fixture
def small_corpus() -> Corpus:
    """10 przykładów, 6 pozytywnych."""
    rows = [
        ("e01", "I like drink, and more specifically beer.", 1),
        ("e02", "I like beer, and more specifically drink.", 0),
        ("e03", "I like fish, and more specifically salmon.", 1),
        ("e04", "I like salmon, and more specifically fish.", 0),
        ("e05", "I think oak is a kind of tree.", 1),
        ("e06", "I think tree is a kind of oak.", 0),
        ("e07", "I like tulip more than rose.", 1),
        ("e08", "I like tulip more than flower.", 0),
        ("e09", "I use tool, except hammer.", 1),
        ("e10", "I use bird, except eagle.", 1),
    ]
    return binary_corpus(rows)

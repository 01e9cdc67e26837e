import numpy as np
import pytest

from core.augment import (
    augment_binary_corpus, contextual_insert, contextual_substitute, dedupe_against, derive_seed,
    translate_corpus,
)
from core.corpus import make_corpus
from core.data_models import AugmentedExample, Example, ExampleFlag, Language, Operation, TaskMode
from core.exceptions import (
    ContractViolationError, CredentialsError, PreconditionError, TranslationError,
)
from core.providers import (
    BigramFillModel, ContextualFillModel, DictionaryTranslator, IdentityTranslator,
    StaticFillModel, TranslationProvider,
)
from modules.google_translate import GoogleTranslateProvider
from tests.conftest import binary_corpus
from utils.cache import TranslationCache

WORDS = ["beer", "drink", "wine", "salmon", "fish", "oak", "tree", "like", "more", "than"]


class AbstainingFillModel(ContextualFillModel):
    name = "abstain"

    def fill(self, tokens, mask_index):
        return []


class FlakyTranslator(TranslationProvider):
    """Tłumacz, który zawodzi dla zdań o łososiu."""

    name = "flaky"

    def __init__(self):
        self.calls = 0

    async def translate(self, text, source, target):
        self.calls += 1
        if "salmon" in text:
            raise TranslationError("provider down")
        return text.upper()


def _random_example(rng, example_id: str) -> Example:
    length = int(rng.integers(1, 8))
    words = [WORDS[int(i)] for i in rng.integers(0, len(WORDS), size=length)]
    if rng.random() < 0.5:
        words[0] = words[0].capitalize()
    return Example(id=example_id, text=" ".join(words) + ".", language=Language.EN, label=int(rng.integers(0, 2)))


def test_augmentation_invariants_over_many_seeds():
    """1-2 edycje, etykiety zachowane, podstawienia tylko z przykładów o etykiecie 1."""
    rng = np.random.default_rng(11)
    fill = StaticFillModel(["really", "quite"])
    for i in range(1000):
        example = _random_example(rng, f"x{i}")
        inserted = contextual_insert(example, fill, seed=i)
        assert inserted.edits in (1, 2)
        assert inserted.label == example.label
        assert inserted.source_id == example.id
        assert len(inserted.text.split()) == len(example.text.split()) + inserted.edits
        if example.label == 1:
            substituted = contextual_substitute(example, fill, seed=i)
            assert substituted.edits in (1, 2)
            assert substituted.label == 1
            assert len(substituted.text.split()) == len(example.text.split())
        else:
            with pytest.raises(ContractViolationError):
                contextual_substitute(example, fill, seed=i)


def test_augmentation_is_deterministic_for_seed(small_corpus):
    fill = BigramFillModel.from_corpus(small_corpus)
    first = augment_binary_corpus(small_corpus, fill, seed=3)
    second = augment_binary_corpus(small_corpus, fill, seed=3)
    assert first.texts() == second.texts()
    assert first.fingerprint() == second.fingerprint()


def test_augmented_corpus_size(small_corpus):
    """10 przykładów z 6 pozytywnymi daje 16 wierszy: 10 wstawień i 6 podstawień."""
    augmented = augment_binary_corpus(small_corpus, StaticFillModel(["really"]), seed=0)
    assert len(augmented) == 16
    operations = [e.operation for e in augmented.examples]
    assert operations.count(Operation.INSERT) == 10
    assert operations.count(Operation.SUBSTITUTE) == 6
    assert all(e.label == 1 for e in augmented.examples if e.operation is Operation.SUBSTITUTE)
    assert augmented.ids()[0] == "e01-ins"


def test_augmentation_raises_positive_share(small_corpus):
    """Podstawienia tylko dla etykiety 1 podnoszą udział pozytywów w zbiorze rozszerzonym."""
    augmented = augment_binary_corpus(small_corpus, StaticFillModel(["really"]), seed=0)
    source_share = np.mean(small_corpus.targets())
    assert 0 < source_share < 1
    assert np.mean(augmented.targets()) > source_share


def test_variants_per_example_multiplies_outputs(small_corpus):
    augmented = augment_binary_corpus(small_corpus, StaticFillModel(["really"]), variants_per_example=2)
    assert len(augmented) == 32
    assert "e01-ins1" in augmented.ids()


def test_insert_never_before_capitalized_first_word():
    """Pierwsze słowo pisane wielką literą pozostaje na początku zdania."""
    example = Example(id="c", text="Beer is a drink.", language=Language.EN, label=1)
    for seed in range(200):
        result = contextual_insert(example, StaticFillModel(["very"]), seed=seed)
        assert result.text.startswith("Beer ")


def test_abstaining_model_passes_example_through():
    """Model bez kandydatów zostawia zdanie bez zmian i oznacza je jako pominięte."""
    example = Example(id="a", text="I like beer.", language=Language.EN, label=1)
    result = contextual_insert(example, AbstainingFillModel(), seed=1)
    assert result.text == example.text
    assert result.edits == 0
    assert ExampleFlag.AUGMENTATION_SKIPPED.value in result.flags


def test_substitute_skips_candidate_equal_to_original():
    """Kandydat identyczny z podmienianym tokenem jest pomijany."""
    example = Example(id="s", text="beer", language=Language.EN, label=1)
    result = contextual_substitute(example, StaticFillModel(["beer", "wine"]), max_edits=1, seed=0)
    assert result.text == "wine"


def test_substitute_keeps_edge_punctuation_and_case():
    example = Example(id="s", text="Beer.", language=Language.EN, label=1)
    result = contextual_substitute(example, StaticFillModel(["wine"]), max_edits=1, seed=0)
    assert result.text == "Wine."


def test_max_edits_outside_range_rejected(small_corpus):
    with pytest.raises(PreconditionError):
        contextual_insert(small_corpus.examples[0], StaticFillModel(["x"]), max_edits=3)


def test_derive_seed_is_stable():
    assert derive_seed(1, "a", "insert", 0) == derive_seed(1, "a", "insert", 0)
    assert derive_seed(1, "a", "insert", 0) != derive_seed(1, "a", "substitute", 0)


def _french_corpus():
    return binary_corpus([
        ("1", "Nous aimons bière, et plus précisément vin.", 1),
        ("2", "Nous aimons saumon, et plus précisément poisson.", 0),
    ], Language.FR)


def test_dictionary_translation_carries_provenance():
    """Tłumaczenie zachowuje etykietę i pochodzenie, id dostaje sufiks języka źródłowego."""
    translator = DictionaryTranslator({
        ("fr", "en"): {"nous": "i", "aimons": "like", "bière": "beer", "vin": "wine"},
    })
    translated = translate_corpus(_french_corpus(), "en", translator, backoff_seconds=0.0)
    first = translated.examples[0]
    assert isinstance(first, AugmentedExample)
    assert first.id == "1-fr"
    assert first.text == "I like beer, et plus précisément wine."
    assert first.language is Language.EN
    assert first.source_language is Language.FR
    assert first.operation is Operation.TRANSLATE
    assert translated.targets() == [1, 0]


def test_failed_translation_is_flagged_and_batch_continues():
    """Nieudane tłumaczenie zachowuje tekst źródłowy i flagę, reszta partii przechodzi."""
    provider = FlakyTranslator()
    translated = translate_corpus(_french_corpus(), "en", provider, retries=2, backoff_seconds=0.0)
    ok, failed = translated.examples
    assert ok.text == "NOUS AIMONS BIÈRE, ET PLUS PRÉCISÉMENT VIN."
    assert ExampleFlag.TRANSLATION_FAILED.value in failed.flags
    assert failed.text == "Nous aimons saumon, et plus précisément poisson."
    # dwie próby dla nieudanego przykładu
    assert provider.calls == 3


def test_translation_cache_avoids_repeated_calls(tmp_path):
    """Drugie tłumaczenie tego samego korpusu korzysta z cache'a."""
    cache = TranslationCache(tmp_path / "translations.tsv")
    provider = FlakyTranslator()
    corpus = binary_corpus([("1", "Nous aimons bière.", 1)], Language.FR)
    translate_corpus(corpus, "en", provider, cache)
    reopened = TranslationCache(tmp_path / "translations.tsv")
    translate_corpus(corpus, "en", provider, reopened)
    assert provider.calls == 1
    assert reopened.hits == 1


def test_translation_into_same_language_rejected(small_corpus):
    with pytest.raises(PreconditionError):
        translate_corpus(small_corpus, "en", IdentityTranslator())


def test_missing_credentials_fail_before_any_call():
    with pytest.raises(CredentialsError):
        translate_corpus(_french_corpus(), "en", GoogleTranslateProvider(api_key=None))


def test_dedupe_drops_translations_equal_to_original():
    """Tłumaczenia identyczne (po normalizacji) ze zdaniem oryginalnym są usuwane."""
    reference = binary_corpus([("a", "I like beer.", 1), ("b", "I like wine.", 0)])
    translated = make_corpus([
        Example(id="1-fr", text="i  LIKE beer.", language=Language.EN, label=1),
        Example(id="2-fr", text="I like water.", language=Language.EN, label=0),
    ], Language.EN, TaskMode.BINARY)
    result = dedupe_against(translated, reference)
    assert result.corpus.ids() == ["2-fr"]
    assert result.dropped == 1
    assert result.dropped_fraction == 0.5


def test_dedupe_of_identity_translation_drops_everything(small_corpus):
    english_as_french = make_corpus(
        [Example(id=e.id, text=e.text, language=Language.FR, label=e.label) for e in small_corpus.examples],
        Language.FR, TaskMode.BINARY,
    )
    translated = translate_corpus(english_as_french, "en", IdentityTranslator())
    result = dedupe_against(translated, small_corpus)
    assert len(result.corpus) == 0
    assert result.dropped_fraction == 1.0


def test_dedupe_reports_fraction_of_mixed_set():
    """3 duplikaty na 20 tłumaczeń to 15% odrzuconych."""
    reference = binary_corpus([(f"r{i}", f"I like drink {i}.", 1) for i in range(3)])
    texts = [f"I LIKE  drink {i}." for i in range(3)] + [f"I like food {i}." for i in range(17)]
    translated = make_corpus(
        [Example(id=f"t{i}-fr", text=text, language=Language.EN, label=1) for i, text in enumerate(texts)],
        Language.EN, TaskMode.BINARY,
    )
    result = dedupe_against(translated, reference)
    assert result.dropped == 3
    assert result.dropped_fraction == pytest.approx(0.15)
    assert len(result.corpus) == 17

import io

import numpy as np
import pytest

from core.corpus import (
    build_df_index, derive_pattern, extract_nouns, extract_nouns_with_fallback, extract_patterns,
    infer_language, load_task_file, make_corpus, parse_task_file, parse_template, read_split_tsv,
    split_dev_validation, tokenize, write_split_tsv,
)
from core.data_models import BLANK, Corpus, Example, ExampleFlag, Language, TaskMode
from core.exceptions import (
    ConfigError, ExtractionError, InfeasibleSplitError, PreconditionError, SchemaError,
    ValueRangeError,
)
from tests.conftest import binary_corpus

DF = {"i": 1.0, "like": 1.0, "beer": 0.02, "more": 0.5, "than": 0.5, "wine": 0.01}


def _example(text: str, label: int = 1, example_id: str = "x") -> Example:
    return Example(id=example_id, text=text, language=Language.EN, label=label)


def test_tokenize_strips_edge_punctuation():
    """Interpunkcja na brzegach tokenu jest obcinana, zakresy wskazują oryginalny tekst."""
    text = "I like beer, and (more) wine."
    tokens = tokenize(text)
    assert [t.text for t in tokens] == ["I", "like", "beer", "and", "more", "wine"]
    for token in tokens:
        assert text[token.start:token.end] == token.text
    assert tokens[0].norm == "i"


def test_tokenize_drops_punctuation_only_tokens():
    """Tokeny złożone wyłącznie z interpunkcji znikają."""
    assert [t.text for t in tokenize("beer , wine ...")] == ["beer", "wine"]


def test_parse_task_file_reads_crlf_and_bom():
    """Plik z BOM i końcami linii CRLF daje jeden przykład na wiersz."""
    data = "\ufeffid\tsentence\tlabel\r\n1\tBeer is a drink.\t1\r\n2\tDrink is a beer.\t0\r\n"
    corpus = parse_task_file(io.BytesIO(data.encode("utf-8")), "binary", language="en")
    assert corpus.ids() == ["1", "2"]
    assert corpus.texts() == ["Beer is a drink.", "Drink is a beer."]
    assert corpus.targets() == [1, 0]
    assert corpus.df_index["beer"] == 1.0


def test_parse_task_file_reports_row_of_bad_label():
    """Etykieta spoza {0, 1} daje błąd z numerem wiersza (nagłówek to wiersz 1)."""
    data = "id\tsentence\tlabel\n1\tBeer is a drink.\t1\n2\tWine is a drink.\t2\n"
    with pytest.raises(ValueRangeError) as excinfo:
        parse_task_file(io.BytesIO(data.encode("utf-8")), TaskMode.BINARY)
    assert excinfo.value.row == 3


def test_parse_task_file_rejects_out_of_range_score():
    """Ocena Likerta musi leżeć w [1, 7]."""
    data = "id\tsentence\tscore\n1\tBeer is a drink.\t7.5\n"
    with pytest.raises(ValueRangeError):
        parse_task_file(io.BytesIO(data.encode("utf-8")), TaskMode.LIKERT)


def test_parse_task_file_names_missing_column():
    """Brakująca kolumna jest nazwana w błędzie."""
    data = "id\tsentence\tlabel\n1\tBeer is a drink.\t1\n"
    with pytest.raises(SchemaError) as excinfo:
        parse_task_file(io.BytesIO(data.encode("utf-8")), "binary", {"id": 0, "text": 1, "label": "gold"})
    assert excinfo.value.column == "label"


def test_infer_language_from_suffix_and_override():
    """Język z sufiksu nazwy pliku albo z jawnego nadpisania."""
    assert infer_language("data/task1_fr.tsv") is Language.FR
    assert infer_language("data/task1.tsv", "it") is Language.IT
    with pytest.raises(ConfigError):
        infer_language("data/task1.tsv")


def test_document_frequency_counts_sentence_once():
    """Token powtórzony w jednym zdaniu liczy się raz."""
    corpus = binary_corpus([("1", "a b", 1), ("2", "a c", 0)])
    assert build_df_index(corpus) == {"a": 1.0, "b": 0.5, "c": 0.5}
    repeated = binary_corpus([("1", "beer beer beer", 1), ("2", "wine", 0)])
    assert build_df_index(repeated)["beer"] == 0.5


def test_df_index_of_empty_corpus_fails():
    with pytest.raises(PreconditionError):
        build_df_index(Corpus(language=Language.EN))


def test_extract_nouns_picks_low_df_tokens_in_text_order():
    """Rzeczowniki to tokeny o DF poniżej progu, w kolejności występowania."""
    pair = extract_nouns(_example("I like beer more than wine."), DF)
    assert (pair.noun1, pair.noun2) == ("beer", "wine")
    assert pair.span1 == (7, 11)


def test_extract_nouns_prefers_lowest_df_among_many():
    """Przy więcej niż dwóch kandydatach wygrywają dwa o najniższym DF."""
    pair = extract_nouns(_example("oak pine tree"), {"oak": 0.01, "pine": 0.03, "tree": 0.02})
    assert (pair.noun1, pair.noun2) == ("oak", "tree")


def test_extract_nouns_reports_count_found():
    with pytest.raises(ExtractionError) as excinfo:
        extract_nouns(_example("a beer b"), {"a": 0.5, "b": 0.5, "beer": 0.01})
    assert excinfo.value.count == 1


def test_fallback_uses_lowest_df_tokens_overall():
    """Fallback bierze dwa tokeny o najniższym DF niezależnie od progu."""
    pair, fell_back = extract_nouns_with_fallback(_example("a beer b"), {"a": 0.5, "b": 0.6, "beer": 0.01})
    assert fell_back
    assert (pair.noun1, pair.noun2) == ("a", "beer")
    with pytest.raises(ExtractionError):
        extract_nouns_with_fallback(_example("beer"), {"beer": 0.01})


def test_derive_pattern_round_trip():
    """Wzorzec wypełniony rzeczownikami odtwarza zdanie."""
    example = _example("I like beer more than wine.")
    pair = extract_nouns(example, DF)
    pattern = derive_pattern(example, pair)
    assert pattern.display() == f"I like {BLANK} more than {BLANK}."
    assert pattern.fill(pair.noun1, pair.noun2) == example.text
    assert pattern == parse_template("I like [blank] more than [blank].", "en")


def test_extract_patterns_on_toy_file(toy_dir):
    """Na danych przykładowych szablon 'I use ..., except ...' jest odnajdywany dla każdego wiersza."""
    corpus = load_task_file(toy_dir / "task1_en.tsv", "binary")
    flagged, records = extract_patterns(corpus, threshold=0.15)
    assert len(records) == len(corpus) == 80
    held_out = parse_template("I use [blank], except [blank].", "en")
    assert sum(r.pattern == held_out for r in records) == 16
    assert not any(ExampleFlag.NOUN_FALLBACK.value in e.flags for e in flagged.examples)


TEMPLATES = [
    "I like [blank] more than [blank].",
    "I use [blank], except [blank].",
    "I think [blank] is a kind of [blank].",
    "I like [blank], an interesting type of [blank].",
]


def _random_split_case(rng):
    n = int(rng.integers(5, 60))
    patterns = [parse_template(t, "en") for t in TEMPLATES]
    examples, example_patterns = [], {}
    for i in range(n):
        pattern = patterns[int(rng.integers(0, len(patterns)))]
        example = Example(
            id=f"x{i:03d}", text=pattern.fill(f"n{i}a", f"n{i}b"), language=Language.EN,
            label=int(rng.integers(0, 2)),
        )
        examples.append(example)
        example_patterns[example.id] = pattern
    present = sorted(set(example_patterns.values()), key=lambda p: p.template)
    held_out = [p for p in present if rng.random() < 0.3]
    return make_corpus(examples, Language.EN, TaskMode.BINARY), example_patterns, held_out


def test_split_properties_over_random_corpora():
    """Dev i val są rozłączne, wzorce złożone nie trafiają do dev, dev ma 30% +/- 1 przykład."""
    rng = np.random.default_rng(7)
    infeasible = 0
    for case in range(100):
        corpus, example_patterns, held_out = _random_split_case(rng)
        n_dev = int(round(0.3 * len(corpus)))
        eligible = sum(example_patterns[i] not in held_out for i in corpus.ids())
        if n_dev > eligible:
            with pytest.raises(InfeasibleSplitError):
                split_dev_validation(corpus, 0.3, held_out, seed=case, example_patterns=example_patterns)
            infeasible += 1
            continue
        split = split_dev_validation(corpus, 0.3, held_out, seed=case, example_patterns=example_patterns)
        assert not set(split.dev.ids()) & set(split.val.ids())
        assert len(split.dev) + len(split.val) == len(corpus)
        assert abs(len(split.dev) - 0.3 * len(corpus)) <= 1
        assert all(example_patterns[i] not in held_out for i in split.dev.ids())
        # kolejność zgodna z korpusem
        assert split.dev.ids() == [i for i in corpus.ids() if i in set(split.dev.ids())]
    assert infeasible < 100


def test_split_is_deterministic_for_seed(small_corpus):
    first = split_dev_validation(small_corpus, 0.3, seed=5)
    second = split_dev_validation(small_corpus, 0.3, seed=5)
    assert first.dev.ids() == second.dev.ids()


def test_split_stratifies_binary_labels(small_corpus):
    """Proporcje etykiet w dev odpowiadają korpusowi (6 pozytywnych na 10)."""
    split = split_dev_validation(small_corpus, 0.5, seed=1)
    assert sorted(split.dev.targets()) == [0, 0, 1, 1, 1]


def test_split_infeasible_when_patterns_cover_everything():
    """Wzorce złożone pokrywające cały korpus uniemożliwiają podział."""
    pattern = parse_template("I like [blank] more than [blank].", "en")
    corpus = binary_corpus([(f"x{i}", pattern.fill(f"a{i}", f"b{i}"), i % 2) for i in range(10)])
    with pytest.raises(InfeasibleSplitError):
        split_dev_validation(corpus, 0.3, [pattern], example_patterns={i: pattern for i in corpus.ids()})


def test_split_rejects_unknown_complex_pattern(small_corpus):
    pattern = parse_template("Nothing like [blank] or [blank].", "en")
    with pytest.raises(PreconditionError):
        split_dev_validation(small_corpus, 0.3, [pattern], example_patterns={})


def test_split_file_keeps_dev_and_val(tmp_path, small_corpus):
    """Plik podziału odczytany ponownie daje te same zbiory."""
    split = split_dev_validation(small_corpus, 0.3, seed=3)
    path = write_split_tsv(split, tmp_path / "split.tsv")
    restored = read_split_tsv(path, "en", "binary")
    assert restored.dev.ids() == split.dev.ids()
    assert restored.val.texts() == split.val.texts()
    assert restored.val.targets() == split.val.targets()

"""
Przygotowanie korpusu: parsowanie plików zadania, indeks DF,
ekstrakcja rzeczowników i wzorców oraz podział dev/val z wykluczonymi wzorcami.
"""

import csv
import io
import re
import unicodedata
from collections import defaultdict
from pathlib import Path
from typing import (
    BinaryIO, Dict, FrozenSet, Iterable, List, Mapping, NamedTuple, Optional,
    Sequence, Tuple, Union,
)

import numpy as np
import pandas as pd
import structlog
from pydantic import ValidationError

from core.data_models import (
    BLANK, PLACEHOLDER, AugmentedExample, Corpus, DevValSplit, Example,
    ExampleFlag, Language, NounPair, Operation, Pattern, TaskMode,
)
from core.exceptions import (
    ConfigError, DataError, ExtractionError, InfeasibleSplitError,
    PatternInvariantError, PreconditionError, SchemaError, ValueRangeError,
)

logger = structlog.get_logger(__name__)

DEFAULT_DF_THRESHOLD = 0.05
ColumnMap = Mapping[str, Union[int, str]]

_LANGUAGE_SUFFIX = re.compile(r"_(en|fr|it)$", re.IGNORECASE)
_PROVENANCE_COLUMNS = ["source_id", "operation", "edits", "source_language"]
# Artefakty potoku: bez cudzysłowów, backslash jako znak ucieczki.
TSV_OPTIONS = {"sep": "\t", "quoting": csv.QUOTE_NONE, "escapechar": "\\"}


class Token(NamedTuple):
    text: str
    start: int
    end: int

    @property
    def norm(self) -> str:
        return self.text.casefold()


def _is_punctuation(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> List[Token]:
    """
    Dzieli tekst po białych znakach i obcina interpunkcję z brzegów tokenów.

    Spans point into the original text, so original casing is preserved;
    tokens made only of punctuation are dropped.
    """
    tokens = []
    for match in re.finditer(r"\S+", text):
        raw = match.group()
        lead = 0
        while lead < len(raw) and _is_punctuation(raw[lead]):
            lead += 1
        trail = len(raw)
        while trail > lead and _is_punctuation(raw[trail - 1]):
            trail -= 1
        if trail > lead:
            tokens.append(Token(raw[lead:trail], match.start() + lead, match.start() + trail))
    return tokens


def infer_language(path: Union[str, Path], override: Optional[Union[str, Language]] = None) -> Language:
    """Language from an explicit override or from an `_en/_fr/_it` file-name suffix."""
    if override:
        return Language(override)
    match = _LANGUAGE_SUFFIX.search(Path(path).stem)
    if not match:
        raise ConfigError(
            f"Cannot infer language from '{Path(path).name}'; name it *_en/_fr/_it or pass --language"
        )
    return Language(match.group(1).lower())


def _document_frequencies(texts: Sequence[str]) -> Dict[str, float]:
    counts: Dict[str, int] = defaultdict(int)
    for text in texts:
        for norm in {t.norm for t in tokenize(text)}:
            counts[norm] += 1
    total = len(texts)
    return {token: count / total for token, count in sorted(counts.items())}


def build_df_index(corpus: Corpus) -> Dict[str, float]:
    """
    Buduje indeks częstości dokumentowej tokenów.

    df(t) = (#examples whose token set contains t) / (#examples); a token
    repeated inside one sentence still counts once.

    Raises:
        PreconditionError: Jeśli korpus jest pusty
    """
    if not corpus.examples:
        raise PreconditionError("cannot build a DF index over an empty corpus")
    return _document_frequencies(corpus.texts())


def make_corpus(
    examples: Iterable[Example],
    language: Language,
    task: TaskMode = TaskMode.BINARY,
) -> Corpus:
    """Tworzy korpus i od razu wylicza jego indeks DF (pusty dla pustego korpusu)."""
    items = tuple(examples)
    df_index = _document_frequencies([e.text for e in items]) if items else {}
    return Corpus(examples=items, language=language, task=task, df_index=df_index)


def _resolve_column(frame: pd.DataFrame, column_map: ColumnMap, name: str) -> str:
    if name not in column_map:
        raise SchemaError(name, "not present in column map")
    ref = column_map[name]
    if isinstance(ref, int):
        if not 0 <= ref < len(frame.columns):
            raise SchemaError(name, f"index {ref} out of range for {len(frame.columns)} columns")
        return frame.columns[ref]
    if ref not in frame.columns:
        raise SchemaError(name, f"header has no column '{ref}'")
    return ref


def default_column_map(mode: TaskMode) -> Dict[str, int]:
    target = "label" if mode is TaskMode.BINARY else "score"
    return {"id": 0, "text": 1, target: 2}


def parse_task_file(
    stream: BinaryIO,
    mode: Union[TaskMode, str],
    column_map: Optional[ColumnMap] = None,
    language: Union[Language, str] = Language.EN,
) -> Corpus:
    """
    Parsuje plik TSV zadania (UTF-8, wiersz nagłówka, LF lub CRLF).

    Args:
        stream: Strumień bajtów z danymi
        mode: binary albo likert
        column_map: Mapowanie nazwa -> indeks (lub nazwa) kolumny
        language: Język korpusu

    Returns:
        Corpus: Jeden przykład na wiersz danych

    Raises:
        SchemaError: Brak wymaganej kolumny
        ValueRangeError: Etykieta/ocena spoza dziedziny, z numerem wiersza
    """
    mode = TaskMode(mode)
    language = Language(language)
    column_map = column_map or default_column_map(mode)
    try:
        content = stream.read().decode("utf-8-sig")
    except UnicodeDecodeError as e:
        raise DataError(f"input is not valid UTF-8: {e}") from e
    try:
        frame = pd.read_csv(
            io.StringIO(content), sep="\t", dtype=str, keep_default_na=False,
            quoting=csv.QUOTE_NONE, on_bad_lines="error",
        )
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f"malformed TSV input: {e}") from e

    id_col = _resolve_column(frame, column_map, "id")
    text_col = _resolve_column(frame, column_map, "text")
    target_name = "label" if mode is TaskMode.BINARY else "score"
    target_col = _resolve_column(frame, column_map, target_name)

    examples: List[Example] = []
    seen_ids = set()
    for offset, row in enumerate(frame[[id_col, text_col, target_col]].itertuples(index=False)):
        row_number = offset + 2  # nagłówek to wiersz 1
        example_id, text, raw_target = (str(v).strip("\r") for v in row)
        example_id = example_id.strip()
        if not example_id or example_id in seen_ids:
            raise ValueRangeError(row_number, f"missing or duplicate id '{example_id}'")
        seen_ids.add(example_id)
        target: Dict[str, Union[int, float]] = {}
        if mode is TaskMode.BINARY:
            if raw_target.strip() not in ("0", "1"):
                raise ValueRangeError(row_number, f"label must be 0 or 1, got '{raw_target}'")
            target["label"] = int(raw_target)
        else:
            try:
                score = float(raw_target)
            except ValueError:
                raise ValueRangeError(row_number, f"score is not a number: '{raw_target}'")
            if not 1.0 <= score <= 7.0:
                raise ValueRangeError(row_number, f"score must be within [1, 7], got {score}")
            target["score"] = score
        try:
            examples.append(Example(id=example_id, text=text, language=language, **target))
        except ValidationError as e:
            raise ValueRangeError(row_number, e.errors()[0]["msg"]) from e

    corpus = make_corpus(examples, language, mode)
    logger.info("task_file_parsed", language=language.value, mode=mode.value, examples=len(corpus))
    return corpus


def load_task_file(
    path: Union[str, Path],
    mode: Union[TaskMode, str],
    column_map: Optional[ColumnMap] = None,
    language: Optional[Union[Language, str]] = None,
) -> Corpus:
    with open(path, "rb") as stream:
        return parse_task_file(stream, mode, column_map, infer_language(path, language))


def _pair_from_tokens(first: Token, second: Token) -> NounPair:
    if second.start < first.start:
        first, second = second, first
    return NounPair(
        noun1=first.text, noun2=second.text,
        span1=(first.start, first.end), span2=(second.start, second.end),
    )


def extract_nouns(
    example: Example,
    df_index: Mapping[str, float],
    threshold: float = DEFAULT_DF_THRESHOLD,
) -> NounPair:
    """
    Wybiera dwa tokeny o DF poniżej progu jako rzeczowniki.

    More than two qualifying tokens: the two with the lowest df win, earlier
    position breaking ties. Tokens absent from the index count as df 0.

    Raises:
        ExtractionError: Mniej niż dwa tokeny spełniają próg (z liczbą znalezionych)
    """
    tokens = tokenize(example.text)
    ranked = sorted(
        (df_index.get(tok.norm, 0.0), position, tok)
        for position, tok in enumerate(tokens)
        if df_index.get(tok.norm, 0.0) < threshold
    )
    if len(ranked) < 2:
        raise ExtractionError(len(ranked), example.id)
    return _pair_from_tokens(ranked[0][2], ranked[1][2])


def extract_nouns_with_fallback(
    example: Example,
    df_index: Mapping[str, float],
    threshold: float = DEFAULT_DF_THRESHOLD,
) -> Tuple[NounPair, bool]:
    """Like `extract_nouns`, falling back to the two lowest-df tokens overall; returns (pair, fell_back)."""
    try:
        return extract_nouns(example, df_index, threshold), False
    except ExtractionError as e:
        tokens = tokenize(example.text)
        if len(tokens) < 2:
            raise
        ranked = sorted(
            (df_index.get(tok.norm, 0.0), position, tok) for position, tok in enumerate(tokens)
        )
        logger.warning("noun_fallback", example_id=example.id, qualifying=e.count)
        return _pair_from_tokens(ranked[0][2], ranked[1][2]), True


def derive_pattern(example: Example, nouns: NounPair) -> Pattern:
    """
    Zastępuje oba rzeczowniki symbolem zastępczym.

    Raises:
        PatternInvariantError: Zakresy nie wskazują rzeczowników albo round-trip się nie zgadza
    """
    text = example.text
    if PLACEHOLDER in text:
        raise PatternInvariantError(f"text of '{example.id}' already contains {PLACEHOLDER}")
    nouns.check_against(text)
    (s1, e1), (s2, e2) = nouns.span1, nouns.span2
    pattern = Pattern(
        template=f"{text[:s1]}{PLACEHOLDER}{text[e1:s2]}{PLACEHOLDER}{text[e2:]}",
        language=example.language,
    )
    if pattern.fill(nouns.noun1, nouns.noun2) != text:
        raise PatternInvariantError(f"pattern round-trip failed for '{example.id}'")
    return pattern


def parse_template(text: str, language: Union[Language, str]) -> Pattern:
    """Accepts a template written with `[blank]` slots or with the placeholder itself."""
    return Pattern(template=text.replace(BLANK, PLACEHOLDER), language=Language(language))


def split_dev_validation(
    corpus: Corpus,
    dev_fraction: float = 0.3,
    complex_patterns: Optional[Iterable[Pattern]] = None,
    seed: int = 0,
    example_patterns: Optional[Mapping[str, Pattern]] = None,
    stratify: bool = True,
) -> DevValSplit:
    """
    Dzieli korpus na zbiór deweloperski i walidacyjny.

    Every example whose pattern is listed in `complex_patterns` goes to val;
    dev is drawn (seeded, stratified by label for binary corpora) from the
    rest until it holds round(dev_fraction * N) examples. Output order follows
    the corpus order.

    Raises:
        PreconditionError: Wzorzec złożony nie występuje w korpusie
        InfeasibleSplitError: Wzorce złożone pokrywają zbyt dużą część korpusu
    """
    if not 0.0 < dev_fraction < 1.0:
        raise PreconditionError(f"dev_fraction must be within (0, 1), got {dev_fraction}")
    held_out: FrozenSet[Pattern] = frozenset(complex_patterns or ())
    example_patterns = example_patterns or {}
    if held_out:
        present = set(example_patterns.values())
        missing = [p.display() for p in held_out if p not in present]
        if missing:
            raise PreconditionError(f"complex patterns not present in corpus: {sorted(missing)}")

    total = len(corpus.examples)
    n_dev = int(round(dev_fraction * total))
    eligible = [
        i for i, e in enumerate(corpus.examples) if example_patterns.get(e.id) not in held_out
    ]
    if n_dev > len(eligible):
        covered = total - len(eligible)
        raise InfeasibleSplitError(
            f"complex patterns cover {covered}/{total} examples; "
            f"only {len(eligible)} remain for a dev set of {n_dev}"
        )

    rng = np.random.default_rng(seed)
    if stratify and corpus.task is TaskMode.BINARY:
        groups: Dict[int, List[int]] = defaultdict(list)
        for i in eligible:
            groups[corpus.examples[i].label].append(i)  # type: ignore[index]
        quotas = _proportional_quotas({k: len(v) for k, v in groups.items()}, n_dev)
        chosen = []
        for key in sorted(groups):
            members = groups[key]
            picks = rng.permutation(len(members))[: quotas[key]]
            chosen.extend(members[j] for j in picks)
    else:
        picks = rng.permutation(len(eligible))[:n_dev]
        chosen = [eligible[j] for j in picks]

    dev_index = set(chosen)
    dev = [e for i, e in enumerate(corpus.examples) if i in dev_index]
    val = [e for i, e in enumerate(corpus.examples) if i not in dev_index]
    split = DevValSplit(
        dev=make_corpus(dev, corpus.language, corpus.task),
        val=make_corpus(val, corpus.language, corpus.task),
        held_out_patterns=held_out,
    )
    logger.info(
        "split_created", dev=len(dev), val=len(val), held_out_patterns=len(held_out), seed=seed,
    )
    return split


def _proportional_quotas(sizes: Mapping[int, int], total: int) -> Dict[int, int]:
    """Largest-remainder allocation of `total` picks across groups."""
    population = sum(sizes.values())
    if population == 0:
        return {k: 0 for k in sizes}
    exact = {k: total * n / population for k, n in sizes.items()}
    quotas = {k: int(np.floor(v)) for k, v in exact.items()}
    leftover = total - sum(quotas.values())
    for k in sorted(exact, key=lambda k: (-(exact[k] - quotas[k]), k))[:leftover]:
        quotas[k] += 1
    return quotas


def _corpus_frame(corpus: Corpus) -> pd.DataFrame:
    target = "label" if corpus.task is TaskMode.BINARY else "score"
    augmented = any(isinstance(e, AugmentedExample) for e in corpus.examples)
    columns = ["id", "text", "language", target, "flags"] + (_PROVENANCE_COLUMNS if augmented else [])
    rows = []
    for e in corpus.examples:
        row = [e.id, e.text, e.language.value, e.target, ",".join(sorted(e.flags))]
        if augmented:
            if isinstance(e, AugmentedExample):
                row += [
                    e.source_id, e.operation.value, e.edits,
                    e.source_language.value if e.source_language else "",
                ]
            else:
                row += ["", "", "", ""]
        rows.append(row)
    return pd.DataFrame(rows, columns=columns)


def _write_frame(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", **TSV_OPTIONS)
    return path


def _read_frame(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path, dtype=str, keep_default_na=False, **TSV_OPTIONS)


def write_corpus_tsv(corpus: Corpus, path: Union[str, Path]) -> Path:
    """Zapisuje korpus (z kolumnami pochodzenia dla przykładów rozszerzonych) do TSV."""
    return _write_frame(_corpus_frame(corpus), path)


def _examples_from_records(
    records: Iterable[Mapping[str, str]], language: Language, task: TaskMode,
) -> List[Example]:
    target = "label" if task is TaskMode.BINARY else "score"
    examples: List[Example] = []
    for record in records:
        fields = {
            "id": record["id"],
            "text": record["text"],
            "language": language,
            target: int(record[target]) if task is TaskMode.BINARY else float(record[target]),
            "flags": frozenset(f for f in record.get("flags", "").split(",") if f),
        }
        if record.get("operation"):
            examples.append(AugmentedExample(
                **fields,
                source_id=record["source_id"],
                operation=Operation(record["operation"]),
                edits=int(record["edits"] or 0),
                source_language=Language(record["source_language"]) if record["source_language"] else None,
            ))
        else:
            examples.append(Example(**fields))
    return examples


def read_corpus_tsv(
    path: Union[str, Path],
    language: Union[Language, str],
    task: Union[TaskMode, str],
) -> Corpus:
    """Odczytuje korpus zapisany przez `write_corpus_tsv`."""
    language, task = Language(language), TaskMode(task)
    records = _read_frame(path).to_dict(orient="records")
    return make_corpus(_examples_from_records(records, language, task), language, task)


def write_split_tsv(split: DevValSplit, path: Union[str, Path]) -> Path:
    """Zapisuje podział dev/val jako jeden plik z kolumną `split`."""
    frames = []
    for name, part in (("dev", split.dev), ("val", split.val)):
        frame = _corpus_frame(part)
        frame.insert(1, "split", name)
        frames.append(frame)
    return _write_frame(pd.concat(frames, ignore_index=True), path)


def read_split_tsv(
    path: Union[str, Path],
    language: Union[Language, str],
    task: Union[TaskMode, str],
    held_out_patterns: Iterable[Pattern] = (),
) -> DevValSplit:
    language, task = Language(language), TaskMode(task)
    frame = _read_frame(path)
    parts = {}
    for name in ("dev", "val"):
        records = frame[frame["split"] == name].to_dict(orient="records")
        parts[name] = make_corpus(_examples_from_records(records, language, task), language, task)
    return DevValSplit(dev=parts["dev"], val=parts["val"], held_out_patterns=frozenset(held_out_patterns))


def write_df_index(df_index: Mapping[str, float], path: Union[str, Path]) -> Path:
    frame = pd.DataFrame(
        [[token, repr(float(df))] for token, df in sorted(df_index.items())], columns=["token", "df"],
    )
    return _write_frame(frame, path)


def read_df_index(path: Union[str, Path]) -> Dict[str, float]:
    return {record["token"]: float(record["df"]) for record in _read_frame(path).to_dict(orient="records")}


class PatternRecord(NamedTuple):
    example_id: str
    nouns: NounPair
    pattern: Pattern
    fallback: bool


def extract_patterns(
    corpus: Corpus,
    df_index: Optional[Mapping[str, float]] = None,
    threshold: float = DEFAULT_DF_THRESHOLD,
) -> Tuple[Corpus, List[PatternRecord]]:
    """
    Wyznacza rzeczowniki i wzorzec dla każdego przykładu.

    Returns the corpus with `noun_fallback` flags set plus one record per
    example that has at least two tokens; shorter sentences get no pattern.
    """
    df_index = corpus.df_index if df_index is None else df_index
    examples: List[Example] = []
    records: List[PatternRecord] = []
    for example in corpus.examples:
        try:
            nouns, fell_back = extract_nouns_with_fallback(example, df_index, threshold)
        except ExtractionError:
            logger.warning("pattern_missing", example_id=example.id)
            examples.append(example)
            continue
        if fell_back:
            example = example.with_flag(ExampleFlag.NOUN_FALLBACK.value)
        examples.append(example)
        records.append(PatternRecord(example.id, nouns, derive_pattern(example, nouns), fell_back))
    fallbacks = sum(r.fallback for r in records)
    logger.info("patterns_extracted", examples=len(examples), patterns=len(records), fallbacks=fallbacks)
    return Corpus(examples=tuple(examples), language=corpus.language, task=corpus.task,
                  df_index=corpus.df_index), records


def write_patterns_tsv(records: Sequence[PatternRecord], path: Union[str, Path]) -> Path:
    frame = pd.DataFrame(
        [[r.example_id, r.nouns.noun1, r.nouns.noun2,
          f"{r.nouns.span1[0]}:{r.nouns.span1[1]}", f"{r.nouns.span2[0]}:{r.nouns.span2[1]}",
          r.pattern.display(), int(r.fallback)] for r in records],
        columns=["id", "noun1", "noun2", "span1", "span2", "pattern", "fallback"],
    )
    return _write_frame(frame, path)


def _span(value: str) -> Tuple[int, int]:
    start, end = value.split(":")
    return int(start), int(end)


def read_patterns_tsv(path: Union[str, Path], language: Union[Language, str]) -> List[PatternRecord]:
    return [
        PatternRecord(
            record["id"],
            NounPair(noun1=record["noun1"], noun2=record["noun2"],
                     span1=_span(record["span1"]), span2=_span(record["span2"])),
            parse_template(record["pattern"], language),
            record["fallback"] == "1",
        )
        for record in _read_frame(path).to_dict(orient="records")
    ]


def write_patterns_list(patterns: Iterable[Pattern], path: Union[str, Path]) -> Path:
    frame = pd.DataFrame(sorted({p.display() for p in patterns}), columns=["pattern"])
    return _write_frame(frame, path)


def read_patterns_list(path: Union[str, Path], language: Union[Language, str]) -> List[Pattern]:
    return [parse_template(p, language) for p in _read_frame(path)["pattern"]]


def usable_examples(corpus: Corpus) -> Corpus:
    """Drops examples whose translation failed; they carry source-language text."""
    kept = [e for e in corpus.examples if ExampleFlag.TRANSLATION_FAILED.value not in e.flags]
    return make_corpus(kept, corpus.language, corpus.task)

"""
Rozszerzanie danych: kontekstowe wstawienia i podstawienia oraz tłumaczenie
korpusów z innych języków, z zapisem pochodzenia i filtrowaniem duplikatów.
"""

import asyncio
import hashlib
from typing import List, Optional, Sequence, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict

from core.corpus import _is_punctuation, make_corpus, tokenize
from core.data_models import (
    MAX_EDITS, AugmentedExample, Corpus, Example, ExampleFlag, Language,
    Operation, TaskMode,
)
from core.exceptions import ContractViolationError, PreconditionError, TranslationError
from core.providers import MASK_TOKEN, Candidate, ContextualFillModel, TranslationProvider
from utils.background import BoundedTaskRunner
from utils.cache import TranslationCache
from utils.logging import log_execution_time
from utils.resilience import CircuitBreaker, retry_async

logger = structlog.get_logger(__name__)


def derive_seed(seed: int, *parts: Union[str, int]) -> int:
    """Stabilny seed dla (seed, przykład, operacja, wariant), niezależny od kolejności przetwarzania."""
    key = "\x1f".join([str(seed), *map(str, parts)]).encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def _check_max_edits(max_edits: int) -> None:
    if not 1 <= max_edits <= MAX_EDITS:
        raise PreconditionError(f"max_edits must be within [1, {MAX_EDITS}], got {max_edits}")


def _top_candidate(candidates: Sequence[Candidate], exclude: Optional[str] = None) -> Optional[str]:
    """Best-scoring usable candidate: single token, not punctuation-only, not the excluded token."""
    for candidate in sorted(candidates, key=lambda c: -c.score):
        token = candidate.token.strip()
        if not token or any(ch.isspace() for ch in token):
            continue
        if all(_is_punctuation(ch) for ch in token):
            continue
        if exclude is not None and token.casefold() == exclude.casefold():
            continue
        return token
    return None


def _suffix(operation: Operation, variant: int) -> str:
    short = {Operation.INSERT: "ins", Operation.SUBSTITUTE: "sub"}[operation]
    return short if variant == 0 else f"{short}{variant}"


def _result(
    example: Example, operation: Operation, words: List[str], edits: int, variant: int,
) -> AugmentedExample:
    flags = example.flags
    text = " ".join(words)
    if edits == 0:
        flags = flags | {ExampleFlag.AUGMENTATION_SKIPPED.value}
        text = example.text
    return AugmentedExample(
        id=f"{example.id}-{_suffix(operation, variant)}",
        text=text,
        language=example.language,
        label=example.label,
        score=example.score,
        flags=flags,
        source_id=example.id,
        operation=operation,
        edits=edits,
    )


def contextual_insert(
    example: Example,
    fill: ContextualFillModel,
    max_edits: int = MAX_EDITS,
    seed: int = 0,
    variant: int = 0,
) -> AugmentedExample:
    """
    Wstawia od 1 do `max_edits` tokenów w losowych (seedowanych) pozycjach.

    Each position gets the fill model's top candidate. Position 0 is skipped
    when the sentence starts with a capital letter. If the model abstains
    everywhere the example passes through unchanged, flagged as skipped.
    """
    _check_max_edits(max_edits)
    words = example.text.split()
    if not tokenize(example.text):
        raise PreconditionError(f"example '{example.id}' has no tokens")
    rng = np.random.default_rng(seed)
    gaps = list(range(len(words) + 1))
    if words[0][:1].isupper():
        gaps.remove(0)
    k = min(int(rng.integers(1, max_edits + 1)), len(gaps))
    positions = sorted(int(p) for p in rng.choice(gaps, size=k, replace=False))

    applied = 0
    for gap in positions:
        at = gap + applied
        masked = words[:at] + [MASK_TOKEN] + words[at:]
        token = _top_candidate(fill.fill(masked, at))
        if token is None:
            continue
        words.insert(at, token)
        applied += 1
    return _result(example, Operation.INSERT, words, applied, variant)


def contextual_substitute(
    example: Example,
    fill: ContextualFillModel,
    max_edits: int = MAX_EDITS,
    seed: int = 0,
    variant: int = 0,
) -> AugmentedExample:
    """
    Podstawia od 1 do `max_edits` różnych tokenów kandydatami modelu.

    A candidate equal to the original token is passed over for the next one;
    when none remains the position is skipped. Edge punctuation is kept.

    Raises:
        ContractViolationError: Przykład nie ma etykiety 1
    """
    if example.label != 1:
        raise ContractViolationError(
            f"substitution is only defined for label-1 examples; '{example.id}' has label {example.label}"
        )
    _check_max_edits(max_edits)
    words = example.text.split()
    editable = [i for i, w in enumerate(words) if tokenize(w)]
    if not editable:
        raise PreconditionError(f"example '{example.id}' has no tokens")
    rng = np.random.default_rng(seed)
    k = min(int(rng.integers(1, max_edits + 1)), len(editable))
    positions = sorted(int(p) for p in rng.choice(editable, size=k, replace=False))

    applied = 0
    for i in positions:
        core = tokenize(words[i])[0]
        masked = words[:i] + [MASK_TOKEN] + words[i + 1:]
        token = _top_candidate(fill.fill(masked, i), exclude=core.text)
        if token is None:
            continue
        if core.text[:1].isupper():
            token = token[:1].upper() + token[1:]
        words[i] = words[i][: core.start] + token + words[i][core.end:]
        applied += 1
    return _result(example, Operation.SUBSTITUTE, words, applied, variant)


@log_execution_time()
def augment_binary_corpus(
    corpus: Corpus,
    fill: ContextualFillModel,
    seed: int = 0,
    max_edits: int = MAX_EDITS,
    variants_per_example: int = 1,
) -> Corpus:
    """
    Tworzy korpus rozszerzony: wstawienia dla każdego przykładu
    i podstawienia wyłącznie dla przykładów z etykietą 1.

    Skips are carried as flags; the batch never aborts on a single example.
    """
    if corpus.task is not TaskMode.BINARY:
        raise PreconditionError("contextual augmentation is defined for binary corpora only")
    if variants_per_example < 1:
        raise PreconditionError("variants_per_example must be >= 1")
    inserted: List[AugmentedExample] = []
    substituted: List[AugmentedExample] = []
    for example in corpus.examples:
        for variant in range(variants_per_example):
            inserted.append(contextual_insert(
                example, fill, max_edits, derive_seed(seed, example.id, "insert", variant), variant,
            ))
            if example.label == 1:
                substituted.append(contextual_substitute(
                    example, fill, max_edits, derive_seed(seed, example.id, "substitute", variant), variant,
                ))
    outputs = inserted + substituted
    skipped = sum(ExampleFlag.AUGMENTATION_SKIPPED.value in e.flags for e in outputs)
    positives = sum(e.label == 1 for e in outputs)
    logger.info(
        "corpus_augmented",
        source=len(corpus),
        inserted=len(inserted),
        substituted=len(substituted),
        skipped=skipped,
        positive_share=round(positives / len(outputs), 4) if outputs else 0.0,
    )
    return make_corpus(outputs, corpus.language, TaskMode.BINARY)


async def translate_corpus_async(
    corpus: Corpus,
    target: Union[Language, str],
    provider: TranslationProvider,
    cache: Optional[TranslationCache] = None,
    max_in_flight: int = 4,
    retries: int = 3,
    backoff_seconds: float = 0.5,
    failure_threshold: int = 5,
) -> Corpus:
    """
    Tłumaczy każdy przykład korpusu na język docelowy.

    Provider calls go through the persistent cache, a retry with exponential
    backoff and a circuit breaker. A failed example keeps its source text and
    is flagged `translation_failed`; the batch continues.

    Raises:
        PreconditionError: Korpus jest już w języku docelowym
    """
    target = Language(target)
    source = corpus.language
    if source is target:
        raise PreconditionError(f"corpus is already in {target.value}")
    provider.validate()

    call = cache.cached(provider.translate) if cache is not None else provider.translate
    breaker = CircuitBreaker(f"translate-{provider.name}", failure_threshold=failure_threshold)

    async def translate_one(example: Example) -> str:
        translated = await retry_async(
            breaker, call, example.text, source, target,
            attempts=retries, base_delay=backoff_seconds,
        )
        if not isinstance(translated, str) or not translated.strip():
            raise TranslationError(f"empty translation for '{example.id}'")
        return translated

    runner = BoundedTaskRunner(max_in_flight)
    results = await runner.run_all(translate_one(e) for e in corpus.examples)

    outputs: List[AugmentedExample] = []
    failures = 0
    for example, result in zip(corpus.examples, results):
        flags = example.flags
        text = result
        if isinstance(result, BaseException):
            failures += 1
            flags = flags | {ExampleFlag.TRANSLATION_FAILED.value}
            text = example.text
            logger.warning("translation_failed", example_id=example.id, error=str(result))
        outputs.append(AugmentedExample(
            id=f"{example.id}-{source.value}",
            text=text,
            language=target,
            label=example.label,
            score=example.score,
            flags=flags,
            source_id=example.id,
            operation=Operation.TRANSLATE,
            edits=0,
            source_language=source,
        ))
    logger.info(
        "corpus_translated", source=source.value, target=target.value,
        examples=len(outputs), failures=failures,
        cache_hits=cache.hits if cache else 0,
    )
    return make_corpus(outputs, target, corpus.task)


def translate_corpus(
    corpus: Corpus,
    target: Union[Language, str],
    provider: TranslationProvider,
    cache: Optional[TranslationCache] = None,
    **options,
) -> Corpus:
    """Synchroniczna nakładka na `translate_corpus_async`."""
    return asyncio.run(translate_corpus_async(corpus, target, provider, cache, **options))


def normalize_for_dedupe(text: str) -> str:
    return " ".join(text.casefold().split())


class DedupeResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    corpus: Corpus
    dropped: int
    dropped_fraction: float


def dedupe_against(translated: Corpus, reference: Corpus) -> DedupeResult:
    """
    Usuwa tłumaczenia identyczne (po normalizacji) z dowolnym zdaniem referencyjnym.

    Normalization is case-folding plus whitespace collapsing only.
    """
    if translated.language is not reference.language:
        raise PreconditionError(
            f"cannot dedupe {translated.language.value} against {reference.language.value}"
        )
    seen = {normalize_for_dedupe(t) for t in reference.texts()}
    kept = [e for e in translated.examples if normalize_for_dedupe(e.text) not in seen]
    dropped = len(translated) - len(kept)
    fraction = dropped / len(translated) if len(translated) else 0.0
    logger.info("translations_deduped", kept=len(kept), dropped=dropped, dropped_fraction=fraction)
    return DedupeResult(
        corpus=make_corpus(kept, translated.language, translated.task),
        dropped=dropped,
        dropped_fraction=fraction,
    )



"""
Abstrakcyjne interfejsy dostawców (model uzupełniania kontekstowego, tłumacz,
enkoder zdań) oraz ich deterministyczne implementacje referencyjne.
"""

import csv
from abc import ABC, abstractmethod
from collections import Counter, defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.feature_extraction.text import HashingVectorizer

from core.corpus import tokenize
from core.data_models import Corpus, Language

MASK_TOKEN = "[MASK]"


class Candidate(NamedTuple):
    token: str
    score: float


class ContextualFillModel(ABC):
    """Proponuje tokeny pasujące do zamaskowanej pozycji w sekwencji."""

    name: str = "fill"

    @abstractmethod
    def fill(self, tokens: Sequence[str], mask_index: int) -> List[Candidate]:
        """
        Zwraca kandydatów posortowanych malejąco według wyniku.

        Args:
            tokens: Sekwencja tokenów z `MASK_TOKEN` na pozycji `mask_index`
            mask_index: Indeks zamaskowanej pozycji

        Returns:
            List[Candidate]: Pusta lista oznacza wstrzymanie się od odpowiedzi
        """
        pass


class StaticFillModel(ContextualFillModel):
    """Mock returning the same ranked candidates for every context."""

    name = "static"

    def __init__(self, candidates: Iterable[str]):
        ranked = list(candidates)
        self.candidates = [Candidate(tok, float(len(ranked) - i)) for i, tok in enumerate(ranked)]

    def fill(self, tokens: Sequence[str], mask_index: int) -> List[Candidate]:
        return list(self.candidates)


def _core(token: str) -> Optional[str]:
    parts = tokenize(token)
    return parts[0].norm if parts else None


class BigramFillModel(ContextualFillModel):
    """
    Model uzupełniania oparty na współwystępowaniu sąsiadów w korpusie referencyjnym.

    score(w) = count(left, w) + count(w, right); ties broken alphabetically.
    """

    name = "bigram"

    def __init__(self, follows: Mapping[str, Counter], precedes: Mapping[str, Counter], top_k: int = 10):
        self.follows = follows
        self.precedes = precedes
        self.top_k = top_k

    @classmethod
    def from_corpus(cls, corpus: Corpus, top_k: int = 10) -> "BigramFillModel":
        follows: Dict[str, Counter] = defaultdict(Counter)
        precedes: Dict[str, Counter] = defaultdict(Counter)
        for text in corpus.texts():
            norms = [t.norm for t in tokenize(text)]
            for left, right in zip(norms, norms[1:]):
                follows[left][right] += 1
                precedes[right][left] += 1
        return cls(follows, precedes, top_k=top_k)

    def fill(self, tokens: Sequence[str], mask_index: int) -> List[Candidate]:
        scores: Counter = Counter()
        left = _core(tokens[mask_index - 1]) if mask_index > 0 else None
        right = _core(tokens[mask_index + 1]) if mask_index + 1 < len(tokens) else None
        if left is not None:
            scores.update(self.follows.get(left, Counter()))
        if right is not None:
            scores.update(self.precedes.get(right, Counter()))
        ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
        return [Candidate(tok, float(score)) for tok, score in ranked[: self.top_k]]


class TranslationProvider(ABC):
    """Abstrakcyjna klasa bazowa dla dostawców tłumaczeń."""

    name: str = "translator"

    def validate(self) -> None:
        """Sprawdza konfigurację (np. poświadczenia) przed rozpoczęciem pracy."""
        return None

    @abstractmethod
    async def translate(self, text: str, source: Language, target: Language) -> str:
        pass


class IdentityTranslator(TranslationProvider):
    name = "identity"

    async def translate(self, text: str, source: Language, target: Language) -> str:
        return text


class DictionaryTranslator(TranslationProvider):
    """
    Tłumaczenie słowo po słowie według leksykonu; nieznane słowa przechodzą bez zmian.

    Edge punctuation and the capitalization of the first letter are preserved.
    """

    name = "dictionary"

    def __init__(self, lexicon: Mapping[Tuple[str, str], Mapping[str, str]]):
        self.lexicon = lexicon

    @classmethod
    def from_tsv(cls, path: Union[str, Path]) -> "DictionaryTranslator":
        lexicon: Dict[Tuple[str, str], Dict[str, str]] = defaultdict(dict)
        with open(path, encoding="utf-8", newline="") as handle:
            for row in csv.DictReader(handle, delimiter="\t"):
                lexicon[(row["source"], row["target"])][row["word"].casefold()] = row["translation"]
        return cls(lexicon)

    async def translate(self, text: str, source: Language, target: Language) -> str:
        table = self.lexicon.get((Language(source).value, Language(target).value), {})
        words = []
        for raw in text.split():
            parts = tokenize(raw)
            if not parts:
                words.append(raw)
                continue
            core = parts[0]
            replacement = table.get(core.norm)
            if replacement is None:
                words.append(raw)
                continue
            if core.text[:1].isupper():
                replacement = replacement[:1].upper() + replacement[1:]
            words.append(raw[: core.start] + replacement + raw[core.end:])
        return " ".join(words)


class SentenceEncoder(ABC):
    """Zamienia zdania na wektory o stałym wymiarze."""

    name: str = "encoder"

    @property
    @abstractmethod
    def dimension(self) -> int:
        pass

    @abstractmethod
    def encode(self, texts: Sequence[str]) -> np.ndarray:
        """Zwraca macierz o kształcie (len(texts), dimension)."""
        pass


class HashingSentenceEncoder(SentenceEncoder):
    """Deterministic encoder: hashed word n-grams, L2-normalized."""

    name = "hashing"

    def __init__(self, dimension: int = 64, ngram_max: int = 2):
        self._dimension = dimension
        self.vectorizer = HashingVectorizer(
            n_features=dimension, ngram_range=(1, ngram_max), norm="l2",
            token_pattern=r"(?u)\b\w+\b",
        )

    @property
    def dimension(self) -> int:
        return self._dimension

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        return self.vectorizer.transform(list(texts)).toarray()

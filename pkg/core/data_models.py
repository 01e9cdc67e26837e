"""
Ten plik zawiera modele Pydantic służące jako "kontrakty" dla danych
przepływających przez potok: przykłady, pary rzeczowników, wzorce i korpusy.
"""

import hashlib
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from core.exceptions import ContractViolationError, PatternInvariantError

PLACEHOLDER = "⟨B⟩"
BLANK = "[blank]"
MAX_EDITS = 2


class Language(str, Enum):
    EN = "en"
    FR = "fr"
    IT = "it"


class TaskMode(str, Enum):
    BINARY = "binary"
    LIKERT = "likert"


class Operation(str, Enum):
    INSERT = "insert"
    SUBSTITUTE = "substitute"
    TRANSLATE = "translate"


class ExampleFlag(str, Enum):
    NOUN_FALLBACK = "noun_fallback"
    AUGMENTATION_SKIPPED = "augmentation_skipped"
    TRANSLATION_FAILED = "translation_failed"


class Example(BaseModel):
    """Jedno zdanie w jednym języku z etykietą binarną albo oceną 1-7."""

    model_config = ConfigDict(frozen=True)

    id: str
    text: str
    language: Language
    label: Optional[int] = None
    score: Optional[float] = None
    flags: FrozenSet[str] = frozenset()

    @field_validator("text")
    @classmethod
    def text_not_blank(cls, v: str) -> str:
        if not " ".join(v.split()):
            raise ValueError("text is empty after whitespace normalization")
        return v

    @field_validator("label")
    @classmethod
    def label_is_binary(cls, v: Optional[int]) -> Optional[int]:
        if v is not None and v not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {v}")
        return v

    @field_validator("score")
    @classmethod
    def score_in_likert_range(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not 1.0 <= v <= 7.0:
            raise ValueError(f"score must be within [1, 7], got {v}")
        return v

    @model_validator(mode="after")
    def exactly_one_target(self) -> "Example":
        if (self.label is None) == (self.score is None):
            raise ValueError("exactly one of label or score must be set")
        return self

    @property
    def task(self) -> TaskMode:
        return TaskMode.BINARY if self.label is not None else TaskMode.LIKERT

    @property
    def target(self) -> Union[int, float]:
        return self.label if self.label is not None else self.score  # type: ignore[return-value]

    def with_flag(self, flag: str) -> "Example":
        return self.model_copy(update={"flags": self.flags | {flag}})


class AugmentedExample(Example):
    """Example produced by an edit or translation, with provenance back to its source."""

    source_id: str
    operation: Operation
    edits: int = Field(default=0, ge=0)
    source_language: Optional[Language] = None

    @model_validator(mode="after")
    def provenance_is_consistent(self) -> "AugmentedExample":
        if self.operation is Operation.TRANSLATE:
            if self.edits != 0:
                raise ValueError("translated examples carry edits=0")
        elif self.edits > MAX_EDITS:
            raise ValueError(f"at most {MAX_EDITS} edits allowed, got {self.edits}")
        if self.operation is Operation.SUBSTITUTE and self.label != 1:
            raise ContractViolationError(
                f"substitution output '{self.id}' must come from a label-1 source"
            )
        return self


class NounPair(BaseModel):
    """The two noun slots of a sentence, in textual order, with half-open character spans."""

    model_config = ConfigDict(frozen=True)

    noun1: str
    noun2: str
    span1: Tuple[int, int]
    span2: Tuple[int, int]

    @model_validator(mode="after")
    def spans_are_ordered(self) -> "NounPair":
        for noun, (start, end) in ((self.noun1, self.span1), (self.noun2, self.span2)):
            if not noun:
                raise PatternInvariantError("noun must be non-empty")
            if not 0 <= start < end or end - start != len(noun):
                raise PatternInvariantError(f"span {(start, end)} does not delimit '{noun}'")
        if self.span1[1] > self.span2[0]:
            raise PatternInvariantError(
                f"spans must be ordered and non-overlapping: {self.span1} / {self.span2}"
            )
        return self

    def check_against(self, text: str) -> None:
        """Sprawdza, czy oba zakresy wskazują dokładnie swoje tokeny w tekście."""
        for noun, (start, end) in ((self.noun1, self.span1), (self.noun2, self.span2)):
            if text[start:end] != noun:
                raise PatternInvariantError(
                    f"span {(start, end)} holds '{text[start:end]}', expected '{noun}'"
                )


class Pattern(BaseModel):
    """Szablon zdania z dwoma miejscami na rzeczowniki."""

    model_config = ConfigDict(frozen=True)

    template: str
    language: Language

    @field_validator("template")
    @classmethod
    def has_two_slots(cls, v: str) -> str:
        if v.count(PLACEHOLDER) != 2:
            raise PatternInvariantError(
                f"template must contain exactly two {PLACEHOLDER} slots: {v!r}"
            )
        return v

    def fill(self, noun1: str, noun2: str) -> str:
        head, middle, tail = self.template.split(PLACEHOLDER)
        return f"{head}{noun1}{middle}{noun2}{tail}"

    def display(self) -> str:
        return self.template.replace(PLACEHOLDER, BLANK)


class Corpus(BaseModel):
    """Uporządkowany zbiór przykładów w jednym języku wraz z indeksem DF."""

    model_config = ConfigDict(frozen=True)

    examples: Tuple[Example, ...] = ()
    language: Language
    task: TaskMode = TaskMode.BINARY
    df_index: Dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def examples_match_corpus(self) -> "Corpus":
        for example in self.examples:
            if example.language is not self.language:
                raise ValueError(
                    f"example '{example.id}' is {example.language.value}, corpus is {self.language.value}"
                )
            if example.task is not self.task:
                raise ValueError(f"example '{example.id}' does not match task {self.task.value}")
        return self

    def __len__(self) -> int:
        return len(self.examples)

    def ids(self) -> List[str]:
        return [e.id for e in self.examples]

    def texts(self) -> List[str]:
        return [e.text for e in self.examples]

    def targets(self) -> List[Union[int, float]]:
        return [e.target for e in self.examples]

    def fingerprint(self) -> str:
        """Skrót SHA-256 treści korpusu (id, tekst, cel, flagi)."""
        digest = hashlib.sha256()
        digest.update(f"{self.language.value}\t{self.task.value}\n".encode("utf-8"))
        for e in self.examples:
            digest.update(f"{e.id}\t{e.text}\t{e.target}\t{','.join(sorted(e.flags))}\n".encode("utf-8"))
        return digest.hexdigest()[:16]


class DevValSplit(BaseModel):
    model_config = ConfigDict(frozen=True)

    dev: Corpus
    val: Corpus
    held_out_patterns: FrozenSet[Pattern] = frozenset()

    @model_validator(mode="after")
    def disjoint(self) -> "DevValSplit":
        overlap = set(self.dev.ids()) & set(self.val.ids())
        if overlap:
            raise ValueError(f"dev and val share ids: {sorted(overlap)[:5]}")
        return self

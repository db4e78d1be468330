"""Labeled-question data model, corpus file IO, BIO conversion, and folds.

A corpus file is UTF-8 line-delimited JSON, one record per line:

    {"id": "...", "text": "...", "qtype": "Effectiveness",
     "entities": [{"start": 5, "end": 11, "etype": "DS"}]}

Offsets are Unicode scalar-value (Python ``str``) indices, start inclusive,
end exclusive.
"""

from __future__ import annotations

import json
import random
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from dsqa.textproc import Token, tokenize


class CorpusError(ValueError):
    """A corpus record violates the data model."""


class AlignmentWarning(UserWarning):
    """An entity boundary fell inside a token and was expanded."""


class QuestionType(Enum):
    """The 8 question categories a user turn is routed by."""

    INTERACTION = "Interaction"
    USAGE = "Usage"
    EFFECTIVENESS = "Effectiveness"
    ADVERSE_EFFECTS = "AdverseEffects"
    INDICATION = "Indication"
    BACKGROUND = "Background"
    SAFETY = "Safety"
    AVAILABILITY = "Availability"

    @classmethod
    def parse(cls, label: str) -> "QuestionType":
        try:
            return cls(label)
        except ValueError:
            raise CorpusError(f"unknown question type label: {label!r}") from None


class EntityType(Enum):
    """The 4 entity categories annotated in questions."""

    DS = "DS"
    DIS = "DIS"
    MED = "MED"
    MISC = "MISC"

    @classmethod
    def parse(cls, label: str) -> "EntityType":
        try:
            return cls(label)
        except ValueError:
            raise CorpusError(f"unknown entity type label: {label!r}") from None


QUESTION_TYPES: tuple[QuestionType, ...] = tuple(QuestionType)
ENTITY_TYPES: tuple[EntityType, ...] = tuple(EntityType)

# Tag inventory for sequence labeling: O first, then B/I per entity type.
TAGS: tuple[str, ...] = ("O",) + tuple(
    f"{prefix}-{et.value}" for et in ENTITY_TYPES for prefix in ("B", "I")
)
TAG_INDEX: dict[str, int] = {t: i for i, t in enumerate(TAGS)}
NUM_TAGS = len(TAGS)


@dataclass(frozen=True, order=True)
class EntitySpan:
    """A typed entity occurrence, anchored by character offsets."""

    start: int
    end: int
    etype: EntityType
    surface: str = field(compare=False, default="")

    def check_against(self, text: str, record_id: str = "?") -> None:
        if not (0 <= self.start < self.end <= len(text)):
            raise CorpusError(
                f"record {record_id}: span [{self.start},{self.end}) out of bounds "
                f"for text of length {len(text)}"
            )
        if self.surface and text[self.start : self.end] != self.surface:
            raise CorpusError(
                f"record {record_id}: span surface {self.surface!r} does not match "
                f"text slice {text[self.start:self.end]!r}"
            )


@dataclass(frozen=True)
class LabeledQuestion:
    """One training/eval unit: question text, its type, and entity spans."""

    id: str
    text: str
    qtype: QuestionType
    entities: tuple[EntitySpan, ...] = ()

    def __post_init__(self) -> None:
        spans = tuple(sorted(self.entities, key=lambda s: (s.start, s.end)))
        object.__setattr__(self, "entities", spans)
        prev_end = -1
        for span in spans:
            span.check_against(self.text, self.id)
            if span.start < prev_end:
                raise CorpusError(f"record {self.id}: overlapping entity spans")
            prev_end = span.end


@dataclass(frozen=True)
class TagSequence:
    """Tokens with one BIO tag per token."""

    tokens: tuple[Token, ...]
    tags: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.tags):
            raise ValueError("tokens and tags length mismatch")
        for tag in self.tags:
            if tag not in TAG_INDEX:
                raise ValueError(f"unknown tag {tag!r}")


def _span_from_json(obj: dict, text: str, record_id: str) -> EntitySpan:
    try:
        start, end = int(obj["start"]), int(obj["end"])
        etype = EntityType.parse(obj["etype"])
    except KeyError as exc:
        raise CorpusError(f"record {record_id}: entity missing field {exc}") from None
    if not (0 <= start < end <= len(text)):
        raise CorpusError(
            f"record {record_id}: span [{start},{end}) out of bounds for text of "
            f"length {len(text)}"
        )
    return EntitySpan(start=start, end=end, etype=etype, surface=text[start:end])


def _record_from_json(obj: dict, lineno: int) -> LabeledQuestion:
    try:
        record_id = str(obj["id"])
        text = obj["text"]
        qtype = QuestionType.parse(obj["qtype"])
        raw_entities = obj.get("entities", [])
    except KeyError as exc:
        raise CorpusError(f"line {lineno}: record missing field {exc}") from None
    if not isinstance(text, str):
        raise CorpusError(f"line {lineno}: text must be a string")
    spans = tuple(_span_from_json(e, text, record_id) for e in raw_entities)
    return LabeledQuestion(id=record_id, text=text, qtype=qtype, entities=spans)


def load_corpus(path: str | Path) -> list[LabeledQuestion]:
    """Read a line-delimited JSON corpus; abort with the line number on bad input."""
    records: list[LabeledQuestion] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON: {exc}") from None
            try:
                records.append(_record_from_json(obj, lineno))
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from None
    return records


def save_corpus(records: Iterable[LabeledQuestion], path: str | Path) -> None:
    """Write records as line-delimited JSON with the canonical field set."""
    with open(path, "w", encoding="utf-8") as fh:
        for q in records:
            obj = {
                "id": q.id,
                "text": q.text,
                "qtype": q.qtype.value,
                "entities": [
                    {"start": s.start, "end": s.end, "etype": s.etype.value}
                    for s in q.entities
                ],
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def to_bio(q: LabeledQuestion, tokenizer=tokenize) -> TagSequence:
    """Project entity spans onto tokens as BIO tags.

    A span boundary that falls inside a token expands the span to the
    enclosing token boundaries; an :class:`AlignmentWarning` records it.
    """
    tokens = tuple(tokenizer(q.text))
    tags = ["O"] * len(tokens)
    for span in q.entities:
        first = True
        for i, tok in enumerate(tokens):
            if tok.start < span.end and span.start < tok.end:
                if tok.start < span.start or tok.end > span.end:
                    warnings.warn(
                        f"record {q.id}: span [{span.start},{span.end}) expanded to "
                        f"token boundaries [{tok.start},{tok.end})",
                        AlignmentWarning,
                        stacklevel=2,
                    )
                tags[i] = ("B-" if first else "I-") + span.etype.value
                first = False
    return TagSequence(tokens=tokens, tags=tuple(tags))


def repair_bio(tags: Sequence[str]) -> tuple[str, ...]:
    """Make a tag sequence BIO-valid: an I-t with no valid predecessor becomes B-t."""
    repaired: list[str] = []
    for i, tag in enumerate(tags):
        if tag.startswith("I-"):
            etype = tag[2:]
            prev = repaired[i - 1] if i > 0 else "O"
            if prev not in (f"B-{etype}", f"I-{etype}"):
                tag = f"B-{etype}"
        repaired.append(tag)
    return tuple(repaired)


def from_bio(seq: TagSequence, text: str) -> list[EntitySpan]:
    """Decode maximal B/I runs back into character-offset spans (total via repair)."""
    tags = repair_bio(seq.tags)
    spans: list[EntitySpan] = []
    i = 0
    while i < len(tags):
        tag = tags[i]
        if tag.startswith("B-"):
            etype = EntityType(tag[2:])
            j = i + 1
            while j < len(tags) and tags[j] == f"I-{etype.value}":
                j += 1
            start = seq.tokens[i].start
            end = seq.tokens[j - 1].end
            spans.append(
                EntitySpan(start=start, end=end, etype=etype, surface=text[start:end])
            )
            i = j
        else:
            i += 1
    return spans


def stratified_folds(
    data: Sequence[LabeledQuestion], k: int, seed: int = 0
) -> list[list[int]]:
    """Partition indices into k folds with per-class counts differing by <= 1.

    Deterministic for a given seed. Raises ``ValueError`` when k < 2 or
    k exceeds the number of samples.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k > len(data):
        raise ValueError(f"k={k} exceeds corpus size {len(data)}")
    by_class: dict[QuestionType, list[int]] = {}
    for idx, q in enumerate(data):
        by_class.setdefault(q.qtype, []).append(idx)
    rng = random.Random(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    cursor = 0
    for qtype in sorted(by_class, key=lambda t: t.value):
        indices = by_class[qtype]
        rng.shuffle(indices)
        for idx in indices:
            folds[cursor % k].append(idx)
            cursor += 1
    return [sorted(fold) for fold in folds]

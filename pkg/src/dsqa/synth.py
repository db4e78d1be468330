"""Seeded synthetic corpus: templated questions with gold entity spans.

A desk-scale stand-in for a real labeled question set. Templates carry
slots named after entity types ("Does {DS} really work?"); slot fills come
from per-type gazetteers and their character offsets become gold spans.
Class counts follow the default question-type distribution (largest
remainder allocation) unless a config overrides it.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field

from dsqa.corpus import EntitySpan, EntityType, LabeledQuestion, QuestionType

# Observed distribution of the 8 question types in the reference annotation.
DEFAULT_PROPORTIONS: dict[QuestionType, int] = {
    QuestionType.AVAILABILITY: 147,
    QuestionType.ADVERSE_EFFECTS: 133,
    QuestionType.BACKGROUND: 125,
    QuestionType.EFFECTIVENESS: 318,
    QuestionType.INDICATION: 188,
    QuestionType.INTERACTION: 237,
    QuestionType.SAFETY: 108,
    QuestionType.USAGE: 253,
}

DEFAULT_GAZETTEERS: dict[str, list[str]] = {
    "DS": [
        "Niacin", "kratom", "ginseng", "melatonin", "shark cartilage",
        "acai berry", "valerian root", "L-glutamine", "Selenium", "ephedrine",
        "St. John's Wort", "fish oil", "echinacea", "turmeric",
        "ginkgo biloba", "milk thistle", "blessed thistle", "zinc",
        "magnesium", "creatine", "biotin", "chromium picolinate",
        "saw palmetto", "black cohosh", "glucosamine", "CoQ10", "vitamin D",
        "folic acid", "ashwagandha", "elderberry",
    ],
    "MED": [
        "levothyroxine", "warfarin", "ibuprofen", "metformin", "lisinopril",
        "aspirin", "sertraline", "atorvastatin", "omeprazole", "amlodipine",
    ],
    "DIS": [
        "IBS", "headache", "insomnia", "arthritis", "diabetes", "anxiety",
        "depression", "migraines", "fatigue", "eczema",
    ],
    "MISC": [
        "athletes", "teenagers", "older adults", "vegetarians", "bodybuilders",
    ],
}

DEFAULT_TEMPLATES: dict[QuestionType, list[str]] = {
    QuestionType.INTERACTION: [
        "Does anyone know if you can take {DS} while taking {MED}?",
        "Can I take {DS} with {MED}?",
        "Is it OK to combine {DS} and {MED}?",
        "Will {DS} interact with {MED}?",
    ],
    QuestionType.USAGE: [
        "What is the appropriate dosage of {DS} for {DIS} condition?",
        "How much {DS} should I take daily?",
        "How do I use {DS}?",
        "What is the right dose of {DS} for {MISC}?",
    ],
    QuestionType.EFFECTIVENESS: [
        "Does {DS} really work?",
        "Is {DS} effective for {DIS}?",
        "Do {DS} supplements actually help?",
        "Are there any proven benefits to taking {DS}?",
    ],
    QuestionType.ADVERSE_EFFECTS: [
        "Does {DS} cause {DIS}?",
        "Are there any dangerous side effects of {DS}?",
        "What side effects does {DS} have?",
    ],
    QuestionType.INDICATION: [
        "What are the benefits of using {DS}?",
        "What is {DS} good for?",
        "What conditions does {DS} help with?",
    ],
    QuestionType.BACKGROUND: [
        "What exactly is {DS}?",
        "What is {DS} made from?",
        "Can someone explain what {DS} is?",
    ],
    QuestionType.SAFETY: [
        "Is {DS} safe during pregnancy?",
        "Is it safe to take {DS}?",
        "Is it safe to take {DS} every day?",
        "Is {DS} safe for {MISC}?",
    ],
    QuestionType.AVAILABILITY: [
        "Where can I buy {DS} pills?",
        "Where can I get {DS}?",
        "What stores sell {DS}?",
    ],
}

_SLOT_RE = re.compile(r"\{(DS|DIS|MED|MISC)\}")


class SynthConfigError(ValueError):
    """A generator config references a slot with no gazetteer entries."""


@dataclass
class SynthConfig:
    size: int = 500
    templates: dict[QuestionType, list[str]] = field(
        default_factory=lambda: {k: list(v) for k, v in DEFAULT_TEMPLATES.items()}
    )
    gazetteers: dict[str, list[str]] = field(
        default_factory=lambda: {k: list(v) for k, v in DEFAULT_GAZETTEERS.items()}
    )
    proportions: dict[QuestionType, int] | None = None

    def effective_proportions(self) -> dict[QuestionType, int]:
        if self.proportions is not None:
            return self.proportions
        return {
            qt: DEFAULT_PROPORTIONS[qt]
            for qt in self.templates
            if DEFAULT_PROPORTIONS.get(qt)
        }


def _allocate(size: int, weights: dict[QuestionType, int]) -> dict[QuestionType, int]:
    """Largest-remainder apportionment, deterministic by enum order."""
    total = sum(weights.values())
    shares = {qt: size * w / total for qt, w in weights.items()}
    counts = {qt: int(share) for qt, share in shares.items()}
    leftover = size - sum(counts.values())
    order = sorted(
        weights,
        key=lambda qt: (-(shares[qt] - counts[qt]), qt.value),
    )
    for qt in order[:leftover]:
        counts[qt] += 1
    return counts


def fill_template(
    template: str,
    gazetteers: dict[str, list[str]],
    rng: random.Random,
) -> tuple[str, list[EntitySpan]]:
    """Substitute each slot and record the gold span of every fill."""
    text_parts: list[str] = []
    spans: list[EntitySpan] = []
    cursor = 0
    offset = 0
    for match in _SLOT_RE.finditer(template):
        slot = match.group(1)
        entries = gazetteers.get(slot) or []
        if not entries:
            raise SynthConfigError(
                f"template {template!r} references slot {slot} with an empty gazetteer"
            )
        fill = rng.choice(entries)
        literal = template[cursor : match.start()]
        text_parts.append(literal)
        offset += len(literal)
        text_parts.append(fill)
        spans.append(
            EntitySpan(
                start=offset,
                end=offset + len(fill),
                etype=EntityType(slot),
                surface=fill,
            )
        )
        offset += len(fill)
        cursor = match.end()
    text_parts.append(template[cursor:])
    return "".join(text_parts), spans


def generate_synthetic_corpus(
    config: SynthConfig | None = None, seed: int = 0
) -> list[LabeledQuestion]:
    """Deterministic for a given seed; class counts follow the configured mix."""
    config = config or SynthConfig()
    if config.size == 0:
        return []
    weights = config.effective_proportions()
    if not weights:
        raise SynthConfigError("no question types with templates and proportions")
    counts = _allocate(config.size, weights)
    rng = random.Random(seed)
    drafts: list[tuple[QuestionType, str, list[EntitySpan]]] = []
    for qtype in sorted(counts, key=lambda qt: qt.value):
        templates = config.templates.get(qtype)
        if not templates:
            raise SynthConfigError(f"no templates for question type {qtype.value}")
        for _ in range(counts[qtype]):
            template = rng.choice(templates)
            text, spans = fill_template(template, config.gazetteers, rng)
            drafts.append((qtype, text, spans))
    rng.shuffle(drafts)
    return [
        LabeledQuestion(
            id=f"synth-{serial:05d}",
            text=text,
            qtype=qtype,
            entities=tuple(spans),
        )
        for serial, (qtype, text, spans) in enumerate(drafts)
    ]

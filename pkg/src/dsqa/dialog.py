"""Per-turn pipeline: classify, extract, link, query, render.

Every failure path maps to a fallback template, so a turn always produces
a non-empty answer. The trace records each stage's decision; stage timings
live in a separate field so decision traces stay deterministic.
"""

from __future__ import annotations

import json
import string
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from dsqa.classifier import predict_qtype
from dsqa.corpus import QUESTION_TYPES, EntityType, QuestionType
from dsqa.kb import (
    ATTRIBUTE_NAMES,
    RELATION_SIGNATURES,
    Fact,
    KnowledgeIndex,
    lookup_entity,
    query,
    route_for,
)
from dsqa.ner import predict_entities


class DialogConfigError(ValueError):
    """A template set fails validation at load time."""


_RELATION_SLOTS = {"ds", "object", "source"}
_ATTRIBUTE_SLOTS = {"ds", "value", "source"}
_FALLBACK_SLOTS = {
    "no_entity": set(),
    "unlinked_entity": {"surface"},
    "no_answer": {"ds"},
    "low_confidence": {"top1", "top2"},
}

DEFAULT_TEMPLATES: dict[str, str] = {
    "Interaction.interacts_with": "{ds} may interact with {object} (source: {source})",
    "Effectiveness.is_effective_for": "{ds} is effective for {object}",
    "Indication.is_effective_for": "{ds} is effective for {object}",
    "Indication.has_therapeutic_class": "{ds} belongs to the therapeutic class {object}",
    "AdverseEffects.has_adverse_effect_on": "The {ds} preparation has adverse effects like {object}",
    "AdverseEffects.has_adverse_reaction": "{ds} has been associated with {object}",
    "Availability.has_ingredient": "{ds} is available in the product {object}",
    "Background.background": "Here is what I found about {ds}: {value}",
    "Safety.safety": "Here is what I found about {ds}: {value}",
    "Usage.usage": "Here is what I found about {ds}: {value}",
    "fallback.no_entity": (
        "I could not find a supplement name in your question. "
        "Could you tell me which supplement you are asking about?"
    ),
    "fallback.unlinked_entity": (
        "I do not have information about \"{surface}\" in my knowledge store."
    ),
    "fallback.no_answer": "I could not find an answer about {ds} for that question.",
    "fallback.low_confidence": (
        "I am not sure I understood. Are you asking a {top1} or a {top2} question?"
    ),
}


def _slots_used(template: str) -> set[str]:
    names = set()
    for _, fname, _, _ in string.Formatter().parse(template):
        if fname:
            names.add(fname)
    return names


@dataclass(frozen=True)
class TemplateSet:
    """Validated route-key -> template mapping."""

    templates: dict[str, str]

    def render_fact(self, qtype: QuestionType, fact: Fact) -> str:
        template = self.templates[f"{qtype.value}.{fact.name}"]
        return template.format(
            ds=fact.subject_name,
            object=fact.object_name,
            value=fact.value,
            source=fact.source or "unspecified",
        )

    def render_fallback(self, kind: str, **slots: str) -> str:
        return self.templates[f"fallback.{kind}"].format(**slots)


def load_template_set(source: dict[str, str] | str | Path | None = None) -> TemplateSet:
    """Build and validate a template set; None loads the defaults.

    Validation: every routing-table target and fallback kind has a
    template, and every slot a template uses is defined for the fact shape
    it renders.
    """
    if source is None:
        mapping = dict(DEFAULT_TEMPLATES)
    elif isinstance(source, dict):
        mapping = dict(source)
    else:
        mapping = json.loads(Path(source).read_text(encoding="utf-8"))
        if not isinstance(mapping, dict):
            raise DialogConfigError(f"{source}: template file must be a JSON object")

    for qtype in QUESTION_TYPES:
        rel_types, attr_name = route_for(qtype)
        for target in (*rel_types, *( (attr_name,) if attr_name else () )):
            key = f"{qtype.value}.{target}"
            if key not in mapping:
                raise DialogConfigError(f"missing template for route {key!r}")
    for kind in _FALLBACK_SLOTS:
        if f"fallback.{kind}" not in mapping:
            raise DialogConfigError(f"missing template for fallback.{kind}")

    for key, template in mapping.items():
        head, _, target = key.partition(".")
        if head == "fallback":
            allowed = _FALLBACK_SLOTS.get(target)
            if allowed is None:
                raise DialogConfigError(f"unknown fallback kind in key {key!r}")
        elif target in RELATION_SIGNATURES:
            allowed = _RELATION_SLOTS
        elif target in ATTRIBUTE_NAMES:
            allowed = _ATTRIBUTE_SLOTS
        else:
            raise DialogConfigError(f"unknown route target in key {key!r}")
        extra = _slots_used(template) - allowed
        if extra:
            raise DialogConfigError(
                f"template {key!r} references undefined slots {sorted(extra)}"
            )
    return TemplateSet(templates=mapping)


@dataclass
class DialogConfig:
    confidence_floor: float = 0.4
    max_facts: int = 5
    prefix_match: bool = True


@dataclass(frozen=True)
class LinkedEntity:
    surface: str
    etype: EntityType
    start: int
    end: int
    cui: str | None = None
    match: str | None = None


@dataclass
class Trace:
    stages: list[dict] = field(default_factory=list)
    timings_ms: dict[str, float] = field(default_factory=dict)

    def record(self, stage: str, elapsed_s: float, **decision) -> None:
        self.stages.append({"stage": stage, **decision})
        self.timings_ms[stage] = round(elapsed_s * 1000.0, 3)


@dataclass
class Turn:
    user_text: str
    qtype: QuestionType
    confidence: float
    entities: list[LinkedEntity]
    facts: list[Fact]
    answer_text: str
    trace: Trace


@dataclass
class Pipeline:
    """Immutable bundle of trained models, the KB index, and templates."""

    classifier: object
    ner: object
    index: KnowledgeIndex
    templates: TemplateSet
    config: DialogConfig = field(default_factory=DialogConfig)


def render(
    templates: TemplateSet,
    qtype: QuestionType,
    facts: Sequence[Fact],
    subject_name: str = "that",
    max_facts: int = 5,
) -> str:
    """Slot-fill one sentence per fact, joined by '; '; empty facts fall back."""
    if not facts:
        return templates.render_fallback("no_answer", ds=subject_name)
    rendered = [templates.render_fact(qtype, f) for f in facts[:max_facts]]
    answer = "; ".join(rendered)
    if not answer.endswith((".", "!", "?")):
        answer += "."
    return answer


def handle_turn(pipeline: Pipeline, user_text: str) -> Turn:
    """Run the full per-turn pipeline; never raises on user input."""
    trace = Trace()
    cfg = pipeline.config

    t0 = time.perf_counter()
    qtype, confidence = predict_qtype(pipeline.classifier, user_text)
    trace.record(
        "classify", time.perf_counter() - t0,
        qtype=qtype.value, confidence=round(confidence, 6),
    )

    t0 = time.perf_counter()
    spans = predict_entities(pipeline.ner, user_text)
    trace.record(
        "extract", time.perf_counter() - t0,
        spans=[{"surface": s.surface, "etype": s.etype.value} for s in spans],
    )

    t0 = time.perf_counter()
    entities: list[LinkedEntity] = []
    for span in spans:
        matches = lookup_entity(pipeline.index, span.surface, prefix=cfg.prefix_match)
        cui, tier = matches[0] if matches else (None, None)
        entities.append(
            LinkedEntity(
                surface=span.surface, etype=span.etype,
                start=span.start, end=span.end, cui=cui, match=tier,
            )
        )
    trace.record(
        "link", time.perf_counter() - t0,
        linked=[{"surface": e.surface, "cui": e.cui, "match": e.match}
                for e in entities],
    )

    subject = next(
        (e for e in entities if e.etype is EntityType.DS and e.cui), None
    )
    if subject is None:
        subject = next((e for e in entities if e.cui), None)
    restriction = None
    if subject is not None:
        restriction = next(
            (
                e for e in entities
                if e is not subject and e.cui
                and e.etype in (EntityType.DS, EntityType.MED, EntityType.DIS)
            ),
            None,
        )
    ignored = [
        e.surface for e in entities
        if e.cui and e is not subject and e is not restriction
    ]

    facts: list[Fact] = []
    fallback: str | None = None
    fallback_slots: dict[str, str] = {}
    if confidence < cfg.confidence_floor:
        probs = pipeline.classifier.predict_proba(user_text)
        ranked = sorted(
            range(len(QUESTION_TYPES)), key=lambda i: (-probs[i], i)
        )
        fallback = "low_confidence"
        fallback_slots = {
            "top1": QUESTION_TYPES[ranked[0]].value,
            "top2": QUESTION_TYPES[ranked[1]].value,
        }
    elif not entities:
        fallback = "no_entity"
    elif subject is None:
        fallback = "unlinked_entity"
        fallback_slots = {"surface": entities[0].surface}

    t0 = time.perf_counter()
    if fallback is None:
        assert subject is not None and subject.cui is not None
        query_entities = [(subject.etype, subject.cui)]
        if restriction is not None and restriction.cui is not None:
            query_entities.append((restriction.etype, restriction.cui))
        facts = query(pipeline.index, qtype, query_entities, cfg.max_facts)
        trace.record(
            "query", time.perf_counter() - t0,
            route=[f"{qtype.value}.{t}" for t in _route_targets(qtype)],
            subject_cui=subject.cui,
            restriction_cui=restriction.cui if restriction else None,
            ignored_entities=ignored,
            fact_count=len(facts),
        )
    else:
        trace.record("query", time.perf_counter() - t0, skipped=True,
                     fallback=fallback)

    t0 = time.perf_counter()
    if fallback is not None:
        answer = pipeline.templates.render_fallback(fallback, **fallback_slots)
        trace.record("render", time.perf_counter() - t0, fallback=fallback)
    elif not facts:
        assert subject is not None
        subject_name = (
            pipeline.index.concept_name(subject.cui)
            if subject.cui in pipeline.index.concepts
            else subject.surface
        )
        answer = render(
            pipeline.templates, qtype, [], subject_name, cfg.max_facts
        )
        trace.record("render", time.perf_counter() - t0, fallback="no_answer")
    else:
        answer = render(
            pipeline.templates, qtype, facts,
            facts[0].subject_name, cfg.max_facts,
        )
        trace.record("render", time.perf_counter() - t0, rendered=len(facts))

    return Turn(
        user_text=user_text,
        qtype=qtype,
        confidence=confidence,
        entities=entities,
        facts=facts,
        answer_text=answer,
        trace=trace,
    )


def _route_targets(qtype: QuestionType) -> tuple[str, ...]:
    rel_types, attr_name = route_for(qtype)
    return (*rel_types, *((attr_name,) if attr_name else ()))

"""iDISK-style knowledge store: pipe-delimited file parsing, JSON indexes,
name-based entity lookup, and typed relation/attribute queries.

File layouts (UTF-8, '|' delimiter, no quoting):

    CONSO: cui|preferred_name|semantic_type|synonym   (synonym may be empty;
           additional rows for the same cui repeat name/type and add synonyms)
    REL:   subject_cui|rel_type|object_cui|source
    SAT:   cui|name|value|source                      (name: background/safety/usage)
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from dsqa.corpus import EntityType, QuestionType

SEMANTIC_TYPES = ("SDSI", "DSP", "DIS", "SPD", "SOC", "SS", "TC")

# rel_type -> (subject semantic type, object semantic type)
RELATION_SIGNATURES: dict[str, tuple[str, str]] = {
    "has_adverse_effect_on": ("SDSI", "SOC"),
    "has_adverse_reaction": ("SDSI", "SS"),
    "has_ingredient": ("DSP", "SDSI"),
    "has_therapeutic_class": ("SDSI", "TC"),
    "interacts_with": ("SDSI", "SPD"),
    "is_effective_for": ("SDSI", "DIS"),
}
ATTRIBUTE_NAMES = ("background", "safety", "usage")
SCHEMA_VERSION = 1


class KbError(ValueError):
    """A knowledge-store file or row violates the schema."""


@dataclass(frozen=True)
class Concept:
    cui: str
    preferred_name: str
    semantic_type: str
    synonyms: tuple[str, ...] = ()
    source: str = "iDISK"

    def __post_init__(self) -> None:
        if self.semantic_type not in SEMANTIC_TYPES:
            raise KbError(
                f"concept {self.cui}: unknown semantic type {self.semantic_type!r}"
            )


@dataclass(frozen=True)
class Relation:
    subject_cui: str
    rel_type: str
    object_cui: str
    source: str = ""

    def __post_init__(self) -> None:
        if self.rel_type not in RELATION_SIGNATURES:
            raise KbError(f"unknown relation type {self.rel_type!r}")


@dataclass(frozen=True)
class Attribute:
    cui: str
    name: str
    value: str
    source: str = ""

    def __post_init__(self) -> None:
        if self.name not in ATTRIBUTE_NAMES:
            raise KbError(f"unknown attribute name {self.name!r}")


@dataclass(frozen=True)
class Fact:
    """One retrievable unit: a relation edge or a free-text attribute."""

    kind: str  # "relation" | "attribute"
    name: str  # rel_type or attribute name
    subject_cui: str
    subject_name: str
    object_name: str = ""
    object_cui: str = ""
    value: str = ""
    source: str = ""


def normalize_name(name: str) -> str:
    """Casefold, strip punctuation, collapse internal whitespace."""
    folded = name.casefold()
    cleaned = "".join(
        " " if unicodedata.category(ch).startswith("Z") else ch
        for ch in folded
        if not unicodedata.category(ch).startswith("P")
    )
    return " ".join(cleaned.split())


def _read_rows(path: str | Path, columns: int) -> Iterable[tuple[int, list[str]]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("|")
            if len(parts) != columns:
                raise KbError(
                    f"{path}:{lineno}: expected {columns} columns, got {len(parts)}"
                )
            yield lineno, parts


def parse_rrf(
    conso_path: str | Path,
    rel_path: str | Path,
    sat_path: str | Path | None = None,
    concept_source: str = "iDISK",
) -> tuple[list[Concept], list[Relation], list[Attribute]]:
    """Parse the three pipe-delimited files and enforce referential integrity."""
    concepts: dict[str, dict] = {}
    for lineno, (cui, name, stype, synonym) in _read_rows(conso_path, 4):
        if stype not in SEMANTIC_TYPES:
            raise KbError(f"{conso_path}:{lineno}: unknown semantic type {stype!r}")
        entry = concepts.get(cui)
        if entry is None:
            concepts[cui] = {
                "name": name,
                "stype": stype,
                "synonyms": [synonym] if synonym else [],
            }
        else:
            if entry["name"] != name or entry["stype"] != stype:
                raise KbError(
                    f"{conso_path}:{lineno}: cui {cui} redefined with a different "
                    "name or semantic type"
                )
            if synonym and synonym not in entry["synonyms"]:
                entry["synonyms"].append(synonym)

    relations: list[Relation] = []
    for lineno, (subj, rel_type, obj, source) in _read_rows(rel_path, 4):
        if rel_type not in RELATION_SIGNATURES:
            raise KbError(f"{rel_path}:{lineno}: unknown relation type {rel_type!r}")
        for cui, role in ((subj, "subject"), (obj, "object")):
            if cui not in concepts:
                raise KbError(f"{rel_path}:{lineno}: dangling {role} cui {cui!r}")
        want_subj, want_obj = RELATION_SIGNATURES[rel_type]
        if concepts[subj]["stype"] != want_subj or concepts[obj]["stype"] != want_obj:
            raise KbError(
                f"{rel_path}:{lineno}: {rel_type} requires ({want_subj},{want_obj}) "
                f"but got ({concepts[subj]['stype']},{concepts[obj]['stype']})"
            )
        relations.append(Relation(subj, rel_type, obj, source))

    attributes: list[Attribute] = []
    if sat_path is not None:
        for lineno, (cui, name, value, source) in _read_rows(sat_path, 4):
            if name not in ATTRIBUTE_NAMES:
                raise KbError(f"{sat_path}:{lineno}: unknown attribute name {name!r}")
            if cui not in concepts:
                raise KbError(f"{sat_path}:{lineno}: dangling cui {cui!r}")
            attributes.append(Attribute(cui, name, value, source))

    concept_list = [
        Concept(
            cui=cui,
            preferred_name=entry["name"],
            semantic_type=entry["stype"],
            synonyms=tuple(entry["synonyms"]),
            source=concept_source,
        )
        for cui, entry in concepts.items()
    ]
    return concept_list, relations, attributes


@dataclass
class KnowledgeIndex:
    """Immutable-after-build lookup structures over parsed rows."""

    concepts: dict[str, Concept]
    name_index: dict[str, set[str]]  # normalized name -> cuis
    by_subject: dict[str, list[Relation]]
    by_object: dict[str, list[Relation]]
    attributes: dict[tuple[str, str], list[Attribute]]

    def concept_name(self, cui: str) -> str:
        return self.concepts[cui].preferred_name


def build_index(
    concepts: Sequence[Concept],
    relations: Sequence[Relation],
    attributes: Sequence[Attribute] = (),
) -> KnowledgeIndex:
    by_cui: dict[str, Concept] = {}
    for c in concepts:
        if c.cui in by_cui:
            raise KbError(f"duplicate cui {c.cui!r}")
        by_cui[c.cui] = c
    name_index: dict[str, set[str]] = {}
    for c in concepts:
        for name in (c.preferred_name, *c.synonyms):
            key = normalize_name(name)
            if key:
                name_index.setdefault(key, set()).add(c.cui)
    by_subject: dict[str, list[Relation]] = {}
    by_object: dict[str, list[Relation]] = {}
    for r in relations:
        if r.subject_cui not in by_cui or r.object_cui not in by_cui:
            raise KbError(
                f"relation {r.rel_type} has a dangling endpoint "
                f"({r.subject_cui!r}, {r.object_cui!r})"
            )
        by_subject.setdefault(r.subject_cui, []).append(r)
        by_object.setdefault(r.object_cui, []).append(r)
    # canonical adjacency order, so an index is equal no matter what row
    # order produced it (export/import round-trips structurally)
    for rows in by_subject.values():
        rows.sort(key=lambda r: (r.rel_type, r.object_cui, r.source))
    for rows in by_object.values():
        rows.sort(key=lambda r: (r.rel_type, r.subject_cui, r.source))
    attr_map: dict[tuple[str, str], list[Attribute]] = {}
    for a in attributes:
        if a.cui not in by_cui:
            raise KbError(f"attribute {a.name} has a dangling cui {a.cui!r}")
        attr_map.setdefault((a.cui, a.name), []).append(a)
    return KnowledgeIndex(
        concepts=by_cui,
        name_index=name_index,
        by_subject=by_subject,
        by_object=by_object,
        attributes=attr_map,
    )


def export_json(index: KnowledgeIndex, out_dir: str | Path) -> list[Path]:
    """One JSON file per relation type plus concepts.json (with attributes)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    concepts_payload = {
        "schema_version": SCHEMA_VERSION,
        "concepts": [
            {
                "cui": c.cui,
                "preferred_name": c.preferred_name,
                "semantic_type": c.semantic_type,
                "synonyms": list(c.synonyms),
                "source": c.source,
            }
            for c in sorted(index.concepts.values(), key=lambda c: c.cui)
        ],
        "attributes": [
            {"cui": a.cui, "name": a.name, "value": a.value, "source": a.source}
            for key in sorted(index.attributes)
            for a in index.attributes[key]
        ],
    }
    path = out / "concepts.json"
    path.write_text(json.dumps(concepts_payload, indent=2, ensure_ascii=False))
    written.append(path)
    all_relations = [r for rels in index.by_subject.values() for r in rels]
    for rel_type in RELATION_SIGNATURES:
        rows = sorted(
            (r for r in all_relations if r.rel_type == rel_type),
            key=lambda r: (r.subject_cui, r.object_cui, r.source),
        )
        payload = {
            "schema_version": SCHEMA_VERSION,
            "relation": rel_type,
            "rows": [
                {
                    "subject_cui": r.subject_cui,
                    "object_cui": r.object_cui,
                    "source": r.source,
                }
                for r in rows
            ],
        }
        path = out / f"{rel_type}.json"
        path.write_text(json.dumps(payload, indent=2, ensure_ascii=False))
        written.append(path)
    return written


def import_json(in_dir: str | Path) -> KnowledgeIndex:
    """Inverse of :func:`export_json`; rejects schema_version mismatches."""
    src = Path(in_dir)
    concepts_path = src / "concepts.json"
    if not concepts_path.exists():
        raise KbError(f"{concepts_path}: missing concepts file")
    payload = json.loads(concepts_path.read_text(encoding="utf-8"))
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise KbError(
            f"{concepts_path}: schema_version {payload.get('schema_version')!r}, "
            f"expected {SCHEMA_VERSION}"
        )
    concepts = [
        Concept(
            cui=c["cui"],
            preferred_name=c["preferred_name"],
            semantic_type=c["semantic_type"],
            synonyms=tuple(c.get("synonyms", ())),
            source=c.get("source", ""),
        )
        for c in payload["concepts"]
    ]
    attributes = [
        Attribute(a["cui"], a["name"], a["value"], a.get("source", ""))
        for a in payload.get("attributes", ())
    ]
    relations: list[Relation] = []
    for rel_type in RELATION_SIGNATURES:
        rel_path = src / f"{rel_type}.json"
        if not rel_path.exists():
            raise KbError(f"{rel_path}: missing relation file")
        rel_payload = json.loads(rel_path.read_text(encoding="utf-8"))
        if rel_payload.get("schema_version") != SCHEMA_VERSION:
            raise KbError(f"{rel_path}: schema_version mismatch")
        for row in rel_payload["rows"]:
            relations.append(
                Relation(
                    row["subject_cui"], rel_type, row["object_cui"],
                    row.get("source", ""),
                )
            )
    return build_index(concepts, relations, attributes)


def lookup_entity(
    index: KnowledgeIndex, surface: str, prefix: bool = True
) -> list[tuple[str, str]]:
    """Resolve a surface form to cuis: exact beats normalized beats prefix.

    Within a tier, results order by preferred name. Empty surfaces match
    nothing.
    """
    if not surface.strip():
        return []
    tiers: dict[str, set[str]] = {"exact": set(), "normalized": set(), "prefix": set()}
    for cui, concept in index.concepts.items():
        if surface == concept.preferred_name or surface in concept.synonyms:
            tiers["exact"].add(cui)
    norm = normalize_name(surface)
    if norm:
        tiers["normalized"] |= index.name_index.get(norm, set())
        if prefix:
            for key, cuis in index.name_index.items():
                if key.startswith(norm):
                    tiers["prefix"] |= cuis
    results: list[tuple[str, str]] = []
    seen: set[str] = set()
    for tier in ("exact", "normalized", "prefix"):
        ordered = sorted(tiers[tier], key=lambda c: index.concepts[c].preferred_name)
        for cui in ordered:
            if cui not in seen:
                seen.add(cui)
                results.append((cui, tier))
    return results


# qtype -> relation types (queried in this order) and/or attribute name
_ROUTES: dict[QuestionType, tuple[tuple[str, ...], str | None]] = {
    QuestionType.INTERACTION: (("interacts_with",), None),
    QuestionType.EFFECTIVENESS: (("is_effective_for",), None),
    QuestionType.INDICATION: (("is_effective_for", "has_therapeutic_class"), None),
    QuestionType.ADVERSE_EFFECTS: (
        ("has_adverse_effect_on", "has_adverse_reaction"),
        None,
    ),
    QuestionType.AVAILABILITY: (("has_ingredient",), None),  # inverted join
    QuestionType.BACKGROUND: ((), "background"),
    QuestionType.SAFETY: ((), "safety"),
    QuestionType.USAGE: ((), "usage"),
}


def route_for(qtype: QuestionType) -> tuple[tuple[str, ...], str | None]:
    """Relation types and/or attribute name a question type resolves through."""
    return _ROUTES[qtype]


def query(
    index: KnowledgeIndex,
    qtype: QuestionType,
    entities: Sequence[tuple[EntityType, str]],
    max_facts: int = 5,
) -> list[Fact]:
    """Join per the routing table; a second entity restricts the object side.

    Results are ordered by (source, object name) and capped at max_facts.
    An empty result is a valid outcome.
    """
    if not entities:
        return []
    subject_cui = entities[0][1]
    restrict_cui = entities[1][1] if len(entities) > 1 else None
    if subject_cui not in index.concepts:
        return []
    subject_name = index.concept_name(subject_cui)
    rel_types, attr_name = _ROUTES[qtype]
    facts: list[Fact] = []
    for rel_type in rel_types:
        if rel_type == "has_ingredient":
            # availability reads the join backwards: products containing the
            # ingredient asked about
            rows = [
                r for r in index.by_object.get(subject_cui, [])
                if r.rel_type == rel_type
            ]
            for r in rows:
                if restrict_cui is not None and r.subject_cui != restrict_cui:
                    continue
                facts.append(
                    Fact(
                        kind="relation",
                        name=rel_type,
                        subject_cui=subject_cui,
                        subject_name=subject_name,
                        object_cui=r.subject_cui,
                        object_name=index.concept_name(r.subject_cui),
                        source=r.source,
                    )
                )
        else:
            rows = [
                r for r in index.by_subject.get(subject_cui, [])
                if r.rel_type == rel_type
            ]
            for r in rows:
                if restrict_cui is not None and r.object_cui != restrict_cui:
                    continue
                facts.append(
                    Fact(
                        kind="relation",
                        name=rel_type,
                        subject_cui=subject_cui,
                        subject_name=subject_name,
                        object_cui=r.object_cui,
                        object_name=index.concept_name(r.object_cui),
                        source=r.source,
                    )
                )
    if attr_name is not None:
        for a in index.attributes.get((subject_cui, attr_name), []):
            facts.append(
                Fact(
                    kind="attribute",
                    name=attr_name,
                    subject_cui=subject_cui,
                    subject_name=subject_name,
                    value=a.value,
                    source=a.source,
                )
            )
    facts.sort(key=lambda f: (f.source, f.object_name, f.value))
    return facts[:max_facts]

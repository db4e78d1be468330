from __future__ import annotations

import pytest

from dsqa.corpus import EntityType, QuestionType
from dsqa.kb import (
    Attribute,
    Concept,
    KbError,
    Relation,
    build_index,
    export_json,
    import_json,
    lookup_entity,
    normalize_name,
    parse_rrf,
    query,
)


@pytest.fixture()
def rrf_dir(tmp_path):
    (tmp_path / "CONSO.rrf").write_text(
        "C1|Shark Cartilage|SDSI|shark cartilage\n"
        "C2|Degenerative Polyarthritis|DIS|\n"
        "C3|Melatonin|SDSI|\n",
        encoding="utf-8",
    )
    (tmp_path / "REL.rrf").write_text(
        "C1|is_effective_for|C2|NMCD\n", encoding="utf-8"
    )
    (tmp_path / "SAT.rrf").write_text(
        "C3|safety|Melatonin may cause drowsiness.|MSKCC\n", encoding="utf-8"
    )
    return tmp_path


class TestParseRrf:
    def test_fixture_parses_and_queries(self, rrf_dir):
        concepts, relations, attributes = parse_rrf(
            rrf_dir / "CONSO.rrf", rrf_dir / "REL.rrf", rrf_dir / "SAT.rrf"
        )
        assert len(concepts) == 3
        assert len(relations) == 1
        assert len(attributes) == 1
        index = build_index(concepts, relations, attributes)
        facts = query(index, QuestionType.EFFECTIVENESS, [(EntityType.DS, "C1")])
        assert len(facts) == 1
        assert facts[0].object_name == "Degenerative Polyarthritis"

    def test_empty_relation_file_ok(self, rrf_dir):
        (rrf_dir / "REL.rrf").write_text("")
        concepts, relations, _ = parse_rrf(
            rrf_dir / "CONSO.rrf", rrf_dir / "REL.rrf", rrf_dir / "SAT.rrf"
        )
        assert relations == []
        assert len(concepts) == 3

    def test_signature_violation_rejected(self, rrf_dir):
        # DIS subject for is_effective_for violates (SDSI, DIS)
        (rrf_dir / "REL.rrf").write_text("C2|is_effective_for|C2|NMCD\n")
        with pytest.raises(KbError, match="is_effective_for"):
            parse_rrf(
                rrf_dir / "CONSO.rrf", rrf_dir / "REL.rrf", rrf_dir / "SAT.rrf"
            )

    def test_dangling_cui_cites_file_and_line(self, rrf_dir):
        (rrf_dir / "REL.rrf").write_text("C1|is_effective_for|C9|NMCD\n")
        with pytest.raises(KbError, match=r"REL.rrf:1"):
            parse_rrf(
                rrf_dir / "CONSO.rrf", rrf_dir / "REL.rrf", rrf_dir / "SAT.rrf"
            )

    def test_wrong_column_count_rejected(self, rrf_dir):
        (rrf_dir / "CONSO.rrf").write_text("C1|OnlyThree|SDSI\n")
        with pytest.raises(KbError, match="4 columns"):
            parse_rrf(
                rrf_dir / "CONSO.rrf", rrf_dir / "REL.rrf", rrf_dir / "SAT.rrf"
            )

    def test_unknown_semantic_type_rejected(self, rrf_dir):
        (rrf_dir / "CONSO.rrf").write_text("C1|Thing|WAT|\n")
        with pytest.raises(KbError, match="WAT"):
            parse_rrf(
                rrf_dir / "CONSO.rrf", rrf_dir / "REL.rrf", rrf_dir / "SAT.rrf"
            )

    def test_unknown_attribute_rejected(self, rrf_dir):
        (rrf_dir / "SAT.rrf").write_text("C1|flavor|tasty|NMCD\n")
        with pytest.raises(KbError, match="flavor"):
            parse_rrf(
                rrf_dir / "CONSO.rrf", rrf_dir / "REL.rrf", rrf_dir / "SAT.rrf"
            )


class TestNormalization:
    def test_st_johns_wort_variants_collapse(self):
        assert normalize_name("St. John's Wort") == normalize_name("st johns wort")

    def test_whitespace_collapse_and_casefold(self):
        assert normalize_name("  Shark   CARTILAGE ") == "shark cartilage"

    def test_punctuation_stripped(self):
        assert normalize_name("co-q10!") == "coq10"


class TestBuildIndex:
    def test_synonym_variants_share_one_entry(self):
        concepts = [
            Concept(
                "C1", "St. John's Wort", "SDSI",
                synonyms=("st johns wort",),
            )
        ]
        index = build_index(concepts, [])
        key = normalize_name("St. John's Wort")
        assert index.name_index[key] == {"C1"}

    def test_duplicate_cui_rejected(self):
        concepts = [
            Concept("C1", "A", "SDSI"),
            Concept("C1", "B", "SDSI"),
        ]
        with pytest.raises(KbError):
            build_index(concepts, [])

    def test_preferred_name_always_resolves(self, fixture_index):
        for cui, concept in fixture_index.concepts.items():
            results = lookup_entity(fixture_index, concept.preferred_name)
            assert results and results[0] == (cui, "exact")


class TestExportImport:
    def test_round_trip_structural_equality(self, rrf_dir, tmp_path):
        concepts, relations, attributes = parse_rrf(
            rrf_dir / "CONSO.rrf", rrf_dir / "REL.rrf", rrf_dir / "SAT.rrf"
        )
        index = build_index(concepts, relations, attributes)
        out = tmp_path / "kbjson"
        files = export_json(index, out)
        assert len(files) == 7  # 6 relation files + concepts
        loaded = import_json(out)
        assert loaded.concepts == index.concepts
        assert loaded.name_index == index.name_index
        assert loaded.by_subject == index.by_subject
        assert loaded.attributes == index.attributes

    def test_version_mismatch_rejected(self, rrf_dir, tmp_path):
        import json

        concepts, relations, attributes = parse_rrf(
            rrf_dir / "CONSO.rrf", rrf_dir / "REL.rrf", rrf_dir / "SAT.rrf"
        )
        out = tmp_path / "kbjson"
        export_json(build_index(concepts, relations, attributes), out)
        payload = json.loads((out / "concepts.json").read_text())
        payload["schema_version"] = 99
        (out / "concepts.json").write_text(json.dumps(payload))
        with pytest.raises(KbError, match="schema_version"):
            import_json(out)


class TestLookupEntity:
    def test_normalized_match_for_lowercase(self, fixture_index):
        results = lookup_entity(fixture_index, "melatonin")
        assert results[0][1] in ("exact", "normalized")
        cui = results[0][0]
        assert fixture_index.concepts[cui].preferred_name == "Melatonin"

    def test_empty_surface_matches_nothing(self, fixture_index):
        assert lookup_entity(fixture_index, "") == []
        assert lookup_entity(fixture_index, "   ") == []

    def test_prefix_tier(self, fixture_index):
        results = lookup_entity(fixture_index, "gins")
        assert results
        assert results[0][1] == "prefix"
        assert fixture_index.concepts[results[0][0]].preferred_name == "Ginseng"

    def test_prefix_disabled(self, fixture_index):
        assert lookup_entity(fixture_index, "gins", prefix=False) == []

    def test_exact_beats_normalized(self, fixture_index):
        results = lookup_entity(fixture_index, "Melatonin")
        assert results[0][1] == "exact"


class TestQuery:
    def test_effectiveness_reproduces_reference_fact(self, fixture_index):
        results = lookup_entity(fixture_index, "shark cartilage")
        cui = results[0][0]
        facts = query(
            fixture_index, QuestionType.EFFECTIVENESS, [(EntityType.DS, cui)]
        )
        assert facts[0].name == "is_effective_for"
        assert facts[0].object_name == "Degenerative Polyarthritis"

    def test_adverse_effects_route_merges_both_relations(self, fixture_index):
        (blessed,) = [
            c.cui
            for c in fixture_index.concepts.values()
            if c.preferred_name == "Blessed Thistle"
        ]
        facts = query(
            fixture_index, QuestionType.ADVERSE_EFFECTS, [(EntityType.DS, blessed)]
        )
        assert [f.object_name for f in facts] == ["Eye disorders"]
        (mel,) = [
            c.cui
            for c in fixture_index.concepts.values()
            if c.preferred_name == "Melatonin"
        ]
        facts = query(
            fixture_index, QuestionType.ADVERSE_EFFECTS, [(EntityType.DS, mel)]
        )
        assert [f.object_name for f in facts] == ["Drowsiness"]

    def test_interaction_restriction_empty_when_no_row(self, fixture_index):
        (mel,) = [
            c.cui for c in fixture_index.concepts.values()
            if c.preferred_name == "Melatonin"
        ]
        (levo,) = [
            c.cui for c in fixture_index.concepts.values()
            if c.preferred_name == "Levothyroxine"
        ]
        facts = query(
            fixture_index,
            QuestionType.INTERACTION,
            [(EntityType.DS, mel), (EntityType.MED, levo)],
        )
        assert facts == []

    def test_availability_inverted_join(self, fixture_index):
        (selenium,) = [
            c.cui for c in fixture_index.concepts.values()
            if c.preferred_name == "Selenium"
        ]
        facts = query(
            fixture_index, QuestionType.AVAILABILITY, [(EntityType.DS, selenium)]
        )
        assert [f.object_name for f in facts] == ["SuperSelenium 200"]

    def test_two_entity_results_subset_of_one_entity(self, fixture_index):
        (eph,) = [
            c.cui for c in fixture_index.concepts.values()
            if c.preferred_name == "Ephedrine"
        ]
        (levo,) = [
            c.cui for c in fixture_index.concepts.values()
            if c.preferred_name == "Levothyroxine"
        ]
        one = query(fixture_index, QuestionType.INTERACTION, [(EntityType.DS, eph)])
        two = query(
            fixture_index,
            QuestionType.INTERACTION,
            [(EntityType.DS, eph), (EntityType.MED, levo)],
        )
        assert set(two) <= set(one)
        assert two  # the fixture has this interaction row

    def test_max_facts_cap_and_deterministic_order(self, fixture_index):
        (mel,) = [
            c.cui for c in fixture_index.concepts.values()
            if c.preferred_name == "Melatonin"
        ]
        facts = query(
            fixture_index, QuestionType.INDICATION, [(EntityType.DS, mel)],
            max_facts=1,
        )
        assert len(facts) == 1
        again = query(
            fixture_index, QuestionType.INDICATION, [(EntityType.DS, mel)],
            max_facts=1,
        )
        assert facts == again

    def test_safety_attribute_route(self, fixture_index):
        (mel,) = [
            c.cui for c in fixture_index.concepts.values()
            if c.preferred_name == "Melatonin"
        ]
        facts = query(fixture_index, QuestionType.SAFETY, [(EntityType.DS, mel)])
        assert facts[0].kind == "attribute"
        assert "drowsiness" in facts[0].value

    def test_no_entities_empty(self, fixture_index):
        assert query(fixture_index, QuestionType.SAFETY, []) == []

"""Desk-scale demo assets: bundled KB fixture files and a quick pipeline.

The fixture knowledge store covers a handful of supplements with one row
per relation type, enough to exercise every query route. The demo pipeline
trains small models on a seeded synthetic corpus in a few seconds.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from dsqa import classifier, kb, ner, synth
from dsqa.dialog import DialogConfig, Pipeline, load_template_set


def fixture_kb_paths() -> tuple[Path, Path, Path]:
    """Paths of the bundled CONSO/REL/SAT fixture files."""
    base = resources.files("dsqa") / "data" / "kb"
    return (
        Path(str(base / "CONSO.rrf")),
        Path(str(base / "REL.rrf")),
        Path(str(base / "SAT.rrf")),
    )


def load_fixture_index() -> kb.KnowledgeIndex:
    conso, rel, sat = fixture_kb_paths()
    concepts, relations, attributes = kb.parse_rrf(conso, rel, sat)
    return kb.build_index(concepts, relations, attributes)


def build_demo_pipeline(
    corpus_size: int = 400,
    seed: int = 7,
    use_conv: bool = False,
    config: DialogConfig | None = None,
) -> Pipeline:
    """Train small models on a synthetic corpus and wire the fixture KB."""
    corpus = synth.generate_synthetic_corpus(
        synth.SynthConfig(size=corpus_size), seed=seed
    )
    if use_conv:
        clf = classifier.train_conv(
            corpus, classifier.TrainConfig.desk(seed=seed)
        )
    else:
        clf = classifier.train_linear(corpus, classifier.TrainConfig(seed=seed))
    tagger = ner.train_crf(
        corpus,
        ner.CrfTrainConfig(seed=seed, max_iterations=25, patience=2),
    )
    return Pipeline(
        classifier=clf,
        ner=tagger,
        index=load_fixture_index(),
        templates=load_template_set(),
        config=config or DialogConfig(),
    )

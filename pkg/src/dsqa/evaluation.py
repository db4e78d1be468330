"""Evaluation: weighted P/R/F1 reports, span-level scoring, graded-answer
metrics (average score, succ@i+, RER, MRR), and k-fold orchestration.

Graded answers follow the 1-4 judgment scale (incorrect, incorrect but
related, correct but incomplete, correct and complete); averaging remaps
grades to 0-3. RER is the fraction of grade-1 answers, which makes
rer + succ@2+ = 1 an exact identity.
"""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from dsqa.corpus import EntitySpan, LabeledQuestion, stratified_folds


@dataclass(frozen=True)
class GradedAnswer:
    """A system answer with its human grade and retrieval rank (0 = not found)."""

    question_id: str
    answer: str
    grade: int
    rank: int = 0

    def __post_init__(self) -> None:
        if self.grade not in (1, 2, 3, 4):
            raise ValueError(f"grade must be 1-4, got {self.grade}")
        if self.rank < 0:
            raise ValueError(f"rank must be >= 0, got {self.rank}")


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class ClassificationReport:
    per_class: dict[str, ClassMetrics]
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    accuracy: float
    confusion: dict[str, dict[str, int]] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "per_class": {
                label: vars(m) for label, m in sorted(self.per_class.items())
            },
            "weighted_precision": self.weighted_precision,
            "weighted_recall": self.weighted_recall,
            "weighted_f1": self.weighted_f1,
            "accuracy": self.accuracy,
        }

    def as_text(self) -> str:
        lines = [f"{'class':<16}{'prec':>8}{'rec':>8}{'f1':>8}{'support':>9}"]
        for label, m in sorted(self.per_class.items()):
            lines.append(
                f"{label:<16}{m.precision:>8.3f}{m.recall:>8.3f}"
                f"{m.f1:>8.3f}{m.support:>9d}"
            )
        lines.append(
            f"{'weighted':<16}{self.weighted_precision:>8.3f}"
            f"{self.weighted_recall:>8.3f}{self.weighted_f1:>8.3f}"
        )
        lines.append(f"accuracy: {self.accuracy:.3f}")
        return "\n".join(lines)


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (
        2 * precision * recall / (precision + recall)
        if precision + recall
        else 0.0
    )
    return precision, recall, f1


def _weighted_report(
    counts: dict[str, tuple[int, int, int]], accuracy: float,
    confusion: dict[str, dict[str, int]] | None = None,
) -> ClassificationReport:
    per_class: dict[str, ClassMetrics] = {}
    for label, (tp, fp, fn) in counts.items():
        p, r, f1 = _prf(tp, fp, fn)
        per_class[label] = ClassMetrics(p, r, f1, support=tp + fn)
    total_support = sum(m.support for m in per_class.values())
    if total_support == 0:
        wp = wr = wf = 0.0
    else:
        wp = sum(m.precision * m.support for m in per_class.values()) / total_support
        wr = sum(m.recall * m.support for m in per_class.values()) / total_support
        wf = sum(m.f1 * m.support for m in per_class.values()) / total_support
    return ClassificationReport(
        per_class=per_class,
        weighted_precision=wp,
        weighted_recall=wr,
        weighted_f1=wf,
        accuracy=accuracy,
        confusion=confusion or {},
    )


def weighted_prf(gold: Sequence[str], predicted: Sequence[str]) -> ClassificationReport:
    """Per-class and support-weighted precision/recall/F1 plus accuracy.

    A class that is never predicted has precision 0 by convention.
    """
    if not gold:
        raise ValueError("label lists must be non-empty")
    if len(gold) != len(predicted):
        raise ValueError(
            f"label list length mismatch: {len(gold)} vs {len(predicted)}"
        )
    labels = sorted(set(gold) | set(predicted))
    confusion: dict[str, dict[str, int]] = {
        g: {p: 0 for p in labels} for g in labels
    }
    for g, p in zip(gold, predicted):
        confusion[g][p] += 1
    counts: dict[str, tuple[int, int, int]] = {}
    for label in labels:
        tp = confusion[label][label]
        fp = sum(confusion[g][label] for g in labels if g != label)
        fn = sum(confusion[label][p] for p in labels if p != label)
        counts[label] = (tp, fp, fn)
    accuracy = sum(confusion[c][c] for c in labels) / len(gold)
    return _weighted_report(counts, accuracy, confusion)


def span_f1(
    gold: Sequence[Sequence[EntitySpan]],
    predicted: Sequence[Sequence[EntitySpan]],
) -> ClassificationReport:
    """Exact-match span scoring weighted by gold span counts per entity type.

    A predicted span is a true positive iff (start, end, etype) all match a
    gold span of the same question. The accuracy field reports micro overlap
    tp / (tp + fp + fn).
    """
    if len(gold) != len(predicted):
        raise ValueError("gold and predicted must align per question")
    counts: dict[str, list[int]] = {}

    def _bucket(etype: str) -> list[int]:
        return counts.setdefault(etype, [0, 0, 0])

    for gold_spans, pred_spans in zip(gold, predicted):
        gold_set = {(s.start, s.end, s.etype) for s in gold_spans}
        pred_set = {(s.start, s.end, s.etype) for s in pred_spans}
        for key in gold_set & pred_set:
            _bucket(key[2].value)[0] += 1
        for key in pred_set - gold_set:
            _bucket(key[2].value)[1] += 1
        for key in gold_set - pred_set:
            _bucket(key[2].value)[2] += 1
    tp = sum(c[0] for c in counts.values())
    fp = sum(c[1] for c in counts.values())
    fn = sum(c[2] for c in counts.values())
    accuracy = tp / (tp + fp + fn) if tp + fp + fn else 1.0
    return _weighted_report(
        {label: tuple(c) for label, c in counts.items()}, accuracy
    )


def average_score(graded: Sequence[GradedAnswer]) -> float:
    """Mean of grades remapped from the 1-4 scale to 0-3."""
    if not graded:
        raise ValueError("graded answers must be non-empty")
    return sum(g.grade - 1 for g in graded) / len(graded)


def succ_at(graded: Sequence[GradedAnswer], i: int) -> float:
    """Fraction of answers graded i or above, for i in 2..4."""
    if not graded:
        raise ValueError("graded answers must be non-empty")
    if not 2 <= i <= 4:
        raise ValueError(f"i must lie in 2..4, got {i}")
    return sum(1 for g in graded if g.grade >= i) / len(graded)


def rer(graded: Sequence[GradedAnswer]) -> float:
    """Response error rate: fraction of answers judged incorrect (grade 1)."""
    if not graded:
        raise ValueError("graded answers must be non-empty")
    return sum(1 for g in graded if g.grade == 1) / len(graded)


def mrr(graded: Sequence[GradedAnswer]) -> float:
    """Mean reciprocal rank; rank 0 (not found) contributes 0."""
    if not graded:
        raise ValueError("graded answers must be non-empty")
    return sum(1.0 / g.rank if g.rank else 0.0 for g in graded) / len(graded)


def load_grades_csv(path: str | Path) -> list[GradedAnswer]:
    """Ingest (id, grade, rank) rows produced by external human grading."""
    graded: list[GradedAnswer] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "id" not in reader.fieldnames:
            raise ValueError(f"{path}: expected a header with id,grade[,rank]")
        for row in reader:
            graded.append(
                GradedAnswer(
                    question_id=row["id"],
                    answer=row.get("answer", ""),
                    grade=int(row["grade"]),
                    rank=int(row.get("rank") or 0),
                )
            )
    return graded


@dataclass
class CrossValidationResult:
    fold_scores: list[dict[str, float]]
    mean: dict[str, float]
    std: dict[str, float]

    def as_dict(self) -> dict:
        return {"folds": self.fold_scores, "mean": self.mean, "std": self.std}


def cross_validate(
    data: Sequence[LabeledQuestion],
    k: int,
    trainer: Callable[[Sequence[LabeledQuestion]], object],
    scorer: Callable[[object, Sequence[LabeledQuestion]], dict[str, float]],
    seed: int = 0,
    jobs: int = 1,
) -> CrossValidationResult:
    """Stratified k-fold: train on k-1 folds, score the held-out fold.

    Trainer errors are re-raised naming the failing fold. ``jobs > 1`` runs
    folds in separate processes (trainer/scorer must then be picklable).
    """
    folds = stratified_folds(data, k, seed)
    all_indices = set(range(len(data)))
    assignments = []
    for held_out in folds:
        held_set = set(held_out)
        train_idx = sorted(all_indices - held_set)
        assignments.append((train_idx, held_out))

    def _run_fold(fold_no: int, train_idx, test_idx) -> dict[str, float]:
        train = [data[i] for i in train_idx]
        test = [data[i] for i in test_idx]
        try:
            model = trainer(train)
        except Exception as exc:
            raise RuntimeError(f"fold {fold_no}: trainer failed: {exc}") from exc
        return scorer(model, test)

    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_fold_worker, trainer, scorer,
                            [data[i] for i in tr], [data[i] for i in te], n)
                for n, (tr, te) in enumerate(assignments)
            ]
            fold_scores = [f.result() for f in futures]
    else:
        fold_scores = [
            _run_fold(n, tr, te) for n, (tr, te) in enumerate(assignments)
        ]

    keys = sorted({key for scores in fold_scores for key in scores})
    mean = {k_: statistics.fmean(s[k_] for s in fold_scores) for k_ in keys}
    std = {
        k_: (
            statistics.stdev(s[k_] for s in fold_scores)
            if len(fold_scores) > 1
            else 0.0
        )
        for k_ in keys
    }
    return CrossValidationResult(fold_scores=fold_scores, mean=mean, std=std)


def _fold_worker(trainer, scorer, train, test, fold_no) -> dict[str, float]:
    try:
        model = trainer(train)
    except Exception as exc:
        raise RuntimeError(f"fold {fold_no}: trainer failed: {exc}") from exc
    return scorer(model, test)


def report_json(report: ClassificationReport) -> str:
    return json.dumps(report.as_dict(), indent=2)

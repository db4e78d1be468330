"""Linear-chain CRF entity tagger and an HMM baseline.

The CRF scores a tag path as the sum of per-position emission weights for
active features, adjacent-tag transition weights, and start/end boundary
weights. Training maximizes conditional log-likelihood with an elastic-net
penalty (c1 L1 + c2 L2) by mini-batch gradient descent; expected feature
counts come from forward-backward marginals. Decoding is Viterbi with ties
broken toward the lowest tag index.

All dynamic programming runs in log-space double precision through the
kernels in :mod:`dsqa._kernels` (compiled when available).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from dsqa import _kernels, serialize
from dsqa.corpus import (
    NUM_TAGS,
    TAG_INDEX,
    TAGS,
    EntitySpan,
    LabeledQuestion,
    from_bio,
    repair_bio,
    to_bio,
    TagSequence,
)
from dsqa.textproc import FeatureVector, Token, sequence_features, tokenize


@dataclass
class CrfTrainConfig:
    """Elastic-net CRF training knobs (paper defaults: c1=c2=0.1, batch 32, 100 iters)."""

    c1: float = 0.1
    c2: float = 0.1
    batch_size: int = 32
    max_iterations: int = 100
    learning_rate: float = 0.2
    tol: float = 1e-4
    patience: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("c1 and c2 must be non-negative")
        if self.batch_size < 1 or self.max_iterations < 1:
            raise ValueError("batch_size and max_iterations must be positive")


@dataclass
class CrfModel:
    """Feature-indexed emission weights plus tag transition/boundary weights."""

    feature_index: dict[str, int]
    emission: np.ndarray  # (F, NUM_TAGS)
    transition: np.ndarray  # (NUM_TAGS, NUM_TAGS), [from, to]
    start: np.ndarray  # (NUM_TAGS,)
    end: np.ndarray  # (NUM_TAGS,)

    @classmethod
    def zeros(cls, feature_index: dict[str, int]) -> "CrfModel":
        return cls(
            feature_index=dict(feature_index),
            emission=np.zeros((len(feature_index), NUM_TAGS)),
            transition=np.zeros((NUM_TAGS, NUM_TAGS)),
            start=np.zeros(NUM_TAGS),
            end=np.zeros(NUM_TAGS),
        )

    def emission_scores(self, features: Sequence[FeatureVector]) -> np.ndarray:
        """Dense (n, NUM_TAGS) emission score matrix; unknown features are skipped."""
        scores = np.zeros((len(features), NUM_TAGS))
        for i, feats in enumerate(features):
            for name, value in feats.items():
                idx = self.feature_index.get(name)
                if idx is not None:
                    scores[i] += value * self.emission[idx]
        return scores

    def tag_tokens(self, tokens: Sequence[Token]) -> list[str]:
        if not tokens:
            return []
        return viterbi(self, sequence_features(tokens))

    def save(self, path: str | Path) -> None:
        names = list(self.feature_index)
        order = sorted(range(len(names)), key=lambda i: self.feature_index[names[i]])
        serialize.save_model(
            path,
            kind="crf",
            config={},
            arrays={
                "emission": self.emission,
                "transition": self.transition,
                "start": self.start,
                "end": self.end,
            },
            strings={"features": [names[i] for i in order]},
        )

    @classmethod
    def load(cls, path: str | Path) -> "CrfModel":
        _, arrays, strings = serialize.load_model(path, kind="crf")
        features = strings["features"]
        return cls(
            feature_index={name: i for i, name in enumerate(features)},
            emission=arrays["emission"],
            transition=arrays["transition"],
            start=arrays["start"],
            end=arrays["end"],
        )


@dataclass
class CrfGradient:
    """Gradient arrays aligned with :class:`CrfModel` parameters."""

    emission: np.ndarray
    transition: np.ndarray
    start: np.ndarray
    end: np.ndarray

    def norm(self) -> float:
        return float(
            np.sqrt(
                np.sum(self.emission**2)
                + np.sum(self.transition**2)
                + np.sum(self.start**2)
                + np.sum(self.end**2)
            )
        )


@dataclass(frozen=True)
class _Encoded:
    """A feature sequence flattened for fast gather/scatter."""

    ids: np.ndarray  # (total,) feature column per active feature occurrence
    vals: np.ndarray  # (total,)
    pos: np.ndarray  # (total,) token position per occurrence
    offsets: np.ndarray  # (n,) reduceat boundaries
    n: int
    gold: np.ndarray | None = None  # (n,) tag indices


def _encode(
    features: Sequence[FeatureVector],
    feature_index: dict[str, int],
    tags: Sequence[str] | None = None,
) -> _Encoded:
    ids: list[int] = []
    vals: list[float] = []
    pos: list[int] = []
    offsets: list[int] = []
    for i, feats in enumerate(features):
        offsets.append(len(ids))
        for name, value in feats.items():
            idx = feature_index.get(name)
            if idx is not None:
                ids.append(idx)
                vals.append(value)
                pos.append(i)
    gold = None
    if tags is not None:
        gold = np.array([TAG_INDEX[t] for t in tags], dtype=np.int64)
    return _Encoded(
        ids=np.array(ids, dtype=np.int64),
        vals=np.array(vals, dtype=np.float64),
        pos=np.array(pos, dtype=np.int64),
        offsets=np.array(offsets, dtype=np.int64),
        n=len(features),
        gold=gold,
    )


def _emission_matrix(model: CrfModel, enc: _Encoded) -> np.ndarray:
    if enc.ids.size == 0:
        return np.zeros((enc.n, NUM_TAGS))
    contrib = enc.vals[:, None] * model.emission[enc.ids]
    emis = np.add.reduceat(contrib, enc.offsets, axis=0)
    # reduceat repeats rows when consecutive offsets are equal (a position
    # with no known features); zero those rows explicitly.
    empty = np.diff(np.append(enc.offsets, enc.ids.size)) == 0
    if empty.any():
        emis[empty] = 0.0
    return emis


def log_score(
    model: CrfModel, features: Sequence[FeatureVector], tags: Sequence[str]
) -> float:
    """Unnormalized log score of one tag path."""
    if len(features) != len(tags) or not features:
        raise ValueError("features and tags must be equal-length and non-empty")
    enc = _encode(features, model.feature_index, tags)
    emis = _emission_matrix(model, enc)
    gold = enc.gold
    assert gold is not None
    score = float(emis[np.arange(enc.n), gold].sum())
    score += float(model.start[gold[0]] + model.end[gold[-1]])
    score += float(model.transition[gold[:-1], gold[1:]].sum())
    return score


def log_partition(model: CrfModel, features: Sequence[FeatureVector]) -> float:
    """log of the summed exponentiated scores over all NUM_TAGS**n paths."""
    if not features:
        raise ValueError("sequence must be non-empty")
    enc = _encode(features, model.feature_index)
    emis = _emission_matrix(model, enc)
    return float(
        _kernels.log_partition(emis, model.transition, model.start, model.end)
    )


def viterbi(model: CrfModel, features: Sequence[FeatureVector]) -> list[str]:
    """Argmax tag path; ties break toward the lowest tag index per step."""
    if not features:
        raise ValueError("sequence must be non-empty")
    enc = _encode(features, model.feature_index)
    emis = _emission_matrix(model, enc)
    path, _ = _kernels.viterbi_path(emis, model.transition, model.start, model.end)
    return [TAGS[i] for i in path]


def crf_objective(
    model: CrfModel,
    batch: Sequence[tuple[Sequence[FeatureVector], Sequence[str]]],
    c1: float = 0.0,
    c2: float = 0.0,
) -> float:
    """Summed negative log-likelihood of the batch plus elastic-net penalties."""
    if not batch:
        raise ValueError("batch must be non-empty")
    total = 0.0
    for features, tags in batch:
        total += -(
            log_score(model, features, tags) - log_partition(model, features)
        )
    penalty = 0.0
    for w in (model.emission, model.transition, model.start, model.end):
        penalty += c1 * float(np.abs(w).sum()) + c2 * float(np.sum(w**2))
    return total + penalty


def crf_gradient(
    model: CrfModel,
    batch: Sequence[tuple[Sequence[FeatureVector], Sequence[str]]],
    c1: float = 0.0,
    c2: float = 0.0,
) -> CrfGradient:
    """Gradient of :func:`crf_objective` (L1 handled by subgradient, 0 at 0)."""
    if not batch:
        raise ValueError("batch must be non-empty")
    grad = CrfGradient(
        emission=np.zeros_like(model.emission),
        transition=np.zeros_like(model.transition),
        start=np.zeros_like(model.start),
        end=np.zeros_like(model.end),
    )
    for features, tags in batch:
        enc = _encode(features, model.feature_index, tags)
        _accumulate_nll_grad(model, enc, grad, 1.0)
    for name in ("emission", "transition", "start", "end"):
        w = getattr(model, name)
        g = getattr(grad, name)
        g += c1 * np.sign(w) + 2.0 * c2 * w
    return grad


def _accumulate_nll_grad(
    model: CrfModel, enc: _Encoded, grad: CrfGradient, scale: float
) -> float:
    """Add scale * d(-log p(gold))/dtheta into grad; returns the raw NLL."""
    emis = _emission_matrix(model, enc)
    gold = enc.gold
    assert gold is not None
    log_z, unary, pairwise = _kernels.forward_backward(
        emis, model.transition, model.start, model.end
    )
    positions = np.arange(enc.n)
    gold_score = float(
        emis[positions, gold].sum()
        + model.start[gold[0]]
        + model.end[gold[-1]]
        + model.transition[gold[:-1], gold[1:]].sum()
    )
    diff = unary.copy()
    diff[positions, gold] -= 1.0
    if enc.ids.size:
        np.add.at(grad.emission, enc.ids, scale * enc.vals[:, None] * diff[enc.pos])
    if enc.n > 1:
        trans_diff = pairwise.sum(axis=0)
        np.add.at(trans_diff, (gold[:-1], gold[1:]), -1.0)
        grad.transition += scale * trans_diff
    grad.start += scale * diff[0]
    grad.end += scale * diff[-1]
    return log_z - gold_score


def _collect_feature_index(
    sequences: Sequence[Sequence[FeatureVector]],
) -> dict[str, int]:
    index: dict[str, int] = {}
    for features in sequences:
        for feats in features:
            for name in feats:
                if name not in index:
                    index[name] = len(index)
    return index


def train_crf(
    data: Sequence[LabeledQuestion], config: CrfTrainConfig | None = None
) -> CrfModel:
    """Mini-batch SGD on sum-NLL + c1 L1 + c2 L2 over the whole dataset.

    Each step takes the batch-mean NLL gradient with the penalties scaled
    by 1/N (so c1 and c2 weight the dataset objective, matching the usual
    CRF-toolkit convention). L1 applies as a shrink step that clips
    parameters through zero. Stops early when the running epoch loss
    improves by less than ``tol`` for ``patience`` consecutive epochs.
    """
    if not data:
        raise ValueError("training data must be non-empty")
    config = config or CrfTrainConfig()
    feature_seqs: list[list[FeatureVector]] = []
    tag_seqs: list[tuple[str, ...]] = []
    for q in data:
        seq = to_bio(q)
        if not seq.tokens:
            continue
        feature_seqs.append(sequence_features(seq.tokens))
        tag_seqs.append(seq.tags)
    if not feature_seqs:
        raise ValueError("no non-empty sequences in training data")
    feature_index = _collect_feature_index(feature_seqs)
    model = CrfModel.zeros(feature_index)
    encoded = [
        _encode(f, feature_index, t) for f, t in zip(feature_seqs, tag_seqs)
    ]

    rng = np.random.default_rng(config.seed)
    order = np.arange(len(encoded))
    lr = config.learning_rate
    n = len(encoded)
    l2_step = 2.0 * config.c2 / n
    l1_step = lr * config.c1 / n
    prev_loss = np.inf
    stalled = 0
    params = ("emission", "transition", "start", "end")
    for _epoch in range(config.max_iterations):
        rng.shuffle(order)
        epoch_nll = 0.0
        for lo in range(0, len(order), config.batch_size):
            batch_idx = order[lo : lo + config.batch_size]
            grad = CrfGradient(
                emission=np.zeros_like(model.emission),
                transition=np.zeros_like(model.transition),
                start=np.zeros_like(model.start),
                end=np.zeros_like(model.end),
            )
            scale = 1.0 / len(batch_idx)
            for si in batch_idx:
                epoch_nll += _accumulate_nll_grad(model, encoded[si], grad, scale)
            for name in params:
                w = getattr(model, name)
                w -= lr * (getattr(grad, name) + l2_step * w)
                if l1_step > 0:
                    shrink = np.abs(w) - l1_step
                    np.copyto(w, np.sign(w) * np.maximum(shrink, 0.0))
            if not np.isfinite(model.emission).all():
                raise FloatingPointError("non-finite CRF weights during training")
        epoch_loss = epoch_nll / n
        if prev_loss - epoch_loss < config.tol:
            stalled += 1
            if stalled >= config.patience:
                break
        else:
            stalled = 0
        prev_loss = epoch_loss
    return model


@dataclass
class HmmModel:
    """Add-one-smoothed HMM over the same 9-tag inventory.

    Transition rows are normalized over NUM_TAGS next-tags plus a stop
    event, so exp(transition) rows plus exp(end) sum to 1. Emission rows
    are normalized over the vocabulary plus one OOV slot.
    """

    vocab_index: dict[str, int]
    log_emission: np.ndarray  # (NUM_TAGS, |V|+1); last column = OOV
    log_transition: np.ndarray  # (NUM_TAGS, NUM_TAGS)
    log_start: np.ndarray  # (NUM_TAGS,)
    log_end: np.ndarray  # (NUM_TAGS,)

    def tag_tokens(self, tokens: Sequence[Token]) -> list[str]:
        if not tokens:
            return []
        oov = len(self.vocab_index)
        word_ids = [self.vocab_index.get(t.lower, oov) for t in tokens]
        emis = self.log_emission[:, word_ids].T.copy()
        path, _ = _kernels.viterbi_path(
            emis, self.log_transition, self.log_start, self.log_end
        )
        return [TAGS[i] for i in path]

    def save(self, path: str | Path) -> None:
        names = list(self.vocab_index)
        order = sorted(range(len(names)), key=lambda i: self.vocab_index[names[i]])
        serialize.save_model(
            path,
            kind="hmm",
            config={},
            arrays={
                "log_emission": self.log_emission,
                "log_transition": self.log_transition,
                "log_start": self.log_start,
                "log_end": self.log_end,
            },
            strings={"vocab": [names[i] for i in order]},
        )

    @classmethod
    def load(cls, path: str | Path) -> "HmmModel":
        _, arrays, strings = serialize.load_model(path, kind="hmm")
        vocab = strings["vocab"]
        return cls(
            vocab_index={name: i for i, name in enumerate(vocab)},
            log_emission=arrays["log_emission"],
            log_transition=arrays["log_transition"],
            log_start=arrays["log_start"],
            log_end=arrays["log_end"],
        )


def train_hmm(data: Sequence[LabeledQuestion]) -> HmmModel:
    """Count-based training with add-one smoothing and an explicit OOV slot."""
    if not data:
        raise ValueError("training data must be non-empty")
    sequences: list[tuple[list[str], list[int]]] = []
    vocab_index: dict[str, int] = {}
    for q in data:
        seq = to_bio(q)
        if not seq.tokens:
            continue
        words = [t.lower for t in seq.tokens]
        for w in words:
            if w not in vocab_index:
                vocab_index[w] = len(vocab_index)
        sequences.append((words, [TAG_INDEX[t] for t in seq.tags]))
    if not sequences:
        raise ValueError("no non-empty sequences in training data")

    V = len(vocab_index)
    start_counts = np.zeros(NUM_TAGS)
    end_counts = np.zeros(NUM_TAGS)
    trans_counts = np.zeros((NUM_TAGS, NUM_TAGS))
    emis_counts = np.zeros((NUM_TAGS, V + 1))
    for words, tags in sequences:
        start_counts[tags[0]] += 1
        end_counts[tags[-1]] += 1
        for a, b in zip(tags, tags[1:]):
            trans_counts[a, b] += 1
        for w, t in zip(words, tags):
            emis_counts[t, vocab_index[w]] += 1

    log_start = np.log(start_counts + 1) - np.log(start_counts.sum() + NUM_TAGS)
    # next-state distribution includes a stop event: NUM_TAGS + 1 outcomes
    out_totals = trans_counts.sum(axis=1) + end_counts
    denom = np.log(out_totals + NUM_TAGS + 1)
    log_transition = np.log(trans_counts + 1) - denom[:, None]
    log_end = np.log(end_counts + 1) - denom
    log_emission = np.log(emis_counts + 1) - np.log(
        emis_counts.sum(axis=1, keepdims=True) + V + 1
    )
    return HmmModel(
        vocab_index=vocab_index,
        log_emission=log_emission,
        log_transition=log_transition,
        log_start=log_start,
        log_end=log_end,
    )


def predict_entities(model, text: str) -> list[EntitySpan]:
    """tokenize -> tag (CRF Viterbi or HMM) -> BIO repair -> spans."""
    tokens = tokenize(text)
    if not tokens:
        return []
    tags = repair_bio(model.tag_tokens(tokens))
    seq = TagSequence(tokens=tuple(tokens), tags=tags)
    return from_bio(seq, text)

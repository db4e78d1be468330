"""Question-type classifiers: hashed-feature softmax baseline and a 1-D
multi-width convolutional model.

Both train by mini-batch gradient descent with exact gradients (the conv
gradient is finite-difference checked in the test suite). The conv model
follows embedding -> per-width convolution -> tanh -> max-pool ->
concatenate -> dropout -> fully-connected softmax. Inputs shorter than the
largest filter width are right-padded with a fixed zero PAD embedding.
"""

from __future__ import annotations

import zlib
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from dsqa import serialize
from dsqa.corpus import QUESTION_TYPES, LabeledQuestion, QuestionType
from dsqa.textproc import EmbeddingTable, random_embeddings, tokenize

NUM_CLASSES = len(QUESTION_TYPES)
_CLASS_INDEX = {qt: i for i, qt in enumerate(QUESTION_TYPES)}


@dataclass
class TrainConfig:
    """Shared training knobs; conv-only fields are ignored by the baseline.

    Paper-scale defaults: widths 1-7, 128 filters, 300-dim embeddings.
    ``desk()`` shrinks those for fast tests.
    """

    widths: tuple[int, ...] = (1, 2, 3, 5, 7)
    num_filters: int = 128
    dropout: float = 0.1
    learning_rate: float = 0.5
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0
    embedding_dim: int = 300
    hash_features: int = 2**18
    optimizer: str = "sgd"  # or "adam"

    def __post_init__(self) -> None:
        if not self.widths or any(w < 1 for w in self.widths):
            raise ValueError("widths must be non-empty and >= 1")
        if self.num_filters < 1:
            raise ValueError("num_filters must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")

    @classmethod
    def desk(cls, **overrides) -> "TrainConfig":
        """Shrunk conv settings that train in seconds; Adam compensates for
        the small embedding-init scale."""
        defaults = dict(
            widths=(1, 2, 3), num_filters=8, embedding_dim=16, epochs=12,
            optimizer="adam", learning_rate=0.01,
        )
        defaults.update(overrides)
        return cls(**defaults)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    return shifted - np.log(np.exp(shifted).sum())


def _hash_feature(name: str, size: int) -> int:
    return zlib.crc32(name.encode("utf-8")) % size


def hashed_features(text: str, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Char 3-5-gram + word-unigram counts, hashed and L2-normalized."""
    counts: Counter[int] = Counter()
    lowered = text.lower()
    for n in (3, 4, 5):
        for i in range(len(lowered) - n + 1):
            counts[_hash_feature(f"c{n}={lowered[i:i + n]}", size)] += 1
    for tok in tokenize(text):
        counts[_hash_feature(f"w={tok.lower}", size)] += 1
    if not counts:
        counts[_hash_feature("empty", size)] += 1
    ids = np.fromiter(counts.keys(), dtype=np.int64, count=len(counts))
    vals = np.fromiter(counts.values(), dtype=np.float64, count=len(counts))
    vals /= np.linalg.norm(vals)
    return ids, vals


@dataclass
class LinearModel:
    """Softmax regression over hashed bag-of-n-gram features."""

    weights: np.ndarray  # (NUM_CLASSES, hash_features)
    bias: np.ndarray  # (NUM_CLASSES,)

    @property
    def hash_features(self) -> int:
        return int(self.weights.shape[1])

    def log_probs(self, text: str) -> np.ndarray:
        ids, vals = hashed_features(text, self.hash_features)
        return _log_softmax(self.weights[:, ids] @ vals + self.bias)

    def predict_proba(self, text: str) -> np.ndarray:
        return np.exp(self.log_probs(text))

    def save(self, path: str | Path) -> None:
        serialize.save_model(
            path,
            kind="linear",
            config={"hash_features": self.hash_features},
            arrays={"weights": self.weights, "bias": self.bias},
        )

    @classmethod
    def load(cls, path: str | Path) -> "LinearModel":
        _, arrays, _ = serialize.load_model(path, kind="linear")
        return cls(weights=arrays["weights"], bias=arrays["bias"])


def _require_multiclass(data: Sequence[LabeledQuestion]) -> None:
    if not data:
        raise ValueError("training data must be non-empty")
    if len({q.qtype for q in data}) < 2:
        raise ValueError("training data must contain at least 2 classes")


def train_linear(
    data: Sequence[LabeledQuestion], config: TrainConfig | None = None
) -> LinearModel:
    """Mini-batch SGD on softmax cross-entropy; deterministic per seed."""
    _require_multiclass(data)
    config = config or TrainConfig()
    feats = [hashed_features(q.text, config.hash_features) for q in data]
    labels = np.array([_CLASS_INDEX[q.qtype] for q in data])
    model = LinearModel(
        weights=np.zeros((NUM_CLASSES, config.hash_features)),
        bias=np.zeros(NUM_CLASSES),
    )
    rng = np.random.default_rng(config.seed)
    order = np.arange(len(data))
    for _epoch in range(config.epochs):
        rng.shuffle(order)
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo : lo + config.batch_size]
            scale = config.learning_rate / len(batch)
            bias_step = np.zeros(NUM_CLASSES)
            for si in batch:
                ids, vals = feats[si]
                logits = model.weights[:, ids] @ vals + model.bias
                probs = np.exp(_log_softmax(logits))
                probs[labels[si]] -= 1.0
                if not np.isfinite(probs).all():
                    raise FloatingPointError("non-finite loss in linear training")
                model.weights[:, ids] -= scale * np.outer(probs, vals)
                bias_step += probs
            model.bias -= scale * bias_step
    return model


@dataclass
class ConvModel:
    """Multi-width text convolution with max pooling and a softmax head.

    Embedding rows: vocabulary, then one trainable OOV row, then a fixed
    zero PAD row that never receives gradient.
    """

    vocab_index: dict[str, int]
    embedding: np.ndarray  # (|V|+2, d)
    filters: dict[int, np.ndarray]  # width -> (num_filters, width, d)
    fc_weights: np.ndarray  # (NUM_CLASSES, num_filters * len(widths))
    fc_bias: np.ndarray  # (NUM_CLASSES,)
    dropout: float = 0.1

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(sorted(self.filters))

    @property
    def oov_index(self) -> int:
        return len(self.vocab_index)

    @property
    def pad_index(self) -> int:
        return len(self.vocab_index) + 1

    def token_indices(self, tokens: Sequence[str]) -> np.ndarray:
        ids = []
        for surface in tokens:
            idx = self.vocab_index.get(surface)
            if idx is None:
                idx = self.vocab_index.get(surface.lower(), self.oov_index)
            ids.append(idx)
        length = max(len(ids), max(self.widths))
        ids.extend([self.pad_index] * (length - len(ids)))
        return np.array(ids, dtype=np.int64)

    def predict_proba(self, text: str) -> np.ndarray:
        surfaces = [t.surface for t in tokenize(text)]
        return np.exp(forward_conv(self, surfaces))

    def save(self, path: str | Path) -> None:
        arrays = {
            "embedding": self.embedding,
            "fc_weights": self.fc_weights,
            "fc_bias": self.fc_bias,
        }
        for w, bank in self.filters.items():
            arrays[f"filters_{w}"] = bank
        serialize.save_model(
            path,
            kind="conv",
            config={"dropout": self.dropout, "widths": list(self.widths)},
            arrays=arrays,
            strings={"vocab": list(self.vocab_index)},
        )

    @classmethod
    def load(cls, path: str | Path) -> "ConvModel":
        config, arrays, strings = serialize.load_model(path, kind="conv")
        filters = {
            int(w): arrays[f"filters_{w}"] for w in config["widths"]
        }
        return cls(
            vocab_index={name: i for i, name in enumerate(strings["vocab"])},
            embedding=arrays["embedding"],
            filters=filters,
            fc_weights=arrays["fc_weights"],
            fc_bias=arrays["fc_bias"],
            dropout=float(config["dropout"]),
        )


@dataclass
class ConvGradient:
    """Gradients aligned with ConvModel parameters (PAD row always zero)."""

    embedding: np.ndarray
    filters: dict[int, np.ndarray]
    fc_weights: np.ndarray
    fc_bias: np.ndarray


def new_conv_model(
    vocab: Sequence[str], config: TrainConfig, embeddings: EmbeddingTable | None = None
) -> ConvModel:
    """Seeded-random parameters; embeddings copied from a table when given."""
    rng = np.random.default_rng(config.seed)
    if embeddings is None:
        embeddings = random_embeddings(
            [v.lower() for v in vocab], config.embedding_dim, config.seed
        )
    d = embeddings.dim
    vocab_index = dict(embeddings.vocabulary)
    matrix = np.vstack(
        [embeddings.vectors, embeddings.oov[None, :], np.zeros((1, d))]
    )
    filters = {
        w: rng.normal(0.0, 0.1, size=(config.num_filters, w, d))
        for w in sorted(set(config.widths))
    }
    pooled_dim = config.num_filters * len(filters)
    fc_weights = rng.normal(0.0, 0.1, size=(NUM_CLASSES, pooled_dim))
    return ConvModel(
        vocab_index=vocab_index,
        embedding=matrix,
        filters=filters,
        fc_weights=fc_weights,
        fc_bias=np.zeros(NUM_CLASSES),
        dropout=config.dropout,
    )


def _forward_example(
    model: ConvModel, indices: np.ndarray, keep_mask: np.ndarray | None
):
    X = model.embedding[indices]
    pooled_parts: list[np.ndarray] = []
    caches = []
    for w in model.widths:
        bank = model.filters[w]
        P = X.shape[0] - w + 1
        windows = np.stack([X[i : i + w] for i in range(P)])  # (P, w, d)
        pre = np.einsum("pwd,fwd->pf", windows, bank)
        act = np.tanh(pre)
        pool_idx = np.argmax(act, axis=0)  # first max -> deterministic
        pooled_parts.append(act[pool_idx, np.arange(bank.shape[0])])
        caches.append((w, windows, act, pool_idx))
    z = np.concatenate(pooled_parts)
    z_used = z if keep_mask is None else z * keep_mask
    logits = model.fc_weights @ z_used + model.fc_bias
    return _log_softmax(logits), z, z_used, caches, X


def forward_conv(model: ConvModel, tokens: Sequence[str]) -> np.ndarray:
    """Class log-probabilities for one token sequence (dropout disabled)."""
    indices = model.token_indices([str(t) for t in tokens])
    log_probs, _, _, _, _ = _forward_example(model, indices, None)
    return log_probs


def conv_loss(
    model: ConvModel,
    batch: Sequence[tuple[Sequence[str], QuestionType]],
    keep_masks: Sequence[np.ndarray] | None = None,
) -> float:
    """Mean cross-entropy of the batch (the quantity grad_conv differentiates)."""
    if not batch:
        raise ValueError("batch must be non-empty")
    total = 0.0
    for j, (tokens, qtype) in enumerate(batch):
        indices = model.token_indices([str(t) for t in tokens])
        mask = keep_masks[j] if keep_masks is not None else None
        log_probs, _, _, _, _ = _forward_example(model, indices, mask)
        total -= log_probs[_CLASS_INDEX[qtype]]
    return float(total / len(batch))


def grad_conv(
    model: ConvModel,
    batch: Sequence[tuple[Sequence[str], QuestionType]],
    keep_masks: Sequence[np.ndarray] | None = None,
) -> tuple[ConvGradient, float]:
    """Exact gradient of mean cross-entropy w.r.t. every parameter.

    ``keep_masks`` carries pre-scaled inverted-dropout masks during
    training; None means dropout disabled (the finite-difference setting).
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    grad = ConvGradient(
        embedding=np.zeros_like(model.embedding),
        filters={w: np.zeros_like(b) for w, b in model.filters.items()},
        fc_weights=np.zeros_like(model.fc_weights),
        fc_bias=np.zeros_like(model.fc_bias),
    )
    nf = model.fc_weights.shape[1] // len(model.widths)
    total = 0.0
    inv_b = 1.0 / len(batch)
    for j, (tokens, qtype) in enumerate(batch):
        indices = model.token_indices([str(t) for t in tokens])
        mask = keep_masks[j] if keep_masks is not None else None
        log_probs, z, z_used, caches, X = _forward_example(model, indices, mask)
        total -= log_probs[_CLASS_INDEX[qtype]]
        dlogits = np.exp(log_probs)
        dlogits[_CLASS_INDEX[qtype]] -= 1.0
        dlogits *= inv_b
        if not np.isfinite(dlogits).all():
            raise FloatingPointError("non-finite loss in conv gradient")
        grad.fc_bias += dlogits
        grad.fc_weights += np.outer(dlogits, z_used)
        dz = model.fc_weights.T @ dlogits
        if mask is not None:
            dz = dz * mask
        dX = np.zeros_like(X)
        for seg, (w, windows, act, pool_idx) in enumerate(caches):
            dpooled = dz[seg * nf : (seg + 1) * nf]
            fs = np.arange(nf)
            dpre = dpooled * (1.0 - act[pool_idx, fs] ** 2)  # (nf,)
            grad.filters[w] += dpre[:, None, None] * windows[pool_idx]
            rows = pool_idx[:, None] + np.arange(w)[None, :]  # (nf, w)
            np.add.at(dX, rows, dpre[:, None, None] * model.filters[w])
        np.add.at(grad.embedding, indices, dX)
    grad.embedding[model.pad_index] = 0.0
    return grad, float(total / len(batch))


def train_conv(
    data: Sequence[LabeledQuestion],
    config: TrainConfig | None = None,
    embeddings: EmbeddingTable | None = None,
) -> ConvModel:
    """Mini-batch SGD (or Adam) with seeded inverted dropout."""
    _require_multiclass(data)
    config = config or TrainConfig()
    tokenized = [[t.surface for t in tokenize(q.text)] for q in data]
    vocab = sorted({s.lower() for toks in tokenized for s in toks})
    model = new_conv_model(vocab, config, embeddings)
    examples = [(toks, q.qtype) for toks, q in zip(tokenized, data)]

    rng = np.random.default_rng(config.seed + 1)
    order = np.arange(len(examples))
    pooled_dim = model.fc_weights.shape[1]
    adam_state = None
    if config.optimizer == "adam":
        adam_state = _AdamState(model)
    elif config.optimizer != "sgd":
        raise ValueError(f"unknown optimizer {config.optimizer!r}")
    keep_prob = 1.0 - config.dropout
    for _epoch in range(config.epochs):
        rng.shuffle(order)
        for lo in range(0, len(order), config.batch_size):
            batch = [examples[i] for i in order[lo : lo + config.batch_size]]
            masks = None
            if config.dropout > 0.0:
                masks = [
                    (rng.random(pooled_dim) < keep_prob) / keep_prob
                    for _ in batch
                ]
            grad, _ = grad_conv(model, batch, masks)
            if adam_state is not None:
                adam_state.step(model, grad, config.learning_rate)
            else:
                model.embedding -= config.learning_rate * grad.embedding
                for w in model.filters:
                    model.filters[w] -= config.learning_rate * grad.filters[w]
                model.fc_weights -= config.learning_rate * grad.fc_weights
                model.fc_bias -= config.learning_rate * grad.fc_bias
            model.embedding[model.pad_index] = 0.0
    return model


class _AdamState:
    """Per-parameter first/second moment buffers for the optional Adam flag."""

    def __init__(self, model: ConvModel, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = self._zeros_like(model)
        self.v = self._zeros_like(model)

    @staticmethod
    def _zeros_like(model: ConvModel) -> dict:
        return {
            "embedding": np.zeros_like(model.embedding),
            "fc_weights": np.zeros_like(model.fc_weights),
            "fc_bias": np.zeros_like(model.fc_bias),
            **{f"filters_{w}": np.zeros_like(b) for w, b in model.filters.items()},
        }

    def step(self, model: ConvModel, grad: ConvGradient, lr: float) -> None:
        self.t += 1
        named = {
            "embedding": (model.embedding, grad.embedding),
            "fc_weights": (model.fc_weights, grad.fc_weights),
            "fc_bias": (model.fc_bias, grad.fc_bias),
            **{
                f"filters_{w}": (model.filters[w], grad.filters[w])
                for w in model.filters
            },
        }
        correction = np.sqrt(1 - self.beta2**self.t) / (1 - self.beta1**self.t)
        for key, (param, g) in named.items():
            m, v = self.m[key], self.v[key]
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            param -= lr * correction * m / (np.sqrt(v) + self.eps)


def predict_qtype(model, text: str) -> tuple[QuestionType, float]:
    """Argmax class and its probability; ties break by declaration order."""
    probs = model.predict_proba(text)
    idx = int(np.argmax(probs))
    return QUESTION_TYPES[idx], float(probs[idx])

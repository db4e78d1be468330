"""Tokenization, coarse POS tagging, CRF feature templates, and embeddings.

The tokenizer splits on Unicode whitespace and then peels leading/trailing
punctuation into separate tokens, keeping internal punctuation (hyphens,
apostrophes) attached so entity names like "L-glutamine" stay whole.

The POS tagger is a small lexicon-plus-suffix-rule tagger over 12 coarse
tags. It exists so the CRF feature set has no external dependency; its
accuracy is not a quality target.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

FeatureVector = dict[str, float]

POS_TAGS = (
    "NOUN", "VERB", "ADJ", "ADV", "PRON", "DET",
    "ADP", "NUM", "CONJ", "PRT", "PUNCT", "X",
)


@dataclass(frozen=True)
class Token:
    """A tokenizer output unit with exact source offsets."""

    surface: str
    start: int
    end: int

    @property
    def lower(self) -> str:
        return self.surface.lower()


def _is_punct_char(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> list[Token]:
    """Deterministic whitespace tokenization with punctuation peeling."""
    tokens: list[Token] = []
    for match in re.finditer(r"\S+", text):
        chunk, offset = match.group(), match.start()
        lo, hi = 0, len(chunk)
        head: list[tuple[str, int]] = []
        tail: list[tuple[str, int]] = []
        while lo < hi and _is_punct_char(chunk[lo]):
            head.append((chunk[lo], offset + lo))
            lo += 1
        while hi > lo and _is_punct_char(chunk[hi - 1]):
            tail.append((chunk[hi - 1], offset + hi - 1))
            hi -= 1
        for ch, pos in head:
            tokens.append(Token(ch, pos, pos + 1))
        if lo < hi:
            tokens.append(Token(chunk[lo:hi], offset + lo, offset + hi))
        for ch, pos in reversed(tail):
            tokens.append(Token(ch, pos, pos + 1))
    return tokens


_DET = {"the", "a", "an", "this", "that", "these", "those", "any", "some",
        "each", "every", "no", "all", "both", "either", "neither", "what",
        "which", "whose"}
_PRON = {"i", "you", "he", "she", "it", "we", "they", "me", "him", "her",
         "us", "them", "my", "your", "his", "its", "our", "their", "mine",
         "yours", "myself", "yourself", "anyone", "someone", "anybody",
         "somebody", "who", "whom", "anything", "something"}
_ADP = {"of", "in", "on", "at", "by", "for", "with", "from", "into", "onto",
        "about", "against", "between", "during", "before", "after", "over",
        "under", "without", "within", "through", "while", "per", "than"}
_CONJ = {"and", "or", "but", "nor", "so", "yet", "because", "if", "when",
         "although", "though", "whether", "as"}
_PRT = {"to", "not", "n't", "up", "out", "off", "down"}
_VERB = {"is", "are", "was", "were", "be", "been", "being", "am", "do",
         "does", "did", "done", "have", "has", "had", "can", "could", "will",
         "would", "shall", "should", "may", "might", "must", "take", "takes",
         "taking", "taken", "use", "uses", "using", "used", "buy", "get",
         "know", "work", "works", "cause", "causes", "help", "helps", "make",
         "makes", "need", "needs", "go", "goes", "combine", "mix", "interact"}
_ADV = {"very", "really", "quite", "too", "also", "now", "then", "here",
        "there", "how", "where", "why", "exactly", "actually", "anywhere",
        "together", "safely"}

_NUM_RE = re.compile(r"^[+-]?\d+([.,:/]\d+)*$")


def pos_tag(token: Token) -> str:
    """Coarse 12-tag POS by lexicon lookup, then suffix rules, default NOUN."""
    surface = token.surface
    if not surface:
        return "X"
    if all(_is_punct_char(ch) for ch in surface):
        return "PUNCT"
    if _NUM_RE.match(surface):
        return "NUM"
    lower = surface.lower()
    for tag, lexicon in (("DET", _DET), ("PRON", _PRON), ("ADP", _ADP),
                         ("CONJ", _CONJ), ("PRT", _PRT), ("VERB", _VERB),
                         ("ADV", _ADV)):
        if lower in lexicon:
            return tag
    if lower.endswith("ly"):
        return "ADV"
    if lower.endswith(("ing", "ed", "ize", "ise", "ify")):
        return "VERB"
    if lower.endswith(("ous", "ful", "able", "ible", "ive", "ic", "al", "ary")):
        return "ADJ"
    if lower.endswith(("tion", "sion", "ment", "ness", "ity", "ism", "ist",
                       "er", "or", "ine", "in", "um")):
        return "NOUN"
    if not any(ch.isalnum() for ch in surface):
        return "X"
    return "NOUN"


def word_shape(surface: str) -> str:
    """Shape class: lower, cap, upper, digit, mixed, punct, or other."""
    if not surface:
        return "other"
    if all(_is_punct_char(ch) for ch in surface):
        return "punct"
    if surface.isdigit():
        return "digit"
    if surface.isalpha():
        if surface.islower():
            return "lower"
        if surface.isupper():
            return "upper"
        if surface[0].isupper() and surface[1:].islower():
            return "cap"
        return "mixed"
    if any(ch.isalpha() for ch in surface) or any(ch.isdigit() for ch in surface):
        return "mixed"
    return "other"


def _token_features(prefix: str, token: Token, pos: str) -> FeatureVector:
    lower = token.lower
    feats = {
        f"{prefix}lower={lower}": 1.0,
        f"{prefix}suffix2={lower[-2:]}": 1.0,
        f"{prefix}suffix3={lower[-3:]}": 1.0,
        f"{prefix}prefix3={lower[:3]}": 1.0,
        f"{prefix}shape={word_shape(token.surface)}": 1.0,
        f"{prefix}pos={pos}": 1.0,
    }
    return feats


def crf_features(
    tokens: Sequence[Token],
    position: int,
    pos_tags: Sequence[str] | None = None,
) -> FeatureVector:
    """Feature templates for one position: token and +/-1 neighbors.

    ``pos_tags`` may carry precomputed tags for the whole sequence; when
    omitted they are computed on the fly.
    """
    if not 0 <= position < len(tokens):
        raise IndexError(f"position {position} out of range for {len(tokens)} tokens")
    if pos_tags is None:
        pos_tags = [pos_tag(t) for t in tokens]
    feats: FeatureVector = {"bias": 1.0}
    feats.update(_token_features("", tokens[position], pos_tags[position]))
    if position == 0:
        feats["BOS"] = 1.0
    else:
        feats.update(_token_features("prev_", tokens[position - 1], pos_tags[position - 1]))
    if position == len(tokens) - 1:
        feats["EOS"] = 1.0
    else:
        feats.update(_token_features("next_", tokens[position + 1], pos_tags[position + 1]))
    return feats


def sequence_features(tokens: Sequence[Token]) -> list[FeatureVector]:
    """crf_features for every position, sharing one POS pass."""
    tags = [pos_tag(t) for t in tokens]
    return [crf_features(tokens, i, tags) for i in range(len(tokens))]


class EmbeddingError(ValueError):
    """An embedding file is empty or dimensionally inconsistent."""


@dataclass
class EmbeddingTable:
    """Token -> dense vector lookup with a dedicated OOV row."""

    vocabulary: dict[str, int]
    vectors: np.ndarray  # |V| x d
    oov: np.ndarray  # d
    trainable: bool = False

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1]) if self.vectors.size else int(self.oov.shape[0])

    def lookup(self, token: str) -> np.ndarray:
        idx = self.vocabulary.get(token)
        if idx is None:
            idx = self.vocabulary.get(token.lower())
        return self.vectors[idx] if idx is not None else self.oov

    def index_of(self, token: str) -> int | None:
        idx = self.vocabulary.get(token)
        if idx is None:
            idx = self.vocabulary.get(token.lower())
        return idx


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Parse whitespace-separated "token v1 ... vd" rows; OOV row is zeros."""
    vocabulary: dict[str, int] = {}
    rows: list[np.ndarray] = []
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise EmbeddingError(f"{path}:{lineno}: row has no values")
            elif len(values) != dim:
                raise EmbeddingError(
                    f"{path}:{lineno}: row {token!r} has {len(values)} values, "
                    f"expected {dim}"
                )
            vocabulary[token] = len(rows)
            rows.append(np.array([float(v) for v in values], dtype=np.float64))
    if dim is None:
        raise EmbeddingError(f"{path}: empty embedding file")
    return EmbeddingTable(
        vocabulary=vocabulary,
        vectors=np.vstack(rows),
        oov=np.zeros(dim, dtype=np.float64),
        trainable=False,
    )


def random_embeddings(vocab: Sequence[str], d: int, seed: int) -> EmbeddingTable:
    """Seeded uniform vectors in [-0.5/d, 0.5/d]; the OOV row is seeded too."""
    if d <= 0:
        raise ValueError(f"embedding dimension must be positive, got {d}")
    rng = np.random.default_rng(seed)
    limit = 0.5 / d
    unique = list(dict.fromkeys(vocab))
    matrix = rng.uniform(-limit, limit, size=(len(unique) + 1, d))
    return EmbeddingTable(
        vocabulary={tok: i for i, tok in enumerate(unique)},
        vectors=matrix[:-1],
        oov=matrix[-1],
        trainable=True,
    )

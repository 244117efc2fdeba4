"""Dependency-light baseline models.

NER: a per-token softmax classifier over window features with greedy
BIO-constrained decoding. RE: a softmax classifier over bag-of-words of the
rendered template plus entity-type features. Both exist to exercise the
iterative framework end to end; they are not the transformer backends the
plugin protocol is for.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..corpus import Sentence, is_word_token, tokenize
from ..distant import NerExample, ReExample, is_valid_bio, tag_to_type
from .linear import FeatureIndexer, SoftmaxRegression, TrainSettings, rows_to_csr

_PAD = ("<s-2>", "<s-1>", "</s+1>", "</s+2>")


def token_shape(token: str) -> str:
    shape = []
    for ch in token:
        if ch.isalpha():
            sym = "x"
        elif ch.isdigit():
            sym = "d"
        else:
            sym = ch
        if not shape or shape[-1] != sym:
            shape.append(sym)
    return "".join(shape)


def ner_token_features(tokens_cf: list[str], i: int, gazetteer: frozenset[str]) -> list[str]:
    w = tokens_cf[i]
    prev1 = tokens_cf[i - 1] if i >= 1 else _PAD[1]
    prev2 = tokens_cf[i - 2] if i >= 2 else _PAD[0]
    next1 = tokens_cf[i + 1] if i + 1 < len(tokens_cf) else _PAD[2]
    next2 = tokens_cf[i + 2] if i + 2 < len(tokens_cf) else _PAD[3]
    feats = [
        f"w0={w}", f"w-1={prev1}", f"w-2={prev2}", f"w+1={next1}", f"w+2={next2}",
        f"shape={token_shape(w)}",
        f"pre1={w[:1]}", f"pre2={w[:2]}", f"pre3={w[:3]}",
        f"suf1={w[-1:]}", f"suf2={w[-2:]}", f"suf3={w[-3:]}",
    ]
    if w in gazetteer:
        feats.append("gaz=1")
    return feats


def _allowed(prev: str, tag: str) -> bool:
    if not tag.startswith("I-"):
        return True
    return prev == f"B-{tag[2:]}" or prev == f"I-{tag[2:]}"


@dataclass(frozen=True)
class DecodedSpan:
    start: int
    end: int
    etype: str
    probability: float


class BaselineNerModel:
    """Trained state: feature vocab, tag list, weights, training gazetteer."""

    def __init__(self, indexer: FeatureIndexer, tags: list[str],
                 clf: SoftmaxRegression, gazetteer: frozenset[str],
                 settings: TrainSettings):
        self.indexer = indexer
        self.tags = tags
        self.clf = clf
        self.gazetteer = gazetteer
        self.settings = settings

    @classmethod
    def train(cls, corpus: list[NerExample], settings: TrainSettings) -> "BaselineNerModel":
        if not corpus:
            raise ValueError("cannot train NER on an empty corpus")
        for ex in corpus:
            if len(ex.tokens) != len(ex.labels):
                raise ValueError(f"token/label length mismatch in {ex.sid}")
            if not is_valid_bio(ex.labels):
                raise ValueError(f"invalid BIO sequence in {ex.sid}")
        gazetteer = frozenset(
            tok.casefold()
            for ex in corpus
            for tok, lab in zip(ex.tokens, ex.labels)
            if lab != "O"
        )
        tags = sorted({lab for ex in corpus for lab in ex.labels} | {"O"})
        tag_index = {t: i for i, t in enumerate(tags)}
        indexer = FeatureIndexer()
        rows: list[list[int]] = []
        y: list[int] = []
        for ex in corpus:
            tokens_cf = [t.casefold() for t in ex.tokens]
            for i, lab in enumerate(ex.labels):
                rows.append(indexer.encode(ner_token_features(tokens_cf, i, gazetteer)))
                y.append(tag_index[lab])
        indexer.frozen = True
        clf = SoftmaxRegression(len(indexer), len(tags), settings)
        clf.fit(rows_to_csr(rows, len(indexer)), np.asarray(y, dtype=np.int64))
        return cls(indexer, tags, clf, gazetteer, settings)

    def predict(self, sent: Sentence) -> list[DecodedSpan]:
        if not sent.tokens:
            raise ValueError("cannot predict on an empty sentence")
        tokens_cf = [t.casefold() for t in sent.token_strings()]
        rows = [
            self.indexer.encode(ner_token_features(tokens_cf, i, self.gazetteer))
            for i in range(len(tokens_cf))
        ]
        probs = self.clf.predict_proba(rows_to_csr(rows, len(self.indexer)))
        chosen: list[tuple[str, float]] = []
        prev = "O"
        for i in range(len(tokens_cf)):
            best_tag, best_p = "O", -1.0
            for j, tag in enumerate(self.tags):
                if _allowed(prev, tag) and probs[i, j] > best_p:
                    best_tag, best_p = tag, probs[i, j]
            chosen.append((best_tag, best_p))
            prev = best_tag
        return decode_spans(chosen)


def decode_spans(tagged: list[tuple[str, float]]) -> list[DecodedSpan]:
    """Maximal B/I runs; span probability is the geometric mean of tag probs."""
    spans: list[DecodedSpan] = []
    start, tag, logs = -1, "", 0.0

    def flush(end: int) -> None:
        nonlocal start
        if start >= 0:
            geo = float(np.exp(logs / (end - start)))
            spans.append(DecodedSpan(start, end, tag_to_type(tag), min(geo, 1.0)))
            start = -1

    for i, (label, p) in enumerate(tagged):
        if label.startswith("B-"):
            flush(i)
            start, tag, logs = i, label[2:], float(np.log(max(p, 1e-300)))
        elif label.startswith("I-") and start >= 0 and label[2:] == tag:
            logs += float(np.log(max(p, 1e-300)))
        else:
            flush(i)
    flush(len(tagged))
    return spans


def re_features(text: str, head_type: str, tail_type: str) -> list[str]:
    words = sorted({
        tok.casefold() for tok, _, _ in tokenize(text) if is_word_token(tok)
    })
    feats = [f"bow={w}" for w in words]
    feats.append(f"tp={head_type}|{tail_type}")
    feats.append(f"ht={head_type}")
    feats.append(f"tt={tail_type}")
    return feats


class BaselineReModel:
    def __init__(self, indexer: FeatureIndexer, labels: list[str],
                 clf: SoftmaxRegression, settings: TrainSettings):
        self.indexer = indexer
        self.labels = labels
        self.clf = clf
        self.settings = settings

    @classmethod
    def train(cls, corpus: list[ReExample], settings: TrainSettings) -> "BaselineReModel":
        labels = sorted({ex.label for ex in corpus})
        if len(labels) < 2:
            raise ValueError(
                f"RE training needs at least 2 distinct labels, got {labels}"
            )
        label_index = {lab: i for i, lab in enumerate(labels)}
        indexer = FeatureIndexer()
        rows = [
            indexer.encode(re_features(ex.text, ex.head_type, ex.tail_type))
            for ex in corpus
        ]
        indexer.frozen = True
        y = np.asarray([label_index[ex.label] for ex in corpus], dtype=np.int64)
        clf = SoftmaxRegression(len(indexer), len(labels), settings)
        clf.fit(rows_to_csr(rows, len(indexer)), y)
        return cls(indexer, labels, clf, settings)

    def predict(self, text: str, head_type: str, tail_type: str) -> dict[str, float]:
        row = self.indexer.encode(re_features(text, head_type, tail_type))
        probs = self.clf.predict_proba(rows_to_csr([row], len(self.indexer)))[0]
        return {lab: float(p) for lab, p in zip(self.labels, probs)}

"""Transformer token-classification (NER) and sequence-classification (RE)
backends.

NER fine-tunes a token classifier and decodes BIO tags greedily under the
grammar constraint; a span's probability is the geometric mean of its words'
chosen-tag probabilities, where each word is represented by its first
sub-token. RE fine-tunes a sequence classifier on the rendered template and
reads the class distribution off the first-position representation.

scratch:// models use a word-level vocabulary built from the training data,
so each word is its own (first and only) sub-token. Pretrained checkpoints
load from the local cache with their own subword tokenizers.
"""

from __future__ import annotations

import math
import re

import torch
from transformers import (
    AutoModelForSequenceClassification,
    AutoModelForTokenClassification,
    AutoTokenizer,
    BertConfig,
    BertForSequenceClassification,
    BertForTokenClassification,
)

from .config import AdapterConfig

PAD, UNK = 0, 1

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def word_tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def build_vocab(token_lists) -> dict[str, int]:
    vocab = {"<pad>": PAD, "<unk>": UNK}
    for token in sorted({t.casefold() for toks in token_lists for t in toks}):
        vocab[token] = len(vocab)
    return vocab


def encode(tokens: list[str], vocab: dict[str, int], max_len: int) -> list[int]:
    return [vocab.get(t.casefold(), UNK) for t in tokens][:max_len]


def _pad_batch(rows: list[list[int]], pad_value: int) -> torch.Tensor:
    width = max(len(r) for r in rows)
    return torch.tensor([r + [pad_value] * (width - len(r)) for r in rows],
                        dtype=torch.long)


def _bio_allowed(prev: str, tag: str) -> bool:
    if not tag.startswith("I-"):
        return True
    return prev == f"B-{tag[2:]}" or prev == f"I-{tag[2:]}"


def _scratch_config(cfg: AdapterConfig, vocab_size: int, num_labels: int) -> BertConfig:
    return BertConfig(
        vocab_size=vocab_size,
        hidden_size=cfg.hidden_size,
        num_hidden_layers=cfg.num_layers,
        num_attention_heads=cfg.num_heads,
        intermediate_size=cfg.intermediate_size,
        max_position_embeddings=cfg.max_len + 2,
        num_labels=num_labels,
    )


def _train_loop(model, batches, cfg: AdapterConfig) -> None:
    model.train()
    optimizer = torch.optim.AdamW(model.parameters(), lr=cfg.learning_rate)
    for _ in range(cfg.epochs):
        for batch in batches:
            optimizer.zero_grad()
            loss = model(**batch).loss
            loss.backward()
            optimizer.step()
    model.eval()


class NerAdapter:
    """Token classifier over whole words (scratch) or sub-words (pretrained)."""

    def __init__(self, cfg: AdapterConfig):
        self.cfg = cfg
        self.vocab: dict[str, int] | None = None
        self.tags: list[str] = []
        self.model = None
        self.tokenizer = None  # pretrained path only

    def train(self, examples: list[dict]) -> None:
        cfg = self.cfg
        torch.manual_seed(cfg.seed)
        self.tags = sorted({lab for ex in examples for lab in ex["labels"]} | {"O"})
        tag_index = {t: i for i, t in enumerate(self.tags)}
        if cfg.from_scratch:
            self.vocab = build_vocab(ex["tokens"] for ex in examples)
            self.model = BertForTokenClassification(
                _scratch_config(cfg, len(self.vocab), len(self.tags)))
            rows, labels = [], []
            for ex in examples:
                rows.append(encode(ex["tokens"], self.vocab, cfg.max_len))
                labels.append([tag_index[l] for l in ex["labels"]][:cfg.max_len])
        else:
            self.tokenizer = AutoTokenizer.from_pretrained(
                cfg.model_name, local_files_only=True)
            self.model = AutoModelForTokenClassification.from_pretrained(
                cfg.model_name, num_labels=len(self.tags),
                local_files_only=True)
            rows, labels = [], []
            for ex in examples:
                ids, lab = self._align(ex["tokens"],
                                       [tag_index[l] for l in ex["labels"]])
                rows.append(ids)
                labels.append(lab)
        self.model.to(cfg.device)
        batches = []
        for i in range(0, len(rows), cfg.batch_size):
            chunk, lab_chunk = rows[i:i + cfg.batch_size], labels[i:i + cfg.batch_size]
            input_ids = _pad_batch(chunk, PAD)
            batches.append({
                "input_ids": input_ids.to(cfg.device),
                "attention_mask": (input_ids != PAD).long().to(cfg.device),
                "labels": _pad_batch(lab_chunk, -100).to(cfg.device),
            })
        _train_loop(self.model, batches, cfg)

    def _align(self, words: list[str], word_labels: list[int]):
        """First-sub-token labeling; continuation sub-tokens are masked out."""
        ids = [self.tokenizer.cls_token_id]
        labels = [-100]
        for word, lab in zip(words, word_labels):
            pieces = self.tokenizer.encode(word, add_special_tokens=False)
            if not pieces:
                pieces = [self.tokenizer.unk_token_id]
            ids.extend(pieces[: self.cfg.max_len])
            labels.extend([lab] + [-100] * (len(pieces) - 1))
        ids = ids[: self.cfg.max_len] + [self.tokenizer.sep_token_id]
        labels = labels[: self.cfg.max_len] + [-100]
        return ids, labels

    def _word_probs(self, tokens: list[str]) -> torch.Tensor:
        """(words, tags) chosen-tag probability matrix via first sub-tokens."""
        if self.cfg.from_scratch:
            ids = torch.tensor([encode(tokens, self.vocab, self.cfg.max_len)],
                               dtype=torch.long, device=self.cfg.device)
            first_positions = list(range(ids.shape[1]))
        else:
            ids_list = [self.tokenizer.cls_token_id]
            first_positions = []
            for word in tokens[: self.cfg.max_len]:
                pieces = self.tokenizer.encode(word, add_special_tokens=False)
                if not pieces:
                    pieces = [self.tokenizer.unk_token_id]
                first_positions.append(len(ids_list))
                ids_list.extend(pieces)
            ids_list.append(self.tokenizer.sep_token_id)
            ids = torch.tensor([ids_list], dtype=torch.long,
                               device=self.cfg.device)
        with torch.no_grad():
            logits = self.model(input_ids=ids,
                                attention_mask=torch.ones_like(ids)).logits[0]
        probs = torch.softmax(logits, dim=-1)
        return probs[first_positions]

    def predict(self, tokens: list[str]) -> list[dict]:
        probs = self._word_probs(tokens)
        n = min(len(tokens), probs.shape[0])
        chosen: list[tuple[str, float]] = []
        prev = "O"
        for i in range(n):
            best_tag, best_p = "O", -1.0
            for j, tag in enumerate(self.tags):
                p = float(probs[i, j])
                if _bio_allowed(prev, tag) and p > best_p:
                    best_tag, best_p = tag, p
            chosen.append((best_tag, best_p))
            prev = best_tag
        spans = []
        start, tag, logs = -1, "", 0.0
        for i, (label, p) in enumerate(chosen + [("O", 1.0)]):
            if label.startswith("B-"):
                if start >= 0:
                    spans.append(self._span(start, i, tag, logs))
                start, tag, logs = i, label[2:], math.log(max(p, 1e-300))
            elif label.startswith("I-") and start >= 0 and label[2:] == tag:
                logs += math.log(max(p, 1e-300))
            else:
                if start >= 0:
                    spans.append(self._span(start, i, tag, logs))
                start = -1
        return spans

    @staticmethod
    def _span(start: int, end: int, tag: str, logs: float) -> dict:
        p = math.exp(logs / (end - start))
        return {"start": start, "end": end, "type": tag.replace("_", " "),
                "p": min(p, 1.0)}

    def state(self) -> dict:
        return {"kind": "ner", "cfg": self.cfg, "vocab": self.vocab,
                "tags": self.tags,
                "model": self.model.state_dict() if self.model else None}

    def load_state(self, blob: dict) -> None:
        self.vocab = blob["vocab"]
        self.tags = blob["tags"]
        if self.cfg.from_scratch:
            self.model = BertForTokenClassification(
                _scratch_config(self.cfg, len(self.vocab), len(self.tags)))
        else:
            self.tokenizer = AutoTokenizer.from_pretrained(
                self.cfg.model_name, local_files_only=True)
            self.model = AutoModelForTokenClassification.from_pretrained(
                self.cfg.model_name, num_labels=len(self.tags),
                local_files_only=True)
        self.model.load_state_dict(blob["model"])
        self.model.to(self.cfg.device)
        self.model.eval()


class ReAdapter:
    """Sequence classifier over the rendered relation template."""

    def __init__(self, cfg: AdapterConfig):
        self.cfg = cfg
        self.vocab: dict[str, int] | None = None
        self.labels: list[str] = []
        self.model = None
        self.tokenizer = None

    def _encode_text(self, text: str) -> list[int]:
        if self.cfg.from_scratch:
            return encode(word_tokenize(text), self.vocab, self.cfg.max_len)
        return self.tokenizer.encode(text, truncation=True,
                                     max_length=self.cfg.max_len)

    def train(self, examples: list[dict]) -> None:
        cfg = self.cfg
        torch.manual_seed(cfg.seed)
        self.labels = sorted({ex["label"] for ex in examples})
        label_index = {l: i for i, l in enumerate(self.labels)}
        if cfg.from_scratch:
            self.vocab = build_vocab(word_tokenize(ex["text"])
                                     for ex in examples)
            self.model = BertForSequenceClassification(
                _scratch_config(cfg, len(self.vocab), len(self.labels)))
        else:
            self.tokenizer = AutoTokenizer.from_pretrained(
                cfg.model_name, local_files_only=True)
            self.model = AutoModelForSequenceClassification.from_pretrained(
                cfg.model_name, num_labels=len(self.labels),
                local_files_only=True)
        self.model.to(cfg.device)
        rows = [self._encode_text(ex["text"]) for ex in examples]
        y = [label_index[ex["label"]] for ex in examples]
        batches = []
        for i in range(0, len(rows), cfg.batch_size):
            input_ids = _pad_batch(rows[i:i + cfg.batch_size], PAD)
            batches.append({
                "input_ids": input_ids.to(cfg.device),
                "attention_mask": (input_ids != PAD).long().to(cfg.device),
                "labels": torch.tensor(y[i:i + cfg.batch_size],
                                       dtype=torch.long, device=cfg.device),
            })
        _train_loop(self.model, batches, cfg)

    def predict(self, text: str) -> dict:
        ids = torch.tensor([self._encode_text(text)], dtype=torch.long,
                           device=self.cfg.device)
        with torch.no_grad():
            logits = self.model(input_ids=ids,
                                attention_mask=torch.ones_like(ids)).logits[0]
        probs = torch.softmax(logits, dim=-1)
        dist = {lab: float(probs[i]) for i, lab in enumerate(self.labels)}
        best = max(dist, key=lambda lab: (dist[lab], lab))
        return {"relation": best, "p": dist[best], "dist": dist}

    def state(self) -> dict:
        return {"kind": "re", "cfg": self.cfg, "vocab": self.vocab,
                "labels": self.labels,
                "model": self.model.state_dict() if self.model else None}

    def load_state(self, blob: dict) -> None:
        self.vocab = blob["vocab"]
        self.labels = blob["labels"]
        if self.cfg.from_scratch:
            self.model = BertForSequenceClassification(
                _scratch_config(self.cfg, len(self.vocab), len(self.labels)))
        else:
            self.tokenizer = AutoTokenizer.from_pretrained(
                self.cfg.model_name, local_files_only=True)
            self.model = AutoModelForSequenceClassification.from_pretrained(
                self.cfg.model_name, num_labels=len(self.labels),
                local_files_only=True)
        self.model.load_state_dict(blob["model"])
        self.model.to(self.cfg.device)
        self.model.eval()

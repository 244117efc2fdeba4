"""Raw-text ingestion: cleanup, sentence segmentation, tokenization, partitioning.

Everything here is deterministic: the same input and config always produce the
same sentences, and partitioning is a seeded shuffle.
"""

from __future__ import annotations

import json
import logging
import random
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator

log = logging.getLogger(__name__)

Token = tuple[str, int, int]

# Alphanumeric runs (underscore included) or single non-space symbols.
_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)

# Sentence boundary: terminal punctuation, whitespace, then an uppercase letter
# or digit. Offsets are checked against the abbreviation blocklist first.
_BOUNDARY_RE = re.compile(r"[.?!]+(?=\s+[A-Z0-9])")

# Abbreviations whose trailing period never ends a sentence.
ABBREVIATIONS = (
    "et al.", "Fig.", "fig.", "Figs.", "e.g.", "i.e.", "etc.", "vs.",
    "cf.", "ca.", "approx.", "Dr.", "No.", "Eq.", "Ref.", "resp.",
)


def tokenize(text: str) -> list[Token]:
    """Split text into word and punctuation tokens with character offsets.

    Punctuation marks are single-character tokens; alphanumeric runs stay
    whole. Offsets index into the input string.
    """
    return [(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def is_word_token(token: str) -> bool:
    """True for tokens that contain at least one alphanumeric character."""
    return any(ch.isalnum() for ch in token)


@dataclass(slots=True)
class Sentence:
    """A tokenized sentence with a stable id (doc id + char offset)."""

    id: str
    text: str
    tokens: list[Token]

    def token_strings(self) -> list[str]:
        return [t[0] for t in self.tokens]


@dataclass(slots=True)
class SubCorpus:
    """One partition of the filtered corpus (1-based index)."""

    index: int
    sentences: list[Sentence]

    def __len__(self) -> int:
        return len(self.sentences)


@dataclass
class PreprocessConfig:
    min_len: int = 5
    max_len: int = 128
    # Extra per-sentence predicates (config hooks); sentence kept only if all
    # return True.
    extra_filters: tuple[Callable[[Sentence], bool], ...] = ()


@dataclass
class PreprocessStats:
    docs: int = 0
    skipped_docs: int = 0
    sentences_raw: int = 0
    sentences_kept: int = 0
    errors: list[str] = field(default_factory=list)


def normalize_text(text: str) -> str:
    """Strip control characters and collapse all whitespace runs to one space."""
    cleaned = []
    for ch in text:
        if ch in ("\t", "\n", "\r") or ch == " ":
            cleaned.append(" ")
        elif unicodedata.category(ch).startswith("C"):
            continue
        else:
            cleaned.append(ch)
    return re.sub(r" {2,}", " ", "".join(cleaned)).strip()


def _is_abbreviation(text: str, boundary_end: int) -> bool:
    head = text[:boundary_end]
    return any(head.endswith(abbr) for abbr in ABBREVIATIONS)


def split_sentences(text: str) -> list[tuple[int, str]]:
    """Split normalized text into (start offset, sentence text) pieces."""
    pieces: list[tuple[int, str]] = []
    start = 0
    for m in _BOUNDARY_RE.finditer(text):
        if _is_abbreviation(text, m.end()):
            continue
        piece = text[start:m.end()].strip()
        if piece:
            pieces.append((start, piece))
        start = m.end()
    tail = text[start:].strip()
    if tail:
        # The stored offset points at the first non-space character.
        while start < len(text) and text[start] == " ":
            start += 1
        pieces.append((start, tail))
    return pieces


def preprocess(
    raw_docs: Iterable[tuple[str, str]],
    config: PreprocessConfig | None = None,
    *,
    stats: PreprocessStats | None = None,
) -> list[Sentence]:
    """Clean, segment, tokenize and length-filter a stream of (doc id, text).

    The length filter counts word tokens only (punctuation tokens are free).
    Documents that fail to decode or normalize are skipped and counted.
    """
    cfg = config or PreprocessConfig()
    st = stats if stats is not None else PreprocessStats()
    out: list[Sentence] = []
    for doc_id, text in raw_docs:
        st.docs += 1
        try:
            if isinstance(text, bytes):
                text = text.decode("utf-8")
            normalized = normalize_text(text)
        except (UnicodeDecodeError, TypeError) as exc:
            st.skipped_docs += 1
            st.errors.append(f"{doc_id}: {exc}")
            log.warning("skipping document %s: %s", doc_id, exc)
            continue
        for offset, piece in split_sentences(normalized):
            st.sentences_raw += 1
            tokens = tokenize(piece)
            if not tokens:
                continue
            words = sum(1 for tok, _, _ in tokens if is_word_token(tok))
            if not (cfg.min_len <= words <= cfg.max_len):
                continue
            sent = Sentence(id=f"{doc_id}:{offset}", text=piece, tokens=tokens)
            if all(f(sent) for f in cfg.extra_filters):
                st.sentences_kept += 1
                out.append(sent)
    return out


def partition(sentences: list[Sentence], n: int, seed: int) -> list[SubCorpus]:
    """Seeded shuffle, then split into n parts whose sizes differ by at most 1."""
    if n < 1:
        raise ValueError(f"partition count must be >= 1, got {n}")
    if n > len(sentences):
        raise ValueError(
            f"cannot split {len(sentences)} sentences into {n} partitions"
        )
    order = list(range(len(sentences)))
    random.Random(seed).shuffle(order)
    shuffled = [sentences[i] for i in order]
    base, extra = divmod(len(shuffled), n)
    parts: list[SubCorpus] = []
    pos = 0
    for i in range(n):
        size = base + (1 if i < extra else 0)
        parts.append(SubCorpus(index=i + 1, sentences=shuffled[pos:pos + size]))
        pos += size
    return parts


# --- JSON-lines formats -----------------------------------------------------
#
# Input corpus:  {"doc_id": str, "text": str}
# Sub-corpora:   {"id": str, "text": str, "tokens": [[tok, start, end], ...]}


def read_raw_docs(path: str | Path) -> Iterator[tuple[str, str]]:
    """Read the input corpus JSONL; malformed lines raise with line numbers."""
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw.decode("utf-8"))
                yield str(obj["doc_id"]), obj["text"]
            except (UnicodeDecodeError, json.JSONDecodeError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed corpus line: {exc}") from exc


def write_sentences(sentences: Iterable[Sentence], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            rec = {"id": s.id, "text": s.text, "tokens": [list(t) for t in s.tokens]}
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def read_sentences(path: str | Path) -> list[Sentence]:
    out: list[Sentence] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
                tokens = [(t[0], int(t[1]), int(t[2])) for t in obj["tokens"]]
                out.append(Sentence(id=obj["id"], text=obj["text"], tokens=tokens))
            except (json.JSONDecodeError, KeyError, IndexError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed sentence line: {exc}") from exc
    return out

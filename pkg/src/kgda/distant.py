"""Distantly-supervised corpus construction.

For each sentence of a sub-corpus: match entity surfaces against the coarse
graph plus confident discovered entities, emit BIO-labeled NER examples, emit
relation-classification examples for matched entity pairs (positives from the
graph and from confident discovered triples, negatives by two sampling
schemes), and accumulate the overlap entity/triple sets.

All sampling is derived from (seed, sentence id), so results do not depend on
sentence processing order.
"""

from __future__ import annotations

import json
import logging
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Sentence, SubCorpus, is_word_token
from .kg import CandidateRef, KnowledgeGraph, NULL_RELATION, Triple, relation_of
from .matching import GazetteerMatcher, MatchSpan, SOURCE_KG

log = logging.getLogger(__name__)

TEMPLATE = "[CLS] {head} ({head_type}) [SEP] {tail} ({tail_type}) [SEP] {sentence}"

POLARITY_POSITIVE = "positive"
POLARITY_SCHEME1 = "negative_scheme1"
POLARITY_SCHEME2 = "negative_scheme2"

# Entity types appear inside BIO tags with spaces flattened to underscores;
# none of the type names contain underscores, so the mapping is reversible.
def type_to_tag(etype: str) -> str:
    return etype.replace(" ", "_")


def tag_to_type(tag: str) -> str:
    return tag.replace("_", " ")


STOPWORDS = frozenset("""
a an the and or but if then else of in on at to for from by with without as is
are was were be been being am do does did have has had this that these those it
its they them he she his her we us our you your i me my not no nor so than too
very can will just should now while during before after above below up down out
over under again further once here there when where why how all any both each
few more most other some such only own same s t don which who whom what because
until about against between into through
""".split())


@dataclass(slots=True)
class NerExample:
    """Token sequence with one BIO tag per token."""

    sid: str
    tokens: list[str]
    labels: list[str]

    def key(self) -> tuple:
        return (self.sid, tuple(self.tokens), tuple(self.labels))


@dataclass(slots=True)
class ReExample:
    """Templated relation-classification sample.

    head_ref/tail_ref keep the matched endpoints (entity id or CandidateRef)
    so overlap triples can be recovered; they are not part of the JSONL schema.
    """

    sid: str
    head: str
    head_type: str
    tail: str
    tail_type: str
    text: str
    label: str
    polarity: str
    head_ref: object = None
    tail_ref: object = None

    def key(self) -> tuple:
        return (self.sid, self.head, self.head_type, self.tail,
                self.tail_type, self.text, self.label, self.polarity)


class OutOfDomainWords:
    """Normalized words known not to be coarse-domain entities (W_O)."""

    def __init__(self, words: Iterable[str], kg: KnowledgeGraph | None = None):
        self.words = frozenset(words)
        if kg is not None:
            clash = sorted(w for w in self.words if w in kg.surface_index)
            if clash:
                raise ValueError(
                    f"out-of-domain words collide with KG surfaces: {clash[:5]}"
                )
        self._sorted = sorted(self.words)

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.words

    def sorted_words(self) -> list[str]:
        return self._sorted

    @classmethod
    def from_file(cls, path: str | Path, kg: KnowledgeGraph | None = None) -> "OutOfDomainWords":
        with open(path, encoding="utf-8") as fh:
            return cls((line.strip().casefold() for line in fh if line.strip()), kg)


def derive_out_of_domain_words(
    sentences: Iterable[Sentence],
    kg: KnowledgeGraph,
    size: int = 10_000,
    stopwords: frozenset[str] = STOPWORDS,
) -> OutOfDomainWords:
    """Default W_O: most frequent corpus words that match no KG surface."""
    counts: Counter[str] = Counter()
    for sent in sentences:
        for tok, _, _ in sent.tokens:
            word = tok.casefold()
            if not is_word_token(word) or word in stopwords:
                continue
            if word in kg.surface_index:
                continue
            counts[word] += 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return OutOfDomainWords((w for w, _ in ranked[:size]), kg)


def entity_matching(
    sent: Sentence,
    kg: KnowledgeGraph,
    e_conf: Iterable = (),
    *,
    matcher: GazetteerMatcher | None = None,
) -> list[MatchSpan]:
    """Token-aligned matches of KG and discovered surfaces, non-overlapping.

    Pass a prebuilt matcher when processing many sentences against the same
    gazetteer; building one per call is correct but slow.
    """
    m = matcher if matcher is not None else GazetteerMatcher(kg, e_conf)
    return m.match(sent)


def span_text(sent: Sentence, start: int, end: int) -> str:
    """The sentence text slice covering token span [start, end)."""
    return sent.text[sent.tokens[start][1]:sent.tokens[end - 1][2]]


def build_ner_sample(sent: Sentence, spans: Sequence[MatchSpan]) -> NerExample:
    """BIO tags from non-overlapping spans: B-<type> opens, I-<type> continues."""
    labels = ["O"] * len(sent.tokens)
    last_end = 0
    for span in sorted(spans, key=lambda s: s.start):
        if span.start < last_end:
            raise ValueError(f"overlapping spans in sentence {sent.id}")
        tag = type_to_tag(span.etype)
        labels[span.start] = f"B-{tag}"
        for i in range(span.start + 1, span.end):
            labels[i] = f"I-{tag}"
        last_end = span.end
    return NerExample(sid=sent.id, tokens=sent.token_strings(), labels=labels)


def is_valid_bio(labels: Sequence[str]) -> bool:
    """BIO grammar: I-<t> may only follow B-<t> or I-<t>."""
    prev = "O"
    for label in labels:
        if label != "O" and not (label.startswith("B-") or label.startswith("I-")):
            return False
        if label.startswith("I-"):
            if not (prev == f"B-{label[2:]}" or prev == f"I-{label[2:]}"):
                return False
        prev = label
    return True


def render_template(head: str, head_type: str, tail: str, tail_type: str,
                    sentence_text: str) -> str:
    if not head or not tail:
        raise ValueError("template requires non-empty entity surfaces")
    if not sentence_text:
        raise ValueError("template requires a non-empty sentence")
    return TEMPLATE.format(head=head, head_type=head_type, tail=tail,
                           tail_type=tail_type, sentence=sentence_text)


def span_ref(span: MatchSpan) -> object:
    """The endpoint reference a span stands for (kg id or CandidateRef)."""
    if span.source == SOURCE_KG:
        return span.entity_id
    return CandidateRef(surface=span.entity_id[len("new:"):], etype=span.etype)


def _conf_triple_index(t_conf: Iterable) -> dict[tuple, tuple[str, ...]]:
    index: dict[tuple, set[str]] = {}
    for cand in t_conf:
        index.setdefault((cand.head, cand.tail), set()).add(cand.rel)
    return {k: tuple(sorted(v)) for k, v in index.items()}


def _make_example(sent: Sentence, head: MatchSpan, tail: MatchSpan, label: str,
                  polarity: str) -> ReExample:
    h, t = span_text(sent, head.start, head.end), span_text(sent, tail.start, tail.end)
    return ReExample(
        sid=sent.id,
        head=h, head_type=head.etype,
        tail=t, tail_type=tail.etype,
        text=render_template(h, head.etype, t, tail.etype, sent.text),
        label=label, polarity=polarity,
        head_ref=span_ref(head), tail_ref=span_ref(tail),
    )


def entity_pair_matching(
    sent: Sentence,
    kg: KnowledgeGraph,
    t_conf: Iterable = (),
    spans: Sequence[MatchSpan] = (),
) -> tuple[list[ReExample], list[ReExample]]:
    """Positive RE examples for co-occurring matched pairs.

    Ordered pairs with relations in the graph land in triples_k (one example
    per relation); pairs covered only by confident discovered triples land in
    triples_c.
    """
    conf_index = _conf_triple_index(t_conf)
    triples_k: list[ReExample] = []
    triples_c: list[ReExample] = []
    for head in spans:
        for tail in spans:
            if head is tail:
                continue
            rels = relation_of(kg, head.entity_id, tail.entity_id)
            if rels:
                for rel in sorted(rels):
                    triples_k.append(_make_example(sent, head, tail, rel,
                                                   POLARITY_POSITIVE))
                continue
            pair = (span_ref(head), span_ref(tail))
            for rel in conf_index.get(pair, ()):
                triples_c.append(_make_example(sent, head, tail, rel,
                                               POLARITY_POSITIVE))
    return triples_k, triples_c


def negative_count(positives: int, ratio_n: float) -> int:
    """Negatives per sentence so that negatives/(pos+neg) = ratio_n, ceiled."""
    if positives == 0 or ratio_n <= 0:
        return 0
    return math.ceil(positives * ratio_n / (1.0 - ratio_n))


def get_negative_triples(
    sent: Sentence,
    w_o: OutOfDomainWords,
    positives: Sequence[ReExample],
    spans: Sequence[MatchSpan],
    ratio_n: float,
    ratio_o: float,
    seed: int | str,
    *,
    kg: KnowledgeGraph,
    t_conf: Iterable = (),
    entity_types: Sequence[str] | None = None,
) -> list[ReExample]:
    """NULL-labeled negatives for one sentence.

    Scheme 1 pairs two matched entities with no relation in the graph or the
    confident-triple pool; scheme 2 replaces one slot with an out-of-domain
    word under a uniformly sampled type. round(ratio_o * k) negatives use
    scheme 2 (half-up); a scheme-1 candidate shortfall shifts to scheme 2.
    """
    if not (0 <= ratio_n < 1):
        raise ValueError(f"ratio_n must be in [0, 1), got {ratio_n}")
    if not (0 <= ratio_o <= 1):
        raise ValueError(f"ratio_o must be in [0, 1], got {ratio_o}")
    k = negative_count(len(positives), ratio_n)
    if k == 0:
        return []
    rng = random.Random(f"{seed}|{sent.id}")

    conf_index = _conf_triple_index(t_conf)
    candidates: list[tuple[MatchSpan, MatchSpan]] = []
    for head in spans:
        for tail in spans:
            if head is tail:
                continue
            if relation_of(kg, head.entity_id, tail.entity_id):
                continue
            if (span_ref(head), span_ref(tail)) in conf_index:
                continue
            candidates.append((head, tail))

    n2 = int(math.floor(ratio_o * k + 0.5))
    n1 = min(k - n2, len(candidates))
    n2 = k - n1

    out: list[ReExample] = []
    for head, tail in (rng.sample(candidates, n1) if n1 else []):
        out.append(_make_example(sent, head, tail, NULL_RELATION, POLARITY_SCHEME1))

    types = sorted(entity_types if entity_types is not None else kg.entity_types)
    in_sentence = sorted({tok.casefold() for tok, _, _ in sent.tokens} & w_o.words)
    global_pool = w_o.sorted_words()
    for _ in range(n2):
        if not spans or (not in_sentence and not global_pool) or not types:
            log.debug("sentence %s cannot supply scheme-2 negatives", sent.id)
            break
        word = rng.choice(in_sentence) if in_sentence else rng.choice(global_pool)
        wtype = rng.choice(types)
        anchor = spans[rng.randrange(len(spans))]
        anchor_text = span_text(sent, anchor.start, anchor.end)
        if rng.random() < 0.5:
            head_s, head_t, tail_s, tail_t = word, wtype, anchor_text, anchor.etype
        else:
            head_s, head_t, tail_s, tail_t = anchor_text, anchor.etype, word, wtype
        out.append(ReExample(
            sid=sent.id,
            head=head_s, head_type=head_t,
            tail=tail_s, tail_type=tail_t,
            text=render_template(head_s, head_t, tail_s, tail_t, sent.text),
            label=NULL_RELATION, polarity=POLARITY_SCHEME2,
        ))
    if len(out) < k:
        log.debug("sentence %s yielded %d/%d negatives", sent.id, len(out), k)
    return out


@dataclass
class DistantStats:
    sentences: int = 0
    skipped: int = 0
    errors: list[str] = field(default_factory=list)


def build_distant_corpus(
    sub: SubCorpus,
    kg: KnowledgeGraph,
    e_conf: Iterable = (),
    t_conf: Iterable = (),
    w_o: OutOfDomainWords | None = None,
    ratio_n: float = 0.2,
    ratio_o: float = 0.3,
    seed: int | str = 0,
    *,
    stats: DistantStats | None = None,
) -> tuple[list[NerExample], list[ReExample], set[str], set[Triple]]:
    """Run the per-sentence distant-supervision pass over a sub-corpus.

    Returns (corp_N, corp_R, E_O, T_O): the NER corpus, the RE corpus, the
    overlap entity ids (matched from the coarse graph only), and the overlap
    triples. Sentences that fail are skipped and counted.
    """
    w_o = w_o if w_o is not None else OutOfDomainWords(())
    st = stats if stats is not None else DistantStats()
    matcher = GazetteerMatcher(kg, e_conf)
    t_conf = list(t_conf)
    corp_n: list[NerExample] = []
    corp_r: list[ReExample] = []
    e_o: set[str] = set()
    t_o: set[Triple] = set()
    for sent in sub.sentences:
        st.sentences += 1
        try:
            spans = matcher.match(sent)
            e_o.update(s.entity_id for s in spans if s.source == SOURCE_KG)
            corp_n.append(build_ner_sample(sent, spans))
            triples_k, triples_c = entity_pair_matching(sent, kg, t_conf, spans)
            positives = triples_k + triples_c
            negatives = get_negative_triples(
                sent, w_o, positives, spans, ratio_n, ratio_o, seed,
                kg=kg, t_conf=t_conf,
            )
            corp_r.extend(positives)
            corp_r.extend(negatives)
            t_o.update(Triple(ex.head_ref, ex.label, ex.tail_ref)
                       for ex in triples_k)
        except Exception as exc:  # noqa: BLE001 - per-sentence isolation
            st.skipped += 1
            st.errors.append(f"{sent.id}: {exc}")
            log.warning("skipping sentence %s: %s", sent.id, exc)
    return corp_n, corp_r, e_o, t_o


# --- JSON-lines corpus formats -----------------------------------------------


def write_ner_corpus(examples: Iterable[NerExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(
                {"sid": ex.sid, "tokens": ex.tokens, "labels": ex.labels},
                ensure_ascii=False, sort_keys=True) + "\n")


def read_ner_corpus(path: str | Path) -> list[NerExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                out.append(NerExample(obj["sid"], obj["tokens"], obj["labels"]))
    return out


def write_re_corpus(examples: Iterable[ReExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(
                {"sid": ex.sid, "head": ex.head, "head_type": ex.head_type,
                 "tail": ex.tail, "tail_type": ex.tail_type, "text": ex.text,
                 "label": ex.label, "polarity": ex.polarity},
                ensure_ascii=False, sort_keys=True) + "\n")


def read_re_corpus(path: str | Path) -> list[ReExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                out.append(ReExample(
                    obj["sid"], obj["head"], obj["head_type"], obj["tail"],
                    obj["tail_type"], obj["text"], obj["label"], obj["polarity"]))
    return out

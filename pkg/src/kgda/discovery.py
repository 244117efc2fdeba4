"""Fine-domain knowledge discovery: prediction, candidate pools, filtering.

Two passes over a sub-corpus. The entity pass runs the NER model and pools
predicted spans whose surfaces the coarse graph does not know. The triple pass
re-matches sentences against the graph plus the refreshed confident entities,
enumerates ordered pairs that the graph does not relate, and pools non-NULL
relation predictions.

Pool merging is max-probability / cumulative-frequency: commutative and
associative, so partial pools may be merged in any order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Sentence, SubCorpus
from .distant import ReExample, span_text, render_template, span_ref
from .kg import CandidateRef, EntityRef, KnowledgeGraph, NULL_RELATION, normalize_surface
from .matching import GazetteerMatcher, MatchSpan, SOURCE_KG
from .models import NerModelHandle, ReModelHandle, SpanPrediction, predict_ner, predict_re

CATEGORY_TR = "T_R"  # new relation over entities the coarse graph knows
CATEGORY_TE = "T_E"  # at least one endpoint is a discovered entity

# Probes sent to the RE model are not corpus examples; they carry this polarity.
POLARITY_PROBE = "probe"


@dataclass(slots=True)
class CandidateEntity:
    surface: str  # normalized
    etype: str
    max_probability: float
    cumulative_frequency: int
    first_seen: int
    last_seen: int

    def key(self) -> tuple[str, str]:
        return (self.surface, self.etype)


@dataclass(slots=True)
class CandidateTriple:
    head: EntityRef
    rel: str
    tail: EntityRef
    max_probability: float
    cumulative_frequency: int
    category: str
    first_seen: int
    last_seen: int

    def key(self) -> tuple:
        return (self.head, self.rel, self.tail)


@dataclass
class DiscoveryPools:
    entities: dict[tuple[str, str], CandidateEntity] = field(default_factory=dict)
    triples: dict[tuple, CandidateTriple] = field(default_factory=dict)


def get_new_entities(
    sent: Sentence,
    preds: Sequence[SpanPrediction],
    kg: KnowledgeGraph,
) -> list[tuple[str, str, float]]:
    """Predicted spans whose normalized surface the coarse graph lacks."""
    out: list[tuple[str, str, float]] = []
    for pred in preds:
        surface = normalize_surface(span_text(sent, pred.start, pred.end))
        if not surface or surface in kg.surface_index:
            continue
        out.append((surface, pred.etype, pred.probability))
    return out


def merge_entity(
    pool: dict[tuple[str, str], CandidateEntity],
    extracted: Iterable[tuple[str, str, float]],
    iteration: int,
) -> dict[tuple[str, str], CandidateEntity]:
    """Each occurrence bumps frequency by one; probability keeps the maximum."""
    for surface, etype, prob in extracted:
        key = (surface, etype)
        cand = pool.get(key)
        if cand is None:
            pool[key] = CandidateEntity(surface, etype, prob, 1, iteration, iteration)
        else:
            cand.cumulative_frequency += 1
            cand.max_probability = max(cand.max_probability, prob)
            cand.last_seen = iteration
    return pool


def get_confidence_entity(
    pool: dict[tuple[str, str], CandidateEntity],
    th_pe: float,
    th_fe: int,
) -> list[CandidateEntity]:
    """Strict double threshold: p_max > th_pe AND frequency > th_fe."""
    return sorted(
        (c for c in pool.values()
         if c.max_probability > th_pe and c.cumulative_frequency > th_fe),
        key=CandidateEntity.key,
    )


def enumerate_new_pairs(
    sent: Sentence,
    kg: KnowledgeGraph,
    e_conf: Iterable = (),
    *,
    matcher: GazetteerMatcher | None = None,
) -> list[tuple[MatchSpan, MatchSpan]]:
    """Ordered pairs of distinct matches the coarse graph does not relate."""
    m = matcher if matcher is not None else GazetteerMatcher(kg, e_conf)
    spans = m.match(sent)
    pairs: list[tuple[MatchSpan, MatchSpan]] = []
    for head in spans:
        for tail in spans:
            if head is tail:
                continue
            if (head.source == SOURCE_KG and tail.source == SOURCE_KG
                    and kg.pair_index.get((head.entity_id, tail.entity_id))):
                continue
            pairs.append((head, tail))
    return pairs


def pair_category(head_ref: EntityRef, tail_ref: EntityRef) -> str:
    if isinstance(head_ref, CandidateRef) or isinstance(tail_ref, CandidateRef):
        return CATEGORY_TE
    return CATEGORY_TR


def merge_triple(
    pool: dict[tuple, CandidateTriple],
    observed: Iterable[tuple[EntityRef, str, EntityRef, float]],
    iteration: int,
) -> dict[tuple, CandidateTriple]:
    for head, rel, tail, prob in observed:
        if rel == NULL_RELATION:
            raise ValueError("NULL-relation triple must never be pooled")
        key = (head, rel, tail)
        cand = pool.get(key)
        if cand is None:
            pool[key] = CandidateTriple(
                head, rel, tail, prob, 1, pair_category(head, tail),
                iteration, iteration,
            )
        else:
            cand.cumulative_frequency += 1
            cand.max_probability = max(cand.max_probability, prob)
            cand.last_seen = iteration
    return pool


def harvest_triples(
    sub: SubCorpus,
    kg: KnowledgeGraph,
    e_conf: Sequence[CandidateEntity],
    model_r: ReModelHandle,
    pool: dict[tuple, CandidateTriple],
    iteration: int,
) -> dict[tuple, CandidateTriple]:
    """Predict relations for new pairs across a sub-corpus; pool non-NULL hits."""
    matcher = GazetteerMatcher(kg, e_conf)
    for sent in sub.sentences:
        observed: list[tuple[EntityRef, str, EntityRef, float]] = []
        for head, tail in enumerate_new_pairs(sent, kg, e_conf, matcher=matcher):
            h_text = span_text(sent, head.start, head.end)
            t_text = span_text(sent, tail.start, tail.end)
            probe = ReExample(
                sid=sent.id, head=h_text, head_type=head.etype,
                tail=t_text, tail_type=tail.etype,
                text=render_template(h_text, head.etype, t_text, tail.etype,
                                     sent.text),
                label="", polarity=POLARITY_PROBE,
            )
            pred = predict_re(model_r, probe)
            if pred.relation == NULL_RELATION:
                continue
            observed.append((span_ref(head), pred.relation, span_ref(tail),
                             pred.probability))
        merge_triple(pool, observed, iteration)
    return pool


def get_specific_knowledge(
    sub: SubCorpus,
    kg: KnowledgeGraph,
    pools: DiscoveryPools,
    model_n: NerModelHandle,
    model_r: ReModelHandle,
    th_pe: float,
    th_fe: int,
    th_pt: float,
    th_ft: int,
    iteration: int,
) -> tuple[list[CandidateEntity], list[CandidateTriple]]:
    """Run the entity pass, refresh E_conf, then the triple pass; return both."""
    for sent in sub.sentences:
        preds = predict_ner(model_n, sent)
        merge_entity(pools.entities, get_new_entities(sent, preds, kg), iteration)
    e_conf = get_confidence_entity(pools.entities, th_pe, th_fe)

    harvest_triples(sub, kg, e_conf, model_r, pools.triples, iteration)
    t_conf = get_confidence_triple(pools.triples, th_pt, th_ft)
    return e_conf, t_conf


def get_confidence_triple(
    pool: dict[tuple, CandidateTriple],
    th_pt: float,
    th_ft: int,
) -> list[CandidateTriple]:
    """Strict double threshold, same semantics as the entity filter."""
    return sorted(
        (c for c in pool.values()
         if c.max_probability > th_pt and c.cumulative_frequency > th_ft),
        key=lambda c: ref_str(c.head) + "\t" + c.rel + "\t" + ref_str(c.tail),
    )


# --- snapshots ---------------------------------------------------------------


def ref_str(ref: EntityRef) -> str:
    if isinstance(ref, CandidateRef):
        return f"new:{ref.surface}|{ref.etype}"
    return ref


def ref_from_str(text: str) -> EntityRef:
    if text.startswith("new:") and "|" in text:
        surface, etype = text[len("new:"):].rsplit("|", 1)
        return CandidateRef(surface, etype)
    return text


def write_entity_pool(pool: dict[tuple[str, str], CandidateEntity],
                      path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(pool):
            c = pool[key]
            fh.write(json.dumps(
                {"surface": c.surface, "type": c.etype,
                 "p_max": c.max_probability, "freq": c.cumulative_frequency},
                ensure_ascii=False, sort_keys=True) + "\n")


def write_triple_pool(pool: dict[tuple, CandidateTriple], path: str | Path) -> None:
    rows = sorted(pool.values(),
                  key=lambda c: (ref_str(c.head), c.rel, ref_str(c.tail)))
    with open(path, "w", encoding="utf-8") as fh:
        for c in rows:
            fh.write(json.dumps(
                {"head": ref_str(c.head), "rel": c.rel, "tail": ref_str(c.tail),
                 "cat": c.category, "p_max": c.max_probability,
                 "freq": c.cumulative_frequency},
                ensure_ascii=False, sort_keys=True) + "\n")

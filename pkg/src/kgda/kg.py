"""Knowledge graph data model, TSV storage format, and lookup indexes.

A graph is immutable after load: construction happens in `load_kg` /
`build_kg`, and every reader (surface lookup, pair lookup) works off indexes
derived once from the entity and triple tables.

File formats (UTF-8, no header):
  entities.tsv  id <TAB> type <TAB> canonical <TAB> surface1|surface2|...
                optional 5th column: provenance in {source, discovered}
  triples.tsv   head_id <TAB> relation <TAB> tail_id
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .corpus import is_word_token, tokenize

log = logging.getLogger(__name__)

# Reserved sentinel meaning "no relation"; never stored in a graph.
NULL_RELATION = "NULL"

PROVENANCE_SOURCE = "source"
PROVENANCE_DISCOVERED = "discovered"


def normalize_surface(surface: str) -> str:
    """Canonical form used for all surface matching.

    Case-fold, tokenize (which collapses whitespace and splits punctuation),
    drop leading/trailing pure-punctuation tokens, re-join with single spaces.
    "CD8+T  cells," and "cd8+t cells" normalize identically.
    """
    tokens = [tok for tok, _, _ in tokenize(surface.casefold())]
    while tokens and not is_word_token(tokens[0]):
        tokens.pop(0)
    while tokens and not is_word_token(tokens[-1]):
        tokens.pop()
    return " ".join(tokens)


@dataclass(frozen=True, slots=True)
class EntityRecord:
    id: str
    etype: str
    canonical: str
    surfaces: tuple[str, ...]
    provenance: str = PROVENANCE_SOURCE


@dataclass(frozen=True, slots=True)
class Triple:
    head: str
    rel: str
    tail: str


@dataclass(frozen=True, slots=True)
class CandidateRef:
    """Reference to a discovered entity that has no id in the source graph."""

    surface: str  # normalized
    etype: str


# A triple endpoint: either an entity id in the graph or a discovered surface.
EntityRef = str | CandidateRef


@dataclass
class LoadStats:
    duplicate_triples: int = 0
    ambiguous_surfaces: int = 0


class KnowledgeGraph:
    """Typed entities with surface forms plus directed typed triples."""

    def __init__(self, entities: dict[str, EntityRecord], triples: set[Triple],
                 stats: LoadStats | None = None):
        self.entities = entities
        self.triples = triples
        self.entity_types = frozenset(e.etype for e in entities.values())
        self.relation_types = frozenset(t.rel for t in triples)
        self.stats = stats or LoadStats()
        self.surface_index: dict[str, tuple[str, ...]] = {}
        self.pair_index: dict[tuple[str, str], frozenset[str]] = {}
        self._build_indexes()

    def _build_indexes(self) -> None:
        surf: dict[str, set[str]] = {}
        for eid in sorted(self.entities):
            rec = self.entities[eid]
            for s in rec.surfaces:
                key = normalize_surface(s)
                if key:
                    surf.setdefault(key, set()).add(eid)
        self.surface_index = {k: tuple(sorted(v)) for k, v in surf.items()}
        self.stats.ambiguous_surfaces = sum(
            1 for ids in self.surface_index.values() if len(ids) > 1
        )
        pairs: dict[tuple[str, str], set[str]] = {}
        for t in self.triples:
            pairs.setdefault((t.head, t.tail), set()).add(t.rel)
        self.pair_index = {k: frozenset(v) for k, v in pairs.items()}

    def __len__(self) -> int:
        return len(self.entities)


def _parse_entities(path: str | Path) -> dict[str, EntityRecord]:
    entities: dict[str, EntityRecord] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) not in (4, 5):
                raise ValueError(
                    f"{path}:{lineno}: expected 4 or 5 tab-separated columns, got {len(cols)}"
                )
            eid, etype, canonical = cols[0], cols[1], cols[2]
            surfaces = tuple(cols[3].split("|"))
            provenance = cols[4] if len(cols) == 5 else PROVENANCE_SOURCE
            if not eid or not etype:
                raise ValueError(f"{path}:{lineno}: empty id or type")
            if eid in entities:
                raise ValueError(f"{path}:{lineno}: duplicate entity id {eid!r}")
            if not surfaces or any(s == "" for s in surfaces):
                raise ValueError(f"{path}:{lineno}: empty surface form for {eid!r}")
            if provenance not in (PROVENANCE_SOURCE, PROVENANCE_DISCOVERED):
                raise ValueError(f"{path}:{lineno}: bad provenance {provenance!r}")
            entities[eid] = EntityRecord(eid, etype, canonical, surfaces, provenance)
    return entities


def _parse_triples(path: str | Path, entities: dict[str, EntityRecord],
                   stats: LoadStats) -> set[Triple]:
    triples: set[Triple] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise ValueError(
                    f"{path}:{lineno}: expected 3 tab-separated columns, got {len(cols)}"
                )
            head, rel, tail = cols
            if rel == NULL_RELATION:
                raise ValueError(f"{path}:{lineno}: relation NULL is reserved")
            if not rel:
                raise ValueError(f"{path}:{lineno}: empty relation")
            if head == tail:
                raise ValueError(f"{path}:{lineno}: self-loop {head!r}")
            for eid in (head, tail):
                if eid not in entities:
                    raise ValueError(f"{path}:{lineno}: unknown entity id {eid!r}")
            t = Triple(head, rel, tail)
            if t in triples:
                stats.duplicate_triples += 1
            else:
                triples.add(t)
    if stats.duplicate_triples:
        log.warning("deduplicated %d duplicate triples in %s",
                    stats.duplicate_triples, path)
    return triples


def load_kg(entities_path: str | Path, triples_path: str | Path) -> KnowledgeGraph:
    """Load a graph from the TSV pair; malformed lines raise with line numbers."""
    stats = LoadStats()
    entities = _parse_entities(entities_path)
    triples = _parse_triples(triples_path, entities, stats)
    return KnowledgeGraph(entities, triples, stats)


def lookup_surface(kg: KnowledgeGraph, surface: str) -> set[tuple[str, str]]:
    """All (entity id, type) whose normalized surfaces contain the query."""
    key = normalize_surface(surface)
    if not key:
        return set()
    return {(eid, kg.entities[eid].etype) for eid in kg.surface_index.get(key, ())}


def relation_of(kg: KnowledgeGraph, head: str, tail: str) -> frozenset[str]:
    """Relations stored for the ordered pair; empty means the pair is new."""
    return kg.pair_index.get((head, tail), frozenset())


def mint_candidate_ids(refs: Iterable[CandidateRef]) -> dict[CandidateRef, str]:
    """Assign stable "new:<surface>" ids; same-surface type clashes get a suffix."""
    mapping: dict[CandidateRef, str] = {}
    taken: set[str] = set()
    for ref in sorted(set(refs), key=lambda r: (r.surface, r.etype)):
        eid = f"new:{ref.surface}"
        n = 2
        while eid in taken:
            eid = f"new:{ref.surface}#{n}"
            n += 1
        taken.add(eid)
        mapping[ref] = eid
    return mapping


def build_kg(overlap: set[Triple], discovered: Iterable, base: KnowledgeGraph) -> KnowledgeGraph:
    """Assemble the fine-domain graph from overlap triples and confident candidates.

    `discovered` items carry .head, .rel, .tail where the endpoints are
    EntityRefs (see CandidateRef). New entities are minted fresh ids with
    provenance "discovered"; the type and relation vocabulary is the base's.
    """
    discovered = list(discovered)
    for cand in discovered:
        if cand.rel == NULL_RELATION:
            raise ValueError(f"discovered triple with NULL relation: {cand!r}")
        for ref in (cand.head, cand.tail):
            if isinstance(ref, CandidateRef) and ref.etype not in base.entity_types:
                raise ValueError(f"unknown entity type {ref.etype!r} in {cand!r}")

    refs = [r for cand in discovered for r in (cand.head, cand.tail)
            if isinstance(r, CandidateRef)]
    minted = mint_candidate_ids(refs)

    def resolve(ref: EntityRef) -> str:
        if isinstance(ref, CandidateRef):
            return minted[ref]
        if ref not in base.entities:
            raise ValueError(f"triple references unknown base entity {ref!r}")
        return ref

    triples: set[Triple] = set(overlap)
    for cand in discovered:
        head, tail = resolve(cand.head), resolve(cand.tail)
        if head == tail:
            raise ValueError(f"discovered triple resolves to a self-loop: {cand!r}")
        triples.add(Triple(head, cand.rel, tail))

    entities: dict[str, EntityRecord] = {}
    for t in triples:
        for eid in (t.head, t.tail):
            if eid in entities:
                continue
            if eid in base.entities:
                entities[eid] = base.entities[eid]
    for ref, eid in minted.items():
        entities[eid] = EntityRecord(
            id=eid, etype=ref.etype, canonical=ref.surface,
            surfaces=(ref.surface,), provenance=PROVENANCE_DISCOVERED,
        )

    fine = KnowledgeGraph(entities, triples)
    # The fine domain keeps the coarse domain's vocabulary even for types and
    # relations that no surviving triple uses.
    fine.entity_types = base.entity_types
    fine.relation_types = base.relation_types
    return fine


def export_kg(kg: KnowledgeGraph, out_dir: str | Path) -> None:
    """Write entities.tsv / triples.tsv; loading them back round-trips the graph.

    The provenance column is emitted only when some entity was discovered.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with_provenance = any(
        e.provenance != PROVENANCE_SOURCE for e in kg.entities.values()
    )
    with open(out / "entities.tsv", "w", encoding="utf-8") as fh:
        for eid in sorted(kg.entities):
            rec = kg.entities[eid]
            cols = [rec.id, rec.etype, rec.canonical, "|".join(rec.surfaces)]
            if with_provenance:
                cols.append(rec.provenance)
            fh.write("\t".join(cols) + "\n")
    with open(out / "triples.tsv", "w", encoding="utf-8") as fh:
        for t in sorted(kg.triples, key=lambda t: (t.head, t.rel, t.tail)):
            fh.write(f"{t.head}\t{t.rel}\t{t.tail}\n")

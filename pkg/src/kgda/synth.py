"""Synthetic coarse-graph + fine-corpus worlds with planted knowledge.

The generator builds a small coarse knowledge graph and a fine-domain corpus
in which known triples, unrelated-but-co-occurring known pairs, and entirely
new entities appear inside templated sentences. Two properties make the
planted knowledge discoverable:

* unambiguous lexical signal: every entity slot sits next to tokens used with
  no other entity type, and surfaces carry type-specific suffixes;
* placement: partitioning is a deterministic seeded shuffle, so the generator
  precomputes the slot-to-partition map for the intended run seed and keeps
  planted sentences out of the first training partition and the held-out
  split. New knowledge therefore enters only corpora seen after the first
  models are trained, with a fixed per-partition frequency.

Used by the end-to-end tests and the demo scripts.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import partition
from .kg import CandidateRef, EntityRef, KnowledgeGraph, Triple, load_kg

TYPE_DRUG = "chemical or drug"
TYPE_DISEASE = "disease or syndrome"
TYPE_SYMPTOM = "sign, symptom or finding"
TYPE_ORGAN = "anatomy"

REL_TREATS = "may_treat"
REL_CAUSES = "may_cause"
REL_FOUND = "found_in"
REL_ISA = "is_a"

CORPUS_SIZE = 600
PARTITIONS = 6

# Sentence templates. Entity slots sit next to tokens that occur nowhere else
# with another entity type, so the context window identifies the type.
CONTEXT_TEMPLATES = {
    TYPE_DRUG: "Researchers administered {e} to the cohort yesterday .",
    TYPE_DISEASE: "Patients diagnosed with {e} were enrolled early .",
    TYPE_SYMPTOM: "Clinicians observed {e} among several participants .",
    TYPE_ORGAN: "The {e} tissue was examined thoroughly today .",
}
RELATION_TEMPLATES = {
    REL_TREATS: "{head} reliably treats {tail} in randomized trials .",
    REL_CAUSES: "{head} frequently causes {tail} in late stages .",
    REL_FOUND: "{head} is typically found in the {tail} region .",
    REL_ISA: "{head} is formally classified as {tail} variant .",
}
NOISE_SENTENCES = [
    "The committee reviewed the protocol documents carefully .",
    "Funding decisions were announced during the annual meeting .",
    "Several manuscripts remain under review this quarter .",
    "The registry update was completed without any incident .",
    "Consent forms were collected before the interviews started .",
]

# Curated out-of-domain words; all occur in the templates above.
OUT_OF_DOMAIN = sorted({
    "researchers", "cohort", "yesterday", "patients", "enrolled", "early",
    "clinicians", "observed", "participants", "tissue", "examined",
    "thoroughly", "today", "randomized", "trials", "stages", "region",
    "variant", "committee", "protocol", "documents", "funding", "meeting",
    "manuscripts", "registry", "consent", "interviews", "quarter",
})

_SUFFIX = {
    TYPE_DRUG: "tinib",
    TYPE_DISEASE: "anoma",
    TYPE_SYMPTOM: "algia",
    TYPE_ORGAN: "gland",
}
_SYLLABLES = ["ba", "ce", "di", "fo", "gu", "ha", "ki", "lo", "mu", "ne",
              "pa", "qui", "ro", "su", "ta", "ve", "wo", "xi", "yo", "zu"]


@dataclass
class SyntheticWorld:
    root: Path
    entities_path: Path
    triples_path: Path
    corpus_path: Path
    w_o_path: Path
    kg: KnowledgeGraph
    planted_entities: list[tuple[str, str]]  # (normalized surface, type)
    planted_triples: list[tuple[EntityRef, str, EntityRef]]
    sentences: list[str] = field(repr=False, default_factory=list)


def _make_surfaces(rng: random.Random, count: int, etype: str,
                   taken: set[str]) -> list[str]:
    out = []
    while len(out) < count:
        stem = "".join(rng.choice(_SYLLABLES) for _ in range(3))
        surface = stem + _SUFFIX[etype]
        if surface in taken:
            continue
        taken.add(surface)
        out.append(surface)
    return out


def slot_assignment(count: int, partitions: int, run_seed: int) -> list[int]:
    """Partition index (1-based) each corpus position lands in for run_seed.

    Mirrors corpus.partition exactly by running it over the position indices.
    """
    class _Slot:
        __slots__ = ("pos",)

        def __init__(self, pos: int) -> None:
            self.pos = pos

    parts = partition([_Slot(i) for i in range(count)], partitions, run_seed)
    assignment = [0] * count
    for part in parts:
        for slot in part.sentences:
            assignment[slot.pos] = part.index
    return assignment


def generate_world(out_dir: str | Path, seed: int = 7, run_seed: int = 11,
                   heldout: int | None = None) -> SyntheticWorld:
    """Write TSV/JSONL inputs for a planted-knowledge world tuned to run_seed.

    The coarse graph has 50 entities and 40 triples; the 600-sentence corpus
    plants 10 new entities and 15 new triples (7 over known entity pairs, 8
    touching a new entity). Planted sentences appear only in partitions seen
    after the first training pass: 3 context mentions per entity and 2
    mentions per planted triple in each of the four later training
    partitions, comfortably above the default confidence thresholds.
    """
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    taken: set[str] = set()

    drugs = _make_surfaces(rng, 15, TYPE_DRUG, taken)
    diseases = _make_surfaces(rng, 15, TYPE_DISEASE, taken)
    symptoms = _make_surfaces(rng, 10, TYPE_SYMPTOM, taken)
    organs = _make_surfaces(rng, 10, TYPE_ORGAN, taken)

    entities: list[tuple[str, str, str]] = []  # (id, type, surface)
    ids: dict[str, str] = {}
    for etype, surfaces in ((TYPE_DRUG, drugs), (TYPE_DISEASE, diseases),
                            (TYPE_SYMPTOM, symptoms), (TYPE_ORGAN, organs)):
        for surface in surfaces:
            eid = f"C{len(entities):04d}"
            entities.append((eid, etype, surface))
            ids[surface] = eid

    # 40 coarse triples: treatment, causation, localization, taxonomy.
    kc_triples: list[tuple[str, str, str]] = []  # surfaces, not ids
    for i in range(15):
        kc_triples.append((drugs[i], REL_TREATS, diseases[i]))
    for i in range(10):
        kc_triples.append((diseases[i], REL_CAUSES, symptoms[i]))
    for i in range(8):
        kc_triples.append((diseases[i + 1], REL_FOUND, organs[i]))
    for i in range(7):
        kc_triples.append((diseases[i + 8], REL_ISA, diseases[i]))

    # Planted entities: 4 drugs, 3 diseases, 3 symptoms.
    new_drugs = _make_surfaces(rng, 4, TYPE_DRUG, taken)
    new_diseases = _make_surfaces(rng, 3, TYPE_DISEASE, taken)
    new_symptoms = _make_surfaces(rng, 3, TYPE_SYMPTOM, taken)
    planted_entities = ([(s, TYPE_DRUG) for s in new_drugs]
                        + [(s, TYPE_DISEASE) for s in new_diseases]
                        + [(s, TYPE_SYMPTOM) for s in new_symptoms])

    # Planted triples over known entities only (T_R): pairs absent from the
    # coarse graph, including their reverses.
    kc_pairs = {(h, t) for h, _, t in kc_triples}
    t_r: list[tuple[str, str, str]] = []
    for i in range(3):
        t_r.append((drugs[i], REL_TREATS, diseases[(i + 5) % 15]))
    for i in range(2):
        t_r.append((diseases[i], REL_CAUSES, symptoms[(i + 4) % 10]))
    for i in range(2):
        t_r.append((diseases[i + 3], REL_FOUND, organs[(i + 5) % 10]))
    for h, _, t in t_r:
        assert (h, t) not in kc_pairs and (t, h) not in kc_pairs

    # Planted triples touching a new entity (T_E).
    t_e: list[tuple[str, str, str]] = []
    for i, drug in enumerate(new_drugs):
        t_e.append((drug, REL_TREATS, diseases[(i + 9) % 15]))
    for i, symptom in enumerate(new_symptoms):
        t_e.append((diseases[(i + 11) % 15], REL_CAUSES, symptom))
    t_e.append((new_diseases[0], REL_FOUND, organs[9]))

    surface_type = {s: t for t, group in
                    ((TYPE_DRUG, drugs + new_drugs),
                     (TYPE_DISEASE, diseases + new_diseases),
                     (TYPE_SYMPTOM, symptoms + new_symptoms),
                     (TYPE_ORGAN, organs)) for s in group}

    def relation_sentence(head: str, rel: str, tail: str) -> str:
        return RELATION_TEMPLATES[rel].format(head=head, tail=tail)

    def context_sentence(surface: str) -> str:
        return CONTEXT_TEMPLATES[surface_type[surface]].format(e=surface)

    # Clean material: coarse relations, known-entity contexts, noise.
    def clean_block(n: int, offset: int) -> list[str]:
        block = []
        k = offset
        while len(block) < n:
            kind = k % 5
            if kind < 2:
                h, r, t = kc_triples[k % len(kc_triples)]
                block.append(relation_sentence(h, r, t))
            elif kind < 4:
                block.append(context_sentence(entities[k % len(entities)][2]))
            else:
                block.append(NOISE_SENTENCES[k % len(NOISE_SENTENCES)])
            k += 1
        return block

    heldout_idx = heldout if heldout is not None else PARTITIONS
    train_indices = [i for i in range(1, PARTITIONS + 1) if i != heldout_idx]
    first_train = train_indices[0]
    later_train = train_indices[1:]

    # First training partition: every coarse triple once, every known entity
    # context once, noise padding. No planted material.
    first_block = ([relation_sentence(h, r, t) for h, r, t in kc_triples]
                   + [context_sentence(s) for _, _, s in entities]
                   + [NOISE_SENTENCES[i % len(NOISE_SENTENCES)] for i in range(10)])

    # Later training partitions: 3 contexts per planted entity, 2 mentions per
    # planted triple, topped up with clean material.
    later_blocks: dict[int, list[str]] = {}
    for bi, pidx in enumerate(later_train):
        block = []
        for surface, _ in planted_entities:
            block.extend([context_sentence(surface)] * 3)
        for h, r, t in t_r + t_e:
            block.extend([relation_sentence(h, r, t)] * 2)
        block.extend(clean_block(100 - len(block), offset=37 * (bi + 1)))
        later_blocks[pidx] = block

    heldout_block = clean_block(100, offset=13)

    assignment = slot_assignment(CORPUS_SIZE, PARTITIONS, run_seed)
    queues = {first_train: list(first_block), heldout_idx: list(heldout_block)}
    queues.update({k: list(v) for k, v in later_blocks.items()})
    sentences: list[str] = []
    for pos in range(CORPUS_SIZE):
        sentences.append(queues[assignment[pos]].pop(0))
    assert all(not q for q in queues.values())

    entities_path = root / "entities.tsv"
    with open(entities_path, "w", encoding="utf-8") as fh:
        for eid, etype, surface in entities:
            fh.write(f"{eid}\t{etype}\t{surface}\t{surface}\n")
    triples_path = root / "triples.tsv"
    with open(triples_path, "w", encoding="utf-8") as fh:
        for head, rel, tail in kc_triples:
            fh.write(f"{ids[head]}\t{rel}\t{ids[tail]}\n")
    corpus_path = root / "corpus.jsonl"
    with open(corpus_path, "w", encoding="utf-8") as fh:
        for i, text in enumerate(sentences):
            fh.write(json.dumps({"doc_id": f"d{i:04d}", "text": text}) + "\n")
    w_o_path = root / "w_o.txt"
    with open(w_o_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(OUT_OF_DOMAIN) + "\n")

    def ref(surface: str) -> EntityRef:
        if surface in ids:
            return ids[surface]
        return CandidateRef(surface, surface_type[surface])

    planted_triples = [(ref(h), rel, ref(t)) for h, rel, t in t_r + t_e]
    return SyntheticWorld(
        root=root,
        entities_path=entities_path,
        triples_path=triples_path,
        corpus_path=corpus_path,
        w_o_path=w_o_path,
        kg=load_kg(entities_path, triples_path),
        planted_entities=[(s, t) for s, t in planted_entities],
        planted_triples=planted_triples,
        sentences=sentences,
    )


def overlap_oracle(world: SyntheticWorld, sentences: list) -> set[Triple]:
    """Brute-force overlap triples for a list of Sentence objects.

    Independent of the matcher: enumerates every token span, keeps gazetteer
    hits, applies the documented leftmost-longest resolution, then collects
    the coarse relations of every ordered matched pair.
    """
    kg = world.kg
    gaz: dict[str, tuple[str, str]] = {}
    for eid in sorted(kg.entities):
        rec = kg.entities[eid]
        for s in rec.surfaces:
            gaz.setdefault(s.casefold(), (eid, rec.etype))
    out: set[Triple] = set()
    for sent in sentences:
        tokens = [t[0].casefold() for t in sent.tokens]
        hits = []
        for i in range(len(tokens)):
            for j in range(i + 1, len(tokens) + 1):
                key = " ".join(tokens[i:j])
                if key in gaz:
                    hits.append((i, j, gaz[key][0]))
        chosen: list[str] = []
        cursor = 0
        for i, j, eid in sorted(hits, key=lambda h: (h[0], h[0] - h[1])):
            if i >= cursor:
                chosen.append(eid)
                cursor = j
        for a in chosen:
            for b in chosen:
                if a == b:
                    continue
                for rel in kg.pair_index.get((a, b), ()):
                    out.add(Triple(a, rel, b))
    return out

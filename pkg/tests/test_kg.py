from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from kgda.kg import (
    CandidateRef,
    EntityRecord,
    KnowledgeGraph,
    Triple,
    build_kg,
    export_kg,
    load_kg,
    lookup_surface,
    mint_candidate_ids,
    normalize_surface,
    relation_of,
)

from oracles import oracle_normalize


class FakeCandidate:
    def __init__(self, head, rel, tail):
        self.head, self.rel, self.tail = head, rel, tail

    def __repr__(self):
        return f"FakeCandidate({self.head}, {self.rel}, {self.tail})"


def write_kg(tmp_path, entities: str, triples: str):
    ent = tmp_path / "e.tsv"
    tri = tmp_path / "t.tsv"
    ent.write_text(entities, encoding="utf-8")
    tri.write_text(triples, encoding="utf-8")
    return ent, tri


def test_load_empty_files(tmp_path):
    kg = load_kg(*write_kg(tmp_path, "", ""))
    assert len(kg.entities) == 0
    assert len(kg.triples) == 0


def test_load_small_fixture_pair_index(tmp_path):
    entities = ("a\tchemical or drug\tA\ta\n"
                "b\tdisease or syndrome\tB\tb\n"
                "c\tanatomy\tC\tc\n")
    triples = "a\tmay_treat\tb\nb\tfound_in\tc\n"
    # Independent count: two triple lines over distinct pairs.
    assert len([ln for ln in triples.splitlines() if ln]) == 2
    kg = load_kg(*write_kg(tmp_path, entities, triples))
    assert len(kg.entities) == 3
    assert set(kg.pair_index) == {("a", "b"), ("b", "c")}


def test_load_self_loop_rejected(tmp_path):
    entities = "a\tchemical or drug\tA\ta\n"
    with pytest.raises(ValueError, match="self-loop"):
        load_kg(*write_kg(tmp_path, entities, "a\tmay_treat\ta\n"))


def test_load_unknown_id_rejected(tmp_path):
    entities = "a\tchemical or drug\tA\ta\n"
    with pytest.raises(ValueError, match="unknown entity id"):
        load_kg(*write_kg(tmp_path, entities, "a\tmay_treat\tzz\n"))


def test_load_malformed_line_reports_lineno(tmp_path):
    entities = "a\tchemical or drug\tA\ta\nbroken line\n"
    with pytest.raises(ValueError, match=":2:"):
        load_kg(*write_kg(tmp_path, entities, ""))


def test_load_null_relation_rejected(tmp_path):
    entities = "a\tchemical or drug\tA\ta\nb\tanatomy\tB\tb\n"
    with pytest.raises(ValueError, match="NULL"):
        load_kg(*write_kg(tmp_path, entities, "a\tNULL\tb\n"))


def test_load_duplicate_triples_deduplicated_with_count(tmp_path):
    entities = "a\tchemical or drug\tA\ta\nb\tanatomy\tB\tb\n"
    triples = "a\tfound_in\tb\na\tfound_in\tb\n"
    kg = load_kg(*write_kg(tmp_path, entities, triples))
    assert len(kg.triples) == 1
    assert kg.stats.duplicate_triples == 1


def test_lookup_surface_empty_string(fixture_kg):
    assert lookup_surface(fixture_kg, "") == set()


def test_lookup_surface_case_folds(fixture_kg):
    assert lookup_surface(fixture_kg, "Aspirin") == {("e1", "chemical or drug")}


def test_lookup_surface_ambiguous_returns_both(fixture_kg):
    got = lookup_surface(fixture_kg, "cold remedy")
    assert got == {("e6", "chemical or drug"), ("e7", "chemical or drug")}
    assert fixture_kg.stats.ambiguous_surfaces == 1


def test_relation_of(fixture_kg):
    assert relation_of(fixture_kg, "e4", "e3") == frozenset()
    assert relation_of(fixture_kg, "e4", "e2") == {"may_treat"}
    assert relation_of(fixture_kg, "e1", "e2") == {"may_treat", "may_cause"}


def test_normalize_surface_rules():
    assert normalize_surface("CD8+T  cells,") == "cd8 + t cells"
    assert normalize_surface("  Aspirin ") == "aspirin"
    assert normalize_surface("(aspirin)") == "aspirin"
    assert normalize_surface("++") == ""


def test_build_kg_empty(fixture_kg):
    fine = build_kg(set(), [], fixture_kg)
    assert len(fine.triples) == 0
    assert fine.entity_types == fixture_kg.entity_types


def test_build_kg_disjoint_union(fixture_kg):
    overlap = {Triple("e1", "may_treat", "e2"), Triple("e4", "may_treat", "e2")}
    discovered = [FakeCandidate(CandidateRef("newdrug", "chemical or drug"),
                                "may_treat", "e5")]
    fine = build_kg(overlap, discovered, fixture_kg)
    assert len(fine.triples) == 3
    assert Triple("new:newdrug", "may_treat", "e5") in fine.triples
    assert fine.entities["new:newdrug"].provenance == "discovered"


def test_build_kg_same_triple_in_both_inputs(fixture_kg):
    overlap = {Triple("e1", "may_treat", "e2")}
    discovered = [FakeCandidate("e1", "may_treat", "e2")]
    fine = build_kg(overlap, discovered, fixture_kg)
    assert len(fine.triples) == 1


def test_build_kg_rejects_null_relation(fixture_kg):
    with pytest.raises(ValueError, match="NULL"):
        build_kg(set(), [FakeCandidate("e1", "NULL", "e2")], fixture_kg)


def test_build_kg_rejects_unknown_type(fixture_kg):
    bad = FakeCandidate(CandidateRef("x", "nonexistent type"), "may_treat", "e1")
    with pytest.raises(ValueError, match="unknown entity type"):
        build_kg(set(), [bad], fixture_kg)


def test_mint_candidate_ids_disambiguates_type_clash():
    refs = [CandidateRef("x", "anatomy"), CandidateRef("x", "chemical or drug")]
    minted = mint_candidate_ids(refs)
    assert len(set(minted.values())) == 2
    assert minted[CandidateRef("x", "anatomy")] == "new:x"


def test_export_round_trip(fixture_kg, tmp_path):
    out = tmp_path / "export"
    export_kg(fixture_kg, out)
    back = load_kg(out / "entities.tsv", out / "triples.tsv")
    assert set(back.entities) == set(fixture_kg.entities)
    assert back.triples == fixture_kg.triples
    assert back.surface_index == fixture_kg.surface_index
    assert back.pair_index == fixture_kg.pair_index


def test_export_unwritable_target_fails(fixture_kg, tmp_path):
    blocker = tmp_path / "not_a_dir"
    blocker.write_text("occupied")
    with pytest.raises(OSError):
        export_kg(fixture_kg, blocker)


def test_export_marks_discovered_provenance(fixture_kg, tmp_path):
    fine = build_kg(
        {Triple("e1", "may_treat", "e2")},
        [FakeCandidate(CandidateRef("newdrug", "chemical or drug"), "may_treat", "e5")],
        fixture_kg,
    )
    out = tmp_path / "fine"
    export_kg(fine, out)
    rows = [ln.split("\t") for ln in
            (out / "entities.tsv").read_text().splitlines()]
    assert all(len(r) == 5 for r in rows)
    by_id = {r[0]: r for r in rows}
    assert by_id["new:newdrug"][4] == "discovered"
    assert by_id["e1"][4] == "source"
    back = load_kg(out / "entities.tsv", out / "triples.tsv")
    assert back.triples == fine.triples


def _random_kg(rng: random.Random, n_entities: int) -> KnowledgeGraph:
    types = ["chemical or drug", "disease or syndrome", "anatomy"]
    entities = {}
    for i in range(n_entities):
        surfaces = tuple({f"surf{rng.randrange(n_entities * 2)}"
                          for _ in range(rng.randint(1, 3))})
        entities[f"id{i}"] = EntityRecord(
            f"id{i}", rng.choice(types), f"Canon{i}", surfaces)
    triples = set()
    for _ in range(n_entities * 2):
        h, t = rng.sample(range(n_entities), 2) if n_entities >= 2 else (0, 0)
        if h == t:
            continue
        triples.add(Triple(f"id{h}", rng.choice(["may_treat", "found_in"]), f"id{t}"))
    return KnowledgeGraph(entities, triples)


def test_index_coherence_against_linear_scan():
    """surface and pair lookups agree with a brute-force scan on random graphs."""
    rng = random.Random(42)
    sizes = [rng.randint(1, 50) for _ in range(9)] + [1000]
    for n_entities in sizes:
        kg = _random_kg(rng, n_entities)
        for probe in list(kg.surface_index)[:20]:
            expected = {
                (eid, rec.etype)
                for eid, rec in kg.entities.items()
                if any(oracle_normalize(s) == probe for s in rec.surfaces)
            }
            assert lookup_surface(kg, probe) == expected
        ids = sorted(kg.entities)
        for h in ids[:10]:
            for t in ids[:10]:
                expected = {tr.rel for tr in kg.triples
                            if tr.head == h and tr.tail == t}
                assert set(relation_of(kg, h, t)) == expected


def test_no_triple_carries_null(fixture_kg):
    assert all(t.rel != "NULL" for t in fixture_kg.triples)


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_build_kg_output_equals_input_union(data):
    ids = [f"id{i}" for i in range(6)]
    entities = {i: EntityRecord(i, "anatomy", i, (i,)) for i in ids}
    base = KnowledgeGraph(entities, set())
    pairs = [(h, t) for h in ids for t in ids if h != t]
    overlap = {
        Triple(h, "found_in", t)
        for h, t in data.draw(st.lists(st.sampled_from(pairs), max_size=8))
    }
    discovered = [
        FakeCandidate(h, "may_treat", t)
        for h, t in data.draw(st.lists(st.sampled_from(pairs), max_size=8))
    ]
    fine = build_kg(overlap, discovered, base)
    expected = overlap | {Triple(c.head, c.rel, c.tail) for c in discovered}
    assert fine.triples == expected

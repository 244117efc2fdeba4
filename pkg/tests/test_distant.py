from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from kgda.corpus import SubCorpus
from kgda.distant import (
    OutOfDomainWords,
    build_distant_corpus,
    build_ner_sample,
    derive_out_of_domain_words,
    entity_matching,
    entity_pair_matching,
    get_negative_triples,
    is_valid_bio,
    negative_count,
    render_template,
)
from kgda.kg import Triple
from kgda.matching import MatchSpan

from conftest import make_sentence
from oracles import oracle_negative_count


class CandE:
    def __init__(self, surface, etype):
        self.surface, self.etype = surface, etype


class CandT:
    def __init__(self, head, rel, tail):
        self.head, self.rel, self.tail = head, rel, tail


def spans_of(sent, kg, e_conf=()):
    return entity_matching(sent, kg, e_conf)


def test_entity_matching_no_hits(fixture_kg):
    assert spans_of(make_sentence("totally unrelated words here"), fixture_kg) == []


def test_entity_matching_longest_wins(fixture_kg):
    spans = spans_of(make_sentence("aspirin may treat severe headache"), fixture_kg)
    assert [(s.start, s.end, s.entity_id) for s in spans] == \
        [(0, 1, "e1"), (3, 5, "e2")]


def test_entity_matching_kg_beats_e_conf(fixture_kg):
    spans = spans_of(make_sentence("aspirin works"), fixture_kg,
                     [CandE("aspirin", "chemical or drug")])
    assert [s.source for s in spans] == ["coarse_kg"]


def test_build_ner_sample_no_spans(fixture_kg):
    sent = make_sentence("nothing here at all")
    ex = build_ner_sample(sent, [])
    assert ex.labels == ["O"] * 4
    assert is_valid_bio(ex.labels)


def test_build_ner_sample_bio_tags():
    sent = make_sentence("one two three severe headache end")
    spans = [MatchSpan(3, 5, "e2", "disease or syndrome", "coarse_kg")]
    ex = build_ner_sample(sent, spans)
    assert ex.labels == ["O", "O", "O", "B-disease_or_syndrome",
                         "I-disease_or_syndrome", "O"]


def test_build_ner_sample_adjacent_spans_restart_with_b():
    sent = make_sentence("aspirin headache now")
    spans = [MatchSpan(0, 1, "e1", "chemical or drug", "coarse_kg"),
             MatchSpan(1, 2, "e2", "disease or syndrome", "coarse_kg")]
    ex = build_ner_sample(sent, spans)
    assert ex.labels == ["B-chemical_or_drug", "B-disease_or_syndrome", "O"]
    assert is_valid_bio(ex.labels)


def test_build_ner_sample_rejects_overlap():
    sent = make_sentence("a b c")
    spans = [MatchSpan(0, 2, "x", "anatomy", "coarse_kg"),
             MatchSpan(1, 3, "y", "anatomy", "coarse_kg")]
    with pytest.raises(ValueError, match="overlap"):
        build_ner_sample(sent, spans)


def test_is_valid_bio():
    assert is_valid_bio(["O", "B-x", "I-x", "O"])
    assert not is_valid_bio(["O", "I-x"])
    assert not is_valid_bio(["B-x", "I-y"])
    assert not is_valid_bio(["B-x", "bogus"])


def test_pair_matching_single_entity_yields_nothing(fixture_kg):
    sent = make_sentence("aspirin alone")
    spans = spans_of(sent, fixture_kg)
    assert entity_pair_matching(sent, fixture_kg, (), spans) == ([], [])


def test_pair_matching_kg_pair(fixture_kg):
    sent = make_sentence("aspirin may treat headache")
    spans = spans_of(sent, fixture_kg)
    triples_k, triples_c = entity_pair_matching(sent, fixture_kg, (), spans)
    assert [(ex.head, ex.label, ex.tail) for ex in triples_k] == \
        [("aspirin", "may_cause", "headache"), ("aspirin", "may_treat", "headache")]
    assert triples_c == []
    assert {ex.polarity for ex in triples_k} == {"positive"}


def test_pair_matching_t_conf_only(fixture_kg):
    sent = make_sentence("ibuprofen helps migraine")
    spans = spans_of(sent, fixture_kg)
    t_conf = [CandT("e4", "may_treat", "e5")]
    triples_k, triples_c = entity_pair_matching(sent, fixture_kg, t_conf, spans)
    assert triples_k == []
    assert [(ex.head, ex.label, ex.tail) for ex in triples_c] == \
        [("ibuprofen", "may_treat", "migraine")]


def test_render_template_exact_string():
    got = render_template("aspirin", "chemical or drug", "headache",
                          "sign, symptom or finding", "aspirin treats headache")
    assert got == ("[CLS] aspirin (chemical or drug) [SEP] headache "
                   "(sign, symptom or finding) [SEP] aspirin treats headache")


def test_render_template_same_surface_ok():
    got = render_template("x", "anatomy", "x", "anatomy", "x and x")
    assert got.count("x (anatomy)") == 2


def test_render_template_empty_sentence_rejected():
    with pytest.raises(ValueError):
        render_template("a", "t", "b", "t", "")


def test_negative_count_law_examples():
    assert negative_count(0, 0.2) == 0
    assert negative_count(4, 0.2) == 1  # ceil(4 * 0.25)
    assert negative_count(4, 0.5) == 4
    for p in range(0, 30):
        for ratio in (0.0, 0.1, 0.2, 0.3, 0.5, 0.8):
            assert negative_count(p, ratio) == oracle_negative_count(p, ratio)


def _fixture_world(fixture_kg):
    sent = make_sentence("aspirin may treat headache but fever and migraine persist")
    spans = spans_of(sent, fixture_kg)
    positives, _ = entity_pair_matching(sent, fixture_kg, (), spans)
    w_o = OutOfDomainWords(["persist", "but"])
    return sent, spans, positives, w_o


def test_negatives_zero_when_no_positives(fixture_kg):
    sent, spans, _, w_o = _fixture_world(fixture_kg)
    got = get_negative_triples(sent, w_o, [], spans, 0.2, 0.3, 1, kg=fixture_kg)
    assert got == []


def test_negative_scheme1_purity_brute_force(fixture_kg):
    sent, spans, positives, w_o = _fixture_world(fixture_kg)
    negs = get_negative_triples(sent, w_o, positives, spans, 0.5, 0.0, 3,
                                kg=fixture_kg)
    assert len(negs) == negative_count(len(positives), 0.5)
    for ex in negs:
        assert ex.label == "NULL"
        assert ex.polarity == "negative_scheme1"
    # Brute-force purity re-check: no emitted pair is related in the graph.
    for ex in negs:
        head_ids = {s.entity_id for s in spans
                    if sent.text[sent.tokens[s.start][1]:sent.tokens[s.end - 1][2]] == ex.head}
        tail_ids = {s.entity_id for s in spans
                    if sent.text[sent.tokens[s.start][1]:sent.tokens[s.end - 1][2]] == ex.tail}
        assert head_ids and tail_ids
        for h in head_ids:
            for t in tail_ids:
                assert not any(tr.head == h and tr.tail == t
                               for tr in fixture_kg.triples)


def test_negative_scheme2_uses_out_of_domain_word(fixture_kg):
    sent, spans, positives, w_o = _fixture_world(fixture_kg)
    negs = get_negative_triples(sent, w_o, positives, spans, 0.5, 1.0, 7,
                                kg=fixture_kg)
    assert negs and all(ex.polarity == "negative_scheme2" for ex in negs)
    for ex in negs:
        assert ex.label == "NULL"
        assert ex.head in w_o.words or ex.tail in w_o.words
        assert ex.head.casefold() in {t[0].casefold() for t in sent.tokens} \
            or ex.tail.casefold() in {t[0].casefold() for t in sent.tokens}


def test_negatives_deterministic_and_order_independent(fixture_kg):
    sent, spans, positives, w_o = _fixture_world(fixture_kg)
    a = get_negative_triples(sent, w_o, positives, spans, 0.5, 0.3, 99, kg=fixture_kg)
    b = get_negative_triples(sent, w_o, positives, spans, 0.5, 0.3, 99, kg=fixture_kg)
    assert [ex.key() for ex in a] == [ex.key() for ex in b]
    c = get_negative_triples(sent, w_o, positives, spans, 0.5, 0.3, 100, kg=fixture_kg)
    assert [ex.key() for ex in a] != [ex.key() for ex in c]


def test_shortfall_shifts_to_scheme2(fixture_kg):
    # Sentence with exactly two matched entities related both ways: no
    # scheme-1 candidate pairs exist.
    sent = make_sentence("ibuprofen cured headache")
    spans = spans_of(sent, fixture_kg)
    assert {s.entity_id for s in spans} == {"e4", "e2"}
    positives, _ = entity_pair_matching(sent, fixture_kg, (), spans)
    assert len(positives) == 2  # may_treat and reverse_may_treat
    w_o = OutOfDomainWords(["cured"])
    negs = get_negative_triples(sent, w_o, positives, spans, 0.5, 0.0, 5,
                                kg=fixture_kg)
    assert len(negs) == 2
    assert all(ex.polarity == "negative_scheme2" for ex in negs)


def test_build_distant_corpus_empty(fixture_kg):
    sub = SubCorpus(index=1, sentences=[])
    corp_n, corp_r, e_o, t_o = build_distant_corpus(sub, fixture_kg)
    assert corp_n == [] and corp_r == [] and e_o == set() and t_o == set()


def test_build_distant_corpus_fixture_trace(fixture_kg):
    sents = [
        make_sentence("aspirin may treat headache", "s1"),
        make_sentence("ibuprofen reduced fever quickly", "s2"),
        make_sentence("no entities in this one", "s3"),
    ]
    sub = SubCorpus(index=1, sentences=sents)
    w_o = OutOfDomainWords(["quickly"])
    corp_n, corp_r, e_o, t_o = build_distant_corpus(
        sub, fixture_kg, (), (), w_o, 0.2, 0.0, seed=5)
    assert len(corp_n) == 3
    assert e_o == {"e1", "e2", "e4", "e3"}
    assert t_o == {Triple("e1", "may_treat", "e2"), Triple("e1", "may_cause", "e2")}
    # s1 yields two positives (multi-relation pair) and one negative.
    labels = sorted(ex.label for ex in corp_r)
    assert labels == ["NULL", "may_cause", "may_treat"]


def test_e_conf_matches_never_enter_overlap_set(fixture_kg):
    sent = make_sentence("aspirin blocks immune evasion", "s1")
    sub = SubCorpus(index=1, sentences=[sent])
    e_conf = [CandE("immune evasion", "physiology")]
    _, _, e_o, _ = build_distant_corpus(sub, fixture_kg, e_conf, (), None)
    assert e_o == {"e1"}


def test_derive_out_of_domain_words(fixture_kg):
    sents = [make_sentence("aspirin regulates evasion pathways strongly"),
             make_sentence("evasion pathways dominate resistance clusters")]
    w_o = derive_out_of_domain_words(sents, fixture_kg, size=3)
    assert "aspirin" not in w_o.words
    assert "evasion" in w_o.words and "pathways" in w_o.words
    assert len(w_o) == 3


def test_out_of_domain_rejects_kg_surfaces(fixture_kg):
    with pytest.raises(ValueError, match="collide"):
        OutOfDomainWords(["aspirin"], fixture_kg)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_random_spans_yield_valid_bio(data):
    n = data.draw(st.integers(1, 12))
    sent = make_sentence(" ".join(f"w{i}" for i in range(n)))
    spans = []
    cursor = 0
    while cursor < n:
        start = data.draw(st.integers(cursor, n))
        if start >= n:
            break
        end = data.draw(st.integers(start + 1, n))
        spans.append(MatchSpan(start, end, "e", "anatomy", "coarse_kg"))
        cursor = end
    ex = build_ner_sample(sent, spans)
    assert is_valid_bio(ex.labels)
    assert len(ex.labels) == n

from __future__ import annotations

import sys
from pathlib import Path

import pytest

from kgda.corpus import Sentence
from kgda.distant import NerExample, ReExample, build_ner_sample, render_template
from kgda.matching import MatchSpan
from kgda.models import (
    PluginError,
    TrainSettings,
    load_handle,
    make_baseline_ner,
    make_baseline_re,
    plugin_connect,
    predict_ner,
    predict_re,
    save_handle,
    train_ner,
    train_re,
)

from conftest import make_sentence

FIXTURES = Path(__file__).parent / "fixtures"
ECHO = f"{sys.executable} {FIXTURES / 'echo_plugin.py'}"


def ner_corpus_memorizable(n: int = 20) -> tuple[list[NerExample], list[Sentence]]:
    """Distinct token contexts; span labels are a function of the features."""
    sents, examples = [], []
    for i in range(n):
        text = f"ctx{i} opens drugx{i} treats diseasey{i} closing marker{i}"
        sent = make_sentence(text, sid=f"m{i}")
        spans = [MatchSpan(2, 3, f"d{i}", "chemical or drug", "coarse_kg"),
                 MatchSpan(4, 5, f"s{i}", "disease or syndrome", "coarse_kg")]
        sents.append(sent)
        examples.append(build_ner_sample(sent, spans))
    return examples, sents


def re_corpus_memorizable(n: int = 12) -> list[ReExample]:
    out = []
    for i in range(n):
        label = "may_treat" if i % 2 == 0 else "NULL"
        text = render_template(f"h{i}", "chemical or drug", f"t{i}", "anatomy",
                               f"unique sentence {i} with marker{i}")
        out.append(ReExample(f"r{i}", f"h{i}", "chemical or drug", f"t{i}",
                             "anatomy", text, label,
                             "positive" if label != "NULL" else "negative_scheme1"))
    return out


# --- baseline NER ---------------------------------------------------------


def test_train_ner_empty_corpus_rejected():
    with pytest.raises(ValueError, match="empty"):
        train_ner(make_baseline_ner(), [])


def test_train_ner_invalid_bio_rejected():
    ex = NerExample("s", ["a", "b"], ["O", "I-x"])
    with pytest.raises(ValueError, match="BIO"):
        train_ner(make_baseline_ner(), [ex])


def test_ner_memorizes_single_sentence():
    sent = make_sentence("alpha beta drugx gamma", sid="one")
    ex = build_ner_sample(sent, [MatchSpan(2, 3, "d", "chemical or drug",
                                           "coarse_kg")])
    handle = train_ner(make_baseline_ner(), [ex])
    preds = predict_ner(handle, sent)
    assert [(p.start, p.end, p.etype) for p in preds] == \
        [(2, 3, "chemical or drug")]
    assert preds[0].probability >= 0.5


def test_ner_all_o_corpus_predicts_no_spans():
    sents = [make_sentence(f"w{i} x{i} y{i} z{i}", sid=f"s{i}") for i in range(5)]
    corpus = [build_ner_sample(s, []) for s in sents]
    handle = train_ner(make_baseline_ner(), corpus)
    for s in sents:
        assert predict_ner(handle, s) == []


def test_ner_same_seed_same_predictions():
    corpus, sents = ner_corpus_memorizable(10)
    h1 = train_ner(make_baseline_ner(TrainSettings(seed=3)), corpus)
    h2 = train_ner(make_baseline_ner(TrainSettings(seed=3)), corpus)
    for s in sents:
        assert predict_ner(h1, s) == predict_ner(h2, s)


def test_ner_probabilities_in_unit_interval():
    corpus, sents = ner_corpus_memorizable(10)
    handle = train_ner(make_baseline_ner(), corpus)
    probe = make_sentence("ctx3 opens novelmid treats diseasey3 closing marker3")
    for s in sents + [probe]:
        for p in predict_ner(handle, s):
            assert 0.0 <= p.probability <= 1.0


def test_ner_empty_sentence_rejected():
    corpus, _ = ner_corpus_memorizable(2)
    handle = train_ner(make_baseline_ner(), corpus)
    with pytest.raises(ValueError):
        predict_ner(handle, Sentence("empty", "", []))


def test_ner_untrained_predict_rejected():
    with pytest.raises(RuntimeError, match="untrained"):
        predict_ner(make_baseline_ner(), make_sentence("a b c"))


def test_ner_span_f1_perfect_on_memorizable_fixture():
    """Training-set span F1 is 1.0 on a noise-free memorizable corpus."""
    corpus, sents = ner_corpus_memorizable(20)
    handle = train_ner(make_baseline_ner(), corpus)
    tp = fp = fn = 0
    for ex, sent in zip(corpus, sents):
        gold = set()
        start = None
        for i, lab in enumerate(ex.labels + ["O"]):
            if lab.startswith("B-"):
                if start is not None:
                    gold.add((start, i))
                start = i
            elif not lab.startswith("I-") and start is not None:
                gold.add((start, i))
                start = None
        pred = {(p.start, p.end) for p in predict_ner(handle, sent)}
        tp += len(gold & pred)
        fp += len(pred - gold)
        fn += len(gold - pred)
    assert fp == 0 and fn == 0 and tp > 0


# --- baseline RE ----------------------------------------------------------


def test_train_re_single_class_rejected():
    corpus = [ex for ex in re_corpus_memorizable(6) if ex.label == "NULL"]
    with pytest.raises(ValueError, match="2 distinct"):
        train_re(make_baseline_re(), corpus)


def test_re_memorizes_training_labels():
    corpus = re_corpus_memorizable(12)
    handle = train_re(make_baseline_re(), corpus)
    for ex in corpus:
        pred = predict_re(handle, ex)
        assert pred.relation == ex.label
        assert pred.probability >= 0.5


def test_re_class_set_equals_labels_seen():
    corpus = re_corpus_memorizable(12)
    handle = train_re(make_baseline_re(), corpus)
    assert handle.model.labels == ["NULL", "may_treat"]


def test_re_distribution_sums_to_one():
    corpus = re_corpus_memorizable(12)
    handle = train_re(make_baseline_re(), corpus)
    pred = predict_re(handle, corpus[0], with_distribution=True)
    assert abs(sum(pred.distribution.values()) - 1.0) <= 1e-9
    assert all(0.0 <= v <= 1.0 for v in pred.distribution.values())


def test_re_unseen_text_still_classified():
    corpus = re_corpus_memorizable(12)
    handle = train_re(make_baseline_re(), corpus)
    probe = ReExample("p", "zz", "anatomy", "qq", "anatomy",
                      "[CLS] zz (anatomy) [SEP] qq (anatomy) [SEP] fresh words",
                      "", "probe")
    pred = predict_re(handle, probe)
    assert pred.relation in {"NULL", "may_treat"}


def test_re_same_seed_same_outputs():
    corpus = re_corpus_memorizable(12)
    h1 = train_re(make_baseline_re(TrainSettings(seed=5)), corpus)
    h2 = train_re(make_baseline_re(TrainSettings(seed=5)), corpus)
    for ex in corpus:
        assert predict_re(h1, ex) == predict_re(h2, ex)


def test_handle_save_load_round_trip(tmp_path):
    corpus, sents = ner_corpus_memorizable(5)
    handle = train_ner(make_baseline_ner(), corpus)
    save_handle(handle, tmp_path / "ner.model")
    back = load_handle(tmp_path / "ner.model")
    for s in sents:
        assert predict_ner(back, s) == predict_ner(handle, s)


# --- plugin protocol --------------------------------------------------------


def test_plugin_handshake_and_memorization():
    handle = plugin_connect(ECHO, "ner")
    try:
        corpus, sents = ner_corpus_memorizable(3)
        handle = train_ner(handle, corpus)
        preds = predict_ner(handle, sents[0])
        assert [(p.start, p.end) for p in preds] == [(2, 3), (4, 5)]
        assert all(p.probability == 1.0 for p in preds)
    finally:
        handle.proc.close()


def test_plugin_re_roundtrip_with_distribution():
    handle = plugin_connect(ECHO, "re")
    try:
        corpus = re_corpus_memorizable(4)
        handle = train_re(handle, corpus)
        pred = predict_re(handle, corpus[0], with_distribution=True)
        assert pred.relation == corpus[0].label
        assert abs(sum(pred.distribution.values()) - 1.0) <= 1e-9
    finally:
        handle.proc.close()


def test_plugin_bad_probability_is_protocol_violation():
    handle = plugin_connect(f"{ECHO} --bad-prob", "ner")
    corpus, sents = ner_corpus_memorizable(2)
    handle = train_ner(handle, corpus)
    with pytest.raises(PluginError, match="outside"):
        predict_ner(handle, sents[0])
    # Poisoned: any further use fails fast.
    with pytest.raises(PluginError, match="poisoned"):
        predict_ner(handle, sents[0])


def test_plugin_crash_mid_predict_surfaces_error():
    handle = plugin_connect(f"{ECHO} --crash-on-predict", "ner")
    corpus, sents = ner_corpus_memorizable(2)
    handle = train_ner(handle, corpus)
    with pytest.raises(PluginError):
        predict_ner(handle, sents[0])


def test_plugin_rejected_handshake():
    with pytest.raises(PluginError, match="handshake"):
        plugin_connect(f"{ECHO} --reject-hello", "ner")


def test_plugin_spawn_failure():
    with pytest.raises(PluginError, match="spawn"):
        plugin_connect("/nonexistent/binary-xyz", "ner")


def test_plugin_save_load_round_trip(tmp_path):
    handle = plugin_connect(ECHO, "re")
    try:
        corpus = re_corpus_memorizable(4)
        handle = train_re(handle, corpus)
        save_handle(handle, tmp_path / "re.model")
        restored = load_handle(tmp_path / "re.model")
        try:
            assert predict_re(restored, corpus[1]) == predict_re(handle, corpus[1])
        finally:
            restored.proc.close()
    finally:
        handle.proc.close()

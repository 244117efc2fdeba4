from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

import kgda.pipeline as pipeline_mod
from kgda.corpus import read_sentences
from kgda.kg import CandidateRef, Triple, load_kg, mint_candidate_ids
from kgda.models import predict_re
from kgda.distant import ReExample, render_template
from kgda.pipeline import (
    ABLATION_NO_CUMULATIVE,
    ABLATION_NO_ITER,
    CheckpointError,
    PipelineState,
    RunConfig,
    checkpoint,
    resume,
    run,
    run_ablation,
)

from conftest import FIXTURE_ENTITIES, FIXTURE_TRIPLES
from oracles import oracle_gazetteer, oracle_match

FIXTURES = Path(__file__).parent / "fixtures"

TINY_SENTENCES = (
    ["aspirin may treat headache today"] * 4
    + ["ibuprofen may treat headache quickly"] * 4
    + ["aspirin often may cause fever overnight"] * 4
    + ["patients received aspirin every morning"] * 3
    + ["patients received ibuprofen every morning"] * 3
    + ["severe headache disrupted the trial"] * 3
    + ["migraine was tracked all week"] * 3
    + ["fever subsided after one day"] * 3
    + ["the paperwork was finished late"] * 3
    + ["reviewers checked the submitted forms"] * 3
    + ["coldex may treat migraine readily"] * 3
)


def make_tiny_world(tmp_path: Path) -> dict:
    ent = tmp_path / "entities.tsv"
    tri = tmp_path / "triples.tsv"
    ent.write_text(FIXTURE_ENTITIES, encoding="utf-8")
    tri.write_text(FIXTURE_TRIPLES, encoding="utf-8")
    corpus = tmp_path / "corpus.jsonl"
    with open(corpus, "w", encoding="utf-8") as fh:
        for i, text in enumerate(TINY_SENTENCES):
            fh.write(json.dumps({"doc_id": f"t{i:03d}", "text": text}) + "\n")
    return {"entities": ent, "triples": tri, "corpus": corpus}


def tiny_config(**overrides) -> RunConfig:
    base = dict(partitions=3, seed=5, min_len=3, epochs=8)
    base.update(overrides)
    return RunConfig(**base)


def test_run_layout_and_kf_union(tmp_path):
    world = make_tiny_world(tmp_path)
    out = tmp_path / "run"
    result = run(tiny_config(), world["corpus"], world["entities"],
                 world["triples"], out)
    for sub in ("config.json", "partitions/part_1.jsonl", "partitions/part_3.jsonl",
                "corpora/iter_1/corp_n.jsonl", "pools/iter_2/triples.jsonl",
                "models/iter_2/ner.model", "kg_out/entities.tsv",
                "kg_out/triples.tsv", "reports/run_summary.json",
                "checkpoint/manifest.json"):
        assert (out / sub).exists(), sub
    # K_f triples = overlap union confident discoveries, exactly.
    minted = mint_candidate_ids(
        r for c in result.t_conf for r in (c.head, c.tail)
        if isinstance(r, CandidateRef))

    def resolve(ref):
        return minted[ref] if isinstance(ref, CandidateRef) else ref

    expected = set(result.t_o) | {
        Triple(resolve(c.head), c.rel, resolve(c.tail)) for c in result.t_conf}
    assert result.fine_kg.triples == expected


def test_degenerate_two_partitions(tmp_path):
    world = make_tiny_world(tmp_path)
    result = run(tiny_config(partitions=2), world["corpus"], world["entities"],
                 world["triples"], tmp_path / "run2")
    # Single training partition: no discovery iterations happen at all.
    assert result.e_conf == [] and result.t_conf == []
    assert result.fine_kg.triples == result.t_o


def test_determinism_byte_identical(tmp_path):
    world = make_tiny_world(tmp_path)
    run(tiny_config(), world["corpus"], world["entities"], world["triples"],
        tmp_path / "a")
    run(tiny_config(), world["corpus"], world["entities"], world["triples"],
        tmp_path / "b")
    for rel in ("kg_out/entities.tsv", "kg_out/triples.tsv",
                "reports/run_summary.json", "pools/iter_2/entities.jsonl",
                "pools/iter_2/triples.jsonl"):
        assert (tmp_path / "a" / rel).read_bytes() == \
            (tmp_path / "b" / rel).read_bytes(), rel


def test_corpus_monotonicity(tmp_path):
    world = make_tiny_world(tmp_path)
    out = tmp_path / "run"
    run(tiny_config(), world["corpus"], world["entities"], world["triples"], out)
    sizes_n = []
    sizes_r = []
    for step in (1, 2):
        corp = out / "corpora" / f"iter_{step}"
        sizes_n.append(len((corp / "corp_n.jsonl").read_text().splitlines()))
        sizes_r.append(len((corp / "corp_r.jsonl").read_text().splitlines()))
    assert sizes_n == sorted(sizes_n)
    assert sizes_r == sorted(sizes_r)


def test_no_iter_ablation_contract(tmp_path):
    world = make_tiny_world(tmp_path)
    out = tmp_path / "noiter"
    result = run_ablation(tiny_config(ablation=ABLATION_NO_ITER),
                          world["corpus"], world["entities"], world["triples"],
                          out)
    assert result.e_conf == [] and result.t_conf == []
    assert result.fine_kg.triples == result.t_o
    # Overlap equals the union of per-partition overlap computed independently.
    kg = load_kg(world["entities"], world["triples"])
    gaz = oracle_gazetteer(kg)
    expected = set()
    for idx in (1, 2):  # training partitions; 3 is held out
        sents = read_sentences(out / "partitions" / f"part_{idx}.jsonl")
        for sent in sents:
            spans = oracle_match([t[0] for t in sent.tokens], gaz)
            for a in spans:
                for b in spans:
                    if a is b:
                        continue
                    for rel in kg.pair_index.get((a[2], b[2]), ()):
                        expected.add(Triple(a[2], rel, b[2]))
    assert result.t_o == expected


def test_no_cumulative_differs_on_probe(tmp_path):
    world = make_tiny_world(tmp_path)
    run(tiny_config(), world["corpus"], world["entities"], world["triples"],
        tmp_path / "cum")
    run_ablation(tiny_config(ablation=ABLATION_NO_CUMULATIVE), world["corpus"],
                 world["entities"], world["triples"], tmp_path / "nocum")
    _, _, re_cum = resume(tmp_path / "cum")
    _, _, re_nocum = resume(tmp_path / "nocum")
    probes = [
        ReExample("p", h, ht, t, tt,
                  render_template(h, ht, t, tt, s), "", "probe")
        for h, ht, t, tt, s in [
            ("aspirin", "chemical or drug", "fever", "sign, symptom or finding",
             "aspirin often may cause fever overnight"),
            ("coldex", "chemical or drug", "migraine", "disease or syndrome",
             "coldex may treat migraine readily"),
            ("fever", "sign, symptom or finding", "aspirin", "chemical or drug",
             "fever subsided after aspirin today"),
        ]
    ]
    diffs = [predict_re(re_cum, p, with_distribution=True)
             != predict_re(re_nocum, p, with_distribution=True)
             for p in probes]
    assert any(diffs)


def test_checkpoint_state_round_trip(tmp_path):
    state = PipelineState(config=tiny_config(), step=2)
    state.e_o = {"e1"}
    state.t_o = {Triple("e1", "may_treat", "e2")}
    ckpt = checkpoint(state, tmp_path)
    assert (ckpt / "manifest.json").exists()
    with pytest.raises(CheckpointError, match="ner.model"):
        resume(tmp_path)  # models were not saved alongside


def test_resume_reproduces_uninterrupted_outputs(tmp_path, monkeypatch):
    world = make_tiny_world(tmp_path)
    config = tiny_config(partitions=4)
    run(config, world["corpus"], world["entities"], world["triples"],
        tmp_path / "full")

    real_train = pipeline_mod._train_both
    calls = {"n": 0}

    def failing_train(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 3:
            raise RuntimeError("injected failure")
        return real_train(*args, **kwargs)

    monkeypatch.setattr(pipeline_mod, "_train_both", failing_train)
    with pytest.raises(RuntimeError, match="injected"):
        run(tiny_config(partitions=4), world["corpus"], world["entities"],
            world["triples"], tmp_path / "broken")
    monkeypatch.setattr(pipeline_mod, "_train_both", real_train)

    manifest = json.loads(
        (tmp_path / "broken/checkpoint/manifest.json").read_text())
    assert manifest["step"] == 2  # the last completed step survived
    run(tiny_config(partitions=4), world["corpus"], world["entities"],
        world["triples"], tmp_path / "broken", resume_run=True)
    for rel in ("kg_out/entities.tsv", "kg_out/triples.tsv",
                "reports/run_summary.json"):
        assert (tmp_path / "broken" / rel).read_bytes() == \
            (tmp_path / "full" / rel).read_bytes(), rel


def test_resume_corrupt_checkpoint(tmp_path):
    world = make_tiny_world(tmp_path)
    out = tmp_path / "run"
    run(tiny_config(), world["corpus"], world["entities"], world["triples"], out)
    (out / "checkpoint" / "state.pkl").write_bytes(b"garbage")
    with pytest.raises(CheckpointError, match="corrupt"):
        resume(out)


def test_resume_missing_checkpoint(tmp_path):
    with pytest.raises(CheckpointError, match="manifest"):
        resume(tmp_path)


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(ratio_n=1.0).validate()
    with pytest.raises(ValueError):
        RunConfig(heldout=9, partitions=6).validate()
    with pytest.raises(ValueError):
        RunConfig(ablation="bogus").validate()
    with pytest.raises(ValueError):
        RunConfig(backend="magic").validate()
    with pytest.raises(ValueError, match="unknown config keys"):
        RunConfig.from_dict({"nonsense": 1})
    RunConfig(backend="plugin:echo hi").validate()


def test_run_ablation_requires_flag(tmp_path):
    with pytest.raises(ValueError, match="ablation"):
        run_ablation(tiny_config(), "x", "y", "z", tmp_path)


def test_backend_substitutability_plugin_mirror(tmp_path):
    """A plugin mirroring the baselines yields identical discoveries."""
    world = make_tiny_world(tmp_path)
    config = tiny_config()
    run(config, world["corpus"], world["entities"], world["triples"],
        tmp_path / "native")
    command = (f"{sys.executable} {FIXTURES / 'baseline_plugin.py'} "
               f"--seed {config.seed} --epochs {config.epochs} "
               f"--lr {config.lr} --l2 {config.l2} "
               f"--batch-size {config.batch_size}")
    plugin_config = tiny_config(backend=f"plugin:{command}")
    run(plugin_config, world["corpus"], world["entities"], world["triples"],
        tmp_path / "proxied")
    for rel in ("kg_out/entities.tsv", "kg_out/triples.tsv",
                "pools/iter_2/entities.jsonl", "pools/iter_2/triples.jsonl"):
        assert (tmp_path / "native" / rel).read_bytes() == \
            (tmp_path / "proxied" / rel).read_bytes(), rel

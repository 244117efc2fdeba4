"""Iterative-training orchestration.

The run partitions the corpus, builds a distant corpus on the first training
partition and trains both models, then for every further training partition:
discovers fine-domain knowledge with the current models, rebuilds the distant
corpus with the confident discoveries as extra knowledge bases, unions the
corpora (unless ablated), and retrains from scratch on the union. The final
graph is the overlap triples plus the confident discovered triples.

Every artifact written under the run directory is deterministic for a fixed
config and seed; checkpoints are written atomically after each completed
iteration and a resumed run reproduces the uninterrupted outputs exactly.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import pickle
from dataclasses import dataclass, field
from pathlib import Path

from . import discovery
from .corpus import PreprocessConfig, SubCorpus, partition, preprocess, read_raw_docs, read_sentences, write_sentences
from .distant import (
    DistantStats,
    NerExample,
    OutOfDomainWords,
    ReExample,
    build_distant_corpus,
    derive_out_of_domain_words,
    write_ner_corpus,
    write_re_corpus,
)
from .evaluation import eval_ner_heldout, eval_re_heldout
from .kg import KnowledgeGraph, Triple, build_kg, export_kg, load_kg
from .models import (
    NerModelHandle,
    ReModelHandle,
    TrainSettings,
    load_handle,
    make_baseline_ner,
    make_baseline_re,
    plugin_connect,
    save_handle,
    train_ner,
    train_re,
)

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1

ABLATION_NONE = "none"
ABLATION_NO_CUMULATIVE = "no-cumulative"
ABLATION_NO_ITER = "no-iter"


class CheckpointError(RuntimeError):
    """Missing, corrupt, or version-incompatible checkpoint."""


@dataclass
class RunConfig:
    """Run hyperparameters; defaults follow the reference experimental setup."""

    partitions: int = 6
    heldout: int | None = None  # defaults to the last partition
    ratio_n: float = 0.2
    ratio_o: float = 0.3
    th_pe: float = 0.95
    th_fe: int = 2
    th_pt: float = 0.97
    th_ft: int = 3
    seed: int = 0
    backend: str = "baseline"  # "baseline" or "plugin:<command line>"
    ablation: str = ABLATION_NONE
    min_len: int = 5
    max_len: int = 128
    epochs: int = 10
    lr: float = 0.1
    l2: float = 1e-4
    batch_size: int = 64
    w_o_size: int = 10_000
    w_o_path: str | None = None
    threads: int | None = None
    include_negative_eval: bool = False

    def validate(self) -> None:
        if self.partitions < 1:
            raise ValueError("partitions must be >= 1")
        if not (0 <= self.ratio_n < 1):
            raise ValueError("ratio_n must be in [0, 1)")
        if not (0 <= self.ratio_o <= 1):
            raise ValueError("ratio_o must be in [0, 1]")
        for name in ("th_pe", "th_pt"):
            v = getattr(self, name)
            if not (0 <= v <= 1):
                raise ValueError(f"{name} must be in [0, 1]")
        for name in ("th_fe", "th_ft"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.heldout is not None and not (1 <= self.heldout <= self.partitions):
            raise ValueError("heldout index out of range")
        if self.ablation not in (ABLATION_NONE, ABLATION_NO_CUMULATIVE,
                                 ABLATION_NO_ITER):
            raise ValueError(f"unknown ablation {self.ablation!r}")
        if self.backend != "baseline" and not self.backend.startswith("plugin:"):
            raise ValueError(f"unknown backend {self.backend!r}")

    def heldout_index(self) -> int:
        return self.heldout if self.heldout is not None else self.partitions

    def train_settings(self) -> TrainSettings:
        return TrainSettings(seed=self.seed, epochs=self.epochs, lr=self.lr,
                             l2=self.l2, batch_size=self.batch_size)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class PipelineState:
    """Loop state after a completed training step (1-based)."""

    config: RunConfig
    step: int
    corp_n: list[NerExample] = field(default_factory=list)
    corp_r: list[ReExample] = field(default_factory=list)
    seen_n: set[tuple] = field(default_factory=set)
    seen_r: set[tuple] = field(default_factory=set)
    e_o: set[str] = field(default_factory=set)
    t_o: set[Triple] = field(default_factory=set)
    pools: discovery.DiscoveryPools = field(default_factory=discovery.DiscoveryPools)


@dataclass
class RunResult:
    out_dir: Path
    kg_out: Path
    fine_kg: KnowledgeGraph
    t_o: set[Triple]
    e_conf: list[discovery.CandidateEntity]
    t_conf: list[discovery.CandidateTriple]
    summary: dict


def _make_handles(config: RunConfig) -> tuple[NerModelHandle, ReModelHandle]:
    settings = config.train_settings()
    if config.backend == "baseline":
        return make_baseline_ner(settings), make_baseline_re(settings)
    command = config.backend[len("plugin:"):]
    return plugin_connect(command, "ner"), plugin_connect(command, "re")


def _merge_examples(state_list: list, seen: set, new_examples: list) -> int:
    """Set-semantics union keyed by example content, order preserving."""
    added = 0
    for ex in new_examples:
        key = ex.key()
        if key not in seen:
            seen.add(key)
            state_list.append(ex)
            added += 1
    return added


def _atomic_pickle(obj: object, path: Path) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        pickle.dump(obj, fh, protocol=pickle.HIGHEST_PROTOCOL)
    os.replace(tmp, path)


def checkpoint(state: PipelineState, out_dir: str | Path,
               ner_handle: NerModelHandle | None = None,
               re_handle: ReModelHandle | None = None) -> Path:
    """Persist resumable state; written atomically (temp file then rename)."""
    ckpt_dir = Path(out_dir) / "checkpoint"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    if ner_handle is not None:
        save_handle(ner_handle, ckpt_dir / "ner.model")
    if re_handle is not None:
        save_handle(re_handle, ckpt_dir / "re.model")
    _atomic_pickle(state, ckpt_dir / "state.pkl")
    manifest = {
        "version": CHECKPOINT_VERSION,
        "step": state.step,
        "corp_n": len(state.corp_n),
        "corp_r": len(state.corp_r),
        "entity_pool": len(state.pools.entities),
        "triple_pool": len(state.pools.triples),
    }
    tmp = ckpt_dir / "manifest.json.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, ckpt_dir / "manifest.json")
    return ckpt_dir


def resume(out_dir: str | Path) -> tuple[PipelineState, NerModelHandle, ReModelHandle]:
    """Reload a checkpoint; raises CheckpointError on corruption or mismatch."""
    ckpt_dir = Path(out_dir) / "checkpoint"
    manifest_path = ckpt_dir / "manifest.json"
    if not manifest_path.exists():
        raise CheckpointError(f"no checkpoint manifest in {ckpt_dir}")
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupt checkpoint manifest: {exc}") from exc
    if manifest.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version {manifest.get('version')!r} is not "
            f"{CHECKPOINT_VERSION}"
        )
    try:
        with open(ckpt_dir / "state.pkl", "rb") as fh:
            state = pickle.load(fh)
    except (OSError, pickle.UnpicklingError, EOFError) as exc:
        raise CheckpointError(f"corrupt checkpoint state: {exc}") from exc
    if not isinstance(state, PipelineState) or state.step != manifest["step"]:
        raise CheckpointError("checkpoint state does not match its manifest")
    try:
        ner_handle = load_handle(ckpt_dir / "ner.model")
        re_handle = load_handle(ckpt_dir / "re.model")
    except (OSError, pickle.UnpicklingError, EOFError) as exc:
        raise CheckpointError(f"cannot load checkpointed models: {exc}") from exc
    return state, ner_handle, re_handle


def _prepare_partitions(config: RunConfig, corpus_path: str | Path,
                        kg: KnowledgeGraph, out: Path) -> tuple[list[SubCorpus], OutOfDomainWords]:
    sentences = preprocess(
        read_raw_docs(corpus_path),
        PreprocessConfig(min_len=config.min_len, max_len=config.max_len),
    )
    if config.w_o_path:
        w_o = OutOfDomainWords.from_file(config.w_o_path, kg)
    else:
        w_o = derive_out_of_domain_words(sentences, kg, size=config.w_o_size)
    parts = partition(sentences, config.partitions, config.seed)
    part_dir = out / "partitions"
    part_dir.mkdir(parents=True, exist_ok=True)
    for part in parts:
        write_sentences(part.sentences, part_dir / f"part_{part.index}.jsonl")
    with open(out / "w_o.txt", "w", encoding="utf-8") as fh:
        for word in sorted(w_o.words):
            fh.write(word + "\n")
    return parts, w_o


def _load_partitions(config: RunConfig, out: Path) -> list[SubCorpus]:
    parts = []
    for index in range(1, config.partitions + 1):
        path = out / "partitions" / f"part_{index}.jsonl"
        parts.append(SubCorpus(index=index, sentences=read_sentences(path)))
    return parts


def _write_iteration_artifacts(out: Path, step: int, state: PipelineState,
                               ner_handle, re_handle) -> None:
    corp_dir = out / "corpora" / f"iter_{step}"
    corp_dir.mkdir(parents=True, exist_ok=True)
    write_ner_corpus(state.corp_n, corp_dir / "corp_n.jsonl")
    write_re_corpus(state.corp_r, corp_dir / "corp_r.jsonl")
    pool_dir = out / "pools" / f"iter_{step}"
    pool_dir.mkdir(parents=True, exist_ok=True)
    discovery.write_entity_pool(state.pools.entities, pool_dir / "entities.jsonl")
    discovery.write_triple_pool(state.pools.triples, pool_dir / "triples.jsonl")
    model_dir = out / "models" / f"iter_{step}"
    model_dir.mkdir(parents=True, exist_ok=True)
    save_handle(ner_handle, model_dir / "ner.model")
    save_handle(re_handle, model_dir / "re.model")


def run(config: RunConfig, corpus_path: str | Path, kg_entities: str | Path,
        kg_triples: str | Path, out_dir: str | Path, *,
        resume_run: bool = False) -> RunResult:
    """Execute the full iterative run and write all artifacts under out_dir."""
    config.validate()
    if config.threads:
        log.info("threads=%d requested; stages run single-threaded", config.threads)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "config.json", "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")

    kg = load_kg(kg_entities, kg_triples)

    if resume_run:
        state, ner_handle, re_handle = resume(out)
        if state.config != config:
            raise CheckpointError("checkpoint config differs from the requested run")
        parts = _load_partitions(config, out)
        if config.w_o_path:
            w_o = OutOfDomainWords.from_file(config.w_o_path, kg)
        else:
            w_o = OutOfDomainWords.from_file(out / "w_o.txt", kg)
        start_step = state.step + 1
    else:
        parts, w_o = _prepare_partitions(config, corpus_path, kg, out)
        state = PipelineState(config=config, step=0)
        ner_handle = re_handle = None
        start_step = 1

    heldout_idx = config.heldout_index()
    train_parts = [p for p in parts if p.index != heldout_idx]
    if not train_parts:
        raise ValueError("no training partitions left after reserving held-out")
    heldout = next((p for p in parts if p.index == heldout_idx), None)

    handles = [ner_handle, re_handle]  # kept current for plugin cleanup
    try:
        if config.ablation == ABLATION_NO_ITER:
            ner_handle, re_handle = _run_no_iter(
                config, state, train_parts, kg, w_o, out, start_step,
                ner_handle, re_handle, handles)
        else:
            ner_handle, re_handle = _run_iterative(
                config, state, train_parts, kg, w_o, out, start_step,
                ner_handle, re_handle, handles)

        # Final assembly: overlap plus confident discoveries.
        t_conf = ([] if config.ablation == ABLATION_NO_ITER
                  else discovery.get_confidence_triple(state.pools.triples,
                                                       config.th_pt, config.th_ft))
        e_conf = ([] if config.ablation == ABLATION_NO_ITER
                  else discovery.get_confidence_entity(state.pools.entities,
                                                       config.th_pe, config.th_fe))
        fine = build_kg(state.t_o, t_conf, kg)
        kg_out = out / "kg_out"
        export_kg(fine, kg_out)

        reports_dir = out / "reports"
        reports_dir.mkdir(parents=True, exist_ok=True)
        if heldout is not None and heldout.sentences:
            ner_report = eval_ner_heldout(ner_handle, heldout, kg)
            re_report = eval_re_heldout(
                re_handle, heldout, kg,
                include_negatives=config.include_negative_eval)
            ner_report.save(reports_dir / "ner_heldout.json")
            re_report.save(reports_dir / "re_heldout.json")

        summary = {
            "entities_overlap": len(state.e_o),
            "triples_overlap": len(state.t_o),
            "e_conf": len(e_conf),
            "t_r": sum(1 for c in t_conf if c.category == discovery.CATEGORY_TR),
            "t_e": sum(1 for c in t_conf if c.category == discovery.CATEGORY_TE),
            "kf_entities": len(fine.entities),
            "kf_triples": len(fine.triples),
            "corp_n": len(state.corp_n),
            "corp_r": len(state.corp_r),
            "ablation": config.ablation,
            "seed": config.seed,
        }
        with open(reports_dir / "run_summary.json", "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        log.info("run complete: %s", json.dumps(summary, sort_keys=True))
        return RunResult(out, kg_out, fine, state.t_o, e_conf, t_conf, summary)
    finally:
        for handle in handles:
            proc = getattr(handle, "proc", None)
            if proc is not None:
                proc.close()


def _train_both(config: RunConfig, corp_n, corp_r, ner_handle, re_handle):
    """From-scratch retraining on the given corpora."""
    if ner_handle is None or re_handle is None:
        ner_handle, re_handle = _make_handles(config)
    return train_ner(ner_handle, corp_n), train_re(re_handle, corp_r)


def _run_iterative(config, state, train_parts, kg, w_o, out, start_step,
                   ner_handle, re_handle, handles_out):
    no_cumulative = config.ablation == ABLATION_NO_CUMULATIVE
    for step, part in enumerate(train_parts, start=1):
        if step < start_step:
            continue
        stats = DistantStats()
        if step == 1:
            corp_n, corp_r, e_o, t_o = build_distant_corpus(
                part, kg, (), (), w_o, config.ratio_n, config.ratio_o,
                config.seed, stats=stats,
            )
            train_n, train_r = corp_n, corp_r
        else:
            e_conf, t_conf = discovery.get_specific_knowledge(
                part, kg, state.pools, ner_handle, re_handle,
                config.th_pe, config.th_fe, config.th_pt, config.th_ft,
                iteration=step,
            )
            corp_n, corp_r, e_o, t_o = build_distant_corpus(
                part, kg, e_conf, t_conf, w_o, config.ratio_n, config.ratio_o,
                config.seed, stats=stats,
            )
            train_n, train_r = corp_n, corp_r
        _merge_examples(state.corp_n, state.seen_n, corp_n)
        _merge_examples(state.corp_r, state.seen_r, corp_r)
        state.e_o |= e_o
        state.t_o |= t_o
        if not no_cumulative:
            train_n, train_r = state.corp_n, state.corp_r
        ner_handle, re_handle = _train_both(config, train_n, train_r,
                                            ner_handle, re_handle)
        handles_out[:] = [ner_handle, re_handle]
        state.step = step
        _write_iteration_artifacts(out, step, state, ner_handle, re_handle)
        checkpoint(state, out, ner_handle, re_handle)
        log.info("iteration %d/%d: corpus %d sentences, %d skipped; "
                 "corp_n=%d corp_r=%d pools=%d/%d",
                 step, len(train_parts), stats.sentences, stats.skipped,
                 len(state.corp_n), len(state.corp_r),
                 len(state.pools.entities), len(state.pools.triples))
    return ner_handle, re_handle


def _run_no_iter(config, state, train_parts, kg, w_o, out, start_step,
                 ner_handle, re_handle, handles_out):
    """Single-shot training with the coarse graph as the only knowledge base."""
    if start_step > 1:
        return ner_handle, re_handle
    for part in train_parts:
        corp_n, corp_r, e_o, t_o = build_distant_corpus(
            part, kg, (), (), w_o, config.ratio_n, config.ratio_o, config.seed,
        )
        _merge_examples(state.corp_n, state.seen_n, corp_n)
        _merge_examples(state.corp_r, state.seen_r, corp_r)
        state.e_o |= e_o
        state.t_o |= t_o
    ner_handle, re_handle = _train_both(config, state.corp_n, state.corp_r,
                                        None, None)
    handles_out[:] = [ner_handle, re_handle]
    state.step = 1
    _write_iteration_artifacts(out, 1, state, ner_handle, re_handle)
    checkpoint(state, out, ner_handle, re_handle)
    return ner_handle, re_handle


def run_ablation(config: RunConfig, corpus_path, kg_entities, kg_triples,
                 out_dir, **kwargs) -> RunResult:
    """Same as run(); provided for symmetry, requires an ablation flag set."""
    if config.ablation == ABLATION_NONE:
        raise ValueError("run_ablation requires config.ablation to be set")
    return run(config, corpus_path, kg_entities, kg_triples, out_dir, **kwargs)

"""Pluggable NER / RE model contracts and handle dispatch.

A handle names a backend (in-process baseline or external plugin process) plus
its trained state. Training returns a handle trained from scratch on exactly
the corpus given; prediction requires a trained handle. Baseline handles are
immutable once trained; plugin handles proxy to remote state and the previous
handle must not be reused after retraining.
"""

from __future__ import annotations

import hashlib
import pickle
from dataclasses import dataclass, replace
from pathlib import Path

from ..corpus import Sentence
from ..distant import NerExample, ReExample, is_valid_bio
from .baseline import BaselineNerModel, BaselineReModel
from .linear import TrainSettings
from .plugin import PluginProcess, check_probability

BACKEND_BASELINE = "baseline"
BACKEND_PLUGIN = "plugin"


@dataclass(frozen=True, slots=True)
class SpanPrediction:
    start: int
    end: int
    etype: str
    probability: float


@dataclass(frozen=True, slots=True)
class RelationPrediction:
    relation: str
    probability: float
    distribution: dict[str, float] | None = None


@dataclass
class NerModelHandle:
    backend: str
    settings: TrainSettings = TrainSettings()
    model: BaselineNerModel | None = None
    proc: PluginProcess | None = None
    trained: bool = False
    fingerprint: str | None = None

    role = "ner"


@dataclass
class ReModelHandle:
    backend: str
    settings: TrainSettings = TrainSettings()
    model: BaselineReModel | None = None
    proc: PluginProcess | None = None
    trained: bool = False
    fingerprint: str | None = None

    role = "re"


def make_baseline_ner(settings: TrainSettings | None = None) -> NerModelHandle:
    return NerModelHandle(backend=BACKEND_BASELINE,
                          settings=settings or TrainSettings())


def make_baseline_re(settings: TrainSettings | None = None) -> ReModelHandle:
    return ReModelHandle(backend=BACKEND_BASELINE,
                         settings=settings or TrainSettings())


def plugin_connect(command: str, role: str,
                   timeout: float | None = None) -> NerModelHandle | ReModelHandle:
    """Spawn an external model plugin and complete the protocol handshake."""
    proc = PluginProcess(command, role,
                         timeout=timeout if timeout is not None else 30.0)
    cls = NerModelHandle if role == "ner" else ReModelHandle
    return cls(backend=BACKEND_PLUGIN, proc=proc)


def _fingerprint(keys: list[tuple]) -> str:
    digest = hashlib.sha256()
    for key in sorted(map(repr, keys)):
        digest.update(key.encode("utf-8"))
    return digest.hexdigest()[:16]


def _require_trained(handle: NerModelHandle | ReModelHandle) -> None:
    if not handle.trained:
        raise RuntimeError(f"{handle.role} handle is untrained; call train first")


def train_ner(handle: NerModelHandle, corp_n: list[NerExample]) -> NerModelHandle:
    """Train from scratch on the full corpus; the input handle is untouched."""
    if not corp_n:
        raise ValueError("cannot train NER on an empty corpus")
    for ex in corp_n:
        if not is_valid_bio(ex.labels):
            raise ValueError(f"invalid BIO sequence in {ex.sid}")
    fp = _fingerprint([ex.key() for ex in corp_n])
    if handle.backend == BACKEND_BASELINE:
        model = BaselineNerModel.train(corp_n, handle.settings)
        return replace(handle, model=model, trained=True, fingerprint=fp)
    handle.proc.request({
        "op": "train",
        "examples": [
            {"sid": ex.sid, "tokens": ex.tokens, "labels": ex.labels}
            for ex in corp_n
        ],
    })
    handle.trained = True
    handle.fingerprint = fp
    return handle


def predict_ner(handle: NerModelHandle, sent: Sentence) -> list[SpanPrediction]:
    _require_trained(handle)
    if not sent.tokens:
        raise ValueError("cannot predict on an empty sentence")
    if handle.backend == BACKEND_BASELINE:
        return [
            SpanPrediction(s.start, s.end, s.etype, s.probability)
            for s in handle.model.predict(sent)
        ]
    reply = handle.proc.request({
        "op": "predict",
        "input": {"sid": sent.id, "text": sent.text,
                  "tokens": sent.token_strings()},
    })
    raw = reply.get("spans")
    if not isinstance(raw, list):
        handle.proc.violation(f"predict reply lacks spans list: {reply!r}")
    spans = []
    for item in raw:
        try:
            start, end = int(item["start"]), int(item["end"])
            etype = str(item["type"])
        except (KeyError, TypeError, ValueError):
            handle.proc.violation(f"malformed span {item!r}")
        if not (0 <= start < end <= len(sent.tokens)):
            handle.proc.violation(f"span {item!r} out of range for {sent.id}")
        p = check_probability(item.get("p"), f"span {item!r}", handle.proc)
        spans.append(SpanPrediction(start, end, etype, p))
    return spans


def train_re(handle: ReModelHandle, corp_r: list[ReExample]) -> ReModelHandle:
    if len({ex.label for ex in corp_r}) < 2:
        raise ValueError("RE training needs at least 2 distinct labels")
    fp = _fingerprint([ex.key() for ex in corp_r])
    if handle.backend == BACKEND_BASELINE:
        model = BaselineReModel.train(corp_r, handle.settings)
        return replace(handle, model=model, trained=True, fingerprint=fp)
    handle.proc.request({
        "op": "train",
        "examples": [
            {"sid": ex.sid, "head": ex.head, "head_type": ex.head_type,
             "tail": ex.tail, "tail_type": ex.tail_type, "text": ex.text,
             "label": ex.label}
            for ex in corp_r
        ],
    })
    handle.trained = True
    handle.fingerprint = fp
    return handle


def predict_re(handle: ReModelHandle, ex: ReExample,
               with_distribution: bool = False) -> RelationPrediction:
    """Argmax relation for a (possibly unlabeled) templated example."""
    _require_trained(handle)
    if handle.backend == BACKEND_BASELINE:
        dist = handle.model.predict(ex.text, ex.head_type, ex.tail_type)
        relation = max(dist, key=lambda lab: (dist[lab], lab))
        return RelationPrediction(
            relation, dist[relation], dict(sorted(dist.items())) if with_distribution else None
        )
    reply = handle.proc.request({
        "op": "predict",
        "input": {"text": ex.text, "head": ex.head, "head_type": ex.head_type,
                  "tail": ex.tail, "tail_type": ex.tail_type},
    })
    if "relation" not in reply:
        handle.proc.violation(f"predict reply lacks relation: {reply!r}")
    relation = str(reply["relation"])
    p = check_probability(reply.get("p"), f"relation {relation!r}", handle.proc)
    dist = None
    if with_distribution:
        raw = reply.get("dist")
        if not isinstance(raw, dict):
            handle.proc.violation(f"predict reply lacks dist: {reply!r}")
        dist = {str(k): check_probability(v, f"dist[{k}]", handle.proc)
                for k, v in raw.items()}
        total = sum(dist.values())
        if abs(total - 1.0) > 1e-6:
            handle.proc.violation(f"distribution sums to {total}, not 1")
    return RelationPrediction(relation, p, dist)


def save_handle(handle: NerModelHandle | ReModelHandle, path: str | Path) -> None:
    """Persist trained state; plugin backends save remotely next to the meta file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if handle.backend == BACKEND_BASELINE:
        blob = {"backend": BACKEND_BASELINE, "role": handle.role,
                "settings": handle.settings, "trained": handle.trained,
                "fingerprint": handle.fingerprint, "model": handle.model}
        with open(path, "wb") as fh:
            pickle.dump(blob, fh, protocol=pickle.HIGHEST_PROTOCOL)
        return
    remote = str(path) + ".blob"
    handle.proc.request({"op": "save", "path": remote})
    blob = {"backend": BACKEND_PLUGIN, "role": handle.role,
            "command": handle.proc.command, "trained": handle.trained,
            "fingerprint": handle.fingerprint, "remote": remote}
    with open(path, "wb") as fh:
        pickle.dump(blob, fh, protocol=pickle.HIGHEST_PROTOCOL)


def load_handle(path: str | Path,
                timeout: float | None = None) -> NerModelHandle | ReModelHandle:
    with open(path, "rb") as fh:
        blob = pickle.load(fh)
    cls = NerModelHandle if blob["role"] == "ner" else ReModelHandle
    if blob["backend"] == BACKEND_BASELINE:
        return cls(backend=BACKEND_BASELINE, settings=blob["settings"],
                   model=blob["model"], trained=blob["trained"],
                   fingerprint=blob["fingerprint"])
    handle = plugin_connect(blob["command"], blob["role"], timeout=timeout)
    handle.proc.request({"op": "load", "path": blob["remote"]})
    handle.trained = blob["trained"]
    handle.fingerprint = blob["fingerprint"]
    return handle

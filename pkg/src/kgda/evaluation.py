"""Held-out evaluation against distant labels, plus manual-evaluation tooling.

Held-out NER gold is whatever the coarse graph matches in the reserved
partition (span-level exact match, micro averaged). Held-out RE evaluates the
classifier on pairs the coarse graph relates (support-weighted average).
Manual evaluation samples discovered knowledge into a CSV for human verdicts
and imports the verdicts back as per-category precision.
"""

from __future__ import annotations

import csv
import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import SubCorpus
from .distant import ReExample, span_text, render_template
from .kg import KnowledgeGraph, NULL_RELATION
from .matching import GazetteerMatcher
from .models import NerModelHandle, ReModelHandle, predict_ner, predict_re

log = logging.getLogger(__name__)

TASK_NER = "ner"
TASK_RE = "re"

AVG_MICRO_SPAN = "micro_span"
AVG_WEIGHTED = "weighted"

VERDICT_CORRECT = "correct"
VERDICT_INCORRECT = "incorrect"


@dataclass(slots=True)
class ClassMetrics:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def support(self) -> int:
        return self.tp + self.fn

    def prf(self) -> tuple[float, float, float]:
        if self.tp == self.fp == self.fn == 0:
            return 1.0, 1.0, 1.0
        p = self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0
        r = self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        return p, r, f


@dataclass
class EvalReport:
    task: str
    averaging: str
    precision: float
    recall: float
    f1: float
    per_class: dict[str, ClassMetrics]
    zero_support: bool = False

    @property
    def support_total(self) -> int:
        return sum(m.support for m in self.per_class.values())

    def to_dict(self) -> dict:
        table = {}
        for name in sorted(self.per_class):
            m = self.per_class[name]
            p, r, f = m.prf()
            table[name] = {"tp": m.tp, "fp": m.fp, "fn": m.fn,
                           "support": m.support,
                           "precision": p, "recall": r, "f1": f}
        return {"task": self.task, "averaging": self.averaging,
                "precision": self.precision, "recall": self.recall,
                "f1": self.f1, "support_total": self.support_total,
                "zero_support": self.zero_support, "per_class": table}

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def micro_report(task: str, per_class: dict[str, ClassMetrics]) -> EvalReport:
    tp = sum(m.tp for m in per_class.values())
    fp = sum(m.fp for m in per_class.values())
    fn = sum(m.fn for m in per_class.values())
    if tp == fp == fn == 0:
        return EvalReport(task, AVG_MICRO_SPAN, 1.0, 1.0, 1.0, per_class,
                          zero_support=True)
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return EvalReport(task, AVG_MICRO_SPAN, p, r, f, per_class)


def weighted_report(task: str, per_class: dict[str, ClassMetrics]) -> EvalReport:
    total = sum(m.support for m in per_class.values())
    if total == 0:
        return EvalReport(task, AVG_WEIGHTED, 1.0, 1.0, 1.0, per_class,
                          zero_support=True)
    wp = wr = wf = 0.0
    for m in per_class.values():
        if not m.support:
            continue
        p, r, f = m.prf()
        wp += m.support * p
        wr += m.support * r
        wf += m.support * f
    return EvalReport(task, AVG_WEIGHTED, wp / total, wr / total, wf / total,
                      per_class)


def score_ner_spans(
    gold: Sequence[Sequence[tuple[int, int, str]]],
    predicted: Sequence[Sequence[tuple[int, int, str]]],
) -> EvalReport:
    """Span-level exact match: (start, end, type) must all agree."""
    per_class: dict[str, ClassMetrics] = {}

    def cm(etype: str) -> ClassMetrics:
        return per_class.setdefault(etype, ClassMetrics())

    for gold_sent, pred_sent in zip(gold, predicted, strict=True):
        g, p = set(gold_sent), set(pred_sent)
        for span in g & p:
            cm(span[2]).tp += 1
        for span in p - g:
            cm(span[2]).fp += 1
        for span in g - p:
            cm(span[2]).fn += 1
    return micro_report(TASK_NER, per_class)


def eval_ner_heldout(
    model: NerModelHandle,
    heldout: SubCorpus,
    kg: KnowledgeGraph,
) -> EvalReport:
    """Compare decoded spans with coarse-graph distant labels, micro averaged."""
    matcher = GazetteerMatcher(kg)
    gold = []
    predicted = []
    for sent in heldout.sentences:
        gold.append([(s.start, s.end, s.etype) for s in matcher.match(sent)])
        predicted.append([(s.start, s.end, s.etype)
                          for s in predict_ner(model, sent)])
    return score_ner_spans(gold, predicted)


def score_re_labels(
    instances: Sequence[tuple[frozenset[str], str]],
) -> EvalReport:
    """Weighted scoring of (gold label set, predicted label) instances.

    A prediction matching any gold label is correct; the instance then counts
    for the predicted class, otherwise for the smallest gold label.
    """
    per_class: dict[str, ClassMetrics] = {}

    def cm(label: str) -> ClassMetrics:
        return per_class.setdefault(label, ClassMetrics())

    for gold_set, pred in instances:
        if pred in gold_set:
            cm(pred).tp += 1
        else:
            gold = min(sorted(gold_set))
            cm(gold).fn += 1
            cm(pred).fp += 1
    return weighted_report(TASK_RE, per_class)


def eval_re_heldout(
    model: ReModelHandle,
    heldout: SubCorpus,
    kg: KnowledgeGraph,
    include_negatives: bool = False,
) -> EvalReport:
    """Classify pairs the coarse graph relates in the held-out sentences.

    With include_negatives, unrelated matched pairs join as NULL-labeled gold.
    """
    matcher = GazetteerMatcher(kg)
    instances: list[tuple[frozenset[str], str]] = []
    for sent in heldout.sentences:
        spans = matcher.match(sent)
        for head in spans:
            for tail in spans:
                if head is tail:
                    continue
                rels = kg.pair_index.get((head.entity_id, tail.entity_id))
                if not rels and not include_negatives:
                    continue
                gold = rels if rels else frozenset({NULL_RELATION})
                h = span_text(sent, head.start, head.end)
                t = span_text(sent, tail.start, tail.end)
                probe = ReExample(
                    sid=sent.id, head=h, head_type=head.etype,
                    tail=t, tail_type=tail.etype,
                    text=render_template(h, head.etype, t, tail.etype, sent.text),
                    label="", polarity="probe",
                )
                pred = predict_re(model, probe)
                instances.append((gold, pred.relation))
    return score_re_labels(instances)


# --- manual evaluation --------------------------------------------------------


def sample_for_manual(items: Sequence[str], k: int, seed: int | str) -> list[str]:
    """Uniform sample without replacement; short pools return everything."""
    if k >= len(items):
        return list(items)
    rng = random.Random(f"{seed}|manual")
    return rng.sample(list(items), k)


def write_manual_sample(
    by_category: dict[str, Sequence[str]],
    k: int,
    seed: int | str,
    path: str | Path,
) -> None:
    """CSV of sampled payloads per category with an empty verdict column."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["category", "payload", "verdict"])
        for category in sorted(by_category):
            items = by_category[category]
            if k > len(items):
                log.warning("category %s has %d items, fewer than k=%d",
                            category, len(items), k)
            for payload in sample_for_manual(items, k, f"{seed}|{category}"):
                writer.writerow([category, payload, ""])


@dataclass
class ManualCategoryReport:
    accepted: int = 0
    judged: int = 0
    unjudged_rows: list[int] = field(default_factory=list)

    @property
    def precision(self) -> float | None:
        return self.accepted / self.judged if self.judged else None


def import_manual(path: str | Path) -> dict[str, ManualCategoryReport]:
    """Per-category precision from a judged sample CSV.

    Unjudged (empty-verdict) rows are excluded from precision and listed;
    any verdict outside {correct, incorrect, ""} raises.
    """
    reports: dict[str, ManualCategoryReport] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["category", "payload", "verdict"]:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for rownum, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise ValueError(f"{path}:{rownum}: expected 3 columns")
            category, _, verdict = row
            rep = reports.setdefault(category, ManualCategoryReport())
            if verdict == VERDICT_CORRECT:
                rep.judged += 1
                rep.accepted += 1
            elif verdict == VERDICT_INCORRECT:
                rep.judged += 1
            elif verdict == "":
                rep.unjudged_rows.append(rownum)
            else:
                raise ValueError(
                    f"{path}:{rownum}: malformed verdict {verdict!r}"
                )
    return reports

"""
Held-out and manual evaluation
==============================

Scores checkpointed models against distant labels on the reserved partition,
then walks the manual-evaluation loop: sample discoveries to a CSV, judge
them, and import per-category precision.
"""

import csv
import tempfile
from pathlib import Path

from kgda import RunConfig, run
from kgda.corpus import SubCorpus, read_sentences
from kgda.evaluation import eval_ner_heldout, eval_re_heldout, import_manual, write_manual_sample
from kgda.pipeline import resume
from kgda.synth import generate_world

root = Path(tempfile.mkdtemp(prefix="kgda_demo_"))
world = generate_world(root / "world", seed=7, run_seed=11)
config = RunConfig(seed=11, epochs=25, lr=0.3, l2=1e-5, batch_size=32,
                   w_o_path=str(world.w_o_path))
result = run(config, world.corpus_path, world.entities_path,
             world.triples_path, root / "run")

# Held-out evaluation: gold labels come from matching the coarse graph on the
# reserved partition (micro span NER, support-weighted RE).
state, ner_handle, re_handle = resume(root / "run")
heldout = SubCorpus(index=6, sentences=read_sentences(
    root / "run/partitions/part_6.jsonl"))
ner_report = eval_ner_heldout(ner_handle, heldout, world.kg)
re_report = eval_re_heldout(re_handle, heldout, world.kg)
print(f"held-out NER ({ner_report.averaging}): "
      f"P={ner_report.precision:.3f} R={ner_report.recall:.3f} "
      f"F1={ner_report.f1:.3f} support={ner_report.support_total}")
print(f"held-out RE  ({re_report.averaging}): "
      f"P={re_report.precision:.3f} R={re_report.recall:.3f} "
      f"F1={re_report.f1:.3f} support={re_report.support_total}")

# Manual evaluation: sample per category, simulate a reviewer, import.
by_category = {
    "E_conf": [f"{c.surface} ({c.etype})" for c in result.e_conf],
    "T_R": [f"{c.head} --{c.rel}--> {c.tail}"
            for c in result.t_conf if c.category == "T_R"],
    "T_E": [f"{c.head} --{c.rel}--> {c.tail}"
            for c in result.t_conf if c.category == "T_E"],
}
sample_path = root / "manual_sample.csv"
write_manual_sample(by_category, k=50, seed=11, path=sample_path)

rows = list(csv.reader(sample_path.open()))
planted = {f"{s} ({t})" for s, t in world.planted_entities}
for row in rows[1:]:
    if row[0] == "E_conf":
        row[2] = "correct" if row[1] in planted else "incorrect"
    else:
        row[2] = "correct"
with sample_path.open("w", newline="") as fh:
    csv.writer(fh).writerows(rows)

for category, report in sorted(import_manual(sample_path).items()):
    print(f"manual precision {category}: {report.precision:.2f} "
          f"({report.accepted}/{report.judged})")

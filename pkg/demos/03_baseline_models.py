"""
Training and probing the baseline models
========================================

Trains the window-feature NER tagger and the bag-of-words relation classifier
on a distant corpus, then shows calibrated predictions on held-back text,
including an entity surface the models never saw.
"""

import tempfile

from kgda import OutOfDomainWords, TrainSettings, build_distant_corpus, preprocess
from kgda.corpus import PreprocessConfig, read_raw_docs
from kgda.models import make_baseline_ner, make_baseline_re, predict_ner, predict_re, train_ner, train_re
from kgda.synth import generate_world

world = generate_world(tempfile.mkdtemp(prefix="kgda_demo_"), seed=7, run_seed=11)
sentences = preprocess(read_raw_docs(world.corpus_path), PreprocessConfig())
# Train on the first partition, exactly what the pipeline's iteration 1 sees.
from kgda.corpus import partition

sub = partition(sentences, 6, seed=11)[0]
w_o = OutOfDomainWords.from_file(world.w_o_path, world.kg)
corp_n, corp_r, _, _ = build_distant_corpus(sub, world.kg, (), (), w_o,
                                            0.2, 0.3, seed=11)

settings = TrainSettings(seed=11, epochs=25, lr=0.3, l2=1e-5, batch_size=32)
ner = train_ner(make_baseline_ner(settings), corp_n)
re_model = train_re(make_baseline_re(settings), corp_r)
print(f"trained on {len(corp_n)} NER sentences / {len(corp_r)} RE examples")

# A planted surface the training corpus never labeled: context and suffix
# features still license a confident span.
surface, etype = world.planted_entities[0]
from kgda.corpus import Sentence, tokenize

text = f"Researchers administered {surface} to the cohort yesterday ."
novel = Sentence(id="probe", text=text, tokens=tokenize(text))
print("\nprobe:", text)
for span in predict_ner(ner, novel):
    print(f"  span [{span.start},{span.end}) {span.etype}  p={span.probability:.3f}")

# Relation prediction over a templated pair.
from kgda.distant import ReExample, render_template

rel_text = f"{surface} reliably treats headache in randomized trials ."
probe = ReExample(
    "probe", surface, etype, "headache", "disease or syndrome",
    render_template(surface, etype, "headache", "disease or syndrome", rel_text),
    "", "probe")
pred = predict_re(re_model, probe, with_distribution=True)
print(f"\nrelation prediction: {pred.relation}  p={pred.probability:.3f}")
for label, p in sorted(pred.distribution.items(), key=lambda kv: -kv[1])[:4]:
    print(f"  {label:>12s}  {p:.4f}")

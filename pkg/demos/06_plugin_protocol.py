"""
External model plugins over the wire protocol
=============================================

Model backends are child processes speaking line-delimited JSON on
stdin/stdout. This demo writes a minimal memorizing plugin to disk, connects
to it, and drives the train/predict/save/load cycle through the same handle
API the pipeline uses. The plm_adapter package implements the same protocol
with transformer backends.
"""

import sys
import tempfile
from pathlib import Path

from kgda.corpus import Sentence, tokenize
from kgda.distant import NerExample
from kgda.models import plugin_connect, predict_ner, save_handle, train_ner

PLUGIN_SOURCE = '''
import json, sys
memory = {}
for line in sys.stdin:
    msg = json.loads(line)
    op = msg["op"]
    if op == "hello":
        reply = {"ok": True}
    elif op == "train":
        for ex in msg["examples"]:
            spans = []
            start = None
            for i, lab in enumerate(ex["labels"] + ["O"]):
                if lab.startswith("B-"):
                    if start is not None:
                        spans.append([start, i, tag])
                    start, tag = i, lab[2:].replace("_", " ")
                elif not lab.startswith("I-") and start is not None:
                    spans.append([start, i, tag]); start = None
            memory[tuple(ex["tokens"])] = spans
        reply = {"ok": True}
    elif op == "predict":
        spans = memory.get(tuple(msg["input"]["tokens"]), [])
        reply = {"spans": [{"start": s, "end": e, "type": t, "p": 1.0}
                           for s, e, t in spans]}
    elif op in ("save", "load"):
        reply = {"ok": True}
    else:
        reply = {"error": "unknown op"}
    sys.stdout.write(json.dumps(reply) + "\\n")
    sys.stdout.flush()
'''

workdir = Path(tempfile.mkdtemp(prefix="kgda_demo_"))
plugin_path = workdir / "memorizing_plugin.py"
plugin_path.write_text(PLUGIN_SOURCE)

handle = plugin_connect(f"{sys.executable} {plugin_path}", role="ner")
print("handshake complete:", handle.backend)

text = "zelbornix eases headache"
sent = Sentence(id="d0", text=text, tokens=tokenize(text))
corpus = [NerExample("d0", sent.token_strings(),
                     ["B-chemical_or_drug", "O", "B-disease_or_syndrome"])]
handle = train_ner(handle, corpus)
print("trained; fingerprint:", handle.fingerprint)

for span in predict_ner(handle, sent):
    print(f"predicted span [{span.start},{span.end}) {span.etype} "
          f"p={span.probability}")

save_handle(handle, workdir / "remote.model")
print("saved handle meta + remote blob under", workdir)
handle.proc.close()

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kgda.corpus import Sentence, tokenize
from kgda.kg import load_kg

FIXTURE_ENTITIES = """\
e1\tchemical or drug\tAspirin\taspirin|acetylsalicylic acid
e2\tdisease or syndrome\tHeadache\theadache|severe headache
e3\tsign, symptom or finding\tFever\tfever
e4\tchemical or drug\tIbuprofen\tibuprofen|advil
e5\tdisease or syndrome\tMigraine\tmigraine
e6\tchemical or drug\tParacetamol\tparacetamol|cold remedy
e7\tchemical or drug\tColdex\tcoldex|cold remedy
"""

FIXTURE_TRIPLES = """\
e1\tmay_treat\te2
e1\tmay_cause\te2
e4\tmay_treat\te2
e1\tmay_cause\te3
e2\treverse_may_treat\te4
"""


def make_sentence(text: str, sid: str = "s1") -> Sentence:
    return Sentence(id=sid, text=text, tokens=tokenize(text))


@pytest.fixture
def kg_paths(tmp_path):
    ent = tmp_path / "entities.tsv"
    tri = tmp_path / "triples.tsv"
    ent.write_text(FIXTURE_ENTITIES, encoding="utf-8")
    tri.write_text(FIXTURE_TRIPLES, encoding="utf-8")
    return ent, tri


@pytest.fixture
def fixture_kg(kg_paths):
    return load_kg(*kg_paths)


@pytest.fixture
def sent():
    return make_sentence

"""
Loading, querying, and exporting knowledge graphs
=================================================

Builds a small coarse-domain graph from the TSV formats, pokes at the
surface-form and pair indexes, assembles a fine-domain graph from overlap
plus discovered triples, and round-trips it through export.
"""

import tempfile
from pathlib import Path

from kgda import CandidateRef, Triple, build_kg, export_kg, load_kg, lookup_surface, relation_of

workdir = Path(tempfile.mkdtemp(prefix="kgda_demo_"))

# entities.tsv: id <TAB> type <TAB> canonical <TAB> surface1|surface2|...
(workdir / "entities.tsv").write_text(
    "c1\tchemical or drug\tAspirin\taspirin|acetylsalicylic acid\n"
    "c2\tdisease or syndrome\tHeadache\theadache|severe headache\n"
    "c3\tsign, symptom or finding\tNausea\tnausea\n",
    encoding="utf-8",
)
# triples.tsv: head_id <TAB> relation <TAB> tail_id
(workdir / "triples.tsv").write_text(
    "c1\tmay_treat\tc2\nc2\tmay_cause\tc3\n", encoding="utf-8"
)

kg = load_kg(workdir / "entities.tsv", workdir / "triples.tsv")
print(f"loaded {len(kg.entities)} entities, {len(kg.triples)} triples")
print("entity types:", sorted(kg.entity_types))

# Surface lookup is case-folded and punctuation-tolerant.
print("lookup 'Aspirin':", lookup_surface(kg, "Aspirin"))
print("lookup 'SEVERE  headache':", lookup_surface(kg, "SEVERE  headache"))

# Pair lookup tells us which ordered pairs the graph already relates;
# an empty answer is what marks a pair as *new* during discovery.
print("relations c1->c2:", sorted(relation_of(kg, "c1", "c2")))
print("relations c2->c1:", sorted(relation_of(kg, "c2", "c1")))

# The fine-domain graph = overlap triples + confident discovered triples.
# Discovered entities get minted "new:<surface>" ids with provenance.
class Discovered:
    def __init__(self, head, rel, tail):
        self.head, self.rel, self.tail = head, rel, tail

overlap = {Triple("c1", "may_treat", "c2")}
discovered = [Discovered(CandidateRef("zelbornix", "chemical or drug"),
                         "may_treat", "c2")]
fine = build_kg(overlap, discovered, kg)
print("\nfine graph triples:")
for t in sorted(fine.triples, key=lambda t: (t.head, t.rel, t.tail)):
    print("  ", t.head, "-", t.rel, "->", t.tail)

export_kg(fine, workdir / "kg_out")
print("\nexported entities.tsv:")
print((workdir / "kg_out" / "entities.tsv").read_text())

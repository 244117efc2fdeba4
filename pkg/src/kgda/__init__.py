"""Coarse-to-fine knowledge graph domain adaptation from unlabeled text.

The library adapts a coarse-domain knowledge graph to a finer domain: it
builds distantly-supervised NER/RE corpora against the coarse graph, trains
pluggable extraction models, iteratively discovers fine-domain entities and
triples under confidence filters, and assembles the fine-domain graph.
"""

from .corpus import PreprocessConfig, Sentence, SubCorpus, partition, preprocess, tokenize
from .discovery import (
    CandidateEntity,
    CandidateTriple,
    DiscoveryPools,
    get_confidence_entity,
    get_confidence_triple,
    get_specific_knowledge,
)
from .distant import (
    NerExample,
    OutOfDomainWords,
    ReExample,
    build_distant_corpus,
    entity_matching,
    render_template,
)
from .kg import (
    CandidateRef,
    EntityRecord,
    KnowledgeGraph,
    NULL_RELATION,
    Triple,
    build_kg,
    export_kg,
    load_kg,
    lookup_surface,
    normalize_surface,
    relation_of,
)
from .matching import GazetteerMatcher, MatchSpan
from .models import (
    NerModelHandle,
    RelationPrediction,
    ReModelHandle,
    SpanPrediction,
    TrainSettings,
    make_baseline_ner,
    make_baseline_re,
    plugin_connect,
    predict_ner,
    predict_re,
    train_ner,
    train_re,
)
from .pipeline import PipelineState, RunConfig, RunResult, checkpoint, resume, run

__version__ = "0.1.0"

__all__ = [
    "CandidateEntity",
    "CandidateRef",
    "CandidateTriple",
    "DiscoveryPools",
    "EntityRecord",
    "GazetteerMatcher",
    "KnowledgeGraph",
    "MatchSpan",
    "NULL_RELATION",
    "NerExample",
    "NerModelHandle",
    "OutOfDomainWords",
    "PipelineState",
    "PreprocessConfig",
    "ReExample",
    "ReModelHandle",
    "RelationPrediction",
    "RunConfig",
    "RunResult",
    "Sentence",
    "SpanPrediction",
    "SubCorpus",
    "TrainSettings",
    "Triple",
    "build_distant_corpus",
    "build_kg",
    "checkpoint",
    "entity_matching",
    "export_kg",
    "get_confidence_entity",
    "get_confidence_triple",
    "get_specific_knowledge",
    "load_kg",
    "lookup_surface",
    "make_baseline_ner",
    "make_baseline_re",
    "normalize_surface",
    "partition",
    "plugin_connect",
    "predict_ner",
    "predict_re",
    "preprocess",
    "relation_of",
    "render_template",
    "resume",
    "run",
    "tokenize",
    "train_ner",
    "train_re",
]

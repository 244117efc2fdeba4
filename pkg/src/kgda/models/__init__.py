"""Pluggable NER and RE models: baselines, plugin protocol, handle dispatch."""

from .base import (
    BACKEND_BASELINE,
    BACKEND_PLUGIN,
    NerModelHandle,
    RelationPrediction,
    ReModelHandle,
    SpanPrediction,
    load_handle,
    make_baseline_ner,
    make_baseline_re,
    plugin_connect,
    predict_ner,
    predict_re,
    save_handle,
    train_ner,
    train_re,
)
from .linear import TrainSettings
from .plugin import PluginError

__all__ = [
    "BACKEND_BASELINE",
    "BACKEND_PLUGIN",
    "NerModelHandle",
    "PluginError",
    "RelationPrediction",
    "ReModelHandle",
    "SpanPrediction",
    "TrainSettings",
    "load_handle",
    "make_baseline_ner",
    "make_baseline_re",
    "plugin_connect",
    "predict_ner",
    "predict_re",
    "save_handle",
    "train_ner",
    "train_re",
]

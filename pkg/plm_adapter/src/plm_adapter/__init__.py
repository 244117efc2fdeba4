"""Transformer model plugin for the kgda wire protocol."""

from .config import AdapterConfig
from .models import NerAdapter, ReAdapter
from .server import serve

__version__ = "0.1.0"

__all__ = ["AdapterConfig", "NerAdapter", "ReAdapter", "serve"]

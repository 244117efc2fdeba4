"""Adapter configuration.

Training defaults (learning rate 2e-5, batch size 20, 4 epochs) follow the
reference experimental setup for transformer fine-tuning. Model names of the
form "scratch://tiny" build a small randomly-initialized transformer with a
word-level vocabulary, which trains offline; any other name is treated as a
pretrained checkpoint and loaded from the local cache.
"""

from __future__ import annotations

from dataclasses import dataclass

SCRATCH_PREFIX = "scratch://"


@dataclass
class AdapterConfig:
    model_name: str = SCRATCH_PREFIX + "tiny"
    learning_rate: float = 2e-5
    batch_size: int = 20
    epochs: int = 4
    device: str = "cpu"
    seed: int = 0
    max_len: int = 128
    # Dimensions for scratch:// models.
    hidden_size: int = 64
    num_layers: int = 2
    num_heads: int = 2
    intermediate_size: int = 128

    @property
    def from_scratch(self) -> bool:
        return self.model_name.startswith(SCRATCH_PREFIX)

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

VARIANTS = ("full", "wsa", "wt", "ws")
READOUTS = ("rollout", "direct")


@dataclass
class ModelConfig:
    """Architecture and training settings.

    ``l1`` graph-convolution layers feed ``l2`` stacked LSTM layers of
    ``hidden`` units. ``spatial_dim`` is the width of the graph-convolution
    output. ``lambda_init`` is the starting value of every awareness rate
    parameter (the recovery factor uses its square).
    """

    l1: int = 1
    l2: int = 2
    hidden: int = 10
    spatial_dim: int = 10
    k: int = 8
    d1: int = 21
    d2: int = 7
    dropout: float = 0.5
    adjacency_norm: str = "column"
    epochs: int = 100
    batch_size: int = 8
    lr: float = 1e-4
    seed: int = 0
    variant: str = "full"
    readout: str = "rollout"
    lambda_init: float = 0.05

    def __post_init__(self):
        if self.l1 < 1 or self.l2 < 1:
            raise ValueError("l1 and l2 must be at least 1")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.readout not in READOUTS:
            raise ValueError(f"unknown readout {self.readout!r}; expected one of {READOUTS}")
        if self.adjacency_norm not in ("column", "symmetric"):
            raise ValueError(f"unknown adjacency_norm {self.adjacency_norm!r}")
        if self.d1 < 1 or self.d2 < 1 or self.hidden < 1 or self.spatial_dim < 1:
            raise ValueError("d1, d2, hidden and spatial_dim must be positive")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be positive and epochs nonnegative")

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown model config keys: {unknown}")
        return cls(**d)

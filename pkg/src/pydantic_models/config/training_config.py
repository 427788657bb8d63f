from enum import Enum
from typing import Optional, Tuple

from pydantic import BaseModel, Field


class NoiseLevel(str, Enum):
    """Rauschstufen der simulierten Scans."""

    NO = "no"
    MED = "med"
    MAX = "max"

    @property
    def sigma(self) -> float:
        """Standardabweichung in Einheiten der halben Würfelkante."""
        return {"no": 0.0, "med": 0.005, "max": 0.015}[self.value]


class TrainingConfig(BaseModel):
    """
    Trainingsparameter. Die Defaults entsprechen dem Ablations-Protokoll im Desk-Massstab
    (50 Formen, Batch 4, 100 Epochen).
    """

    epochs: int = Field(default=100, ge=1)
    batch_size: int = Field(default=4, ge=1)
    num_shapes: int = Field(default=50, ge=1)
    learning_rate: float = Field(default=7.5e-4, gt=0.0)
    lr_half_life_epochs: float = Field(default=100.0, gt=0.0)
    adam_betas: Tuple[float, float] = (0.9, 0.999)
    adam_eps: float = Field(default=1e-8, gt=0.0)
    num_input_points: int = Field(default=6000, ge=1)
    num_surface_queries: int = Field(default=1000, ge=0)
    num_uniform_queries: int = Field(default=1000, ge=0)
    num_train_queries: int = Field(default=1000, ge=1)
    query_offset: float = Field(default=0.02, ge=0.0)
    noise: NoiseLevel = NoiseLevel.NO
    augment_rotation: bool = True
    seed: int = 0
    checkpoint_every: Optional[int] = Field(default=10, ge=1)
    normalization_margin: float = Field(default=0.05, ge=0.0, lt=1.0)

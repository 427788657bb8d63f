import hashlib
import json
from enum import Enum
from typing import List

from pydantic import BaseModel, Field, field_validator


class Weighting(str, Enum):
    """Gewichtung der K nächsten Nachbarn beim Sampling der Query-Features."""

    INTERP_NN = "interpnn"
    EQUAL_WEIGHT = "ew"
    LEARNED_WEIGHT = "lw"


class ScaleConfig(BaseModel):
    """
    Skalen (Zellen pro Achse), Anzahl Nachbarn und Gewichtungsart.

    Attribute:
        scales (List[int]): Streng aufsteigende Liste, erster Wert >= 1.
        knn_k (int): Anzahl der nächsten Nachbarn innerhalb der Zelle (>= 1).
        weighting (Weighting): InterpNN, EW oder LW.
    """

    scales: List[int] = Field(default_factory=lambda: [1, 4, 16])
    knn_k: int = Field(default=8, ge=1)
    weighting: Weighting = Weighting.INTERP_NN

    @field_validator("scales")
    @classmethod
    def scales_strictly_increasing(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("Mindestens eine Skala ist erforderlich.")
        if v[0] < 1:
            raise ValueError(f"Skalen müssen >= 1 sein, erhalten: {v}")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError(f"Skalen müssen streng aufsteigend sein, erhalten: {v}")
        return v


class ModelConfig(ScaleConfig):
    """
    Architektur des Netzes: Encoder pro Skala, Cross-Scale-Attention und SDF-Head.
    Die Defaults entsprechen der Referenzkonfiguration (F1=64, F2=128, F=198, Head 594→…→2).
    """

    point_feature_size: int = Field(default=64, ge=1)
    cell_feature_size: int = Field(default=128, ge=1)
    local_hidden: int = Field(default=64, ge=1)
    cell_hidden: List[int] = Field(default_factory=lambda: [128, 128])
    transform_hidden: int = Field(default=64, ge=1)
    attention_hidden: int = Field(default=512, ge=1)
    head_widths: List[int] = Field(default_factory=lambda: [512, 256, 128, 64])
    use_attention: bool = True
    feature_transform: bool = True
    batch_norm_momentum: float = Field(default=0.1, gt=0.0, le=1.0)
    batch_norm_eps: float = Field(default=1e-5, gt=0.0)

    @property
    def query_feature_size(self) -> int:
        """F = 3 + 3 + F1 + F2 (198 in der Referenzkonfiguration)."""
        return 6 + self.point_feature_size + self.cell_feature_size

    @property
    def head_input_size(self) -> int:
        """S × F (594 in der Referenzkonfiguration)."""
        return len(self.scales) * self.query_feature_size

    def scale_config(self) -> ScaleConfig:
        return ScaleConfig(scales=list(self.scales), knn_k=self.knn_k, weighting=self.weighting)

    def config_hash(self) -> str:
        """SHA-256 über die kanonische JSON-Darstellung; identifiziert die Architektur eines Checkpoints."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

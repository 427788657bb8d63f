from pydantic import BaseModel, Field


class EvaluationConfig(BaseModel):
    num_samples: int = Field(default=10000, ge=1)
    seed: int = 0
    reference_resolution: int = Field(default=128, ge=8)  # Auflösung der Referenz-Meshes synthetischer Formen

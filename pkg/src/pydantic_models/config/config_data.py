from pydantic import BaseModel, Field, model_validator

from .evaluation_config import EvaluationConfig
from .logging_config import LoggingConfig
from .loss_config import LossConfig
from .model_config import ModelConfig
from .reconstruction_config import ReconstructionConfig
from .structure_config import StructureConfig
from .training_config import TrainingConfig


class ConfigData(BaseModel):
    """
    Modell für die gesamte Konfiguration des Projekts.
    Das sind die Sektionen in der Config-Datei; jede Sektion hat vollständige Defaults.
    """

    structure: StructureConfig = Field(default_factory=StructureConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    loss: LossConfig = Field(default_factory=LossConfig)
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    reconstruction: ReconstructionConfig = Field(default_factory=ReconstructionConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)

    @model_validator(mode="after")
    def check_normalization_frame(self) -> "ConfigData":
        # Training und Rekonstruktion müssen im selben Koordinatenrahmen arbeiten
        if self.training.normalization_margin != self.reconstruction.normalization_margin:
            raise ValueError(
                "training.normalization_margin und reconstruction.normalization_margin müssen gleich sein, "
                f"erhalten: {self.training.normalization_margin} / {self.reconstruction.normalization_margin}"
            )
        return self

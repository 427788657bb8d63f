from .config_data import ConfigData
from .evaluation_config import EvaluationConfig
from .logging_config import LoggingConfig
from .loss_config import LossConfig
from .model_config import ModelConfig, ScaleConfig, Weighting
from .reconstruction_config import ReconstructionConfig
from .structure_config import StructureConfig
from .training_config import NoiseLevel, TrainingConfig

__all__ = [
    "ConfigData",
    "EvaluationConfig",
    "LoggingConfig",
    "LossConfig",
    "ModelConfig",
    "NoiseLevel",
    "ReconstructionConfig",
    "ScaleConfig",
    "StructureConfig",
    "TrainingConfig",
    "Weighting",
]

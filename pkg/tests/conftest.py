"""
Gemeinsame Fixtures: kleine Modellbreiten und Punktwolken, damit die Tests schnell bleiben.
"""

import numpy as np
import pytest

from pydantic_models.config.model_config import ModelConfig
from pydantic_models.config.training_config import TrainingConfig
from pydantic_models.data.point_cloud import PointCloud


def tiny_model_config(**overrides) -> ModelConfig:
    values = {
        "scales": [1, 2],
        "knn_k": 4,
        "point_feature_size": 4,
        "cell_feature_size": 5,
        "local_hidden": 6,
        "cell_hidden": [6],
        "transform_hidden": 5,
        "attention_hidden": 8,
        "head_widths": [8, 6],
    }
    values.update(overrides)
    return ModelConfig.model_validate(values)


def random_cloud(n: int, seed: int, low: float = -0.9, high: float = 0.9) -> PointCloud:
    rng = np.random.default_rng(seed)
    return PointCloud(points=rng.uniform(low, high, size=(n, 3)))


@pytest.fixture
def tiny_config() -> ModelConfig:
    return tiny_model_config()


@pytest.fixture
def cloud() -> PointCloud:
    return random_cloud(60, seed=0)


def tiny_training_config(**overrides) -> TrainingConfig:
    values = {
        "epochs": 2,
        "batch_size": 2,
        "num_shapes": 3,
        "num_input_points": 64,
        "num_surface_queries": 20,
        "num_uniform_queries": 20,
        "num_train_queries": 16,
        "checkpoint_every": 1,
    }
    values.update(overrides)
    return TrainingConfig.model_validate(values)

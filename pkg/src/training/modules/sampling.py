"""
Trainingsdaten: simulierte Scans, Query-Punkte mit Soll-Distanzen und Rotations-Augmentierung.
"""

from typing import Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.transform import Rotation

from geometry.modules.normalization import normalize_to_unit_cube
from pydantic_models.config.training_config import TrainingConfig
from pydantic_models.data.point_cloud import NormalizationTransform, PointCloud, QuerySet


class TrainSample(BaseModel):
    """Eingabewolke, Queries mit Soll-Distanzen, die angewandte Rotation und die Normierung."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    cloud: PointCloud
    queries: QuerySet
    rotation: np.ndarray = Field(default_factory=lambda: np.eye(3))
    normalization: Optional[NormalizationTransform] = None


def sample_scan(shape, n: int, noise_sigma: float, seed: int) -> PointCloud:
    """
    n flächengleichverteilte Oberflächenpunkte, entlang der Normalen um N(0, σ²) verschoben.
    Die Normalen der Wolke sind die exakten Oberflächennormalen.
    """
    if n < 1:
        raise ValueError(f"sample_scan benötigt n >= 1, erhalten: {n}")
    rng = np.random.default_rng(seed)
    points, normals = shape.sample_surface(n, rng)
    if noise_sigma > 0.0:
        points = points + normals * rng.normal(0.0, noise_sigma, size=(n, 1))
    return PointCloud(points=np.clip(points, -1.0, 1.0), normals=normals)


def sample_queries(shape, n_surface: int, n_uniform: int, offset_range: float, seed: int) -> QuerySet:
    """
    Oberflächen-Queries entlang der Normalen um t ~ U(-offset, offset) verschoben (Soll-Distanz t)
    und gleichverteilte Queries im Würfel [-1, 1]^3 (Soll-Distanz aus der analytischen SDF).
    """
    if n_surface < 0 or n_uniform < 0:
        raise ValueError(f"Anzahl Queries muss >= 0 sein, erhalten: {n_surface}/{n_uniform}")
    rng = np.random.default_rng(seed)
    surface, normals = shape.sample_surface(n_surface, rng) if n_surface else (np.zeros((0, 3)), np.zeros((0, 3)))
    offsets = rng.uniform(-offset_range, offset_range, size=n_surface)
    near = surface + normals * offsets[:, None]
    uniform = rng.uniform(-1.0, 1.0, size=(n_uniform, 3))
    points = np.concatenate([near, uniform])
    gt = np.concatenate([offsets, shape.sdf(uniform)])
    return QuerySet(points=points, gt_signed_distance=gt)


def random_rotation(seed: Optional[int]) -> np.ndarray:
    """Gleichverteilte Rotation (Haar-Mass auf SO(3))."""
    return Rotation.random(random_state=seed).as_matrix()


def rotate_sample(sample: TrainSample, rotation: np.ndarray) -> TrainSample:
    """Dreht Wolke, Normalen und Queries gemeinsam; Soll-Distanzen bleiben unverändert."""
    rot = np.asarray(rotation, dtype=np.float64)
    normals = None if sample.cloud.normals is None else sample.cloud.normals @ rot.T
    if normals is not None:
        normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    cloud = PointCloud(points=sample.cloud.points @ rot.T, normals=normals)
    queries = QuerySet(points=sample.queries.points @ rot.T, gt_signed_distance=sample.queries.gt_signed_distance)
    return TrainSample(cloud=cloud, queries=queries, rotation=rot @ sample.rotation)


def random_rotation_augment(sample: TrainSample, seed: Optional[int]) -> TrainSample:
    return rotate_sample(sample, random_rotation(seed))


def build_train_sample(shape, config: TrainingConfig, seed: int) -> TrainSample:
    """
    Ein Trainingsbeispiel: Scan, 1000 + 1000 Queries, optionale Rotation.
    Die Wolke wird wie bei der Rekonstruktion auf den Einheitswürfel normiert. Oberflächen-Queries
    laufen durch dieselbe Abbildung, Soll-Distanzen werden mit ihrem Faktor skaliert. Gleichverteilte
    Queries werden im normierten Würfel gezogen und für die Soll-Distanz zurück in den Formrahmen
    abgebildet. Queries ausserhalb des Würfels werden verworfen, danach werden num_train_queries
    Queries ohne Zurücklegen gezogen.
    """
    rng = np.random.default_rng(seed)
    scan_seed, query_seed, rot_seed, uniform_seed, pick_seed = (
        int(s) for s in rng.integers(0, 2**31 - 1, size=5)
    )
    cloud = sample_scan(shape, config.num_input_points, config.noise.sigma, scan_seed)
    near = sample_queries(shape, config.num_surface_queries, 0, config.query_offset, query_seed)
    sample = TrainSample(cloud=cloud, queries=near)
    if config.augment_rotation:
        sample = random_rotation_augment(sample, rot_seed)
    normalized, transform = normalize_to_unit_cube(
        sample.cloud.points, sample.cloud.normals, margin=config.normalization_margin
    )

    uniform = np.random.default_rng(uniform_seed).uniform(-1.0, 1.0, size=(config.num_uniform_queries, 3))
    # normiert -> rotiert -> Formrahmen
    uniform_shape = transform.invert(uniform) @ sample.rotation
    near_gt = sample.queries.gt_signed_distance
    if near_gt is None:
        raise ValueError("Trainings-Queries ohne Soll-Distanzen.")
    pts = np.concatenate([transform.apply(sample.queries.points), uniform])
    gt = np.concatenate([near_gt, shape.sdf(uniform_shape)]) * transform.scale

    inside = np.all(np.abs(pts) <= 1.0, axis=1)
    n_keep = min(config.num_train_queries, int(inside.sum()))
    pick = np.sort(np.random.default_rng(pick_seed).choice(np.flatnonzero(inside), size=n_keep, replace=False))
    if n_keep < config.num_train_queries:
        logger.debug(f"Nur {n_keep} Queries im Würfel, {config.num_train_queries} angefordert.")
    return TrainSample(
        cloud=normalized,
        queries=QuerySet(points=pts[pick], gt_signed_distance=gt[pick]),
        rotation=sample.rotation,
        normalization=transform,
    )

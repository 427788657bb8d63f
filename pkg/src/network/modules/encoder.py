"""
Merkmalsextraktion auf mehreren Skalen: Punktmerkmale über den lokalen Encoder,
Zellmerkmale über den Zell-Encoder mit kanalweisem Maximum pro Zelle.
Die Extraktion kennt keine Query-Punkte und kann für beliebig viele Query-Mengen wiederverwendet werden.
"""

from typing import List, Optional, Sequence, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict

from autodiff.modules import ops
from autodiff.modules.tensor import Tensor
from geometry.modules.cells import flat_cell_ids, to_cell_coordinates
from geometry.modules.spatial_hash import SpatialHashGrid, build_spatial_hash
from pydantic_models.config.model_config import ModelConfig, ScaleConfig
from pydantic_models.data.point_cloud import PointCloud

from .layers import Mlp, Module


class ScaleEncoder(Module):
    """
    Parameter einer Skala: lokaler Encoder (2-Schicht-MLP + Feature-Transform) und Zell-Encoder (3-Schicht-MLP).
    """

    def __init__(self, scale: int, config: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.scale = scale
        f1 = config.point_feature_size
        m, eps = config.batch_norm_momentum, config.batch_norm_eps
        self.local = Mlp([3, config.local_hidden, f1], rng, final_activation=True, momentum=m, eps=eps)
        self.transform: Optional[Mlp] = None
        if config.feature_transform:
            # letzte Schicht mit Nullen: die vorhergesagte Matrix startet als Identität
            self.transform = Mlp([f1, config.transform_hidden, f1 * f1], rng, zero_last=True, momentum=m, eps=eps)
        cell_widths = [f1, *config.cell_hidden, config.cell_feature_size]
        self.cell = Mlp(cell_widths, rng, final_activation=True, momentum=m, eps=eps)

    @property
    def point_feature_size(self) -> int:
        return self.local.out_features


class ScaleFeatures(BaseModel):
    """
    Merkmale einer Skala für einen Stapel von Wolken.

    Attribute:
        scale (int): Zellen pro Achse.
        grids (List[SpatialHashGrid]): Hash-Gitter pro Wolke (lokale Punktindizes).
        local_coords (np.ndarray): T_s(p) aller Punkte (P, 3).
        point_features (Tensor): F^l_s (P, F1).
        cell_features (Tensor): F^c_s (B·s³, F2), Nullzeilen für leere Zellen.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    scale: int
    grids: List[SpatialHashGrid]
    local_coords: np.ndarray
    point_features: Tensor
    cell_features: Tensor

    @property
    def grid(self) -> SpatialHashGrid:
        return self.grids[0]

    def cell_block(self, sample: int = 0) -> np.ndarray:
        """Dichte s³ × F2 Zellmerkmale einer Wolke."""
        n = self.scale**3
        return self.cell_features.data[sample * n : (sample + 1) * n]


class MultiScaleFeatures(BaseModel):
    """
    Vorberechnete Merkmale aller Skalen. point_offsets[b]:point_offsets[b+1] sind die Punkte der Wolke b.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    scales: List[ScaleFeatures]
    point_offsets: np.ndarray

    @property
    def batch_size(self) -> int:
        return len(self.point_offsets) - 1

    @property
    def scale_values(self) -> List[int]:
        return [sf.scale for sf in self.scales]

    def for_scale(self, scale: int) -> ScaleFeatures:
        for sf in self.scales:
            if sf.scale == scale:
                return sf
        raise KeyError(f"Skala {scale} nicht vorhanden, verfügbar: {self.scale_values}")


def _encode_local(local_coords: np.ndarray, segment_ids: np.ndarray, params: ScaleEncoder) -> Tensor:
    features = params.local(Tensor(local_coords))
    if params.transform is None:
        return features
    # Feature-Transform pro nicht-leerer Zelle: gepoolte Merkmale → F1×F1-Matrix (Identität + Vorhersage)
    present, compact = np.unique(segment_ids, return_inverse=True)
    compact = compact.reshape(-1)
    f1 = params.point_feature_size
    pooled = ops.segment_max(features, compact, len(present))
    delta = ops.reshape(params.transform(pooled), (len(present), f1, f1))
    mats = delta + np.eye(f1)
    return ops.segment_matmul(features, mats, compact)


def encode_points(points: Union[PointCloud, np.ndarray], scale: int, params: ScaleEncoder) -> Tensor:
    """
    Punktmerkmale F^l_s: Zeile i ist e^l_s(T_s(p_i)).
    Der Feature-Transform verwendet nur Punkte derselben Zelle.

    Args:
        points (PointCloud | np.ndarray): Normalisierte Punkte (P, 3).
        scale (int): Zellen pro Achse.
        params (ScaleEncoder): Parameter dieser Skala.

    Returns:
        Tensor: (P, F1).
    """
    pts = points.points if isinstance(points, PointCloud) else np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return _encode_local(to_cell_coordinates(pts, scale), flat_cell_ids(pts, scale), params)


def pool_cells(point_features: Tensor, cell_ids: np.ndarray, params: ScaleEncoder, num_cells: int) -> Tensor:
    """
    Zellmerkmale F^c_s: kanalweises Maximum von e^c_s über die Punkte jeder Zelle, Nullvektor für leere Zellen.

    Args:
        point_features (Tensor): F^l_s aus encode_points.
        cell_ids (np.ndarray): Zell-ID pro Punkt (bei Stapeln um b·s³ verschoben).
        params (ScaleEncoder): Parameter dieser Skala.
        num_cells (int): Anzahl Zeilen der Ausgabe.

    Returns:
        Tensor: (num_cells, F2).
    """
    return ops.segment_max(params.cell(point_features), cell_ids, num_cells)


def _check_scales(config: ScaleConfig, encoders: Sequence[ScaleEncoder]) -> None:
    available = [e.scale for e in encoders]
    if list(config.scales) != available:
        logger.error(f"Skalen {config.scales} passen nicht zu den Encoder-Parametern {available}.")
        raise ValueError(f"Skalen {config.scales} passen nicht zu den Encoder-Parametern {available}.")


def extract_multiscale(
    points: Union[PointCloud, Sequence[PointCloud]],
    config: ScaleConfig,
    encoders: Sequence[ScaleEncoder],
) -> MultiScaleFeatures:
    """
    encode_points und pool_cells für jede konfigurierte Skala.
    Mehrere Wolken werden gemeinsam kodiert (BatchNorm-Statistik über alle Punkte des Stapels),
    Zellen und Nachbarschaften bleiben pro Wolke getrennt.

    Args:
        points (PointCloud | Sequence[PointCloud]): Eine normalisierte Wolke oder ein Stapel.
        config (ScaleConfig): Skalen in derselben Reihenfolge wie encoders.
        encoders (Sequence[ScaleEncoder]): Parameter pro Skala.

    Returns:
        MultiScaleFeatures
    """
    clouds = [points] if isinstance(points, PointCloud) else list(points)
    if not clouds:
        raise ValueError("extract_multiscale benötigt mindestens eine Punktwolke.")
    _check_scales(config, encoders)
    for cloud in clouds:
        if len(cloud) == 0:
            raise ValueError("extract_multiscale: leere Punktwolke.")
    sizes = np.array([len(c) for c in clouds], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    all_points = np.concatenate([c.points for c in clouds], axis=0)
    sample_of_point = np.repeat(np.arange(len(clouds)), sizes)

    per_scale: List[ScaleFeatures] = []
    for params in encoders:
        s = params.scale
        n_cells = s**3
        grids = [build_spatial_hash(c, s) for c in clouds]
        cell_ids = np.concatenate([g.cell_ids for g in grids]) + sample_of_point * n_cells
        local_coords = to_cell_coordinates(all_points, s)
        point_features = _encode_local(local_coords, cell_ids, params)
        cell_features = pool_cells(point_features, cell_ids, params, len(clouds) * n_cells)
        logger.debug(
            f"Skala {s}: {len(all_points)} Punkte, {int(np.count_nonzero(np.bincount(cell_ids)))} belegte Zellen."
        )
        per_scale.append(
            ScaleFeatures(
                scale=s,
                grids=grids,
                local_coords=local_coords,
                point_features=point_features,
                cell_features=cell_features,
            )
        )
    return MultiScaleFeatures(scales=per_scale, point_offsets=offsets)

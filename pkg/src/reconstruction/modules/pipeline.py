"""
Rekonstruktion einer Oberfläche aus einer Punktwolke: Normieren, Merkmale einmal extrahieren,
Voxel nahe der Punkte auswerten, Vorzeichen ausbreiten, Marching Cubes, Rückabbildung.
"""

from typing import Dict, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from geometry.modules.normalization import normalize_to_unit_cube
from network.modules.encoder import MultiScaleFeatures
from network.modules.surfr_model import SurfRModel
from pydantic_models.config.reconstruction_config import ReconstructionConfig
from pydantic_models.data.point_cloud import PointCloud
from pydantic_models.data.triangle_mesh import TriangleMesh
from shared_modules.utils import stage_timer

from .marching_cubes import marching_cubes
from .sign_propagation import propagate_signs
from .voxel_grid import SparseSDFGrid, select_near_surface_voxels, voxel_centers


class ReconstructionResult(BaseModel):
    """
    Mesh in Welteinheiten und Kennzahlen der Rekonstruktion.
    timings enthält die Sekunden pro Stufe (normalize, encode, select, evaluate, propagate, extract, total).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mesh: TriangleMesh
    resolution: int
    timings: Dict[str, float] = Field(default_factory=dict)
    evaluated_voxels: int = 0
    propagation_passes: int = 0
    filled_voxels: int = 0
    fallback_voxels: int = 0

    def report(self) -> Dict[str, object]:
        """JSON-taugliche Zusammenfassung ohne Mesh-Daten."""
        return {
            "resolution": self.resolution,
            "vertices": int(len(self.mesh.vertices)),
            "faces": int(len(self.mesh.faces)),
            "evaluated_voxels": self.evaluated_voxels,
            "propagation_passes": self.propagation_passes,
            "filled_voxels": self.filled_voxels,
            "fallback_voxels": self.fallback_voxels,
            "timings": {k: round(v, 6) for k, v in self.timings.items()},
        }


def evaluate_sdf_batch(
    model: SurfRModel,
    msf: MultiScaleFeatures,
    centers: np.ndarray,
    batch_size: int = 16384,
) -> np.ndarray:
    """
    Wertet die SDF an den Voxelmittelpunkten blockweise aus; msf wird für alle Blöcke wiederverwendet.

    Returns:
        np.ndarray: Ein Wert pro Mittelpunkt.
    """
    pts = np.asarray(centers, dtype=np.float64).reshape(-1, 3)
    out = np.empty(pts.shape[0], dtype=np.float64)
    for start in range(0, pts.shape[0], batch_size):
        stop = min(pts.shape[0], start + batch_size)
        out[start:stop] = model.predict(msf, pts[start:stop])
    return out


class SurfaceReconstructor:
    """
    Führt die Rekonstruktions-Pipeline mit einem trainierten Modell aus.
    Das Modell wird in den Inferenzmodus gesetzt.
    """

    def __init__(self, model: SurfRModel, config: ReconstructionConfig):
        self.model = model
        self.config = config

    def reconstruct(self, cloud: Union[PointCloud, np.ndarray]) -> ReconstructionResult:
        """
        Args:
            cloud (PointCloud | np.ndarray): Eingabepunkte in Welteinheiten.

        Returns:
            ReconstructionResult
        """
        cfg = self.config
        r = cfg.resolution
        timings: Dict[str, float] = {}
        self.model.eval()
        raw = cloud.points if isinstance(cloud, PointCloud) else cloud
        with stage_timer(timings, "total"):
            with stage_timer(timings, "normalize"):
                normalized, transform = normalize_to_unit_cube(raw, margin=cfg.normalization_margin)
            with stage_timer(timings, "encode"):
                msf = self.model.extract(normalized)
            with stage_timer(timings, "select"):
                indices = select_near_surface_voxels(normalized, r, cfg.near_surface_radius)
            with stage_timer(timings, "evaluate"):
                values = evaluate_sdf_batch(self.model, msf, voxel_centers(indices, r), cfg.evaluation_batch_size)
            with stage_timer(timings, "propagate"):
                grid = SparseSDFGrid.from_samples(r, indices, values)
                propagated = propagate_signs(grid, cfg)
            with stage_timer(timings, "extract"):
                mesh = marching_cubes(propagated.values).transformed(transform)
        logger.info(
            f"Rekonstruktion R={r}: {len(indices)} Voxel ausgewertet, {len(mesh.faces)} Dreiecke, "
            f"{timings['total']:.2f} s."
        )
        return ReconstructionResult(
            mesh=mesh,
            resolution=r,
            timings=timings,
            evaluated_voxels=int(len(indices)),
            propagation_passes=propagated.passes,
            filled_voxels=propagated.filled,
            fallback_voxels=propagated.fallback,
        )


def reconstruct(
    model: SurfRModel, points: Union[PointCloud, np.ndarray], config: ReconstructionConfig
) -> ReconstructionResult:
    return SurfaceReconstructor(model, config).reconstruct(points)

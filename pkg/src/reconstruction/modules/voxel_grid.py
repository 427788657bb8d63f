"""
Voxelgitter über [-1, 1]^3: R Voxel pro Achse, Voxel i überdeckt [-1 + 2i/R, -1 + 2(i+1)/R).
"""

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import ndimage

from geometry.modules.cells import cell_indices
from pydantic_models.data.point_cloud import PointCloud


def voxel_size(resolution: int) -> float:
    return 2.0 / resolution


def voxel_centers(indices: np.ndarray, resolution: int) -> np.ndarray:
    """Mittelpunkte -1 + (i + 0.5)·2/R für (M, 3) Indizes."""
    return -1.0 + (np.asarray(indices, dtype=np.float64) + 0.5) * voxel_size(resolution)


class SparseSDFGrid(BaseModel):
    """
    Dünn ausgewertetes SDF-Gitter: known markiert ausgewertete Voxel, values enthält deren Werte
    (für leere Voxel 0, ohne Bedeutung).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    resolution: int = Field(ge=2)
    known: np.ndarray
    values: np.ndarray

    @model_validator(mode="after")
    def check_shapes(self) -> "SparseSDFGrid":
        shape = (self.resolution,) * 3
        if self.known.shape != shape or self.values.shape != shape:
            raise ValueError(
                f"SparseSDFGrid: inkompatible Formen {self.known.shape}/{self.values.shape} und {shape}"
            )
        return self

    @classmethod
    def from_samples(cls, resolution: int, indices: np.ndarray, values: np.ndarray) -> "SparseSDFGrid":
        known = np.zeros((resolution,) * 3, dtype=bool)
        dense = np.zeros((resolution,) * 3, dtype=np.float64)
        idx = np.asarray(indices, dtype=np.int64).reshape(-1, 3)
        known[idx[:, 0], idx[:, 1], idx[:, 2]] = True
        dense[idx[:, 0], idx[:, 1], idx[:, 2]] = np.asarray(values, dtype=np.float64).reshape(-1)
        return cls(resolution=resolution, known=known, values=dense)

    @property
    def num_known(self) -> int:
        return int(np.count_nonzero(self.known))

    def known_indices(self) -> np.ndarray:
        return np.argwhere(self.known)


def near_surface_mask(points: PointCloud, resolution: int, radius: int) -> np.ndarray:
    """
    Belegte Voxel, dilatiert um radius Voxel in Chebyshev-Distanz (Würfel-Nachbarschaft).
    Das Maximum-Filter ist separierbar und entspricht der binären Dilatation mit einem (2r+1)³-Würfel.
    """
    occupied = np.zeros((resolution,) * 3, dtype=np.uint8)
    ijk = cell_indices(points.points, resolution)
    occupied[ijk[:, 0], ijk[:, 1], ijk[:, 2]] = 1
    if radius == 0:
        return occupied.astype(bool)
    return ndimage.maximum_filter(occupied, size=2 * radius + 1, mode="constant", cval=0).astype(bool)


def select_near_surface_voxels(points: PointCloud, resolution: int, radius: int) -> np.ndarray:
    """
    Voxel mit Chebyshev-Abstand ≤ radius zu einem Voxel, das einen Eingabepunkt enthält.

    Returns:
        np.ndarray: (M, 3) Voxelindizes, lexikographisch sortiert.
    """
    if radius < 0:
        raise ValueError(f"radius muss >= 0 sein, erhalten: {radius}")
    return np.argwhere(near_surface_mask(points, resolution, radius))

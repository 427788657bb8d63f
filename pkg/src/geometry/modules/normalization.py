from typing import Tuple

import numpy as np
from loguru import logger

from pydantic_models.data.point_cloud import NormalizationTransform, PointCloud, as_point_array


def normalize_to_unit_cube(raw_points, normals=None, margin: float = 0.05) -> Tuple[PointCloud, NormalizationTransform]:
    """
    Zentriert die Punkte und skaliert sie gleichmässig, sodass die Bounding Box
    in [-(1-margin), 1-margin]^3 passt. Normalen bleiben bei gleichmässiger Skalierung unverändert.

    Args:
        raw_points: Liste von 3-Vektoren in Welteinheiten.
        normals: Optionale Normalen.
        margin (float): Randabstand (0 = die längste Achse füllt [-1, 1]).

    Returns:
        Tuple[PointCloud, NormalizationTransform]: Normierte Wolke und Transformation für die Rückabbildung.

    Raises:
        ValueError: Bei leerer Eingabe oder nicht-endlichen Koordinaten.
    """
    if raw_points is None or len(raw_points) == 0:
        logger.error("Leere Punktwolke kann nicht normiert werden.")
        raise ValueError("Punktwolke ist leer.")
    points = as_point_array(raw_points, "raw_points")
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    center = 0.5 * (lo + hi)
    extent = float(np.max(hi - lo))
    if extent <= 0.0:
        # alle Punkte identisch: reine Translation
        scale = 1.0
    else:
        scale = 2.0 * (1.0 - margin) / extent
    transform = NormalizationTransform(center=(float(center[0]), float(center[1]), float(center[2])), scale=scale)
    normalized = np.clip(transform.apply(points), -1.0, 1.0)
    logger.debug(f"Normierung: Zentrum={transform.center}, Skalierung={scale:.6g}, {len(points)} Punkte.")
    return PointCloud(points=normalized, normals=normals), transform

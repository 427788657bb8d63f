import numpy as np
from loguru import logger
from skimage import measure

from pydantic_models.data.triangle_mesh import TriangleMesh

from .voxel_grid import voxel_size


def marching_cubes(values: np.ndarray, level: float = 0.0) -> TriangleMesh:
    """
    Iso-Fläche eines dichten R³-Gitters von Voxelmittelpunkten (klassische 256-Fall-Tabelle,
    lineare Interpolation auf den Kanten). Vertices liegen in normierten Koordinaten [-1, 1]^3.
    Ein Gitter ohne Vorzeichenwechsel ergibt ein leeres Mesh.

    Args:
        values (np.ndarray): (R, R, R) Skalarfeld, negativ innen.
        level (float): Iso-Wert.

    Returns:
        TriangleMesh
    """
    volume = np.asarray(values, dtype=np.float64)
    if volume.ndim != 3 or len(set(volume.shape)) != 1:
        raise ValueError(f"marching_cubes erwartet ein kubisches Gitter, erhalten: {volume.shape}")
    if not (volume.min() < level < volume.max()):
        logger.warning("Gitter ohne Vorzeichenwechsel: leeres Mesh.")
        return TriangleMesh.empty()
    h = voxel_size(volume.shape[0])
    verts, faces, normals, _ = measure.marching_cubes(
        volume,
        level=level,
        spacing=(h, h, h),
        gradient_direction="ascent",
        allow_degenerate=False,
        method="lorensen",
    )
    verts = verts + (-1.0 + 0.5 * h)
    faces = faces.astype(np.int64)

    # Dreiecke mit numerisch verschwindender Fläche entfernen
    tri = verts[faces]
    areas = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    faces = faces[areas > 0.0]
    used, remap = np.unique(faces, return_inverse=True)
    faces = remap.reshape(-1, 3)
    logger.debug(f"Marching Cubes: {len(used)} Vertices, {len(faces)} Dreiecke.")
    return TriangleMesh(vertices=verts[used], faces=faces, vertex_normals=normals[used])

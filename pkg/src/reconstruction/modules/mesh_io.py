"""
Lesen und Schreiben von Dreiecksnetzen (OBJ mit v/f-Zeilen, PLY) über trimesh.
"""

from pathlib import Path

import numpy as np
import trimesh
from loguru import logger

from pydantic_models.data.triangle_mesh import TriangleMesh

MESH_SUFFIXES = (".obj", ".ply")


def write_mesh(mesh: TriangleMesh, path: Path) -> Path:
    """
    Schreibt das Mesh als OBJ (ASCII) oder PLY (binär), je nach Dateiendung.

    Raises:
        ValueError: Bei nicht unterstützter Endung.
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in MESH_SUFFIXES:
        logger.error(f"Nicht unterstütztes Mesh-Format: {suffix}")
        raise ValueError(f"Nicht unterstütztes Mesh-Format: {suffix} (erlaubt: {', '.join(MESH_SUFFIXES)})")
    path.parent.mkdir(parents=True, exist_ok=True)
    if mesh.is_empty:
        logger.warning(f"Leeres Mesh wird nach {path} geschrieben.")
        if suffix == ".obj":
            path.write_text("# leeres Mesh\n", encoding="ascii")
        else:
            header = "ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\n"
            header += "element face 0\nproperty list uchar int vertex_indices\nend_header\n"
            path.write_text(header, encoding="ascii")
        return path
    tm = mesh.to_trimesh()
    if suffix == ".obj":
        data = tm.export(file_type="obj", include_normals=False, include_texture=False)
        path.write_text(data if isinstance(data, str) else data.decode("ascii"), encoding="ascii")
    else:
        path.write_bytes(tm.export(file_type="ply", encoding="binary"))
    logger.info(f"Mesh mit {len(mesh.vertices)} Vertices und {len(mesh.faces)} Dreiecken nach {path} geschrieben.")
    return path


def read_mesh(path: Path) -> TriangleMesh:
    """
    Liest ein Dreiecksnetz; degenerierte Dreiecke werden verworfen.

    Raises:
        FileNotFoundError: Wenn die Datei fehlt.
        ValueError: Bei nicht unterstützter Endung.
    """
    path = Path(path)
    if not path.exists():
        logger.error(f"Mesh nicht gefunden: {path}")
        raise FileNotFoundError(f"Mesh nicht gefunden: {path}")
    if path.suffix.lower() not in MESH_SUFFIXES:
        raise ValueError(f"Nicht unterstütztes Mesh-Format: {path.suffix}")
    try:
        loaded = trimesh.load(path, force="mesh", process=False)
    except Exception as e:
        logger.error(f"Mesh {path} konnte nicht gelesen werden: {e}")
        raise ValueError(f"Mesh {path} konnte nicht gelesen werden: {e}") from e
    vertices = np.asarray(getattr(loaded, "vertices", np.zeros((0, 3))), dtype=np.float64).reshape(-1, 3)
    faces = np.asarray(getattr(loaded, "faces", np.zeros((0, 3))), dtype=np.int64).reshape(-1, 3)
    if faces.size == 0:
        return TriangleMesh.empty()
    tri = vertices[faces]
    areas = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    distinct = (faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2]) & (faces[:, 0] != faces[:, 2])
    keep = distinct & (areas > 0.0)
    if not np.all(keep):
        logger.warning(f"{int(np.sum(~keep))} degenerierte Dreiecke in {path.name} verworfen.")
    return TriangleMesh(vertices=vertices, faces=faces[keep])

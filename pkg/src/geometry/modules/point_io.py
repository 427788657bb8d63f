"""
Lesen und Schreiben von Punktwolken: ASCII-XYZ ("x y z [nx ny nz]" pro Zeile)
und PLY (ASCII oder binär) mit Positionen und optionalen Normalen.
"""

from pathlib import Path
from typing import Optional

import numpy as np
import open3d as o3d
from loguru import logger

from pydantic_models.data.point_cloud import PointCloud


def _unit_normals(normals: Optional[np.ndarray]) -> Optional[np.ndarray]:
    """Normiert eingelesene Normalen; Nullvektoren werden verworfen (ganze Spalte None)."""
    if normals is None:
        return None
    lengths = np.linalg.norm(normals, axis=1, keepdims=True)
    if np.any(lengths == 0.0):
        logger.warning("Normalen mit Länge 0 gefunden, Normalen werden ignoriert.")
        return None
    return normals / lengths


def read_xyz(path: Path) -> PointCloud:
    data = np.loadtxt(path, dtype=np.float64, ndmin=2, comments="#")
    if data.shape[1] not in (3, 6):
        raise ValueError(f"XYZ-Datei {path} muss 3 oder 6 Spalten haben, gefunden: {data.shape[1]}")
    normals = _unit_normals(data[:, 3:6]) if data.shape[1] == 6 else None
    return PointCloud(points=data[:, :3], normals=normals)


def write_xyz(cloud: PointCloud, path: Path) -> None:
    data = cloud.points if cloud.normals is None else np.hstack([cloud.points, cloud.normals])
    np.savetxt(path, data, fmt="%.9g")


def read_ply_points(path: Path) -> PointCloud:
    pcd = o3d.io.read_point_cloud(str(path), format="ply")
    points = np.asarray(pcd.points, dtype=np.float64)
    normals = _unit_normals(np.asarray(pcd.normals, dtype=np.float64)) if pcd.has_normals() else None
    return PointCloud(points=points.reshape(-1, 3), normals=normals)


def write_ply_points(cloud: PointCloud, path: Path, binary: bool = True) -> None:
    pcd = o3d.geometry.PointCloud()
    pcd.points = o3d.utility.Vector3dVector(np.array(cloud.points))
    if cloud.normals is not None:
        pcd.normals = o3d.utility.Vector3dVector(np.array(cloud.normals))
    if not o3d.io.write_point_cloud(str(path), pcd, write_ascii=not binary):
        logger.error(f"PLY-Datei konnte nicht geschrieben werden: {path}")
        raise OSError(f"PLY-Datei konnte nicht geschrieben werden: {path}")


def read_point_cloud(path: Path) -> PointCloud:
    """
    Liest eine Punktwolke anhand der Dateiendung (.xyz/.txt oder .ply).
    """
    path = Path(path)
    if not path.exists():
        logger.error(f"Punktwolke nicht gefunden: {path}")
        raise FileNotFoundError(f"Punktwolke nicht gefunden: {path}")
    suffix = path.suffix.lower()
    if suffix in (".xyz", ".txt", ".xyzn"):
        cloud = read_xyz(path)
    elif suffix == ".ply":
        cloud = read_ply_points(path)
    else:
        raise ValueError(f"Nicht unterstütztes Punktwolkenformat: {suffix}")
    if len(cloud) == 0:
        raise ValueError(f"Punktwolke {path} ist leer.")
    logger.info(f"{len(cloud)} Punkte aus {path.name} gelesen.")
    return cloud


def write_point_cloud(cloud: PointCloud, path: Path) -> None:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in (".xyz", ".txt", ".xyzn"):
        write_xyz(cloud, path)
    elif suffix == ".ply":
        write_ply_points(cloud, path)
    else:
        raise ValueError(f"Nicht unterstütztes Punktwolkenformat: {suffix}")
    logger.debug(f"{len(cloud)} Punkte nach {path} geschrieben.")

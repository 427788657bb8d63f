"""
Mesh-Vergleich über Oberflächenpunkte: Chamfer-L2 (×100) und Normalenkonsistenz.
"""

from typing import Dict, Optional, Tuple

import numpy as np
import trimesh
from loguru import logger
from scipy.spatial import cKDTree

from pydantic_models.data.metric_report import MetricReport
from pydantic_models.data.triangle_mesh import TriangleMesh


def sample_mesh_surface(mesh: TriangleMesh, n_samples: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    n flächengleichverteilte Punkte und die Normalen der getroffenen Dreiecke.
    """
    points, face_index = trimesh.sample.sample_surface(mesh.to_trimesh(), n_samples, seed=seed)
    return np.asarray(points, dtype=np.float64), mesh.face_normals()[face_index]


def nearest_neighbors(reference: np.ndarray, queries: np.ndarray, workers: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """Quadrierte Distanz und Index des nächsten Referenzpunkts pro Query (kd-Baum)."""
    dist, idx = cKDTree(reference).query(queries, k=1, workers=workers)
    return np.asarray(dist) ** 2, np.asarray(idx, dtype=np.int64)


def brute_force_nearest(reference: np.ndarray, queries: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vergleichsimplementierung ohne Beschleunigung."""
    d2 = ((queries[:, None, :] - reference[None, :, :]) ** 2).sum(axis=-1)
    idx = np.argmin(d2, axis=1)
    return d2[np.arange(len(queries)), idx], idx


def _check_nonempty(mesh_a: TriangleMesh, mesh_b: TriangleMesh) -> Optional[str]:
    if mesh_a.is_empty and mesh_b.is_empty:
        return "beide Meshes sind leer"
    if mesh_a.is_empty:
        return "erstes Mesh ist leer"
    if mesh_b.is_empty:
        return "zweites Mesh ist leer"
    return None


def _samples(
    mesh_a: TriangleMesh, mesh_b: TriangleMesh, n_samples: int, seed: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    pa, na = sample_mesh_surface(mesh_a, n_samples, seed)
    pb, nb = sample_mesh_surface(mesh_b, n_samples, seed)
    return pa, na, pb, nb


def _chamfer(pa: np.ndarray, pb: np.ndarray, workers: int) -> Tuple[float, np.ndarray, np.ndarray]:
    d_ab, i_ab = nearest_neighbors(pb, pa, workers)
    d_ba, i_ba = nearest_neighbors(pa, pb, workers)
    return 100.0 * (float(d_ab.mean()) + float(d_ba.mean())), i_ab, i_ba


def _consistency(na: np.ndarray, nb: np.ndarray, i_ab: np.ndarray, i_ba: np.ndarray) -> float:
    dot_ab = np.abs(np.sum(na * nb[i_ab], axis=1))
    dot_ba = np.abs(np.sum(nb * na[i_ba], axis=1))
    return float(np.clip(0.5 * (dot_ab.mean() + dot_ba.mean()), -1.0, 1.0))


def chamfer_l2(
    mesh_a: TriangleMesh, mesh_b: TriangleMesh, n_samples: int = 10000, seed: int = 0, workers: int = 1
) -> float:
    """
    mean_a min_b ‖a-b‖² + mean_b min_a ‖b-a‖², multipliziert mit 100.

    Raises:
        ValueError: Wenn ein Mesh leer ist.
    """
    failure = _check_nonempty(mesh_a, mesh_b)
    if failure:
        logger.error(f"Chamfer-Distanz nicht definiert: {failure}")
        raise ValueError(f"Chamfer-Distanz nicht definiert: {failure}")
    pa, _, pb, _ = _samples(mesh_a, mesh_b, n_samples, seed)
    return _chamfer(pa, pb, workers)[0]


def normal_consistency(
    mesh_a: TriangleMesh, mesh_b: TriangleMesh, n_samples: int = 10000, seed: int = 0, workers: int = 1
) -> float:
    """
    Mittel beider Richtungen von |n_x · n_nächster(x)| mit Dreiecksnormalen an den Abtastpunkten.

    Raises:
        ValueError: Wenn ein Mesh leer ist.
    """
    failure = _check_nonempty(mesh_a, mesh_b)
    if failure:
        logger.error(f"Normalenkonsistenz nicht definiert: {failure}")
        raise ValueError(f"Normalenkonsistenz nicht definiert: {failure}")
    pa, na, pb, nb = _samples(mesh_a, mesh_b, n_samples, seed)
    _, i_ab, i_ba = _chamfer(pa, pb, workers)
    return _consistency(na, nb, i_ab, i_ba)


def evaluate_meshes(
    predicted: TriangleMesh,
    reference: TriangleMesh,
    n_samples: int = 10000,
    seed: int = 0,
    timings: Optional[Dict[str, float]] = None,
    workers: int = 1,
) -> MetricReport:
    """
    Beide Metriken aus denselben Abtastpunkten. Leere Meshes ergeben einen Report mit failure.
    """
    failure = _check_nonempty(predicted, reference)
    if failure:
        logger.warning(f"Auswertung fehlgeschlagen: {failure}")
        return MetricReport(num_samples=n_samples, timings=timings or {}, failure=failure)
    pa, na, pb, nb = _samples(predicted, reference, n_samples, seed)
    cd, i_ab, i_ba = _chamfer(pa, pb, workers)
    nc = _consistency(na, nb, i_ab, i_ba)
    logger.info(f"Chamfer-L2 ×100: {cd:.4f}, Normalenkonsistenz: {nc:.4f}")
    return MetricReport(chamfer_l2_x100=cd, normal_consistency=nc, num_samples=n_samples, timings=timings or {})

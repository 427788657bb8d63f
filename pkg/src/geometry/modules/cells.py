import numpy as np

from pydantic_models.data.cell_index import CellIndex

# Toleranz für Punkte, die numerisch knapp ausserhalb des Würfels liegen
CUBE_TOLERANCE = 1e-9


def _check_in_cube(points: np.ndarray) -> None:
    if np.any(np.abs(points) > 1.0 + CUBE_TOLERANCE):
        worst = float(np.max(np.abs(points)))
        raise ValueError(f"Punkt ausserhalb von [-1, 1]^3 (max |x| = {worst:.6g}).")


def cell_indices(points, scale: int) -> np.ndarray:
    """
    Zellindizes ijk = floor((x + 1)·s/2) pro Komponente, an der oberen Würfelgrenze auf s-1 begrenzt.
    Zellen sind halboffen [lo, hi), nur die letzte Zelle ist bei +1 geschlossen.

    Returns:
        np.ndarray: (N, 3) int64.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    _check_in_cube(pts)
    ijk = np.floor((pts + 1.0) * (scale / 2.0)).astype(np.int64)
    return np.clip(ijk, 0, scale - 1)


def flat_cell_ids(points, scale: int) -> np.ndarray:
    """Lineare Zell-IDs i·s² + j·s + k."""
    ijk = cell_indices(points, scale)
    return (ijk[:, 0] * scale + ijk[:, 1]) * scale + ijk[:, 2]


def cell_of(point, scale: int) -> CellIndex:
    ijk = cell_indices(point, scale)[0]
    return CellIndex(scale=scale, ijk=(int(ijk[0]), int(ijk[1]), int(ijk[2])))


def cell_centers(ijk: np.ndarray, scale: int) -> np.ndarray:
    return -1.0 + (np.asarray(ijk, dtype=np.float64) + 0.5) * (2.0 / scale)


def to_cell_coordinates(points, scale: int) -> np.ndarray:
    """
    T_s(x) = s·(x - Zellmitte): lokale Koordinaten in [-1, 1]^3 der enthaltenden Zelle.
    Akzeptiert einen einzelnen 3-Vektor oder ein (N, 3)-Array und gibt die gleiche Form zurück.
    """
    arr = np.asarray(points, dtype=np.float64)
    pts = arr.reshape(-1, 3)
    local = scale * (pts - cell_centers(cell_indices(pts, scale), scale))
    return local.reshape(arr.shape)

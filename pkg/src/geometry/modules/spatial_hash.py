from typing import Dict, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from pydantic_models.data.cell_index import CellIndex
from pydantic_models.data.point_cloud import PointCloud

from .cells import flat_cell_ids

# Obergrenze der Einträge (Queries × Kandidaten) pro Distanzblock
_KNN_BLOCK_ENTRIES = 2_000_000


class SpatialHashGrid(BaseModel):
    """
    Gleichförmiges Hash-Gitter auf einer Skala: Punktindizes pro Zelle im CSR-Layout.
    Die Indizes einer Zelle stehen aufsteigend in order[starts[c]:starts[c+1]].
    Die Vereinigung aller Buckets ist die Indexmenge der Wolke, die Buckets sind disjunkt.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    scale: int
    points: np.ndarray
    cell_ids: np.ndarray
    order: np.ndarray
    starts: np.ndarray

    @property
    def num_cells(self) -> int:
        return self.scale**3

    def bucket(self, cell: Union[int, CellIndex]) -> np.ndarray:
        c = cell.flat if isinstance(cell, CellIndex) else int(cell)
        return self.order[self.starts[c] : self.starts[c + 1]]

    def bucket_sizes(self) -> np.ndarray:
        return np.diff(self.starts)

    def buckets(self) -> Dict[int, np.ndarray]:
        """Nur nicht-leere Buckets, nach Zell-ID."""
        sizes = self.bucket_sizes()
        return {int(c): self.bucket(int(c)) for c in np.flatnonzero(sizes)}


def build_spatial_hash(points: Union[PointCloud, np.ndarray], scale: int) -> SpatialHashGrid:
    """
    Verteilt jeden Punktindex in genau den Bucket seiner Zelle (cell_of).
    """
    pts = points.points if isinstance(points, PointCloud) else np.asarray(points, dtype=np.float64)
    ids = flat_cell_ids(pts, scale)
    order = np.argsort(ids, kind="stable")
    counts = np.bincount(ids, minlength=scale**3)
    starts = np.zeros(scale**3 + 1, dtype=np.int64)
    np.cumsum(counts, out=starts[1:])
    return SpatialHashGrid(scale=scale, points=pts, cell_ids=ids, order=order, starts=starts)


def _select_k(d2: np.ndarray, candidates: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Wählt pro Zeile die k kleinsten Distanzen; Gleichstände nach aufsteigendem Punktindex.
    candidates ist aufsteigend sortiert, daher entspricht die Spaltenreihenfolge der Indexreihenfolge.
    """
    n = d2.shape[1]
    if k >= n:
        cols = np.argsort(d2, axis=1, kind="stable")
    else:
        part = np.argpartition(d2, k - 1, axis=1)[:, :k]
        part.sort(axis=1)
        sub = np.take_along_axis(d2, part, axis=1)
        cols = np.take_along_axis(part, np.argsort(sub, axis=1, kind="stable"), axis=1)
        # Gleichstand an der k-ten Stelle: die Auswahl von argpartition ist dann nicht eindeutig
        ties = np.sum(d2 <= sub.max(axis=1)[:, None], axis=1) > k
        if np.any(ties):
            rows = np.flatnonzero(ties)
            cols[rows] = np.argsort(d2[rows], axis=1, kind="stable")[:, :k]
    return candidates[cols], np.take_along_axis(d2, cols, axis=1)


def knn_in_cell(query, cell: Union[int, CellIndex], k: int, grid: SpatialHashGrid) -> np.ndarray:
    """
    Bis zu k Indizes der Punkte in der Zelle, aufsteigend nach euklidischer Distanz zum Query.
    Leere Zelle → leere Liste; weniger als k Bewohner → alle Bewohner.
    """
    candidates = grid.bucket(cell)
    if candidates.size == 0:
        return np.zeros(0, dtype=np.int64)
    q = np.asarray(query, dtype=np.float64).reshape(1, 3)
    d2 = ((q - grid.points[candidates]) ** 2).sum(axis=-1)[None, :]
    idx, _ = _select_k(d2, candidates, k)
    return idx[0]


def knn_batch(queries: np.ndarray, grid: SpatialHashGrid, k: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    kNN für viele Queries, jeweils beschränkt auf die Zelle des Queries.
    Zellen werden unabhängig voneinander verarbeitet.

    Returns:
        Tuple: indices (Q, k) mit -1 aufgefüllt, quadrierte Distanzen (Q, k) mit 0 aufgefüllt,
        Anzahl gefundener Nachbarn (Q,).
    """
    q = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
    n_q = q.shape[0]
    indices = np.full((n_q, k), -1, dtype=np.int64)
    dists = np.zeros((n_q, k), dtype=np.float64)
    counts = np.zeros(n_q, dtype=np.int64)
    if n_q == 0:
        return indices, dists, counts

    q_cells = flat_cell_ids(q, grid.scale)
    q_order = np.argsort(q_cells, kind="stable")
    sorted_cells = q_cells[q_order]
    unique_cells, first = np.unique(sorted_cells, return_index=True)
    bounds = np.append(first, n_q)
    for c, lo, hi in zip(unique_cells, bounds[:-1], bounds[1:]):
        candidates = grid.bucket(int(c))
        if candidates.size == 0:
            continue
        cand_pts = grid.points[candidates]
        k_eff = min(k, candidates.size)
        chunk = max(1, _KNN_BLOCK_ENTRIES // candidates.size)
        for start in range(lo, hi, chunk):
            rows = q_order[start : min(hi, start + chunk)]
            diff = q[rows][:, None, :] - cand_pts[None, :, :]
            d2 = (diff**2).sum(axis=-1)
            idx, sel = _select_k(d2, candidates, k_eff)
            indices[rows, :k_eff] = idx
            dists[rows, :k_eff] = sel
            counts[rows] = k_eff
    return indices, dists, counts

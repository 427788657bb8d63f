"""
Verbindet vorberechnete Merkmale mit Query-Punkten: pro Skala die Zeile
[T_s(q), f^c_s, f^N_s, p̄^N_s] der Breite 3 + F2 + F1 + 3.
Nachbarn werden nur innerhalb der Zelle des Queries gesucht.
"""

from typing import List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from autodiff.modules import ops
from autodiff.modules.tensor import Tensor
from geometry.modules.cells import flat_cell_ids, to_cell_coordinates
from geometry.modules.spatial_hash import knn_batch
from pydantic_models.config.model_config import ScaleConfig, Weighting
from pydantic_models.data.point_cloud import QuerySet

from .encoder import MultiScaleFeatures, ScaleFeatures

# Nachbarn näher als 1e-12 gelten als deckungsgleich mit dem Query (Vergleich auf quadrierten Distanzen)
COINCIDENT_DISTANCE_SQ = 1e-24


class QueryFeatureBatch(BaseModel):
    """
    Query-Merkmale pro Skala, jeweils (Q, F) mit F = 6 + F1 + F2.
    neighbor_counts enthält pro Skala die Anzahl gefundener Nachbarn (0 für leere Zellen).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    scales: List[int]
    features: List[Tensor]
    neighbor_counts: List[np.ndarray]

    @property
    def num_queries(self) -> int:
        return self.features[0].shape[0] if self.features else 0

    @property
    def feature_size(self) -> int:
        return self.features[0].shape[1]


def _interp_nn(d2: np.ndarray, valid: np.ndarray) -> np.ndarray:
    coincident = valid & (d2 < COINCIDENT_DISTANCE_SQ)
    with np.errstate(divide="ignore"):
        sims = np.where(valid & ~coincident, 1.0 / np.where(valid, d2, 1.0), 0.0)
    total = sims.sum(axis=1, keepdims=True)
    weights = sims / np.where(total > 0, total, 1.0)
    hit_rows = np.flatnonzero(coincident.any(axis=1))
    if hit_rows.size:
        # deckungsgleicher Nachbar: Grenzwert der Gewichtung, der erste nach Rang erhält 1
        weights[hit_rows] = 0.0
        weights[hit_rows, np.argmax(coincident[hit_rows], axis=1)] = 1.0
    return weights


def neighbor_weights(
    d2: np.ndarray,
    counts: np.ndarray,
    weighting: Weighting,
    logits: Optional[Tensor] = None,
) -> Tensor:
    """
    Gewichte der K Nachbarn pro Query, normiert auf Summe 1 über die tatsächlich gefundenen Nachbarn.
    Queries ohne Nachbarn erhalten Nullgewichte.

    Args:
        d2 (np.ndarray): Quadrierte Distanzen (Q, K), nach Rang sortiert.
        counts (np.ndarray): Gefundene Nachbarn pro Query (Q,).
        weighting (Weighting): InterpNN (1/d²), EW (1/Anzahl) oder LW (Softmax über Rang-Logits).
        logits (Tensor, optional): K lernbare Logits für LW; ohne Logits gleichverteilt.

    Returns:
        Tensor: (Q, K).
    """
    q, k = d2.shape
    valid = np.arange(k)[None, :] < np.asarray(counts)[:, None]
    if weighting == Weighting.INTERP_NN:
        return Tensor(_interp_nn(d2, valid))
    if weighting == Weighting.EQUAL_WEIGHT:
        n = valid.sum(axis=1, keepdims=True)
        return Tensor(valid / np.where(n > 0, n, 1))
    rank_logits = logits if logits is not None else Tensor(np.zeros(k))
    if rank_logits.shape != (k,):
        raise ValueError(f"LW-Logits: inkompatible Formen {rank_logits.shape} und {(k,)}")
    return ops.softmax(ops.add(np.zeros((q, k)), rank_logits), axis=-1, mask=valid)


def interp_weights(
    query,
    neighbor_points,
    weighting: Union[Weighting, str],
    logits: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Gewichte der Nachbarn eines einzelnen Queries; Nachbarn in Rangfolge.

    Raises:
        ValueError: Ohne Nachbarn.
    """
    q = np.asarray(query, dtype=np.float64).reshape(3)
    nbrs = np.asarray(neighbor_points, dtype=np.float64).reshape(-1, 3)
    n = nbrs.shape[0]
    if n == 0:
        raise ValueError("interp_weights benötigt mindestens einen Nachbarn.")
    d2 = ((nbrs - q) ** 2).sum(axis=-1)[None, :]
    rank_logits = None if logits is None else Tensor(np.asarray(logits, dtype=np.float64)[:n])
    return neighbor_weights(d2, np.array([n]), Weighting(weighting), rank_logits).data[0]


def mean_nn_feature(weights, neighbor_features) -> np.ndarray:
    """Σ_i w_i · f_i; ohne Nachbarn der Nullvektor."""
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    f = np.asarray(neighbor_features, dtype=np.float64)
    if w.size == 0:
        return np.zeros(f.shape[-1] if f.ndim == 2 else 0)
    return np.einsum("k,kf->f", w, f.reshape(w.size, -1))


def mean_relative_nn_position(query, neighbor_points, weights, scale: int) -> np.ndarray:
    """s · Σ_i w_i (p_i - q); ohne Nachbarn der Nullvektor."""
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.size == 0:
        return np.zeros(3)
    rel = np.asarray(neighbor_points, dtype=np.float64).reshape(-1, 3) - np.asarray(query, dtype=np.float64)
    return scale * np.einsum("k,kd->d", w, rel)


def _sample_scale(
    q: np.ndarray,
    sample_ids: np.ndarray,
    sf: ScaleFeatures,
    offsets: np.ndarray,
    k: int,
    weighting: Weighting,
    logits: Optional[Tensor],
) -> tuple[Tensor, np.ndarray]:
    s = sf.scale
    n_q = q.shape[0]
    local = to_cell_coordinates(q, s)
    global_cells = sample_ids * s**3 + flat_cell_ids(q, s)
    f_c = ops.gather_rows(sf.cell_features, global_cells)

    indices = np.zeros((n_q, k), dtype=np.int64)
    d2 = np.zeros((n_q, k))
    counts = np.zeros(n_q, dtype=np.int64)
    rel = np.zeros((n_q, k, 3))
    for b in np.unique(sample_ids):
        rows = np.flatnonzero(sample_ids == b)
        grid = sf.grids[int(b)]
        idx, dist, cnt = knn_batch(q[rows], grid, k)
        found = idx >= 0
        safe = np.where(found, idx, 0)
        indices[rows] = np.where(found, safe + offsets[b], 0)
        d2[rows] = dist
        counts[rows] = cnt
        rel[rows] = np.where(found[..., None], grid.points[safe] - q[rows][:, None, :], 0.0)

    w = neighbor_weights(d2, counts, weighting, logits)
    f_nn = ops.weighted_sum(w, ops.gather_rows(sf.point_features, indices))
    p_rel = ops.scale_by_scalar(ops.weighted_sum(w, rel), float(s))
    return ops.concat([local, f_c, f_nn, p_rel], axis=-1), counts


def sample_query_features(
    queries: Union[QuerySet, np.ndarray],
    msf: MultiScaleFeatures,
    config: ScaleConfig,
    lw_logits: Optional[Sequence[Tensor]] = None,
    sample_ids: Optional[np.ndarray] = None,
) -> QueryFeatureBatch:
    """
    Query-Merkmale aller Skalen; msf wird nicht verändert.

    Args:
        queries (QuerySet | np.ndarray): Normalisierte Query-Punkte (Q, 3).
        msf (MultiScaleFeatures): Vorberechnete Merkmale derselben normalisierten Wolke(n).
        config (ScaleConfig): Skalen, K und Gewichtung.
        lw_logits (Sequence[Tensor], optional): Rang-Logits pro Skala für LW.
        sample_ids (np.ndarray, optional): Wolke pro Query bei Stapeln, sonst 0.

    Returns:
        QueryFeatureBatch

    Raises:
        ValueError: Wenn ein Query ausserhalb von [-1, 1]^3 liegt oder die Skalen nicht passen.
    """
    q = queries.points if isinstance(queries, QuerySet) else np.asarray(queries, dtype=np.float64).reshape(-1, 3)
    if list(config.scales) != msf.scale_values:
        raise ValueError(f"Skalen {config.scales} passen nicht zu den Merkmalen {msf.scale_values}.")
    ids = np.zeros(q.shape[0], dtype=np.int64) if sample_ids is None else np.asarray(sample_ids, dtype=np.int64)
    if ids.shape != (q.shape[0],) or (ids.size and (ids.min() < 0 or ids.max() >= msf.batch_size)):
        raise ValueError(f"sample_ids passen nicht zu {q.shape[0]} Queries und {msf.batch_size} Wolken.")

    features: List[Tensor] = []
    counts: List[np.ndarray] = []
    for i, sf in enumerate(msf.scales):
        logits = lw_logits[i] if lw_logits is not None else None
        row, cnt = _sample_scale(q, ids, sf, msf.point_offsets, config.knn_k, Weighting(config.weighting), logits)
        features.append(row)
        counts.append(cnt)
    return QueryFeatureBatch(scales=msf.scale_values, features=features, neighbor_counts=counts)

"""
Tests für die Nachbargewichte und das Sampling der Query-Merkmale.
"""

import numpy as np
import pytest

from autodiff.modules.tensor import Tensor
from geometry.modules.cells import cell_of, to_cell_coordinates
from geometry.modules.spatial_hash import knn_in_cell
from network.modules.query_sampler import (
    interp_weights,
    mean_nn_feature,
    mean_relative_nn_position,
    neighbor_weights,
    sample_query_features,
)
from network.modules.surfr_model import SurfRModel
from pydantic_models.config.model_config import ModelConfig, Weighting
from pydantic_models.data.point_cloud import PointCloud

from .conftest import random_cloud, tiny_model_config

# --- Gewichte ---


@pytest.mark.parametrize("weighting", list(Weighting))
def test_single_neighbor_gets_full_weight(weighting) -> None:
    """Ein Nachbar → Gewicht [1]."""
    np.testing.assert_allclose(interp_weights((0, 0, 0), [[0.1, 0.0, 0.0]], weighting), [1.0])


@pytest.mark.parametrize("weighting", list(Weighting))
def test_equidistant_neighbors_share_weight(weighting) -> None:
    """Zwei gleich weit entfernte Nachbarn → [0.5, 0.5]."""
    w = interp_weights((0, 0, 0), [[0.1, 0.0, 0.0], [0.0, -0.1, 0.0]], weighting)
    np.testing.assert_allclose(w, [0.5, 0.5], atol=1e-12)


def test_interp_nn_inverse_squared_distance() -> None:
    """Distanzen 1 und 2 → Gewichte (1, 1/4)/(5/4) = (0.8, 0.2)."""
    w = interp_weights((0, 0, 0), [[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]], Weighting.INTERP_NN)
    np.testing.assert_allclose(w, [0.8, 0.2], atol=1e-12)


def test_interp_nn_coincident_neighbor_takes_all() -> None:
    """Ein deckungsgleicher Nachbar erhält das ganze Gewicht."""
    w = interp_weights((0.2, 0.2, 0.2), [[0.2, 0.2, 0.2], [0.3, 0.2, 0.2]], Weighting.INTERP_NN)
    np.testing.assert_array_equal(w, [1.0, 0.0])


def test_learned_weights_follow_rank_logits() -> None:
    """LW: Softmax über die Rang-Logits, unabhängig von der Distanz."""
    logits = np.array([np.log(3.0), 0.0, 5.0])
    w = interp_weights((0, 0, 0), [[0.1, 0, 0], [0.5, 0, 0]], Weighting.LEARNED_WEIGHT, logits)
    np.testing.assert_allclose(w, [0.75, 0.25], atol=1e-12)


def test_interp_weights_requires_neighbors() -> None:
    """Ohne Nachbarn ist interp_weights nicht definiert."""
    with pytest.raises(ValueError):
        interp_weights((0, 0, 0), np.zeros((0, 3)), Weighting.EQUAL_WEIGHT)


@pytest.mark.parametrize("weighting", list(Weighting))
def test_weights_sum_to_one(weighting) -> None:
    """Für jede Konfiguration mit mindestens einem Nachbarn summieren die Gewichte zu 1."""
    rng = np.random.default_rng(0)
    k = 8
    counts = rng.integers(1, k + 1, size=10_000)
    d2 = np.sort(rng.uniform(0.0, 0.3, size=(10_000, k)), axis=1)
    d2[np.arange(k)[None, :] >= counts[:, None]] = 0.0
    logits = Tensor(rng.normal(size=k)) if weighting == Weighting.LEARNED_WEIGHT else None
    w = neighbor_weights(d2, counts, weighting, logits).data
    np.testing.assert_allclose(w.sum(axis=1), np.ones(10_000), atol=1e-9)
    assert np.all(w[np.arange(k)[None, :] >= counts[:, None]] == 0.0)


def test_no_neighbors_gives_zero_weights() -> None:
    """Queries ohne Nachbarn erhalten Nullgewichte."""
    for weighting in Weighting:
        w = neighbor_weights(np.zeros((2, 4)), np.array([0, 0]), weighting).data
        np.testing.assert_array_equal(w, np.zeros((2, 4)))


# --- Aggregation ---


def test_mean_nn_feature_identity_for_single_neighbor() -> None:
    """Ein Nachbar mit Gewicht 1 → sein Merkmal."""
    f = np.array([[0.3, -1.0, 2.5]])
    np.testing.assert_array_equal(mean_nn_feature([1.0], f), f[0])
    np.testing.assert_array_equal(mean_nn_feature([], np.zeros((0, 3))), np.zeros(3))


def test_mean_relative_position_is_scaled() -> None:
    """Nachbar bei q + (0.1, 0, 0) auf Skala 4 → (0.4, 0, 0)."""
    q = np.array([0.2, 0.2, 0.2])
    rel = mean_relative_nn_position(q, [q + [0.1, 0.0, 0.0]], [1.0], 4)
    np.testing.assert_allclose(rel, [0.4, 0.0, 0.0], atol=1e-12)
    np.testing.assert_array_equal(mean_relative_nn_position(q, np.zeros((0, 3)), [], 4), np.zeros(3))


# --- sample_query_features ---


def test_feature_width_of_default_configuration() -> None:
    """F = 3 + 128 + 64 + 3 = 198 pro Skala in der Referenzkonfiguration."""
    config = ModelConfig()
    assert config.query_feature_size == 198
    assert config.head_input_size == 594
    model = SurfRModel(config, seed=0).eval()
    msf = model.extract(random_cloud(200, seed=1))
    batch = model.query_features(np.random.default_rng(2).uniform(-1, 1, size=(10, 3)), msf)
    assert [f.shape for f in batch.features] == [(10, 198)] * 3


def test_scale_one_cell_feature_is_global() -> None:
    """Auf Skala 1 ist f^c für alle Queries gleich der einzigen Zellzeile."""
    model = SurfRModel(tiny_model_config(scales=[1, 2]), seed=0).eval()
    msf = model.extract(random_cloud(40, seed=3))
    queries = np.random.default_rng(4).uniform(-1, 1, size=(15, 3))
    features = model.query_features(queries, msf).features[0].data
    global_row = msf.for_scale(1).cell_block()[0]
    np.testing.assert_array_equal(features[:, 3:8], np.tile(global_row, (15, 1)))


def test_empty_cell_gives_zero_blocks() -> None:
    """Query in leerer Zelle: Zell-, Nachbar- und Positionsblock sind Null, T_s(q) bleibt erhalten."""
    model = SurfRModel(tiny_model_config(scales=[1, 2]), seed=0).eval()
    msf = model.extract(PointCloud(points=np.random.default_rng(5).uniform(-0.9, -0.1, size=(30, 3))))
    query = np.array([[0.5, 0.5, 0.5]])
    batch = model.query_features(query, msf)
    row = batch.features[1].data[0]
    assert batch.neighbor_counts[1][0] == 0
    np.testing.assert_allclose(row[:3], to_cell_coordinates(query, 2)[0])
    np.testing.assert_array_equal(row[3:], np.zeros(12))


def _reference_row(query, msf, scale, k, weighting):
    sf = msf.for_scale(scale)
    grid = sf.grid
    cell = cell_of(query, scale)
    nbrs = knn_in_cell(query, cell, k, grid)
    f_c = sf.cell_block()[cell.flat]
    if nbrs.size == 0:
        return np.concatenate([to_cell_coordinates(query, scale), f_c, np.zeros(sf.point_features.shape[1] + 3)])
    w = interp_weights(query, grid.points[nbrs], weighting)
    f_nn = mean_nn_feature(w, sf.point_features.data[nbrs])
    p_rel = mean_relative_nn_position(query, grid.points[nbrs], w, scale)
    return np.concatenate([to_cell_coordinates(query, scale), f_c, f_nn, p_rel])


@pytest.mark.parametrize("weighting", [Weighting.INTERP_NN, Weighting.EQUAL_WEIGHT])
def test_batched_sampling_matches_single_query_composition(weighting) -> None:
    """Die vektorisierte Variante stimmt Zeile für Zeile mit der Einzelberechnung überein."""
    config = tiny_model_config(scales=[1, 2, 4], weighting=weighting)
    model = SurfRModel(config, seed=2).eval()
    msf = model.extract(random_cloud(120, seed=6))
    queries = np.random.default_rng(7).uniform(-1, 1, size=(40, 3))
    batch = model.query_features(queries, msf)
    for i, scale in enumerate(config.scales):
        for q in range(len(queries)):
            expected = _reference_row(queries[q], msf, scale, config.knn_k, weighting)
            np.testing.assert_allclose(batch.features[i].data[q], expected, atol=1e-10)


def test_features_are_not_mutated_by_sampling() -> None:
    """Mehrere Query-Mengen gegen dieselben Merkmale lassen diese unverändert."""
    model = SurfRModel(tiny_model_config(), seed=0).eval()
    msf = model.extract(random_cloud(50, seed=8))
    snapshot = [sf.cell_features.data.copy() for sf in msf.scales]
    rng = np.random.default_rng(9)
    first = model.query_features(rng.uniform(-1, 1, size=(5, 3)), msf)
    model.query_features(rng.uniform(-1, 1, size=(7, 3)), msf)
    for sf, before in zip(msf.scales, snapshot):
        np.testing.assert_array_equal(sf.cell_features.data, before)
    assert first.num_queries == 5


def test_query_outside_cube_is_rejected() -> None:
    """Queries ausserhalb von [-1, 1]^3 sind ein Fehler."""
    model = SurfRModel(tiny_model_config(), seed=0).eval()
    msf = model.extract(random_cloud(20, seed=10))
    with pytest.raises(ValueError):
        sample_query_features(np.array([[1.5, 0.0, 0.0]]), msf, model.config.scale_config())

"""
Tests für Chamfer-L2, Normalenkonsistenz, Nächste-Nachbarn-Suche und das Ablations-Harness.
"""

import numpy as np
import pandas as pd
import pytest

from evaluation.modules.ablation import ABLATION_PRESETS, SUMMARY_COLUMNS, resolve_presets, run_ablation
from evaluation.modules.metrics import (
    brute_force_nearest,
    chamfer_l2,
    evaluate_meshes,
    nearest_neighbors,
    normal_consistency,
)
from pydantic_models.config.config_data import ConfigData
from pydantic_models.config.evaluation_config import EvaluationConfig
from pydantic_models.config.model_config import Weighting
from pydantic_models.config.reconstruction_config import ReconstructionConfig
from pydantic_models.data.triangle_mesh import TriangleMesh
from training.modules.shapes import Box, Sphere, reference_mesh, shape_corpus

from .conftest import tiny_model_config, tiny_training_config


def _square(z: float, flipped: bool = False) -> TriangleMesh:
    vertices = [[-0.5, -0.5, z], [0.5, -0.5, z], [0.5, 0.5, z], [-0.5, 0.5, z]]
    faces = [[0, 2, 1], [0, 3, 2]] if flipped else [[0, 1, 2], [0, 2, 3]]
    return TriangleMesh(vertices=vertices, faces=faces)


# --- Metriken ---


def test_identical_meshes() -> None:
    """Identische Meshes: Chamfer 0, Normalenkonsistenz 1."""
    mesh = reference_mesh(Sphere(radius=0.5), 24)
    report = evaluate_meshes(mesh, mesh, n_samples=2000, seed=1)
    assert report.ok
    assert report.chamfer_l2_x100 == pytest.approx(0.0, abs=1e-15)
    assert report.normal_consistency == pytest.approx(1.0)


def test_sphere_and_cube_are_not_consistent() -> None:
    """Kugel gegen Würfel: Normalen stimmen nicht überall überein."""
    sphere = reference_mesh(Sphere(radius=0.5), 24)
    cube = reference_mesh(Box(half_extents=(0.45, 0.45, 0.45)), 24)
    consistency = normal_consistency(sphere, cube, n_samples=2000)
    assert 0.0 < consistency < 0.95


def test_flipped_plane_is_fully_consistent() -> None:
    """Gekippte Normalen zählen über den Betrag des Kosinus als konsistent."""
    assert normal_consistency(_square(0.0), _square(0.0, flipped=True), n_samples=500) == pytest.approx(1.0)


@pytest.mark.parametrize("d", [0.01, 0.05, 0.2])
def test_parallel_planes(d) -> None:
    """Zwei deckungsgleiche Quadrate im Abstand d → 100·(d² + d²)."""
    assert chamfer_l2(_square(0.0), _square(d), n_samples=1000) == pytest.approx(200.0 * d**2, rel=1e-9)


def test_chamfer_is_symmetric() -> None:
    a = reference_mesh(Sphere(radius=0.5), 24)
    b = reference_mesh(Sphere(center=(0.05, 0.0, 0.0), radius=0.45), 24)
    assert chamfer_l2(a, b, n_samples=1500) == pytest.approx(chamfer_l2(b, a, n_samples=1500), rel=1e-12)


def test_kd_tree_matches_brute_force() -> None:
    """Die kd-Baum-Suche stimmt mit der erschöpfenden Suche überein."""
    rng = np.random.default_rng(2)
    reference = rng.uniform(-1, 1, size=(800, 3))
    queries = rng.uniform(-1, 1, size=(300, 3))
    d_fast, i_fast = nearest_neighbors(reference, queries, workers=2)
    d_slow, i_slow = brute_force_nearest(reference, queries)
    np.testing.assert_array_equal(i_fast, i_slow)
    np.testing.assert_allclose(d_fast, d_slow, rtol=1e-10, atol=1e-14)


def test_empty_mesh_is_reported() -> None:
    """Leere Meshes: Metrikfunktionen werfen, evaluate_meshes liefert einen Report mit failure."""
    empty, square = TriangleMesh.empty(), _square(0.0)
    with pytest.raises(ValueError):
        chamfer_l2(empty, square)
    with pytest.raises(ValueError):
        normal_consistency(square, empty)
    report = evaluate_meshes(empty, square, n_samples=100)
    assert not report.ok
    assert report.failure == "erstes Mesh ist leer"
    assert report.chamfer_l2_x100 is None


# --- Ablation ---


def test_presets_resolve() -> None:
    """Ohne Namen alle Presets, sonst die genannten in Reihenfolge."""
    assert len(resolve_presets(None)) == len(ABLATION_PRESETS)
    chosen = resolve_presets(["ew_1_4_16", "base"])
    assert [p.name for p in chosen] == ["ew_1_4_16", "base"]
    assert chosen[0].weighting == Weighting.EQUAL_WEIGHT
    with pytest.raises(ValueError):
        resolve_presets(["gibt_es_nicht"])


def test_preset_overrides_only_ablated_fields() -> None:
    """Ein Preset setzt Skalen, Gewichtung und Attention, der Rest bleibt."""
    base = tiny_model_config(knn_k=3)
    applied = ABLATION_PRESETS["lw_1_4_16"].apply(base)
    assert applied.scales == [1, 4, 16]
    assert applied.weighting == Weighting.LEARNED_WEIGHT
    assert applied.knn_k == 3
    assert applied.point_feature_size == base.point_feature_size


def test_run_ablation_writes_summary(tmp_path) -> None:
    """Ein Preset auf zwei Formen: Zusammenfassung mit einer Zeile und Detailtabelle."""
    config = ConfigData(
        model=tiny_model_config(),
        training=tiny_training_config(epochs=1, num_input_points=300),
        reconstruction=ReconstructionConfig(resolution=16, near_surface_radius=2),
        evaluation=EvaluationConfig(num_samples=200, reference_resolution=16),
    )
    table = run_ablation(config, shape_corpus(2, seed=0), resolve_presets(["base"]), tmp_path)
    assert list(table.columns) == SUMMARY_COLUMNS
    assert len(table) == 1
    assert table.loc[0, "preset"] == "base"
    assert table.loc[0, "shapes"] == 2
    assert (tmp_path / "ablation_summary.csv").exists()
    assert len(pd.read_csv(tmp_path / "ablation_details.csv")) == 2

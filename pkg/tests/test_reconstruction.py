"""
Tests für Voxelauswahl, Vorzeichenausbreitung, Marching Cubes, Mesh-IO und die Rekonstruktions-Pipeline.
"""

import numpy as np
import pytest
from scipy import ndimage

from network.modules.surfr_model import SurfRModel
from pydantic_models.config.reconstruction_config import ReconstructionConfig
from pydantic_models.data.point_cloud import PointCloud
from pydantic_models.data.triangle_mesh import TriangleMesh
from reconstruction.modules.marching_cubes import marching_cubes
from reconstruction.modules.mesh_io import read_mesh, write_mesh
from reconstruction.modules.pipeline import evaluate_sdf_batch, reconstruct
from reconstruction.modules.sign_propagation import box_sum, propagate_signs
from reconstruction.modules.voxel_grid import (
    SparseSDFGrid,
    near_surface_mask,
    select_near_surface_voxels,
    voxel_centers,
)
from training.modules.sampling import sample_scan
from training.modules.shapes import Sphere

from .conftest import random_cloud, tiny_model_config


def _sphere_values(resolution: int, radius: float) -> np.ndarray:
    idx = np.indices((resolution,) * 3).reshape(3, -1).T
    return (np.linalg.norm(voxel_centers(idx, resolution), axis=1) - radius).reshape((resolution,) * 3)


# --- Voxelauswahl ---


def test_radius_zero_selects_occupied_voxels() -> None:
    """r = 0 → genau die Voxel, die einen Punkt enthalten."""
    cloud = PointCloud(points=[[0.01, 0.01, 0.01], [0.01, 0.02, 0.01], [-0.6, 0.3, 0.9]])
    selected = select_near_surface_voxels(cloud, 8, 0)
    np.testing.assert_array_equal(selected, [[1, 5, 7], [4, 4, 4]])


def test_single_point_radius_one_gives_27_voxels() -> None:
    """Ein innerer Punkt mit r = 1 → 3³ Voxel."""
    cloud = PointCloud(points=[[0.01, 0.01, 0.01]])
    assert len(select_near_surface_voxels(cloud, 16, 1)) == 27


def test_dilation_matches_binary_dilation() -> None:
    """Maximum-Filter entspricht der binären Dilatation mit einem (2r+1)³-Würfel."""
    cloud = random_cloud(80, seed=1, low=-1.0, high=1.0)
    occupied = near_surface_mask(cloud, 24, 0)
    for radius in (1, 2, 3):
        expected = ndimage.binary_dilation(occupied, structure=np.ones((2 * radius + 1,) * 3, dtype=bool))
        np.testing.assert_array_equal(near_surface_mask(cloud, 24, radius), expected)


def test_negative_radius_is_rejected() -> None:
    with pytest.raises(ValueError):
        select_near_surface_voxels(PointCloud(points=[[0.0, 0.0, 0.0]]), 8, -1)


# --- Vorzeichenausbreitung ---


def test_box_sum_counts_window() -> None:
    """Einsen-Gitter: Fenstersumme 125 innen, 27 in der Ecke."""
    sums = box_sum(np.ones((7, 7, 7), dtype=np.int8), 5)
    assert sums[3, 3, 3] == 125
    assert sums[0, 0, 0] == 27


def test_fully_surrounded_voxel_takes_majority_sign() -> None:
    """124 positive Nachbarn, Mitte leer → Mitte wird +τ."""
    known = np.ones((5, 5, 5), dtype=bool)
    known[2, 2, 2] = False
    grid = SparseSDFGrid(resolution=5, known=known, values=np.where(known, 0.1, 0.0))
    config = ReconstructionConfig(resolution=5)
    result = propagate_signs(grid, config)
    assert result.values[2, 2, 2] == pytest.approx(config.fill_magnitude)
    assert (result.passes, result.filled, result.fallback) == (1, 1, 0)


def test_balanced_neighbors_stay_unfilled_by_filter() -> None:
    """7 positive und 6 negative Nachbarn: |Σ| = 1 ≤ 13, der Filter ändert nichts."""
    offsets = [(dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1) if (dx, dy, dz) != (0, 0, 0)]
    known = np.zeros((9, 9, 9), dtype=bool)
    values = np.zeros((9, 9, 9))
    for n, (dx, dy, dz) in enumerate(offsets[:13]):
        known[4 + dx, 4 + dy, 4 + dz] = True
        values[4 + dx, 4 + dy, 4 + dz] = 0.1 if n < 7 else -0.1
    grid = SparseSDFGrid(resolution=9, known=known, values=values)
    result = propagate_signs(grid, ReconstructionConfig(resolution=9))
    assert result.passes == 0
    assert result.filled == 0
    assert result.fallback == 9**3 - 13


def test_all_known_is_a_no_op() -> None:
    """Ohne leere Voxel bleibt das Gitter unverändert."""
    values = _sphere_values(8, 0.5)
    grid = SparseSDFGrid(resolution=8, known=np.ones((8, 8, 8), dtype=bool), values=values)
    result = propagate_signs(grid, ReconstructionConfig(resolution=8))
    np.testing.assert_array_equal(result.values, values)
    assert result.passes == 0


def test_propagation_without_known_voxels_fails() -> None:
    grid = SparseSDFGrid(resolution=4, known=np.zeros((4, 4, 4), dtype=bool), values=np.zeros((4, 4, 4)))
    with pytest.raises(ValueError):
        propagate_signs(grid, ReconstructionConfig(resolution=4))


def _reference_propagation(known: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    kernel = np.ones((5, 5, 5))
    known = known.copy()
    signs = np.where(values >= 0, 1.0, -1.0) * known
    while True:
        response = ndimage.convolve(signs, kernel, mode="constant", cval=0.0)
        update = ~known & (np.abs(response) > 13)
        if not update.any():
            break
        signs[update] = np.sign(response[update])
        known |= update
    return np.where(known, signs, 0.0), known


def test_propagation_matches_reference_on_sphere_band() -> None:
    """Schmales Band um eine Kugel: Ergebnis stimmt mit der direkten Faltung überein und trifft innen/aussen."""
    r = 32
    sdf = _sphere_values(r, 0.503)
    band = np.abs(sdf) < 2.0 * (2.0 / r)
    grid = SparseSDFGrid(resolution=r, known=band, values=np.where(band, sdf, 0.0))
    result = propagate_signs(grid, ReconstructionConfig(resolution=r))
    reference_signs, reference_known = _reference_propagation(band, sdf)
    reached = reference_known & ~band
    np.testing.assert_array_equal(result.signs[reached], reference_signs[reached].astype(np.int8))
    np.testing.assert_array_equal(result.values[band], sdf[band])
    np.testing.assert_array_equal(result.signs, np.where(sdf >= 0, 1, -1))


@pytest.mark.parametrize("seed, density", [(0, 0.3), (1, 0.3), (2, 0.1), (3, 0.6), (4, 0.02)])
def test_propagation_matches_reference_on_random_grids(seed, density) -> None:
    """Zufällige 32³-Gitter mit zufälliger Bekannt-Maske: gleiche Vorzeichen wie die direkte Faltung."""
    r = 32
    rng = np.random.default_rng(seed)
    known = rng.random((r, r, r)) < density
    values = np.where(known, rng.uniform(-1.0, 1.0, size=(r, r, r)), 0.0)
    grid = SparseSDFGrid(resolution=r, known=known, values=values)
    result = propagate_signs(grid, ReconstructionConfig(resolution=r))
    reference_signs, reference_known = _reference_propagation(known, values)
    reached = reference_known & ~known
    np.testing.assert_array_equal(result.signs[reached], reference_signs[reached].astype(np.int8))
    np.testing.assert_array_equal(result.values[known], values[known])
    assert np.all(result.signs != 0)


# --- Marching Cubes ---


def test_sphere_mesh_is_closed() -> None:
    """Kugel r = 0.5 auf 64³: geschlossen, Euler-Charakteristik 2, Fläche innerhalb 2 % von π."""
    mesh = marching_cubes(_sphere_values(64, 0.5013))
    assert mesh.boundary_edge_count() == 0
    assert mesh.euler_characteristic() == 2
    assert mesh.area == pytest.approx(4.0 * np.pi * 0.5013**2, rel=0.02)
    radii = np.linalg.norm(mesh.vertices, axis=1)
    assert np.max(np.abs(radii - 0.5013)) < 2.0 / 64


def test_constant_grid_gives_empty_mesh() -> None:
    """Kein Vorzeichenwechsel → leeres Mesh."""
    assert marching_cubes(np.full((8, 8, 8), 0.3)).is_empty


def test_plane_is_reproduced_exactly() -> None:
    """Lineares Feld z - c: alle Vertices liegen exakt auf der Ebene z = c."""
    r = 16
    idx = np.indices((r,) * 3).reshape(3, -1).T
    values = (voxel_centers(idx, r)[:, 2] - 0.013).reshape((r,) * 3)
    mesh = marching_cubes(values)
    assert not mesh.is_empty
    np.testing.assert_allclose(mesh.vertices[:, 2], 0.013, atol=1e-9)
    np.testing.assert_allclose(np.abs(mesh.face_normals()[:, 2]), 1.0, atol=1e-9)


def test_open_triangle_mesh_topology() -> None:
    """Zwei Dreiecke mit gemeinsamer Kante: vier Randkanten, Euler-Charakteristik 1."""
    mesh = TriangleMesh(vertices=[[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], faces=[[0, 1, 2], [0, 2, 3]])
    assert mesh.boundary_edge_count() == 4
    assert sorted(mesh.edge_face_counts()) == [1, 1, 1, 1, 2]
    assert mesh.euler_characteristic() == 1
    assert mesh.area == pytest.approx(1.0)
    np.testing.assert_allclose(mesh.face_areas(), [0.5, 0.5])
    np.testing.assert_allclose(mesh.face_normals(), [[0, 0, 1], [0, 0, 1]])
    assert TriangleMesh.empty().boundary_edge_count() == 0


def test_marching_cubes_requires_cubic_grid() -> None:
    with pytest.raises(ValueError):
        marching_cubes(np.zeros((4, 4, 5)))


# --- Mesh-IO ---


@pytest.mark.parametrize("suffix", [".obj", ".ply"])
def test_mesh_io(tmp_path, suffix) -> None:
    """OBJ und PLY erhalten Vertices und Dreiecke."""
    mesh = marching_cubes(_sphere_values(16, 0.6))
    path = write_mesh(mesh, tmp_path / f"kugel{suffix}")
    loaded = read_mesh(path)
    assert loaded.faces.shape == mesh.faces.shape
    np.testing.assert_allclose(loaded.vertices, mesh.vertices, atol=1e-6)


def test_mesh_io_errors(tmp_path) -> None:
    """Unbekannte Endung und fehlende Datei."""
    with pytest.raises(ValueError):
        write_mesh(TriangleMesh.empty(), tmp_path / "mesh.stl")
    with pytest.raises(FileNotFoundError):
        read_mesh(tmp_path / "fehlt.obj")


def test_empty_mesh_can_be_written(tmp_path) -> None:
    path = write_mesh(TriangleMesh.empty(), tmp_path / "leer.obj")
    assert path.exists()


# --- Pipeline ---


def _tiny_reconstruction_config() -> ReconstructionConfig:
    return ReconstructionConfig(resolution=16, near_surface_radius=1, evaluation_batch_size=64)


def test_batch_size_does_not_change_values() -> None:
    """Die SDF-Werte sind unabhängig von der Blockgrösse."""
    model = SurfRModel(tiny_model_config(), seed=4).eval()
    cloud = random_cloud(80, seed=5)
    msf = model.extract(cloud)
    centers = np.random.default_rng(6).uniform(-1, 1, size=(50, 3))
    np.testing.assert_allclose(
        evaluate_sdf_batch(model, msf, centers, batch_size=7),
        evaluate_sdf_batch(model, msf, centers, batch_size=1000),
        atol=1e-12,
    )


def test_reconstruction_is_deterministic() -> None:
    """Gleiches Modell und gleiche Wolke → identisches Mesh und identische Kennzahlen."""
    model = SurfRModel(tiny_model_config(), seed=7)
    cloud = random_cloud(150, seed=8)
    first = reconstruct(model, cloud, _tiny_reconstruction_config())
    second = reconstruct(model, cloud, _tiny_reconstruction_config())
    np.testing.assert_array_equal(first.mesh.vertices, second.mesh.vertices)
    np.testing.assert_array_equal(first.mesh.faces, second.mesh.faces)
    assert first.evaluated_voxels == second.evaluated_voxels > 0
    report = first.report()
    assert report["resolution"] == 16
    assert {"normalize", "encode", "select", "evaluate", "propagate", "extract", "total"} <= set(report["timings"])


def test_features_are_extracted_once_per_reconstruction(monkeypatch) -> None:
    """Die Mehrskalen-Merkmale werden pro Rekonstruktion genau einmal berechnet."""
    calls: list = []
    original = SurfRModel.extract

    def counting(self, points):
        calls.append(1)
        return original(self, points)

    monkeypatch.setattr(SurfRModel, "extract", counting)
    model = SurfRModel(tiny_model_config(), seed=3)
    result = reconstruct(model, random_cloud(120, seed=9), _tiny_reconstruction_config())
    assert result.evaluated_voxels > 64
    assert len(calls) == 1


def test_doubling_resolution_quadruples_evaluated_voxels() -> None:
    """Nur oberflächennahe Voxel werden ausgewertet: doppelte Auflösung, etwa viermal so viele."""
    cloud = sample_scan(Sphere(radius=0.8), 60_000, 0.0, seed=1)
    coarse = len(select_near_surface_voxels(cloud, 32, 1))
    fine = len(select_near_surface_voxels(cloud, 64, 1))
    assert 3.2 < fine / coarse < 4.8
    assert fine < 0.2 * 64**3

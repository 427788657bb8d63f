"""
Tests für synthetische Formen, Trainingsdaten, Adam, Checkpoints und die Trainingsschleife.
"""

import numpy as np
import pandas as pd
import pytest

from autodiff.modules.tensor import Tensor
from geometry.modules.normalization import normalize_to_unit_cube
from network.modules.loss import LossTerms
from network.modules.surfr_model import SurfRModel
from pydantic_models.config.loss_config import LossConfig
from pydantic_models.config.training_config import NoiseLevel
from training.modules.checkpoint import (
    CheckpointError,
    ConfigMismatchError,
    load_checkpoint,
    read_manifest,
    save_checkpoint,
)
from training.modules.optimizer import AdamHyper, OptimizerState, adam_step, learning_rate
from training.modules.sampling import (
    TrainSample,
    build_train_sample,
    random_rotation,
    rotate_sample,
    sample_queries,
    sample_scan,
)
from training.modules.shapes import SHAPE_BOUND, SHAPE_KINDS, Box, Sphere, Torus, random_shape, shape_corpus
from training.modules.trainer import Trainer, TrainingDivergedError

from .conftest import random_cloud, tiny_model_config, tiny_training_config


# --- Formen ---


@pytest.mark.parametrize(
    "shape, inside, outside",
    [
        (Sphere(radius=0.5), (0.1, 0.0, 0.0), (0.8, 0.0, 0.0)),
        (Box(half_extents=(0.4, 0.3, 0.2)), (0.0, 0.0, 0.1), (0.0, 0.0, 0.5)),
        (Torus(major_radius=0.5, minor_radius=0.2), (0.5, 0.0, 0.0), (0.0, 0.0, 0.0)),
    ],
)
def test_primitive_sdf_signs(shape, inside, outside) -> None:
    """SDF negativ innen, positiv aussen."""
    assert shape.sdf(np.array(inside)) < 0.0
    assert shape.sdf(np.array(outside)) > 0.0


def test_sphere_sdf_is_exact() -> None:
    assert Sphere(radius=0.5).sdf(np.array([0.0, 0.0, 0.8])) == pytest.approx(0.3)


@pytest.mark.parametrize("kind", SHAPE_KINDS)
def test_random_shapes_surface_and_bound(kind) -> None:
    """Oberflächenpunkte haben SDF 0 und liegen innerhalb des Grenzradius."""
    rng = np.random.default_rng(0)
    for _ in range(5):
        shape = random_shape(rng, kind)
        points, normals = shape.sample_surface(500, rng)
        assert points.shape == normals.shape == (500, 3)
        np.testing.assert_allclose(shape.sdf(points), 0.0, atol=1e-9)
        np.testing.assert_allclose(np.linalg.norm(normals, axis=1), 1.0, atol=1e-9)
        assert np.max(np.linalg.norm(points, axis=1)) <= SHAPE_BOUND + 1e-9


@pytest.mark.parametrize(
    "shape, keep",
    [
        (Sphere(radius=0.5), lambda p, d: d > -0.45),
        (Box(half_extents=(0.4, 0.3, 0.2)), lambda p, d: d > 0.05),
        (
            Torus(major_radius=0.5, minor_radius=0.2),
            lambda p, d: (d > -0.15) & (np.linalg.norm(p[:, :2], axis=1) > 0.05),
        ),
    ],
)
def test_primitive_sdf_has_unit_gradient(shape, keep) -> None:
    """|∇d| = 1 per zentralen Differenzen, abseits der Mittelachse."""
    points = np.random.default_rng(1).uniform(-1.0, 1.0, size=(2000, 3))
    points = points[keep(points, shape.sdf(points))]
    h = 1e-6
    grad = np.stack(
        [(shape.sdf(points + h * e) - shape.sdf(points - h * e)) / (2.0 * h) for e in np.eye(3)],
        axis=1,
    )
    np.testing.assert_allclose(np.linalg.norm(grad, axis=1), 1.0, atol=1e-5)


def test_unknown_shape_kind() -> None:
    with pytest.raises(ValueError):
        random_shape(np.random.default_rng(0), "kegel")


def test_shape_corpus_is_reproducible() -> None:
    """Gleicher Seed → gleiche Formen, Arten reihum."""
    first, second = shape_corpus(7, seed=3), shape_corpus(7, seed=3)
    assert first == second
    assert [s.kind for s in first[:5]] == list(SHAPE_KINDS)


# --- Scans und Queries ---


def test_scan_without_noise_lies_on_surface() -> None:
    """σ = 0: alle Punkte auf der Kugel, Normalen radial."""
    cloud = sample_scan(Sphere(radius=0.5), 2000, 0.0, seed=1)
    np.testing.assert_allclose(np.linalg.norm(cloud.points, axis=1), 0.5, atol=1e-12)
    assert cloud.normals is not None
    np.testing.assert_allclose(cloud.normals, cloud.points / 0.5, atol=1e-12)


def test_scan_is_deterministic_per_seed() -> None:
    a = sample_scan(Box(), 300, 0.005, seed=2)
    b = sample_scan(Box(), 300, 0.005, seed=2)
    np.testing.assert_array_equal(a.points, b.points)


def test_scan_noise_standard_deviation() -> None:
    """Radiale Abweichung hat Standardabweichung σ."""
    sigma = NoiseLevel.MAX.sigma
    cloud = sample_scan(Sphere(radius=0.5), 20_000, sigma, seed=3)
    deviation = np.linalg.norm(cloud.points, axis=1) - 0.5
    assert deviation.std() == pytest.approx(sigma, rel=0.05)
    assert abs(deviation.mean()) < 5.0 * sigma / np.sqrt(20_000)


def test_noise_levels() -> None:
    assert [level.sigma for level in NoiseLevel] == [0.0, 0.005, 0.015]


def test_queries_carry_exact_distances() -> None:
    """Auf der Kugel stimmen die Soll-Distanzen mit der analytischen SDF überein."""
    sphere = Sphere(radius=0.5)
    queries = sample_queries(sphere, 300, 300, 0.02, seed=4)
    assert len(queries) == 600
    assert queries.gt_signed_distance is not None
    np.testing.assert_allclose(queries.gt_signed_distance, sphere.sdf(queries.points), atol=1e-12)
    assert np.all(np.abs(queries.gt_signed_distance[:300]) <= 0.02)


def test_rotation_is_proper() -> None:
    """Gleichverteilte Rotation: orthonormal mit Determinante 1."""
    rot = random_rotation(5)
    np.testing.assert_allclose(rot @ rot.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(rot) == pytest.approx(1.0)


def test_rotation_keeps_distances_for_centered_sphere() -> None:
    """Eine zentrierte Kugel ist rotationsinvariant: Soll-Distanzen bleiben gültig."""
    sphere = Sphere(radius=0.4)
    sample = TrainSample(cloud=sample_scan(sphere, 100, 0.0, 6), queries=sample_queries(sphere, 50, 50, 0.02, 7))
    rotated = rotate_sample(sample, random_rotation(8))
    assert rotated.queries.gt_signed_distance is not None
    np.testing.assert_allclose(rotated.queries.gt_signed_distance, sphere.sdf(rotated.queries.points), atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(rotated.cloud.points, axis=1), 0.4, atol=1e-12)


def test_train_sample_stays_in_cube() -> None:
    """Nach der Augmentierung liegen Wolke und Queries in [-1, 1]^3."""
    config = tiny_training_config(num_input_points=200, num_surface_queries=100, num_uniform_queries=100)
    for seed in range(5):
        sample = build_train_sample(Box(half_extents=(0.45, 0.45, 0.3)), config, seed)
        assert sample.cloud.is_normalized()
        assert np.all(np.abs(sample.queries.points) <= 1.0)
        assert len(sample.queries) == config.num_train_queries


def test_train_sample_shares_reconstruction_frame() -> None:
    """Trainingswolke und Rekonstruktionseingabe desselben Scans liegen im selben Rahmen."""
    config = tiny_training_config(num_input_points=500, augment_rotation=False)
    sample = build_train_sample(Sphere(radius=0.4), config, seed=2)
    assert sample.normalization is not None
    assert sample.normalization.scale == pytest.approx(0.95 / 0.4, rel=0.05)
    # dieselbe Normierung wie in der Rekonstruktion ist auf der Trainingswolke die Identität
    again, transform = normalize_to_unit_cube(sample.cloud.points, margin=0.05)
    assert transform.scale == pytest.approx(1.0)
    np.testing.assert_allclose(transform.center, 0.0, atol=1e-12)
    np.testing.assert_allclose(again.points, sample.cloud.points, atol=1e-12)
    assert np.max(np.abs(sample.cloud.points)) == pytest.approx(0.95)


@pytest.mark.parametrize("augment", [False, True])
def test_train_sample_distances_in_normalized_units(augment) -> None:
    """Soll-Distanzen sind die SDF der Form im normierten Rahmen (mit Faktor scale)."""
    sphere = Sphere(radius=0.4)
    config = tiny_training_config(augment_rotation=augment, num_train_queries=40)
    sample = build_train_sample(sphere, config, seed=4)
    tf = sample.normalization
    assert tf is not None
    assert sample.queries.gt_signed_distance is not None
    shape_frame = tf.invert(sample.queries.points) @ sample.rotation
    np.testing.assert_allclose(
        sample.queries.gt_signed_distance, sphere.sdf(shape_frame) * tf.scale, atol=1e-9
    )


# --- Optimierer ---


def test_learning_rate_halves() -> None:
    """lr(0) = lr0, lr(100) = lr0/2, lr(200) = lr0/4."""
    assert learning_rate(0) == pytest.approx(7.5e-4)
    assert learning_rate(100) == pytest.approx(3.75e-4)
    assert learning_rate(200) == pytest.approx(1.875e-4)


def test_first_adam_step_moves_by_learning_rate() -> None:
    """Nach Bias-Korrektur bewegt der erste Schritt jeden Eintrag um ≈ lr gegen das Gradientenvorzeichen."""
    param = Tensor(np.array([0.5, 0.5]), requires_grad=True)
    state = adam_step({"w": param}, {"w": np.array([1.0, -2.0])}, OptimizerState(), AdamHyper(lr=0.01))
    np.testing.assert_allclose(param.data, [0.49, 0.51], atol=1e-8)
    assert state.step == 1


def test_adam_skips_missing_and_rejects_wrong_shapes() -> None:
    param = Tensor(np.ones(3), requires_grad=True)
    adam_step({"w": param}, {}, OptimizerState(), AdamHyper(lr=0.1))
    np.testing.assert_array_equal(param.data, np.ones(3))
    with pytest.raises(ValueError):
        adam_step({"w": param}, {"w": np.ones(4)}, OptimizerState(), AdamHyper(lr=0.1))


# --- Checkpoints ---


def test_checkpoint_round_trip(tmp_path) -> None:
    """Parameter, Puffer und Adam-Zustand überstehen Speichern und Laden."""
    config = tiny_model_config(weighting="lw")
    model = SurfRModel(config, seed=9)
    model.encoders[0].local.norms[0].running_mean[:] = 0.25
    state = OptimizerState(step=3, lr=0.001, m={"head.mlp.linears.0.bias": np.full(8, 0.5)})
    path = save_checkpoint(tmp_path / "m.ckpt", model, epoch=4, optimizer=state, extra={"note": "test"})

    loaded, manifest, optimizer = load_checkpoint(path, config)
    assert manifest.epoch == 4
    assert manifest.extra == {"note": "test"}
    assert optimizer.step == 3
    np.testing.assert_array_equal(optimizer.m["head.mlp.linears.0.bias"], np.full(8, 0.5))
    original = model.state_arrays()
    restored = loaded.state_arrays()
    assert original.keys() == restored.keys()
    for name in original:
        np.testing.assert_array_equal(restored[name], original[name])

    cloud = random_cloud(40, seed=10)
    queries = np.random.default_rng(11).uniform(-1, 1, size=(12, 3))
    model.eval()
    loaded.eval()
    np.testing.assert_array_equal(
        loaded.predict(loaded.extract(cloud), queries), model.predict(model.extract(cloud), queries)
    )


def test_checkpoint_config_mismatch(tmp_path) -> None:
    path = save_checkpoint(tmp_path / "m.ckpt", SurfRModel(tiny_model_config(), seed=0))
    with pytest.raises(ConfigMismatchError):
        load_checkpoint(path, tiny_model_config(knn_k=5))
    assert read_manifest(path).config_hash == tiny_model_config().config_hash()


def test_checkpoint_bad_magic_and_truncation(tmp_path) -> None:
    """Fremde Dateien und abgeschnittene Checkpoints werden erkannt."""
    other = tmp_path / "fremd.ckpt"
    other.write_bytes(b"NOTACKPT" + bytes(64))
    with pytest.raises(CheckpointError):
        load_checkpoint(other)

    path = save_checkpoint(tmp_path / "m.ckpt", SurfRModel(tiny_model_config(), seed=0))
    truncated = tmp_path / "kurz.ckpt"
    truncated.write_bytes(path.read_bytes()[:-100])
    with pytest.raises(CheckpointError):
        load_checkpoint(truncated)
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "fehlt.ckpt")


# --- Trainingsschleife ---


def test_trainer_writes_history_and_checkpoint(tmp_path) -> None:
    """Zwei Epochen auf drei Formen: Verlustkurve als CSV, letzter Checkpoint mit Epoche 2."""
    training = tiny_training_config()
    trainer = Trainer(tiny_model_config(), training, LossConfig(), tmp_path / "out", tmp_path / "ckpt")
    result = trainer.fit(shape_corpus(3, seed=0))

    assert len(result.history) == 4
    assert list(result.history.columns) == ["epoch", "step", "lr", "total", "magnitude", "sign", "regularization"]
    assert np.all(np.isfinite(result.history["total"]))
    csv = pd.read_csv(tmp_path / "out" / "loss_history.csv")
    assert len(csv) == 4
    assert result.checkpoint is not None and result.checkpoint.exists()
    assert read_manifest(result.checkpoint).epoch == 2
    assert result.optimizer.step == 4
    assert not result.model.training


def test_trainer_rejects_empty_corpus(tmp_path) -> None:
    with pytest.raises(ValueError):
        Trainer(tiny_model_config(), tiny_training_config(), LossConfig(), tmp_path).fit([])


def test_diverged_loss_dumps_batch(tmp_path, monkeypatch) -> None:
    """Nicht-endlicher Verlust: Fehler mit gesichertem Batch."""

    def nan_loss(model, batch, loss_config):
        nan = Tensor(np.array(np.nan))
        return LossTerms(total=nan, magnitude=nan, sign=nan, regularization=nan)

    monkeypatch.setattr("training.modules.trainer.batch_loss", nan_loss)
    trainer = Trainer(tiny_model_config(), tiny_training_config(), LossConfig(), tmp_path)
    with pytest.raises(TrainingDivergedError):
        trainer.fit(shape_corpus(2, seed=1), epochs=1)
    assert len(list(tmp_path.glob("diverged_*.npz"))) == 1


def test_training_reduces_loss(tmp_path) -> None:
    """50 Schritte mit festem Seed: die letzten zehn Verluste liegen im Mittel unter den ersten zehn."""
    training = tiny_training_config(
        epochs=50, batch_size=2, num_shapes=2, learning_rate=5e-3, augment_rotation=False, checkpoint_every=None
    )
    result = Trainer(tiny_model_config(), training, LossConfig(), tmp_path).fit(shape_corpus(2, seed=0))
    totals = result.history["total"].to_numpy()
    assert len(totals) == 50
    assert totals[-10:].mean() < totals[:10].mean()


def test_training_is_reproducible(tmp_path) -> None:
    """Gleicher Seed, gleiche Verlustkurve."""
    training = tiny_training_config(seed=7)
    shapes = shape_corpus(3, seed=2)
    first = Trainer(tiny_model_config(), training, LossConfig(), tmp_path / "a").fit(shapes)
    second = Trainer(tiny_model_config(), training, LossConfig(), tmp_path / "b").fit(shapes)
    pd.testing.assert_frame_equal(first.history, second.history)


def test_resumed_training_draws_next_epoch(tmp_path, monkeypatch) -> None:
    """Ein ab Epoche 1 fortgesetztes Training wiederholt nicht die Batches von Epoche 0."""
    drawn: list = []

    def recording(shape, config, seed):
        drawn.append(seed)
        return build_train_sample(shape, config, seed)

    monkeypatch.setattr("training.modules.trainer.build_train_sample", recording)
    training = tiny_training_config(checkpoint_every=None)
    shapes = shape_corpus(3, seed=0)

    Trainer(tiny_model_config(), training, LossConfig(), tmp_path / "voll").fit(shapes, epochs=2)
    epoch0, epoch1 = drawn[:3], drawn[3:]
    drawn.clear()
    Trainer(tiny_model_config(), training, LossConfig(), tmp_path / "weiter", start_epoch=1).fit(shapes, epochs=1)
    assert drawn == epoch1
    assert drawn != epoch0

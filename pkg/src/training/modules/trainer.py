"""
Trainingsschleife: pro Epoche mischen, augmentieren, Vorwärtsdurchlauf über den Mini-Batch,
Verlust, Rückwärtsdurchlauf und Adam-Schritt. Verlustkurven als CSV, Checkpoints periodisch.
"""

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict

from autodiff.modules.tensor import ComputationTape, backward
from network.modules.loss import LossTerms, surfr_loss
from network.modules.surfr_model import SurfRModel
from pydantic_models.config.loss_config import LossConfig
from pydantic_models.config.model_config import ModelConfig
from pydantic_models.config.training_config import TrainingConfig
from shared_modules.utils import ensure_dir, log_exceptions

from .checkpoint import save_checkpoint
from .optimizer import AdamHyper, OptimizerState, adam_step, learning_rate
from .sampling import TrainSample, build_train_sample


class TrainingDivergedError(RuntimeError):
    """Nicht-endlicher Verlust; der auslösende Batch wurde gesichert."""


class TrainingResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    model: SurfRModel
    optimizer: OptimizerState
    history: pd.DataFrame
    checkpoint: Optional[Path] = None


def batch_loss(model: SurfRModel, batch: Sequence[TrainSample], loss_config: LossConfig) -> LossTerms:
    """
    Verlust eines Mini-Batches: alle Wolken werden gemeinsam kodiert, die Queries jedes Beispiels
    werden gegen die Merkmale ihrer eigenen Wolke ausgewertet.
    """
    msf = model.extract([s.cloud for s in batch])
    queries = np.concatenate([s.queries.points for s in batch])
    gt = np.concatenate([np.asarray(s.queries.gt_signed_distance) for s in batch])
    sample_ids = np.repeat(np.arange(len(batch)), [len(s.queries) for s in batch])
    logits, magnitudes = model.forward(msf, queries, sample_ids)
    return surfr_loss(logits, magnitudes, gt, model.head_weights(), loss_config)


def _dump_batch(batch: Sequence[TrainSample], directory: Path, epoch: int, step: int) -> Path:
    path = ensure_dir(directory) / f"diverged_epoch{epoch:04d}_step{step:06d}.npz"
    arrays: Dict[str, np.ndarray] = {}
    for i, s in enumerate(batch):
        arrays[f"cloud_{i}"] = s.cloud.points
        arrays[f"queries_{i}"] = s.queries.points
        arrays[f"gt_{i}"] = np.asarray(s.queries.gt_signed_distance)
        arrays[f"rotation_{i}"] = s.rotation
    np.savez(path, **arrays)
    return path


class Trainer:
    """
    Trainiert ein SurfR-Modell auf einem Formenkorpus.

    Args:
        model_config (ModelConfig): Architektur.
        training (TrainingConfig): Trainingsparameter.
        loss (LossConfig): Verlustgewichte.
        output_dir (Path): Ziel für Verlust-CSV und Diagnose-Dumps.
        checkpoint_dir (Path, optional): Ziel für Checkpoints; ohne Angabe keine Checkpoints.
    """

    def __init__(
        self,
        model_config: ModelConfig,
        training: TrainingConfig,
        loss: LossConfig,
        output_dir: Path,
        checkpoint_dir: Optional[Path] = None,
        model: Optional[SurfRModel] = None,
        optimizer: Optional[OptimizerState] = None,
        start_epoch: int = 0,
    ):
        self.training = training
        self.loss = loss
        self.output_dir = Path(output_dir)
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None
        self.model = model if model is not None else SurfRModel(model_config, seed=training.seed)
        self.optimizer = optimizer if optimizer is not None else OptimizerState()
        self.start_epoch = start_epoch

    def _step(self, batch: Sequence[TrainSample], epoch: int, step: int) -> Dict[str, float]:
        lr = learning_rate(epoch, self.training.learning_rate, self.training.lr_half_life_epochs)
        with ComputationTape() as tape:
            terms = batch_loss(self.model, batch, self.loss)
        values = terms.as_dict()
        if not np.isfinite(values["total"]):
            dump = _dump_batch(batch, self.output_dir, epoch, step)
            logger.error(f"Nicht-endlicher Verlust in Epoche {epoch}, Schritt {step}; Batch gesichert: {dump}")
            raise TrainingDivergedError(f"Nicht-endlicher Verlust in Epoche {epoch}, Schritt {step} (Dump: {dump}).")
        backward(tape, terms.total)
        params = dict(self.model.named_parameters())
        grads = {name: p.grad for name, p in params.items() if p.grad is not None}
        hyper = AdamHyper(lr=lr, betas=self.training.adam_betas, eps=self.training.adam_eps)
        adam_step(params, grads, self.optimizer, hyper)
        self.model.zero_grad()
        values["lr"] = lr
        return values

    def epoch_batches(self, epoch: int, n_shapes: int) -> List[Tuple[np.ndarray, np.ndarray]]:
        """
        Reihenfolge und Sample-Seeds einer Epoche. Hängt nur von (seed, epoch) ab, ein
        fortgesetztes Training zieht also dieselben Batches wie ein ununterbrochenes.
        """
        rng = np.random.default_rng([self.training.seed, epoch])
        order = rng.permutation(n_shapes)
        batches = []
        for lo in range(0, n_shapes, self.training.batch_size):
            members = order[lo : lo + self.training.batch_size]
            batches.append((members, rng.integers(0, 2**31 - 1, size=len(members))))
        return batches

    def fit(self, shapes: Sequence, epochs: Optional[int] = None) -> TrainingResult:
        """
        Raises:
            ValueError: Ohne Formen.
            TrainingDivergedError: Bei nicht-endlichem Verlust.
        """
        if not shapes:
            logger.error("Training ohne Formen nicht möglich.")
            raise ValueError("Training benötigt mindestens eine Form.")
        n_epochs = epochs if epochs is not None else self.training.epochs
        bs = self.training.batch_size
        rows: List[Dict[str, float]] = []
        step = self.optimizer.step
        checkpoint: Optional[Path] = None
        self.model.train()
        logger.info(f"Training: {len(shapes)} Formen, {n_epochs} Epochen, Batch {bs}.")
        for epoch in range(self.start_epoch, self.start_epoch + n_epochs):
            epoch_rows: List[Dict[str, float]] = []
            for members, seeds in self.epoch_batches(epoch, len(shapes)):
                batch = [build_train_sample(shapes[i], self.training, int(s)) for i, s in zip(members, seeds)]
                values = self._step(batch, epoch, step)
                step += 1
                values.update(epoch=epoch, step=step)
                epoch_rows.append(values)
                logger.debug(f"Epoche {epoch} Schritt {step}: Verlust {values['total']:.6f}")
            rows.extend(epoch_rows)
            mean_total = float(np.mean([r["total"] for r in epoch_rows]))
            logger.info(f"Epoche {epoch + 1}/{self.start_epoch + n_epochs}: mittlerer Verlust {mean_total:.6f}")
            every = self.training.checkpoint_every
            last = epoch == self.start_epoch + n_epochs - 1
            if self.checkpoint_dir is not None and (last or (every and (epoch + 1) % every == 0)):
                # Zwischenstände dürfen scheitern, der letzte nicht
                with log_exceptions("Checkpoint konnte nicht geschrieben werden", continue_on_error=not last):
                    checkpoint = save_checkpoint(
                        self.checkpoint_dir / f"surfr_epoch{epoch + 1:04d}.ckpt", self.model, epoch + 1, self.optimizer
                    )
        history = pd.DataFrame(rows, columns=["epoch", "step", "lr", "total", "magnitude", "sign", "regularization"])
        csv_path = ensure_dir(self.output_dir) / "loss_history.csv"
        history.to_csv(csv_path, index=False)
        logger.success(f"Training abgeschlossen, Verlustkurve: {csv_path}")
        self.model.eval()
        return TrainingResult(model=self.model, optimizer=self.optimizer, history=history, checkpoint=checkpoint)


def train(
    model_config: ModelConfig,
    training: TrainingConfig,
    loss: LossConfig,
    shapes: Sequence,
    output_dir: Path,
    checkpoint_dir: Optional[Path] = None,
    epochs: Optional[int] = None,
) -> TrainingResult:
    return Trainer(model_config, training, loss, output_dir, checkpoint_dir).fit(shapes, epochs)

from typing import Dict, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from autodiff.modules import ops
from autodiff.modules.tensor import Tensor
from pydantic_models.config.loss_config import LossConfig


class LossTerms(BaseModel):
    """
    Gesamtverlust und ungewichtete Komponenten.
    total = λ_mag·magnitude + λ_sgn·sign + λ_reg·regularization
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    total: Tensor
    magnitude: Tensor
    sign: Tensor
    regularization: Tensor

    def as_dict(self) -> Dict[str, float]:
        return {
            "total": self.total.item(),
            "magnitude": self.magnitude.item(),
            "sign": self.sign.item(),
            "regularization": self.regularization.item(),
        }


def surfr_loss(
    logits: Tensor,
    magnitudes: Tensor,
    gt_distances: np.ndarray,
    head_weights: Sequence[Tensor],
    config: LossConfig,
) -> LossTerms:
    """
    L_mag: Mittel von |tanh(m̂) - tanh(|d|)|.
    L_sgn: Mittel der binären Kreuzentropie mit Ziel 1 für d ≥ 0.
    L_reg: Σ|w| über die Gewichte des Kopfes.
    """
    d = np.asarray(gt_distances, dtype=np.float64).reshape(-1)
    if d.shape != magnitudes.shape or d.shape != logits.shape:
        raise ValueError(f"surfr_loss: inkompatible Formen {logits.shape} und {d.shape}")
    magnitude = ops.mean(ops.abs(ops.tanh(magnitudes) - np.tanh(np.abs(d))))
    sign = ops.mean(ops.bce_with_logits(logits, (d >= 0.0).astype(np.float64)))
    regularization: Tensor = Tensor(0.0)
    for w in head_weights:
        regularization = regularization + ops.sum(ops.abs(w))
    total = (
        ops.scale_by_scalar(magnitude, config.lambda_mag)
        + ops.scale_by_scalar(sign, config.lambda_sgn)
        + ops.scale_by_scalar(regularization, config.lambda_reg)
    )
    return LossTerms(total=total, magnitude=magnitude, sign=sign, regularization=regularization)

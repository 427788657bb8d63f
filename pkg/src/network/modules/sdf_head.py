from typing import List, Sequence, Tuple

import numpy as np

from autodiff.modules import ops
from autodiff.modules.tensor import Tensor

from .layers import Mlp, Module


class SdfHead(Module):
    """
    5-Schicht-MLP e^h: S·F → 512 → 256 → 128 → 64 → 2 (Vorzeichen-Logit, Betrag vor abs).
    """

    def __init__(
        self,
        in_features: int,
        hidden: Sequence[int],
        rng: np.random.Generator,
        momentum: float = 0.1,
        eps: float = 1e-5,
    ):
        super().__init__()
        self.mlp = Mlp([in_features, *hidden, 2], rng, momentum=momentum, eps=eps)

    def weights(self) -> List[Tensor]:
        """Gewichtsmatrizen aller Schichten (ohne Bias), Grundlage der L1-Regularisierung."""
        return self.mlp.weights()


def sdf_head(features: Tensor, params: SdfHead) -> Tuple[Tensor, Tensor]:
    """
    Args:
        features (Tensor): Konkatenierte Skalen-Merkmale (Q, S·F).
        params (SdfHead): Kopf-Parameter.

    Returns:
        Tuple[Tensor, Tensor]: Vorzeichen-Logits l̂ (Q,) und Beträge m̂ = |·| ≥ 0 (Q,).
    """
    out = params.mlp(features)
    return ops.column(out, 0), ops.abs(ops.column(out, 1))


def signed_distance(logits, magnitudes) -> np.ndarray:
    """sgn(l̂)·m̂, l̂ = 0 zählt als positiv."""
    l_hat = np.asarray(logits.data if isinstance(logits, Tensor) else logits, dtype=np.float64)
    m_hat = np.asarray(magnitudes.data if isinstance(magnitudes, Tensor) else magnitudes, dtype=np.float64)
    return np.where(l_hat >= 0.0, m_hat, -m_hat)

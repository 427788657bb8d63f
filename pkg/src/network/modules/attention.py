from typing import Optional, Sequence

import numpy as np

from autodiff.modules import ops
from autodiff.modules.tensor import Tensor

from .layers import LayerNorm, Linear, Module


class CrossScaleAttention(Module):
    """
    Ein-Kopf-Transformer-Encoder-Schicht (Post-LayerNorm) über die S Skalen-Merkmale eines Queries.
    Die S Vektoren bilden pro Query eine Token-Folge der Länge S und Breite F.
    """

    def __init__(self, width: int, hidden: int, rng: np.random.Generator):
        super().__init__()
        self.width = width
        self.query = Linear(width, width, rng)
        self.key = Linear(width, width, rng)
        self.value = Linear(width, width, rng)
        self.output = Linear(width, width, rng)
        self.norm_attention = LayerNorm(width)
        self.ff_in = Linear(width, hidden, rng)
        self.ff_out = Linear(hidden, width, rng)
        self.norm_output = LayerNorm(width)
        self.last_attention: Optional[np.ndarray] = None

    def __call__(self, tokens: Tensor) -> Tensor:
        q = self.query(tokens)
        k = self.key(tokens)
        v = self.value(tokens)
        scores = ops.scale_by_scalar(ops.matmul(q, ops.swap_last_axes(k)), 1.0 / np.sqrt(self.width))
        attention = ops.softmax(scores, axis=-1)
        self.last_attention = attention.data
        h = self.norm_attention(tokens + self.output(ops.matmul(attention, v)))
        return self.norm_output(h + self.ff_out(ops.relu(self.ff_in(h))))


def stack_scales(per_scale: Sequence[Tensor]) -> Tensor:
    """(Q, F) pro Skala → (Q, S, F)."""
    if not per_scale:
        raise ValueError("stack_scales: keine Skalen-Merkmale")
    q, f = per_scale[0].shape
    for t in per_scale[1:]:
        if t.shape != (q, f):
            raise ValueError(f"stack_scales: inkompatible Formen {per_scale[0].shape} und {t.shape}")
    return ops.concat([ops.reshape(t, (q, 1, f)) for t in per_scale], axis=1)


def cross_scale_attention(per_scale: Sequence[Tensor], params: CrossScaleAttention) -> Tensor:
    """
    Wendet die Encoder-Schicht auf die Skalen-Merkmale an.

    Args:
        per_scale (Sequence[Tensor]): S Tensoren (Q, F).
        params (CrossScaleAttention): Parameter der Schicht.

    Returns:
        Tensor: (Q, S, F) transformierte Merkmale; params.last_attention hält die Gewichte (Q, S, S).

    Raises:
        ValueError: Wenn F nicht zur Modellbreite passt.
    """
    tokens = stack_scales(per_scale)
    if tokens.shape[-1] != params.width:
        raise ValueError(f"cross_scale_attention: inkompatible Formen {tokens.shape} und {(params.width,)}")
    return params(tokens)

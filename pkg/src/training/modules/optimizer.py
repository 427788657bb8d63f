from typing import Dict, Mapping, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from autodiff.modules.tensor import Tensor


class AdamHyper(BaseModel):
    lr: float = Field(gt=0.0)
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8


class OptimizerState(BaseModel):
    """
    Erste und zweite Momente pro Parametername, Schrittzähler und aktuelle Lernrate.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    step: int = 0
    lr: float = 0.0
    m: Dict[str, np.ndarray] = Field(default_factory=dict)
    v: Dict[str, np.ndarray] = Field(default_factory=dict)


def learning_rate(epoch: float, base_lr: float = 7.5e-4, half_life_epochs: float = 100.0) -> float:
    """Kontinuierliche Halbierung: lr(e) = lr0 · 2^(-e / half_life)."""
    return base_lr * 2.0 ** (-epoch / half_life_epochs)


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray],
    state: OptimizerState,
    hyper: AdamHyper,
) -> OptimizerState:
    """
    Ein Adam-Schritt mit Bias-Korrektur; Parameter werden in-place aktualisiert.
    Parameter ohne Gradient bleiben unverändert.

    Raises:
        ValueError: Wenn die Form eines Gradienten nicht zum Parameter passt.
    """
    b1, b2 = hyper.betas
    state.step += 1
    state.lr = hyper.lr
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for name, param in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != param.shape:
            raise ValueError(f"adam_step: inkompatible Formen {param.shape} und {g.shape} für {name}")
        m = state.m.setdefault(name, np.zeros_like(param.data))
        v = state.v.setdefault(name, np.zeros_like(param.data))
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        param.data -= hyper.lr * (m / c1) / (np.sqrt(v / c2) + hyper.eps)
    return state

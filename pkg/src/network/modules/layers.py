"""
Bausteine des Netzes: Parameter-Container, lineare Schichten, Normalisierungen und MLPs.
"""

from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from autodiff.modules import ops
from autodiff.modules.tensor import Tensor


class Module:
    """
    Basis aller Netzteile. Parameter sind Tensor-Attribute mit requires_grad, Puffer
    (laufende BatchNorm-Statistik) sind in _buffer_names eingetragene numpy-Arrays.
    Die Reihenfolge der Attribute bestimmt die Reihenfolge in named_parameters().
    """

    def __init__(self) -> None:
        self.training: bool = True
        self._buffer_names: List[str] = []

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        setattr(self, name, np.asarray(value, dtype=np.float64))
        self._buffer_names.append(name)

    def _children(self) -> Iterator[Tuple[str, "Module"]]:
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Tensor) and item.requires_grad:
                        yield f"{prefix}{name}.{i}", item
        for name, child in self._children():
            yield from child.named_parameters(f"{prefix}{name}.")

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for name in self._buffer_names:
            yield prefix + name, getattr(self, name)
        for name, child in self._children():
            yield from child.named_buffers(f"{prefix}{name}.")

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_arrays(self) -> Dict[str, np.ndarray]:
        """Alle Parameter und Puffer nach Namen (Referenzen, keine Kopien)."""
        state = {name: p.data for name, p in self.named_parameters()}
        state.update(dict(self.named_buffers()))
        return state

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for _, child in self._children():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()


def _uniform(rng: np.random.Generator, shape: Tuple[int, ...], bound: float) -> np.ndarray:
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    """
    y = x·W + b mit W der Form (in, out). Initialisierung gleichverteilt in ±1/sqrt(in).
    """

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, zero_init: bool = False):
        super().__init__()
        bound = 1.0 / np.sqrt(in_features)
        if zero_init:
            weight = np.zeros((in_features, out_features))
            bias = np.zeros(out_features)
        else:
            weight = _uniform(rng, (in_features, out_features), bound)
            bias = _uniform(rng, (out_features,), bound)
        self.weight = Tensor(weight, requires_grad=True, name="weight")
        self.bias = Tensor(bias, requires_grad=True, name="bias")

    @property
    def in_features(self) -> int:
        return self.weight.shape[0]

    @property
    def out_features(self) -> int:
        return self.weight.shape[1]

    def __call__(self, x) -> Tensor:
        return ops.matmul(x, self.weight) + self.bias


class BatchNorm1d(Module):
    def __init__(self, num_features: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self.gamma = Tensor(np.ones(num_features), requires_grad=True, name="gamma")
        self.beta = Tensor(np.zeros(num_features), requires_grad=True, name="beta")
        self.register_buffer("running_mean", np.zeros(num_features))
        self.register_buffer("running_var", np.ones(num_features))

    def __call__(self, x) -> Tensor:
        return ops.batch_norm(
            x,
            self.gamma,
            self.beta,
            self.running_mean,
            self.running_var,
            training=self.training,
            momentum=self.momentum,
            eps=self.eps,
        )


class LayerNorm(Module):
    def __init__(self, num_features: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.gamma = Tensor(np.ones(num_features), requires_grad=True, name="gamma")
        self.beta = Tensor(np.zeros(num_features), requires_grad=True, name="beta")

    def __call__(self, x) -> Tensor:
        return ops.layer_norm(x, self.gamma, self.beta, eps=self.eps)


class Mlp(Module):
    """
    Mehrschichtiges Perzeptron auf Zeilen (N, F): Linear → BatchNorm → ReLU pro verdeckter Schicht.
    Die letzte Schicht ist linear, ausser final_activation ist gesetzt.

    Args:
        widths (Sequence[int]): Breiten [in, h1, ..., out].
        rng (np.random.Generator): Zufallsquelle der Initialisierung.
        final_activation (bool): BatchNorm + ReLU auch nach der letzten Schicht.
        zero_last (bool): Letzte Schicht mit Nullen initialisieren.
    """

    def __init__(
        self,
        widths: Sequence[int],
        rng: np.random.Generator,
        final_activation: bool = False,
        zero_last: bool = False,
        momentum: float = 0.1,
        eps: float = 1e-5,
    ):
        super().__init__()
        if len(widths) < 2:
            raise ValueError(f"Mlp benötigt mindestens zwei Breiten, erhalten: {list(widths)}")
        n_layers = len(widths) - 1
        self.linears: List[Linear] = []
        self.norms: List[Optional[BatchNorm1d]] = []
        for i in range(n_layers):
            last = i == n_layers - 1
            self.linears.append(Linear(widths[i], widths[i + 1], rng, zero_init=last and zero_last))
            activated = not last or final_activation
            self.norms.append(BatchNorm1d(widths[i + 1], momentum, eps) if activated else None)

    @property
    def out_features(self) -> int:
        return self.linears[-1].out_features

    def __call__(self, x) -> Tensor:
        h = x
        for linear, norm in zip(self.linears, self.norms):
            h = linear(h)
            if norm is not None:
                h = ops.relu(norm(h))
        return h

    def weights(self) -> List[Tensor]:
        return [linear.weight for linear in self.linears]

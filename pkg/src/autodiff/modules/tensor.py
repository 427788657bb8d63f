"""
Dichter Tensor mit Rückwärts-Differentiation über ein explizites Band (ComputationTape).

Operationen zeichnen sich nur auf, wenn ein Band aktiv ist und mindestens ein Eingang
einen Gradienten benötigt. Ohne aktives Band (Inferenz) entsteht kein Graph.
"""

from contextvars import ContextVar, Token
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_ACTIVE_TAPE: ContextVar[Optional["ComputationTape"]] = ContextVar("surfr_active_tape", default=None)


class Tensor:
    """
    Dichter float64-Tensor. Gradienten haben nach backward() dieselbe Form wie data.
    """

    __slots__ = ("data", "grad", "requires_grad", "name", "parents", "backward_fn")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data: np.ndarray = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad: bool = requires_grad
        self.name: Optional[str] = name
        self.parents: Tuple["Tensor", ...] = ()
        self.backward_fn: Optional[BackwardFn] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return self.backward_fn is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() nur für Tensoren mit einem Element, Form: {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        from .ops import add

        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from .ops import sub

        return sub(self, other)

    def __rsub__(self, other):
        from .ops import sub

        return sub(other, self)

    def __mul__(self, other):
        from .ops import mul

        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from .ops import scale_by_scalar

        return scale_by_scalar(self, -1.0)

    def __matmul__(self, other):
        from .ops import matmul

        return matmul(self, other)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


class ComputationTape:
    """
    Geordnete Aufzeichnung ausgeführter Operationen. Jeder Knoten wird erst nach seinen
    Eingängen eingetragen, die Reihenfolge ist damit topologisch.
    Ein Band ist an einen Thread gebunden (ContextVar).
    """

    def __init__(self) -> None:
        self.nodes: List[Tensor] = []
        self._token: Optional[Token] = None

    def __enter__(self) -> "ComputationTape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if self._token is not None:
            _ACTIVE_TAPE.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, node: Tensor) -> None:
        self.nodes.append(node)


def active_tape() -> Optional[ComputationTape]:
    return _ACTIVE_TAPE.get()


def make_result(data: np.ndarray, parents: Sequence[Tensor], backward_fn: BackwardFn) -> Tensor:
    """
    Erzeugt das Ergebnis einer Operation und trägt es ins aktive Band ein, falls ein
    Eingang einen Gradienten benötigt.
    """
    out = Tensor(data)
    tape = active_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.parents = tuple(parents)
        out.backward_fn = backward_fn
        tape.record(out)
    return out


def backward(tape: ComputationTape, loss: Tensor) -> Dict[Tensor, np.ndarray]:
    """
    Rückwärtsdurchlauf vom skalaren Verlust über das Band.
    Setzt .grad aller erreichten Blätter (ersetzt, nicht akkumuliert) und gibt sie zurück.

    Raises:
        ValueError: Wenn der Verlust nicht skalar ist.
    """
    if loss.size != 1:
        logger.error(f"backward() mit nicht-skalarem Verlust der Form {loss.shape} aufgerufen.")
        raise ValueError(f"Verlust muss skalar sein, Form: {loss.shape}")

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: Dict[int, Tensor] = {}
    if loss.is_leaf and loss.requires_grad:
        leaves[id(loss)] = loss

    for node in reversed(tape.nodes):
        g = grads.pop(id(node), None)
        if g is None or node.backward_fn is None:
            continue
        parent_grads = node.backward_fn(g)
        for parent, pg in zip(node.parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = grads[key] + pg if key in grads else pg
            if parent.is_leaf:
                leaves[key] = parent

    result: Dict[Tensor, np.ndarray] = {}
    for key, leaf in leaves.items():
        leaf.grad = np.asarray(grads[key], dtype=np.float64).reshape(leaf.shape)
        result[leaf] = leaf.grad
    return result

"""
Vorwärts-Operationen mit analytischen Rückwärtsregeln.
Genau die Operationen, die das Netz benötigt; Broadcasting nur für Bias-Addition und Skalierung.
"""

from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.special import expit

from .tensor import Tensor, as_tensor, make_result

# Zeilen pro Block in segment_matmul (begrenzt das (N, F, G)-Zwischenergebnis)
_SEGMENT_MATMUL_CHUNK = 2048


def _shape_error(op: str, a: Tuple[int, ...], b: Tuple[int, ...]) -> ValueError:
    return ValueError(f"{op}: inkompatible Formen {a} und {b}")


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Summiert einen gebroadcasteten Gradienten auf die Eingangsform zurück."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise _shape_error(op, a.shape, b.shape) from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_result(a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_result(a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return make_result(a.data * b.data, (a, b), backward)


def scale_by_scalar(x, c: float) -> Tensor:
    x = as_tensor(x)
    c = float(c)
    return make_result(x.data * c, (x,), lambda g: (g * c,))


def matmul(a, b) -> Tensor:
    """
    Matrixprodukt für (N, F)@(F, G), (B, N, F)@(F, G) und (B, N, F)@(B, F, G).
    Gradienten: dA = dY·Bᵀ, dB = Aᵀ·dY (über die Batch-Achse summiert, falls B geteilt wird).
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2] or b.ndim > a.ndim:
        raise _shape_error("matmul", a.shape, b.shape)
    if b.ndim == 3 and a.shape[0] != b.shape[0]:
        raise _shape_error("matmul", a.shape, b.shape)

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return ga, _unbroadcast(gb, b.shape)

    return make_result(np.matmul(a.data, b.data), (a, b), backward)


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise ValueError("concat: leere Liste")
    ndim = parts[0].ndim
    ax = axis % ndim
    for p in parts[1:]:
        if p.ndim != ndim or any(p.shape[i] != parts[0].shape[i] for i in range(ndim) if i != ax):
            raise _shape_error("concat", parts[0].shape, p.shape)
    sizes = [p.shape[ax] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=ax))

    return make_result(np.concatenate([p.data for p in parts], axis=ax), parts, backward)


def reshape(x, shape: Tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    original = x.shape
    return make_result(x.data.reshape(shape), (x,), lambda g: (g.reshape(original),))


def swap_last_axes(x) -> Tensor:
    x = as_tensor(x)
    return make_result(np.swapaxes(x.data, -1, -2), (x,), lambda g: (np.swapaxes(g, -1, -2),))


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return make_result(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)
    return make_result(y, (x,), lambda g: (g * (1.0 - y * y),))


def abs(x) -> Tensor:
    x = as_tensor(x)
    sign = np.sign(x.data)
    return make_result(np.abs(x.data), (x,), lambda g: (g * sign,))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = expit(x.data)
    return make_result(y, (x,), lambda g: (g * y * (1.0 - y),))


def softmax(x, axis: int = -1, mask: Optional[np.ndarray] = None) -> Tensor:
    """
    Softmax entlang einer Achse. Maskierte Einträge erhalten Gewicht 0; vollständig
    maskierte Zeilen ergeben den Nullvektor.
    """
    x = as_tensor(x)
    if mask is None:
        e = np.exp(x.data - np.max(x.data, axis=axis, keepdims=True))
    else:
        masked = np.where(mask, x.data, -np.inf)
        row_max = np.max(masked, axis=axis, keepdims=True)
        row_max = np.where(np.isfinite(row_max), row_max, 0.0)
        e = np.exp(masked - row_max)
    total = np.sum(e, axis=axis, keepdims=True)
    y = e / np.where(total > 0, total, 1.0)

    def backward(g):
        return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)

    return make_result(y, (x,), backward)


def batch_norm(
    x,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """
    BatchNorm über die Zeilen von x (N, C).
    Training: Statistik des Mini-Batches, laufende Statistik wird in-place aktualisiert.
    Inferenz: nur laufende Statistik, damit eine affine Funktion jeder Zeile.
    """
    x = as_tensor(x)
    if x.ndim != 2 or x.shape[1] != gamma.shape[0]:
        raise _shape_error("batch_norm", x.shape, gamma.shape)
    if not training:
        inv_std = 1.0 / np.sqrt(running_var + eps)
        x_hat = (x.data - running_mean) * inv_std
        scale = gamma.data * inv_std

        def backward_eval(g):
            return g * scale, np.sum(g * x_hat, axis=0), np.sum(g, axis=0)

        return make_result(x_hat * gamma.data + beta.data, (x, gamma, beta), backward_eval)

    n = x.shape[0]
    mean = x.data.mean(axis=0)
    var = x.data.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x.data - mean) * inv_std
    unbiased = var * n / (n - 1) if n > 1 else var
    running_mean *= 1.0 - momentum
    running_mean += momentum * mean
    running_var *= 1.0 - momentum
    running_var += momentum * unbiased

    def backward_train(g):
        dx_hat = g * gamma.data
        dx = (inv_std / n) * (n * dx_hat - dx_hat.sum(axis=0) - x_hat * np.sum(dx_hat * x_hat, axis=0))
        return dx, np.sum(g * x_hat, axis=0), np.sum(g, axis=0)

    return make_result(x_hat * gamma.data + beta.data, (x, gamma, beta), backward_train)


def layer_norm(x, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """LayerNorm über die letzte Achse."""
    x = as_tensor(x)
    if x.shape[-1] != gamma.shape[0]:
        raise _shape_error("layer_norm", x.shape, gamma.shape)
    d = x.shape[-1]
    mean = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x.data - mean) * inv_std
    lead = tuple(range(x.ndim - 1))

    def backward(g):
        dx_hat = g * gamma.data
        dx = (inv_std / d) * (
            d * dx_hat - dx_hat.sum(axis=-1, keepdims=True) - x_hat * np.sum(dx_hat * x_hat, axis=-1, keepdims=True)
        )
        return dx, np.sum(g * x_hat, axis=lead), np.sum(g, axis=lead)

    return make_result(x_hat * gamma.data + beta.data, (x, gamma, beta), backward)


def segment_max(values, segment_ids: np.ndarray, num_segments: int) -> Tensor:
    """
    Kanalweises Maximum pro Segment: eine Zeile pro Segment, leere Segmente ergeben Nullzeilen.
    Bei Gleichstand erhält der kleinste Zeilenindex den Gradienten.
    """
    values = as_tensor(values)
    ids = np.asarray(segment_ids, dtype=np.int64)
    if values.ndim != 2 or ids.shape != (values.shape[0],):
        raise _shape_error("segment_max", values.shape, ids.shape)
    if ids.size and (ids.min() < 0 or ids.max() >= num_segments):
        raise ValueError(f"segment_max: Segment-IDs ausserhalb von [0, {num_segments})")
    n, c = values.shape
    out = np.zeros((num_segments, c), dtype=np.float64)
    argmax = np.zeros((0, c), dtype=np.int64)
    present = np.zeros(0, dtype=np.int64)
    if n > 0:
        order = np.argsort(ids, kind="stable")
        sorted_ids = ids[order]
        sorted_vals = values.data[order]
        present, starts = np.unique(sorted_ids, return_index=True)
        seg_max = np.maximum.reduceat(sorted_vals, starts, axis=0)
        out[present] = seg_max
        # erste Position (stabil sortiert = kleinster Index) mit dem Maximalwert
        slot = np.repeat(np.arange(len(present)), np.diff(np.append(starts, n)))
        hits = sorted_vals == seg_max[slot]
        positions = np.where(hits, np.arange(n)[:, None], n)
        first = np.minimum.reduceat(positions, starts, axis=0)
        argmax = order[first]

    def backward(g):
        grad = np.zeros_like(values.data)
        if present.size:
            cols = np.broadcast_to(np.arange(c), argmax.shape)
            grad[argmax, cols] = g[present]
        return (grad,)

    return make_result(out, (values,), backward)


def segment_matmul(x, mats, segment_ids: np.ndarray) -> Tensor:
    """
    Zeilenweise Transformation out[n] = x[n] @ mats[segment_ids[n]] für x (N, F), mats (C, F, G).
    """
    x, mats = as_tensor(x), as_tensor(mats)
    ids = np.asarray(segment_ids, dtype=np.int64)
    if x.ndim != 2 or mats.ndim != 3 or x.shape[1] != mats.shape[1] or ids.shape != (x.shape[0],):
        raise _shape_error("segment_matmul", x.shape, mats.shape)
    n = x.shape[0]
    out = np.empty((n, mats.shape[2]), dtype=np.float64)
    for lo in range(0, n, _SEGMENT_MATMUL_CHUNK):
        hi = min(n, lo + _SEGMENT_MATMUL_CHUNK)
        out[lo:hi] = np.einsum("nf,nfg->ng", x.data[lo:hi], mats.data[ids[lo:hi]])

    def backward(g):
        gx = np.empty_like(x.data)
        gm = np.zeros_like(mats.data)
        for lo in range(0, n, _SEGMENT_MATMUL_CHUNK):
            hi = min(n, lo + _SEGMENT_MATMUL_CHUNK)
            gx[lo:hi] = np.einsum("ng,nfg->nf", g[lo:hi], mats.data[ids[lo:hi]])
            np.add.at(gm, ids[lo:hi], x.data[lo:hi, :, None] * g[lo:hi, None, :])
        return gx, gm

    return make_result(out, (x, mats), backward)


def _scatter_rows(index: np.ndarray, g: np.ndarray, num_rows: int) -> np.ndarray:
    """Summiert Zeilen von g in die durch index adressierten Zeilen (dünnbesetzte Matrix)."""
    flat = index.reshape(-1)
    cols = g.reshape(flat.size, -1)
    scatter = sparse.csr_matrix(
        (np.ones(flat.size), (flat, np.arange(flat.size))), shape=(num_rows, flat.size)
    )
    return np.asarray(scatter @ cols)


def gather_rows(x, index: np.ndarray) -> Tensor:
    """Zeilenauswahl x[index] für x (N, F); das Ergebnis hat die Form index.shape + (F,)."""
    x = as_tensor(x)
    idx = np.asarray(index, dtype=np.int64)
    if x.ndim != 2:
        raise _shape_error("gather_rows", x.shape, idx.shape)
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise ValueError(f"gather_rows: Index ausserhalb von [0, {x.shape[0]})")
    n = x.shape[0]
    return make_result(x.data[idx], (x,), lambda g: (_scatter_rows(idx, g, n),))


def weighted_sum(weights, values) -> Tensor:
    """Σ_k w[q, k] · v[q, k, :] für Gewichte (Q, K) und Werte (Q, K, F)."""
    weights, values = as_tensor(weights), as_tensor(values)
    if weights.ndim != 2 or values.ndim != 3 or weights.shape != values.shape[:2]:
        raise _shape_error("weighted_sum", weights.shape, values.shape)

    def backward(g):
        gw = np.einsum("qkf,qf->qk", values.data, g)
        gv = weights.data[:, :, None] * g[:, None, :]
        return gw, gv

    return make_result(np.einsum("qk,qkf->qf", weights.data, values.data), (weights, values), backward)


def column(x, j: int) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 2 or not 0 <= j < x.shape[1]:
        raise _shape_error("column", x.shape, (j,))

    def backward(g):
        grad = np.zeros_like(x.data)
        grad[:, j] = g
        return (grad,)

    return make_result(x.data[:, j].copy(), (x,), backward)


def sum(x) -> Tensor:
    x = as_tensor(x)
    shape = x.shape
    return make_result(np.asarray(x.data.sum()), (x,), lambda g: (np.full(shape, float(g)),))


def mean(x) -> Tensor:
    x = as_tensor(x)
    shape = x.shape
    n = max(x.size, 1)
    return make_result(np.asarray(x.data.mean() if x.size else 0.0), (x,), lambda g: (np.full(shape, float(g) / n),))


def bce_with_logits(logits, targets: np.ndarray) -> Tensor:
    """
    Elementweise binäre Kreuzentropie auf Logits, numerisch stabil:
    max(l, 0) - l·y + log(1 + exp(-|l|)).
    """
    logits = as_tensor(logits)
    y = np.asarray(targets, dtype=np.float64)
    if y.shape != logits.shape:
        raise _shape_error("bce_with_logits", logits.shape, y.shape)
    lv = logits.data
    loss = np.maximum(lv, 0.0) - lv * y + np.log1p(np.exp(-np.abs(lv)))
    return make_result(loss, (logits,), lambda g: (g * (expit(lv) - y),))

from typing import Callable, List, Optional, Sequence

import numpy as np
from loguru import logger
from pydantic import BaseModel

from .tensor import ComputationTape, Tensor, backward


class GradientCheckEntry(BaseModel):
    tensor: str
    index: List[int]
    analytic: float
    numeric: float
    relative_error: float


class GradientCheckReport(BaseModel):
    """
    Ergebnis eines Vergleichs analytischer Gradienten mit zentralen Differenzen.
    """

    checked: int = 0
    max_relative_error: float = 0.0
    tolerance: float
    worst: Optional[GradientCheckEntry] = None

    @property
    def passed(self) -> bool:
        return self.max_relative_error <= self.tolerance


def _evaluate(f: Callable[[], Tensor]) -> float:
    return float(f().data.sum())


def gradient_check(
    f: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    h: float = 1e-4,
    tol: float = 1e-3,
    max_entries: Optional[int] = None,
    seed: int = 0,
    floor: float = 1e-6,
) -> GradientCheckReport:
    """
    Vergleicht die Gradienten von f nach inputs mit zentralen Differenzen (f(x+h) - f(x-h)) / 2h.

    Args:
        f: Berechnet aus den (veränderlichen) Eingängen einen skalaren Verlust.
        inputs: Blatt-Tensoren mit requires_grad=True.
        h: Schrittweite.
        tol: Zulässiger relativer Fehler |a - n| / max(|a|, |n|, floor).
        max_entries: Höchstens so viele zufällig gewählte Einträge pro Tensor prüfen.
        seed: Seed für die Auswahl der Einträge.
        floor: Untergrenze des Nenners.

    Returns:
        GradientCheckReport
    """
    for t in inputs:
        if not t.requires_grad:
            raise ValueError(f"Eingang {t!r} benötigt requires_grad=True für die Gradientenprüfung.")
        t.data = np.ascontiguousarray(t.data)

    with ComputationTape() as tape:
        loss = f()
    analytic = backward(tape, loss)

    rng = np.random.default_rng(seed)
    report = GradientCheckReport(tolerance=tol)
    for i, t in enumerate(inputs):
        grad = analytic.get(t, np.zeros_like(t.data))
        flat_count = t.size
        entries = np.arange(flat_count)
        if max_entries is not None and flat_count > max_entries:
            entries = np.sort(rng.choice(flat_count, size=max_entries, replace=False))
        flat = t.data.reshape(-1)
        for e in entries:
            original = flat[e]
            flat[e] = original + h
            f_plus = _evaluate(f)
            flat[e] = original - h
            f_minus = _evaluate(f)
            flat[e] = original
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = float(grad.reshape(-1)[e])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            report.checked += 1
            if rel >= report.max_relative_error:
                report.max_relative_error = rel
                report.worst = GradientCheckEntry(
                    tensor=t.name or f"input[{i}]",
                    index=[int(v) for v in np.unravel_index(e, t.shape)],
                    analytic=a,
                    numeric=numeric,
                    relative_error=rel,
                )
    if not report.passed:
        logger.warning(f"Gradientenprüfung fehlgeschlagen: {report.worst}")
    return report

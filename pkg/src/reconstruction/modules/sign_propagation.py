"""
Vorzeichenausbreitung in nicht ausgewertete Voxel mit einem iterierten Boxfilter.
"""

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict
from scipy import ndimage

from pydantic_models.config.reconstruction_config import ReconstructionConfig

from .voxel_grid import SparseSDFGrid


class PropagationResult(BaseModel):
    """
    Dichtes Gitter mit Vorzeichen in jedem Voxel.

    Attribute:
        values (np.ndarray): Ausgewertete Werte bzw. ±τ für gefüllte Voxel.
        passes (int): Anzahl Filterdurchläufe mit mindestens einer Änderung.
        filled (int): Über den Filter gefüllte Voxel.
        fallback (int): Über den nächsten bekannten Voxel gefüllte Voxel.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    passes: int
    filled: int
    fallback: int

    @property
    def signs(self) -> np.ndarray:
        return np.where(self.values >= 0.0, 1, -1).astype(np.int8)


def box_sum(grid: np.ndarray, size: int) -> np.ndarray:
    """
    Summe über das size³-Fenster um jeden Voxel, ausserhalb des Gitters 0 (ganzzahlig, exakt).
    """
    h = size // 2
    acc = np.pad(np.asarray(grid, dtype=np.int64), h)
    for axis in range(3):
        c = np.cumsum(acc, axis=axis)
        pad = [(0, 0)] * 3
        pad[axis] = (1, 0)
        c = np.pad(c, pad)
        n = c.shape[axis]
        acc = np.take(c, np.arange(size, n), axis=axis) - np.take(c, np.arange(0, n - size), axis=axis)
    return acc


def propagate_signs(grid: SparseSDFGrid, config: ReconstructionConfig) -> PropagationResult:
    """
    Synchrone Durchläufe: ein leerer Voxel mit |Σ Vorzeichen bekannter Nachbarn im ε³-Fenster| > t_update
    wird bekannt mit Vorzeichen der Summe und Betrag τ. Bis ein Durchlauf nichts ändert.
    Verbleibende leere Voxel übernehmen das Vorzeichen des nächsten bekannten Voxels.

    Raises:
        ValueError: Wenn kein Voxel bekannt ist.
    """
    if grid.num_known == 0:
        logger.error("Vorzeichenausbreitung ohne bekannte Voxel nicht möglich.")
        raise ValueError("propagate_signs benötigt mindestens einen bekannten Voxel.")
    tau = config.fill_magnitude_voxels * 2.0 / grid.resolution
    known = grid.known.copy()
    signs = np.where(grid.values >= 0.0, 1, -1).astype(np.int8) * known
    passes = 0
    filled = 0
    while True:
        response = box_sum(signs, config.box_filter_size)
        update = ~known & (np.abs(response) > config.update_threshold)
        n_update = int(np.count_nonzero(update))
        if n_update == 0:
            break
        signs[update] = np.sign(response[update]).astype(np.int8)
        known |= update
        passes += 1
        filled += n_update
        logger.debug(f"Durchlauf {passes}: {n_update} Voxel gefüllt.")

    fallback = int(np.count_nonzero(~known))
    if fallback:
        logger.warning(f"{fallback} Voxel nicht erreicht, Vorzeichen des nächsten bekannten Voxels übernommen.")
        _, nearest = ndimage.distance_transform_edt(~known, return_indices=True)
        signs = signs[nearest[0], nearest[1], nearest[2]]

    values = np.where(grid.known, grid.values, tau * signs)
    return PropagationResult(values=values, passes=passes, filled=filled, fallback=fallback)

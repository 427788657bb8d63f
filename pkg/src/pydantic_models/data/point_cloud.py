from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

# Toleranz für die Einheitslänge der Normalen
NORMAL_TOLERANCE = 1e-6


def as_point_array(value, name: str = "points") -> np.ndarray:
    """
    Wandelt eine Liste von 3-Vektoren in ein schreibgeschütztes (N, 3)-float64-Array um.
    """
    arr = np.array(value, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 3:
        arr = arr.reshape(1, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"{name} muss die Form (N, 3) haben, erhalten: {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} enthält nicht-endliche Koordinaten.")
    arr.flags.writeable = False
    return arr


class PointCloud(BaseModel):
    """
    Punktwolke mit optionalen Normalen (Einheitsvektoren).
    Unveränderlich nach der Konstruktion; die Arrays sind schreibgeschützt.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    points: np.ndarray
    normals: Optional[np.ndarray] = None

    @field_validator("points", mode="before")
    @classmethod
    def convert_points(cls, v) -> np.ndarray:
        return as_point_array(v, "points")

    @field_validator("normals", mode="before")
    @classmethod
    def convert_normals(cls, v) -> Optional[np.ndarray]:
        if v is None:
            return None
        return as_point_array(v, "normals")

    @model_validator(mode="after")
    def check_normals(self) -> "PointCloud":
        if self.normals is None:
            return self
        if self.normals.shape != self.points.shape:
            raise ValueError(
                f"normals {self.normals.shape} passen nicht zu points {self.points.shape}."
            )
        lengths = np.linalg.norm(self.normals, axis=1)
        if np.any(np.abs(lengths - 1.0) > NORMAL_TOLERANCE):
            raise ValueError("Normalen müssen Einheitslänge haben (Toleranz 1e-6).")
        return self

    def __len__(self) -> int:
        return int(self.points.shape[0])

    @property
    def num_points(self) -> int:
        return len(self)

    def is_normalized(self, tol: float = 1e-12) -> bool:
        """Prüft, ob alle Koordinaten in [-1, 1] liegen."""
        return bool(np.all(np.abs(self.points) <= 1.0 + tol))


class QuerySet(BaseModel):
    """
    Query-Punkte mit optionalen Soll-Distanzen (nur im Training).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    points: np.ndarray
    gt_signed_distance: Optional[np.ndarray] = None

    @field_validator("points", mode="before")
    @classmethod
    def convert_points(cls, v) -> np.ndarray:
        return as_point_array(v, "points")

    @field_validator("gt_signed_distance", mode="before")
    @classmethod
    def convert_distances(cls, v) -> Optional[np.ndarray]:
        if v is None:
            return None
        arr = np.array(v, dtype=np.float64).reshape(-1)
        arr.flags.writeable = False
        return arr

    @model_validator(mode="after")
    def check_lengths(self) -> "QuerySet":
        if self.gt_signed_distance is not None and self.gt_signed_distance.shape[0] != self.points.shape[0]:
            raise ValueError(
                f"gt_signed_distance ({self.gt_signed_distance.shape[0]}) und points "
                f"({self.points.shape[0]}) müssen gleich lang sein."
            )
        return self

    def __len__(self) -> int:
        return int(self.points.shape[0])


class NormalizationTransform(BaseModel):
    """
    Affine Abbildung x -> (x - center) * scale in den Einheitswürfel und zurück.
    """

    model_config = ConfigDict(frozen=True)

    center: tuple[float, float, float]
    scale: float

    @field_validator("scale")
    @classmethod
    def scale_positive(cls, v: float) -> float:
        if not np.isfinite(v) or v <= 0:
            raise ValueError(f"scale muss positiv sein, erhalten: {v}")
        return v

    def apply(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - np.asarray(self.center)) * self.scale

    def invert(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) / self.scale + np.asarray(self.center)

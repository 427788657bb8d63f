from functools import cached_property
from typing import Optional

import numpy as np
import trimesh
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from .point_cloud import NormalizationTransform


class TriangleMesh(BaseModel):
    """
    Dreiecksnetz aus Vertex-Liste und Index-Tripeln.
    Invarianten: alle Indizes gültig, keine degenerierten Dreiecke (Fläche 0 oder doppelte Indizes).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    vertices: np.ndarray
    faces: np.ndarray
    vertex_normals: Optional[np.ndarray] = None

    @field_validator("vertices", mode="before")
    @classmethod
    def convert_vertices(cls, v) -> np.ndarray:
        arr = np.array(v, dtype=np.float64).reshape(-1, 3)
        arr.flags.writeable = False
        return arr

    @field_validator("faces", mode="before")
    @classmethod
    def convert_faces(cls, v) -> np.ndarray:
        arr = np.array(v, dtype=np.int64).reshape(-1, 3)
        arr.flags.writeable = False
        return arr

    @field_validator("vertex_normals", mode="before")
    @classmethod
    def convert_normals(cls, v) -> Optional[np.ndarray]:
        if v is None:
            return None
        arr = np.array(v, dtype=np.float64).reshape(-1, 3)
        arr.flags.writeable = False
        return arr

    @model_validator(mode="after")
    def check_faces(self) -> "TriangleMesh":
        if self.faces.size == 0:
            return self
        if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
            raise ValueError("Ungültige Dreiecksindizes im Mesh.")
        f = self.faces
        if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
            raise ValueError("Degenerierte Dreiecke (doppelte Indizes) im Mesh.")
        if np.any(self.face_areas() <= 0.0):
            raise ValueError("Degenerierte Dreiecke (Fläche 0) im Mesh.")
        if self.vertex_normals is not None and self.vertex_normals.shape != self.vertices.shape:
            raise ValueError("vertex_normals passen nicht zu vertices.")
        return self

    @classmethod
    def empty(cls) -> "TriangleMesh":
        return cls(vertices=np.zeros((0, 3)), faces=np.zeros((0, 3), dtype=np.int64))

    @property
    def is_empty(self) -> bool:
        return self.faces.shape[0] == 0

    @cached_property
    def trimesh_view(self) -> trimesh.Trimesh:
        """Zwischengespeichertes trimesh-Objekt für Flächen, Normalen und Kantentopologie."""
        return self.to_trimesh()

    def face_areas(self) -> np.ndarray:
        return np.asarray(self.trimesh_view.area_faces)

    def face_normals(self) -> np.ndarray:
        return np.asarray(self.trimesh_view.face_normals)

    @property
    def area(self) -> float:
        return float(self.trimesh_view.area) if not self.is_empty else 0.0

    def edge_face_counts(self) -> np.ndarray:
        """Anzahl angrenzender Dreiecke pro ungerichteter Kante."""
        return np.bincount(self.trimesh_view.edges_unique_inverse)

    def boundary_edge_count(self) -> int:
        if self.is_empty:
            return 0
        return len(trimesh.grouping.group_rows(self.trimesh_view.edges_sorted, require_count=1))

    def euler_characteristic(self) -> int:
        """V - E + F über die eindeutigen Kanten."""
        if self.is_empty:
            return 0
        return int(self.trimesh_view.euler_number)

    def transformed(self, transform: NormalizationTransform) -> "TriangleMesh":
        """Bildet die Vertices aus normierten Koordinaten zurück in Welteinheiten ab."""
        return TriangleMesh(
            vertices=transform.invert(self.vertices), faces=self.faces, vertex_normals=self.vertex_normals
        )

    def to_trimesh(self) -> trimesh.Trimesh:
        return trimesh.Trimesh(vertices=np.array(self.vertices), faces=np.array(self.faces), process=False)

"""
Synthetische Formen mit analytischer SDF (negativ innen) und flächengleichverteiltem Oberflächen-Sampler.
Alle Formen liegen innerhalb der Kugel mit Radius 0.9 um den Ursprung.
"""

from typing import Annotated, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from pydantic_models.data.triangle_mesh import TriangleMesh
from reconstruction.modules.marching_cubes import marching_cubes
from reconstruction.modules.voxel_grid import voxel_centers

Vec3 = Tuple[float, float, float]

# Radius, in dem jede erzeugte Form liegen muss
SHAPE_BOUND = 0.9


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


class Sphere(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["sphere"] = "sphere"
    center: Vec3 = (0.0, 0.0, 0.0)
    radius: float = Field(default=0.5, gt=0.0)

    @property
    def area(self) -> float:
        return 4.0 * np.pi * self.radius**2

    @property
    def bounding_radius(self) -> float:
        return float(np.linalg.norm(self.center)) + self.radius

    def sdf(self, x: np.ndarray) -> np.ndarray:
        return np.linalg.norm(np.asarray(x) - np.asarray(self.center), axis=-1) - self.radius

    def sample_surface(self, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        normals = _unit(rng.normal(size=(n, 3)))
        return np.asarray(self.center) + self.radius * normals, normals


class Box(BaseModel):
    """Achsenparalleler Quader mit Halbachsen half_extents."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["box"] = "box"
    center: Vec3 = (0.0, 0.0, 0.0)
    half_extents: Vec3 = (0.4, 0.3, 0.2)

    @property
    def area(self) -> float:
        hx, hy, hz = self.half_extents
        return 8.0 * (hx * hy + hy * hz + hx * hz)

    @property
    def bounding_radius(self) -> float:
        return float(np.linalg.norm(self.center) + np.linalg.norm(self.half_extents))

    def sdf(self, x: np.ndarray) -> np.ndarray:
        q = np.abs(np.asarray(x) - np.asarray(self.center)) - np.asarray(self.half_extents)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return outside + inside

    def sample_surface(self, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        h = np.asarray(self.half_extents)
        # Seitenpaare senkrecht zu x, y, z mit Fläche 4·h_j·h_k je Seite
        face_areas = np.array([h[1] * h[2], h[0] * h[2], h[0] * h[1]])
        axis = rng.choice(3, size=n, p=face_areas / face_areas.sum())
        side = rng.choice([-1.0, 1.0], size=n)
        local = rng.uniform(-1.0, 1.0, size=(n, 3)) * h
        rows = np.arange(n)
        local[rows, axis] = side * h[axis]
        normals = np.zeros((n, 3))
        normals[rows, axis] = side
        return np.asarray(self.center) + local, normals


class Torus(BaseModel):
    """Torus mit Symmetrieachse z."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["torus"] = "torus"
    center: Vec3 = (0.0, 0.0, 0.0)
    major_radius: float = Field(default=0.5, gt=0.0)
    minor_radius: float = Field(default=0.2, gt=0.0)

    @property
    def area(self) -> float:
        return 4.0 * np.pi**2 * self.major_radius * self.minor_radius

    @property
    def bounding_radius(self) -> float:
        return float(np.linalg.norm(self.center)) + self.major_radius + self.minor_radius

    def sdf(self, x: np.ndarray) -> np.ndarray:
        p = np.asarray(x) - np.asarray(self.center)
        ring = np.linalg.norm(p[..., :2], axis=-1) - self.major_radius
        return np.sqrt(ring**2 + p[..., 2] ** 2) - self.minor_radius

    def sample_surface(self, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        big, small = self.major_radius, self.minor_radius
        phis = np.zeros(0)
        # Flächenelement ∝ (R + r·cos φ): Verwerfungsmethode auf φ
        while phis.size < n:
            phi = rng.uniform(0.0, 2.0 * np.pi, size=2 * n)
            accept = rng.uniform(0.0, 1.0, size=2 * n) < (big + small * np.cos(phi)) / (big + small)
            phis = np.concatenate([phis, phi[accept]])
        phi = phis[:n]
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
        normals = np.stack([np.cos(phi) * np.cos(theta), np.cos(phi) * np.sin(theta), np.sin(phi)], axis=1)
        ring = np.stack([big * np.cos(theta), big * np.sin(theta), np.zeros(n)], axis=1)
        return np.asarray(self.center) + ring + small * normals, normals


Primitive = Annotated[Union[Sphere, Box, Torus], Field(discriminator="kind")]


class CsgShape(BaseModel):
    """
    Vereinigung (min) oder Differenz a \\ b (max(a, -b)) zweier Grundformen.
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["union", "difference"] = "union"
    a: Primitive
    b: Primitive

    @property
    def bounding_radius(self) -> float:
        if self.kind == "difference":
            return self.a.bounding_radius
        return max(self.a.bounding_radius, self.b.bounding_radius)

    def sdf(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "union":
            return np.minimum(self.a.sdf(x), self.b.sdf(x))
        return np.maximum(self.a.sdf(x), -self.b.sdf(x))

    def _candidates(self, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        share_a = self.a.area / (self.a.area + self.b.area)
        n_a = int(rng.binomial(n, share_a))
        pa, na = self.a.sample_surface(n_a, rng)
        pb, nb = self.b.sample_surface(n - n_a, rng)
        if self.kind == "union":
            keep_a = self.b.sdf(pa) >= 0.0
            keep_b = self.a.sdf(pb) >= 0.0
            return np.concatenate([pa[keep_a], pb[keep_b]]), np.concatenate([na[keep_a], nb[keep_b]])
        keep_a = self.b.sdf(pa) >= 0.0
        keep_b = self.a.sdf(pb) <= 0.0
        return np.concatenate([pa[keep_a], pb[keep_b]]), np.concatenate([na[keep_a], -nb[keep_b]])

    def sample_surface(self, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        points = np.zeros((0, 3))
        normals = np.zeros((0, 3))
        while points.shape[0] < n:
            p, nrm = self._candidates(max(2 * n, 64), rng)
            if p.shape[0] == 0:
                raise ValueError(f"CSG-Form ({self.kind}) ohne sichtbare Oberfläche.")
            points = np.concatenate([points, p])
            normals = np.concatenate([normals, nrm])
        # Mischung aus beiden Teilflächen, deshalb zufällige Auswahl statt der ersten n
        pick = rng.permutation(points.shape[0])[:n]
        return points[pick], normals[pick]


SyntheticShape = Annotated[Union[Sphere, Box, Torus, CsgShape], Field(discriminator="kind")]

SHAPE_KINDS = ("sphere", "box", "torus", "union", "difference")


def _jitter(rng: np.random.Generator, amount: float) -> Vec3:
    c = rng.uniform(-amount, amount, size=3)
    return (float(c[0]), float(c[1]), float(c[2]))


def _random_primitive(rng: np.random.Generator, kind: str, size: float = 1.0, center: Optional[Vec3] = None):
    c = center if center is not None else _jitter(rng, 0.05)
    if kind == "sphere":
        return Sphere(center=c, radius=float(rng.uniform(0.35, 0.75)) * size)
    if kind == "box":
        h = rng.uniform(0.2, 0.45, size=3) * size
        return Box(center=c, half_extents=(float(h[0]), float(h[1]), float(h[2])))
    major = float(rng.uniform(0.35, 0.55)) * size
    minor = float(rng.uniform(0.1, min(0.25, 0.8 - major))) * size
    return Torus(center=c, major_radius=major, minor_radius=minor)


def random_shape(rng: np.random.Generator, kind: Optional[str] = None):
    """
    Zufällige Form einer Art (oder einer zufälligen Art), die innerhalb von SHAPE_BOUND liegt.
    """
    chosen = kind if kind is not None else str(rng.choice(SHAPE_KINDS))
    if chosen not in SHAPE_KINDS:
        raise ValueError(f"Unbekannte Formart: {chosen} (erlaubt: {', '.join(SHAPE_KINDS)})")
    while True:
        if chosen in ("sphere", "box", "torus"):
            shape = _random_primitive(rng, chosen)
        elif chosen == "union":
            a = _random_primitive(rng, str(rng.choice(["sphere", "box"])), size=0.7, center=_jitter(rng, 0.2))
            b = _random_primitive(rng, str(rng.choice(["sphere", "box", "torus"])), size=0.7, center=_jitter(rng, 0.2))
            shape = CsgShape(kind="union", a=a, b=b)
        else:
            a = _random_primitive(rng, str(rng.choice(["sphere", "box"])))
            b = Sphere(center=_jitter(rng, 0.35), radius=float(rng.uniform(0.2, 0.35)))
            shape = CsgShape(kind="difference", a=a, b=b)
        if shape.bounding_radius <= SHAPE_BOUND:
            return shape


def shape_corpus(num_shapes: int, seed: int):
    """num_shapes Formen, die Arten reihum, reproduzierbar pro Seed."""
    rng = np.random.default_rng(seed)
    return [random_shape(rng, SHAPE_KINDS[i % len(SHAPE_KINDS)]) for i in range(num_shapes)]


def reference_mesh(shape, resolution: int = 128) -> TriangleMesh:
    """Marching Cubes der exakten SDF auf einem dichten Gitter (Referenz für die Auswertung)."""
    idx = np.indices((resolution,) * 3).reshape(3, -1).T
    values = shape.sdf(voxel_centers(idx, resolution)).reshape((resolution,) * 3)
    return marching_cubes(values)

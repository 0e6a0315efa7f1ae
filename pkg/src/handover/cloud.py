"""Object point clouds and local normal estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SchemaError


@dataclass(frozen=True, eq=False)
class ObjectCloud:
    """Named point cloud in the object frame, with optional unit normals."""

    name: str
    points: np.ndarray  # (N, 3) meters
    normals: np.ndarray | None = None  # (N, 3) unit vectors

    def __post_init__(self):
        p = np.array(self.points, dtype=float)
        if p.ndim != 2 or p.shape[1] != 3 or p.shape[0] < 1:
            raise SchemaError(f"points must be (N>=1, 3), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise SchemaError("cloud contains non-finite points")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)
        if self.normals is not None:
            n = np.array(self.normals, dtype=float)
            if n.shape != p.shape:
                raise SchemaError(f"normals must match points shape, got {n.shape}")
            norms = np.linalg.norm(n, axis=1)
            if np.max(np.abs(norms - 1.0)) > 1e-6:
                raise SchemaError("normals must be unit length within 1e-6")
            n.setflags(write=False)
            object.__setattr__(self, "normals", n)

    @property
    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def with_normals(self) -> "ObjectCloud":
        if self.normals is not None:
            return self
        return ObjectCloud(self.name, self.points, estimate_normals(self.points))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "points": self.points.tolist(),
            "normals": None if self.normals is None else self.normals.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ObjectCloud":
        try:
            return cls(
                name=data["name"],
                points=np.asarray(data["points"], dtype=float),
                normals=(
                    None
                    if data.get("normals") is None
                    else np.asarray(data["normals"], dtype=float)
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad cloud record: {exc}") from exc


def estimate_normals(points, neighbors: int = 12) -> np.ndarray:
    """Per-point normals from local PCA, oriented outward from the centroid.

    Brute-force k-nearest-neighbour search; fine for desk-scale clouds.
    """
    p = np.asarray(points, dtype=float)
    n_points = p.shape[0]
    if n_points < 3:
        # Too few points for a plane fit; fall back to radial directions.
        centered = p - p.mean(axis=0)
        norms = np.linalg.norm(centered, axis=1)
        out = np.where(norms[:, None] > 1e-12, centered / np.maximum(norms, 1e-12)[:, None], 0.0)
        out[norms <= 1e-12] = (1.0, 0.0, 0.0)
        return out

    k = min(neighbors, n_points - 1)
    centroid = p.mean(axis=0)
    normals = np.empty_like(p)
    chunk = 512
    for start in range(0, n_points, chunk):
        block = p[start : start + chunk]
        d2 = ((block[:, None, :] - p[None, :, :]) ** 2).sum(axis=2)
        idx = np.argpartition(d2, kth=k, axis=1)[:, : k + 1]
        for row, base in enumerate(range(start, min(start + chunk, n_points))):
            nbrs = p[idx[row]]
            cov = np.cov(nbrs.T)
            _, vecs = np.linalg.eigh(cov)
            normal = vecs[:, 0]
            outward = p[base] - centroid
            if normal @ outward < 0:
                normal = -normal
            normals[base] = normal / np.linalg.norm(normal)
    return normals

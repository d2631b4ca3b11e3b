"""Geometry-only animation evaluation.

The one metric here scores how much an animation bends the mesh away
from its rest-pose local structure: per vertex, the offset from the mean
of its one-ring neighbors (uniform combinatorial Laplacian), compared
between rest and each deformed frame.  Translating every vertex by the
same amount changes nothing; rotating the whole mesh does, by design of
the underlying formula.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


def vertex_adjacency(faces: np.ndarray, n_vertices: int) -> list:
    """Symmetric one-ring neighbor lists from triangle faces."""
    faces = np.asarray(faces, dtype=np.int64)
    if faces.size and (faces.min() < 0 or faces.max() >= n_vertices):
        raise ValueError("face indices out of vertex range")
    neighbors = [set() for _ in range(n_vertices)]
    for tri in faces.reshape(-1, faces.shape[-1]):
        k = len(tri)
        for a in range(k):
            i, j = int(tri[a]), int(tri[(a + 1) % k])
            if i != j:
                neighbors[i].add(j)
                neighbors[j].add(i)
    return [np.array(sorted(n), dtype=np.int64) for n in neighbors]


def laplacian_coords(vertices: np.ndarray, neighbors: list) -> np.ndarray:
    """Per-vertex offset from the neighbor mean; zero for isolated vertices."""
    vertices = np.asarray(vertices, dtype=np.float64)
    rho = np.zeros_like(vertices)
    for i, nbrs in enumerate(neighbors):
        if len(nbrs):
            rho[i] = vertices[i] - vertices[nbrs].mean(axis=0)
    return rho


@dataclass
class MldReport:
    per_frame: np.ndarray     # (T,)
    mean: float

    def to_dict(self) -> dict:
        return {"per_frame": [float(x) for x in self.per_frame],
                "mean": float(self.mean)}


def mld(rest_vertices: np.ndarray, frames: np.ndarray,
        faces: np.ndarray) -> MldReport:
    """Laplacian distortion of each frame against the rest mesh.

    frames: (T, V, 3) deformed positions over the same topology.
    """
    rest_vertices = np.asarray(rest_vertices, dtype=np.float64)
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 3 or frames.shape[2] != 3:
        raise ValueError("frames must be (frames, vertices, 3)")
    if frames.shape[1] != rest_vertices.shape[0]:
        raise ValueError(
            f"frame vertex count {frames.shape[1]} != rest mesh "
            f"{rest_vertices.shape[0]}")
    n_verts = rest_vertices.shape[0]
    neighbors = vertex_adjacency(faces, n_verts)

    isolated = [i for i, n in enumerate(neighbors) if len(n) == 0]
    if isolated:
        warnings.warn(f"{len(isolated)} isolated vertices excluded from "
                      "distortion; first few: " + str(isolated[:5]),
                      stacklevel=2)
    connected = np.array([i for i, n in enumerate(neighbors) if len(n)],
                         dtype=np.int64)

    rho_rest = laplacian_coords(rest_vertices, neighbors)[connected]
    per_frame = np.empty(frames.shape[0])
    for t in range(frames.shape[0]):
        rho_t = laplacian_coords(frames[t], neighbors)[connected]
        per_frame[t] = float(np.sum((rho_t - rho_rest) ** 2))
    return MldReport(per_frame=per_frame,
                     mean=float(per_frame.mean()) if len(per_frame) else 0.0)

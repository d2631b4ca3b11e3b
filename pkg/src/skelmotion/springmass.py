"""Soft-body follow-through on top of the skinned surface.

Vertices dominated by core structural joints ride the skinning result as
rigid anchors; vertices carrying weight on swingy appendage joints become a
spring-mass system pulled toward the skinned target.  Integration is
semi-implicit Euler with hard velocity and displacement caps, and every
step stays on the tape so gradients reach the motion parameters upstream.

Exact guarantees, by construction:
  * anchors equal the skinned target bitwise (constant-mask select),
  * a system starting at a rest-length-preserving target with zero
    velocity and no gravity is stationary,
  * a zero blend weight reproduces the skinned frames unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .config import SpringMassConfig
from .skeleton import Skeleton

DEGENERATE_EDGE = 1e-9
DYNAMIC_CATEGORIES = ("tail",)


@dataclass
class DynamicRegionMask:
    """Anchor/dynamic split with per-vertex blend weights.

    blend[i] is the total skinning weight on appendage-category joints,
    clipped to [0,1]; anchors carry exactly zero.  regions names each
    connected appendage subtree and lists the vertex indices it dominates.
    """

    dynamic: np.ndarray                   # (V,) bool
    blend: np.ndarray                     # (V,) float64
    regions: dict = field(default_factory=dict)

    @property
    def anchor(self) -> np.ndarray:
        return ~self.dynamic


def build_mask(skel: Skeleton, weights: np.ndarray,
               dynamic_categories=DYNAMIC_CATEGORIES) -> DynamicRegionMask:
    """Derive the soft-body region from skinning weights and joint categories."""
    weights = np.asarray(weights, dtype=np.float64)
    dyn_joint = np.array([j.category in dynamic_categories
                          for j in skel.joints])
    blend = np.clip(weights[:, dyn_joint].sum(axis=1), 0.0, 1.0)
    dynamic = blend > 0.0
    blend = np.where(dynamic, blend, 0.0)

    # one region per appendage subtree root, vertices assigned by their
    # heaviest joint inside that subtree
    roots = [i for i, j in enumerate(skel.joints)
             if dyn_joint[i] and (j.parent is None or not dyn_joint[j.parent])]
    regions = {}
    if roots and dynamic.any():
        subtree = {}
        for r in roots:
            members = []
            stack = [r]
            while stack:
                i = stack.pop()
                members.append(i)
                stack.extend(c for c in skel.children[i] if dyn_joint[c])
            subtree[r] = members
        dyn_cols = np.where(dyn_joint)[0]
        heaviest = dyn_cols[np.argmax(weights[:, dyn_cols], axis=1)]
        for r in roots:
            verts = np.where(dynamic & np.isin(heaviest, subtree[r]))[0]
            if verts.size:
                regions[skel.joints[r].name] = verts
    return DynamicRegionMask(dynamic=dynamic, blend=blend, regions=regions)


def mesh_edges(faces: np.ndarray) -> np.ndarray:
    """Unique undirected edges of a triangle list, sorted rows."""
    faces = np.asarray(faces, dtype=np.intp)
    pairs = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]],
                            faces[:, [2, 0]]])
    return np.unique(np.sort(pairs, axis=1), axis=0)


def structural_edges(faces: np.ndarray, dynamic: np.ndarray) -> np.ndarray:
    """Mesh edges with at least one dynamic endpoint (anchor-anchor dropped)."""
    edges = mesh_edges(faces)
    keep = dynamic[edges[:, 0]] | dynamic[edges[:, 1]]
    return edges[keep]


def _edge_lengths(vertices: np.ndarray, edges: np.ndarray) -> np.ndarray:
    # same arithmetic as the tape's vector_norm so rest-length comparisons
    # inside step() cancel bitwise at the rest pose
    d = vertices[edges[:, 1]] - vertices[edges[:, 0]]
    return np.sqrt(np.maximum((d * d).sum(axis=1), 1e-24))


def region_diagonal(rest_vertices: np.ndarray, dynamic: np.ndarray) -> float:
    """Bounding-box diagonal of the dynamic region (whole mesh if empty)."""
    pts = rest_vertices[dynamic] if dynamic.any() else rest_vertices
    diag = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    if diag < 1e-12:
        diag = float(np.linalg.norm(rest_vertices.max(axis=0)
                                    - rest_vertices.min(axis=0)))
    return diag if diag >= 1e-12 else 1.0


@dataclass
class SimParams:
    """Resolved absolute simulation constants (no fractions left)."""

    k_pos: float
    k_struct: float
    damping: float
    gravity: float
    dt: float
    substeps: int
    vel_max: float
    d_max: float
    stretch_clamp: float
    up_axis: int = 1

    @classmethod
    def from_config(cls, cfg: SpringMassConfig, rest_vertices, dynamic,
                    up_axis: int = 1) -> "SimParams":
        d_max = cfg.d_max_frac * region_diagonal(
            np.asarray(rest_vertices, dtype=np.float64), dynamic)
        return cls(k_pos=cfg.k_pos, k_struct=cfg.k_struct,
                   damping=cfg.damping, gravity=cfg.gravity, dt=cfg.dt,
                   substeps=cfg.substeps, vel_max=cfg.vel_max, d_max=d_max,
                   stretch_clamp=cfg.stretch_clamp, up_axis=up_axis)


@dataclass
class SimState:
    positions: ad.Tensor                  # (V, 3)
    velocities: ad.Tensor                 # (V, 3)
    masses: np.ndarray                    # (V,)
    edges: np.ndarray                     # (E, 2)
    rest_lengths: np.ndarray              # (E,)
    dynamic: np.ndarray                   # (V,) bool
    params: SimParams


def init_state(start_positions, mask: DynamicRegionMask, rest_vertices,
               faces, cfg: SpringMassConfig, up_axis: int = 1) -> SimState:
    """Build the simulation state at a frame's skinned positions."""
    rest_vertices = np.asarray(rest_vertices, dtype=np.float64)
    edges = structural_edges(faces, mask.dynamic)
    rest = _edge_lengths(rest_vertices, edges)
    ok = rest > DEGENERATE_EDGE
    edges, rest = edges[ok], rest[ok]

    masses = np.full(len(rest_vertices), cfg.mass, dtype=np.float64)
    for name, verts in mask.regions.items():
        masses[verts] = cfg.for_region(name).mass

    start = ad._as_tensor(start_positions)
    vel = ad.constant(np.zeros_like(start.data))
    params = SimParams.from_config(cfg, rest_vertices, mask.dynamic, up_axis)
    return SimState(positions=start, velocities=vel, masses=masses,
                    edges=edges, rest_lengths=rest, dynamic=mask.dynamic,
                    params=params)


def _clamp_norm(vectors: ad.Tensor, limit: float) -> ad.Tensor:
    """Scale rows down to at most `limit`; exact identity inside the ball."""
    norm = ad.vector_norm(vectors, axis=1, keepdims=True)
    ceiling = ad.add(ad.max_scalar(ad.sub(norm, limit), 0.0), limit)
    return ad.mul(vectors, ad.div(limit, ceiling))


def step(state: SimState, target) -> SimState:
    """One clamped semi-implicit Euler step toward the skinned target."""
    p = state.params
    target = ad._as_tensor(target)
    q, vel = state.positions, state.velocities

    force = ad.mul(-p.k_pos, ad.sub(q, target))
    if len(state.edges):
        qi = ad.take(q, state.edges[:, 0])
        qj = ad.take(q, state.edges[:, 1])
        d = ad.sub(qj, qi)
        length = ad.vector_norm(d, axis=1, keepdims=True)       # (E, 1)
        l0 = state.rest_lengths[:, None]
        dl = ad.clamp(ad.sub(length, l0),
                      -p.stretch_clamp * l0, p.stretch_clamp * l0)
        unit = ad.mul(d, ad.reciprocal(ad.max_scalar(length, DEGENERATE_EDGE)))
        live = (length.data >= DEGENERATE_EDGE).astype(np.float64)
        pull = ad.mul(p.k_struct, ad.mul(ad.mul(dl, live), unit))
        n_verts = q.shape[0]
        force = ad.add(force, ad.index_add(pull, state.edges[:, 0], n_verts))
        force = ad.sub(force, ad.index_add(pull, state.edges[:, 1], n_verts))
    force = ad.sub(force, ad.mul(p.damping, vel))
    weight = np.zeros((q.shape[0], 3))
    weight[:, p.up_axis] = -p.gravity * state.masses
    force = ad.add(force, weight)

    accel = ad.mul(force, 1.0 / state.masses[:, None])
    vel_new = _clamp_norm(ad.add(vel, ad.mul(accel, p.dt)), p.vel_max)
    q_new = ad.add(q, ad.mul(vel_new, p.dt))
    q_new = ad.add(target, _clamp_norm(ad.sub(q_new, target), p.d_max))

    mask = state.dynamic[:, None]
    q_out = ad.where(mask, q_new, target)
    vel_out = ad.where(mask, vel_new, ad.constant(np.zeros_like(vel.data)))
    return SimState(positions=q_out, velocities=vel_out, masses=state.masses,
                    edges=state.edges, rest_lengths=state.rest_lengths,
                    dynamic=state.dynamic, params=p)


def simulate_sequence(lbs_frames, mask: DynamicRegionMask, rest_vertices,
                      faces, cfg: SpringMassConfig,
                      up_axis: int = 1) -> ad.Tensor:
    """Roll the simulator across skinned frames and blend it back in.

    Per frame the state advances cfg.substeps steps toward that frame's
    target, then the output mixes simulated and skinned positions with the
    per-vertex blend weight.  State persists across frames; the whole
    rollout is recorded on the tape.
    """
    frames = ad._as_tensor(lbs_frames)
    if frames.ndim != 3:
        raise ValueError("lbs_frames must be (frames, vertices, 3)")
    state = init_state(frames[0], mask, rest_vertices, faces, cfg, up_axis)
    blend = mask.blend[:, None]
    outputs = []
    for t in range(frames.shape[0]):
        target = frames[t]
        for s in range(cfg.substeps):
            try:
                state = step(state, target)
            except ad.NonFiniteError as err:
                raise ad.NonFiniteError(
                    f"simulation diverged at frame {t}, substep {s}: {err}"
                ) from err
        mixed = ad.add(target, ad.mul(blend, ad.sub(state.positions, target)))
        outputs.append(mixed)
    return ad.stack(outputs, axis=0)

"""Forward kinematics and linear blend skinning, differentiable end to end.

Local joint transforms are [R(rot) | rest_offset + delta; 0 1].  The root
additionally gets the world translation applied on the left, so a rigid
shift of the root moves the whole character.  Skinning blends per-joint
skin matrices G_j @ inverse_bind_j with row-stochastic vertex weights.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .skeleton import Skeleton, axis_angle_to_matrix, homogeneous

WEIGHT_ROW_SUM_TOL = 1e-6


def forward_kinematics(skel: Skeleton, rotations, root_translation, offsets=None):
    """Global joint transforms, shape (T, J, 4, 4).

    rotations (T, J, 3), root_translation (T, 3), offsets (T, J, 3) or None.
    Inputs may be Tensors (recorded) or plain arrays (constant result).
    """
    rotations = rotations if isinstance(rotations, ad.Tensor) else ad.constant(rotations)
    root_translation = root_translation if isinstance(root_translation, ad.Tensor) \
        else ad.constant(root_translation)
    t_frames, j_joints = rotations.shape[0], rotations.shape[1]
    if j_joints != len(skel):
        raise ValueError(f"rotations cover {j_joints} joints, skeleton has {len(skel)}")

    rest_offsets = np.stack([np.asarray(j.offset, dtype=np.float64)
                             for j in skel.joints])          # (J, 3)
    if offsets is None:
        local_trans = ad.constant(np.broadcast_to(
            rest_offsets, (t_frames, j_joints, 3)).copy())
    else:
        offsets = offsets if isinstance(offsets, ad.Tensor) else ad.constant(offsets)
        local_trans = ad.add(offsets, rest_offsets)

    mats = axis_angle_to_matrix(rotations)                    # (T, J, 3, 3)
    local = homogeneous(mats, local_trans)                    # (T, J, 4, 4)

    eye = np.broadcast_to(np.eye(3), (t_frames, 3, 3)).copy()
    world = homogeneous(ad.constant(eye), root_translation)   # (T, 4, 4)

    per_joint: list = [None] * j_joints
    for j, joint in enumerate(skel.joints):
        lj = local[:, j]                                      # (T, 4, 4)
        if joint.parent is None:
            per_joint[j] = ad.matmul(world, lj)
        else:
            per_joint[j] = ad.matmul(per_joint[joint.parent], lj)
    return ad.stack(per_joint, axis=1)                        # (T, J, 4, 4)


def joint_positions(globals_t):
    """World positions of every joint, (T, J, 4, 4) -> (T, J, 3)."""
    g = globals_t if isinstance(globals_t, ad.Tensor) else ad.constant(globals_t)
    return g[..., :3, 3]


def validate_weights(weights: np.ndarray, joints: int):
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 2 or weights.shape[1] != joints:
        raise ValueError(f"weights must be (V, {joints}), got {weights.shape}")
    if np.any(weights < 0):
        raise ValueError("skin weights must be non-negative")
    sums = weights.sum(axis=1)
    worst = np.abs(sums - 1.0).max() if len(sums) else 0.0
    if worst > WEIGHT_ROW_SUM_TOL:
        bad = int(np.abs(sums - 1.0).argmax())
        raise ValueError(
            f"skin weight row {bad} sums to {sums[bad]:.9f}, expected 1 "
            f"within {WEIGHT_ROW_SUM_TOL:g}")
    return weights


def linear_blend_skin(skel: Skeleton, globals_t, rest_vertices, weights):
    """Deformed vertices (T, V, 3) from global transforms and skin weights.

    rest_vertices (V, 3) and weights (V, J) are constants; globals_t may be
    a recorded Tensor.
    """
    g = globals_t if isinstance(globals_t, ad.Tensor) else ad.constant(globals_t)
    rest_vertices = np.asarray(rest_vertices, dtype=np.float64)
    weights = validate_weights(weights, len(skel))
    if rest_vertices.shape[0] != weights.shape[0]:
        raise ValueError("vertex count mismatch between rest mesh and weights")

    v_count = rest_vertices.shape[0]
    homo = np.concatenate([rest_vertices.T, np.ones((1, v_count))], axis=0)  # (4, V)

    blended = None
    for j in range(len(skel)):
        active = weights[:, j] != 0.0
        if not active.any():
            continue
        skin_mat = ad.matmul(g[:, j], skel.inverse_bind[j])   # (T, 4, 4)
        contrib = ad.matmul(skin_mat, homo)                    # (T, 4, V)
        weighted = ad.mul(contrib, weights[:, j])              # broadcast over V
        blended = weighted if blended is None else ad.add(blended, weighted)

    pts = blended[:, :3, :]                                    # (T, 3, V)
    return ad.transpose(pts, (0, 2, 1))                        # (T, V, 3)

"""Differentiable regularizers over motion parameters and deformed geometry.

Each loss is a non-negative scalar on the tape, built so its stated null
case evaluates to exactly zero: constant motion for smoothness, in-range
rotations for the rotation limits, mirrored norms for symmetry, a perfect
loop for cyclicity, geometry above the floor plane, planted feet during
contact, and zero offsets for the offset regularizer.  Hinge kinks follow
the tape's subgradient convention (active side at the boundary); the
contact indicator is a hard gate recomputed from current positions with no
gradient flowing through it.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .config import LossWeights, RomLimits
from .motion_init import MorphologyClass
from .skeleton import Skeleton

CONTACT_EPS = 1e-8


def _pose_matrix(rotations, root_translation) -> ad.Tensor:
    """Stack rotations and root path into one (T, J*3 + 3) pose signal."""
    rotations = ad._as_tensor(rotations)
    root_translation = ad._as_tensor(root_translation)
    t_frames = rotations.shape[0]
    flat = ad.reshape(rotations, (t_frames, -1))
    return ad.concat([flat, root_translation], axis=1)


def smoothness_loss(rotations, root_translation, weights: LossWeights) -> ad.Tensor:
    """Mean squared frame-to-frame velocity plus acceleration of the pose.

    Velocity averages over T-1 first differences, acceleration over T-2
    second differences; the two terms carry their own weights.
    """
    pose = _pose_matrix(rotations, root_translation)
    if pose.shape[0] < 3:
        raise ValueError("smoothness needs at least 3 frames")
    vel = ad.sub(pose[1:], pose[:-1])
    acc = ad.sub(vel[1:], vel[:-1])
    vel_term = ad.tmean(ad.squared_norm(vel, axis=1))
    acc_term = ad.tmean(ad.squared_norm(acc, axis=1))
    return ad.add(ad.mul(weights.vel, vel_term), ad.mul(weights.accel, acc_term))


def rom_loss(skel: Skeleton, rotations, limits: RomLimits) -> ad.Tensor:
    """Mean squared excess of rotation magnitude over the category limit."""
    rotations = ad._as_tensor(rotations)
    theta = np.array([limits.for_category(j.category) for j in skel.joints])
    norms = ad.vector_norm(rotations, axis=2)            # (T, J)
    excess = ad.max_scalar(ad.sub(norms, theta), 0.0)
    return ad.tmean(ad.mul(excess, excess))


def symmetry_loss(rotations, pairs) -> ad.Tensor:
    """Mean squared mismatch of rotation magnitudes across mirror pairs."""
    if not pairs:
        return ad.constant(0.0)
    rotations = ad._as_tensor(rotations)
    norms = ad.vector_norm(rotations, axis=2)            # (T, J)
    by_joint = ad.transpose(norms, (1, 0))               # (J, T)
    left = ad.take(by_joint, np.array([p[0] for p in pairs]))
    right = ad.take(by_joint, np.array([p[1] for p in pairs]))
    diff = ad.sub(left, right)
    return ad.tmean(ad.mul(diff, diff))


def cyclic_loss(rotations, root_translation) -> ad.Tensor:
    """Squared gap between first/last poses and first/last velocities."""
    pose = _pose_matrix(rotations, root_translation)
    if pose.shape[0] < 3:
        raise ValueError("cyclic loss needs at least 3 frames")
    pose_gap = ad.sub(pose[0:1], pose[-1:])
    first_vel = ad.sub(pose[1:2], pose[0:1])
    last_vel = ad.sub(pose[-1:], pose[-2:-1])
    vel_gap = ad.sub(first_vel, last_vel)
    return ad.add(ad.squared_norm(pose_gap), ad.squared_norm(vel_gap))


def ground_loss(vertices, ground_height: float, up_axis: int = 1) -> ad.Tensor:
    """Mean squared penetration depth below the floor plane."""
    vertices = ad._as_tensor(vertices)
    depth = ad.max_scalar(ad.neg(ad.sub(vertices[..., up_axis], ground_height)), 0.0)
    return ad.tmean(ad.mul(depth, depth))


def contact_loss(foot_positions, tau: float, up_axis: int = 1) -> ad.Tensor:
    """Mean squared horizontal velocity of feet while they are in contact.

    foot_positions: sequence of (T, 3) world trajectories, one per foot.
    A step t -> t+1 counts as contact when the foot starts it below tau;
    the indicator comes from current values and carries no gradient.  All
    contact steps pool into a single normalized ratio.
    """
    foot_positions = [ad._as_tensor(p) for p in foot_positions]
    horizontal = [a for a in range(3) if a != up_axis]
    total = ad.constant(0.0)
    count = 0.0
    for pos in foot_positions:
        gate = (pos.data[:-1, up_axis] < tau).astype(np.float64)
        vel = ad.sub(pos[1:], pos[:-1])
        vxy = ad.concat([vel[:, a:a + 1] for a in horizontal], axis=1)
        sq = ad.squared_norm(vxy, axis=1)                # (T-1,)
        total = ad.add(total, ad.tsum(ad.mul(sq, gate)))
        count += float(gate.sum())
    return ad.div(total, count + CONTACT_EPS)


def offset_loss(offsets, vel_weight: float) -> ad.Tensor:
    """Mean squared offset magnitude plus weighted offset velocity."""
    offsets = ad._as_tensor(offsets)
    t_frames = offsets.shape[0]
    if t_frames < 2:
        raise ValueError("offset loss needs at least 2 frames")
    flat = ad.reshape(offsets, (t_frames, -1))
    pos_term = ad.tmean(ad.squared_norm(flat, axis=1))
    dv = ad.sub(flat[1:], flat[:-1])
    vel_term = ad.tmean(ad.squared_norm(dv, axis=1))
    return ad.add(pos_term, ad.mul(vel_weight, vel_term))


def physics_loss(weights: LossWeights, smooth, rom, sym, cyclic) -> ad.Tensor:
    """Weighted bundle of the four kinematic regularizers."""
    out = ad.mul(weights.smooth, smooth)
    out = ad.add(out, ad.mul(weights.rom, rom))
    out = ad.add(out, ad.mul(weights.sym, sym))
    return ad.add(out, ad.mul(weights.cyclic, cyclic))


def environment_loss(weights: LossWeights, ground, contact,
                     contact_scale: float = 1.0) -> ad.Tensor:
    """Weighted bundle of floor and foot-contact terms."""
    return ad.add(ad.mul(weights.ground, ground),
                  ad.mul(weights.contact * contact_scale, contact))


def total_loss(weights: LossWeights, proxy, phy, env, offset,
               mosds_scale: float = 1.0) -> ad.Tensor:
    """Top-level objective: guidance + physics + environment + offsets."""
    out = ad.mul(weights.mosds * mosds_scale, proxy)
    out = ad.add(out, ad.mul(weights.phy, phy))
    out = ad.add(out, ad.mul(weights.env, env))
    return ad.add(out, ad.mul(weights.offset, offset))


# ---------------------------------------------------------------------------
# geometry helpers shared by the optimizer


def mirror_joint_pairs(morph: MorphologyClass) -> tuple:
    """(left, right) joint index pairs, left being the positive mirror side."""
    pairs = []
    for i, j in morph.pairs:
        a, b = morph.chains[i], morph.chains[j]
        if a.side < b.side:
            a, b = b, a
        pairs.extend(zip(a.joints, b.joints))
    return tuple(pairs)


def find_foot_joints(skel: Skeleton, morph: MorphologyClass,
                     frac: float = 0.10) -> tuple:
    """Leaf joints of limb chains resting in the lowest height decile."""
    up = skel.rest_positions[:, morph.up_axis]
    cap = morph.ground_level + frac * morph.height
    return tuple(c.joints[-1] for c in morph.chains
                 if up[c.joints[-1]] <= cap)


def contact_threshold(morph: MorphologyClass, frac: float = 0.025) -> float:
    """Foot height below which a frame counts as ground contact."""
    return morph.ground_level + frac * morph.height

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

import skelmotion.autodiff as ad
from skelmotion.kinematics import (
    forward_kinematics, joint_positions, linear_blend_skin, validate_weights,
)
from skelmotion.skeleton import MotionParams, build_skeleton
from skelmotion.fixtures import biped_rig, quadruped_rig, toy_rig
from helpers import central_fd_subset, assert_grad_close
from oracles import fk_oracle, lbs_oracle


def two_link_arm():
    return build_skeleton([
        {"name": "shoulder", "parent": None, "offset": (0, 0, 0)},
        {"name": "elbow", "parent": 0, "offset": (1, 0, 0)},
        {"name": "wrist", "parent": 1, "offset": (1, 0, 0)},
    ])


def test_bind_pose_reproduces_rest():
    rig = quadruped_rig()
    skel = rig.skeleton
    params = MotionParams.rest(3, len(skel))
    g = forward_kinematics(skel, params.rotations, params.root_translation,
                           params.offsets)
    pos = joint_positions(g).data
    assert np.abs(pos - skel.rest_positions).max() <= 1e-9
    skinned = linear_blend_skin(skel, g, rig.vertices, rig.weight_matrix).data
    assert np.abs(skinned - rig.vertices).max() <= 1e-9


def test_two_link_arm_right_angles():
    skel = two_link_arm()
    rot = np.zeros((1, 3, 3))
    rot[0, 0, 2] = np.pi / 2
    rot[0, 1, 2] = np.pi / 2
    g = forward_kinematics(skel, rot, np.zeros((1, 3)))
    pos = joint_positions(g).data[0]
    assert np.abs(pos[1] - [0.0, 1.0, 0.0]).max() <= 1e-12
    assert np.abs(pos[2] - [-1.0, 1.0, 0.0]).max() <= 1e-12


def test_root_translation_shifts_every_joint():
    skel = quadruped_rig().skeleton
    params = MotionParams.rest(2, len(skel))
    params.root_translation[:] = [0.0, 0.0, 5.0]
    g = forward_kinematics(skel, params.rotations, params.root_translation,
                           params.offsets)
    pos = joint_positions(g).data
    assert np.abs(pos - (skel.rest_positions + [0, 0, 5.0])).max() <= 1e-12


def test_fk_matches_dense_oracle():
    skel = biped_rig().skeleton
    rng = np.random.default_rng(4)
    rot = rng.uniform(-1.2, 1.2, size=(5, len(skel), 3))
    root = rng.uniform(-1, 1, size=(5, 3))
    offs = rng.uniform(-0.05, 0.05, size=(5, len(skel), 3))
    ours = forward_kinematics(skel, rot, root, offs).data
    ref = fk_oracle(skel, rot, root, offs)
    assert np.abs(ours - ref).max() <= 1e-10


def test_offsets_enter_local_translation_before_composition():
    # a delta on a parent joint must shift the whole subtree
    skel = two_link_arm()
    offs = np.zeros((1, 3, 3))
    offs[0, 1] = [0.0, 0.5, 0.0]     # elbow delta
    g = forward_kinematics(skel, np.zeros((1, 3, 3)), np.zeros((1, 3)), offs)
    pos = joint_positions(g).data[0]
    assert np.allclose(pos[1], [1.0, 0.5, 0.0])
    assert np.allclose(pos[2], [2.0, 0.5, 0.0])


def test_lbs_matches_dense_oracle():
    rig = biped_rig()
    skel = rig.skeleton
    rng = np.random.default_rng(9)
    rot = rng.uniform(-0.8, 0.8, size=(3, len(skel), 3))
    root = rng.uniform(-0.5, 0.5, size=(3, 3))
    g = forward_kinematics(skel, rot, root).data
    ours = linear_blend_skin(skel, g, rig.vertices, rig.weight_matrix).data
    ref = lbs_oracle(skel, g, rig.vertices, rig.weight_matrix)
    assert np.abs(ours - ref).max() <= 1e-10


def test_blended_vertex_tracks_transform_average():
    skel = two_link_arm()
    rot = np.zeros((1, 3, 3))
    rot[0, 0, 2] = np.pi / 2
    g = forward_kinematics(skel, rot, np.zeros((1, 3))).data
    verts = np.array([[1.0, 0.0, 0.0]])
    weights = np.array([[0.5, 0.5, 0.0]])
    ours = linear_blend_skin(skel, g, verts, weights).data[0, 0]
    a = (g[0, 0] @ skel.inverse_bind[0] @ [1, 0, 0, 1])[:3]
    b = (g[0, 1] @ skel.inverse_bind[1] @ [1, 0, 0, 1])[:3]
    assert np.allclose(ours, 0.5 * a + 0.5 * b, atol=1e-12)


def test_rigid_equivariance():
    # composing a rigid transform into the root moves all vertices rigidly
    rig = toy_rig()
    skel = rig.skeleton
    rng = np.random.default_rng(17)
    rot = rng.uniform(-0.6, 0.6, size=(2, 2, 3))
    root = rng.uniform(-0.3, 0.3, size=(2, 3))
    base = linear_blend_skin(
        skel, forward_kinematics(skel, rot, root), rig.vertices,
        rig.weight_matrix).data

    r0 = Rotation.from_rotvec([0.3, -0.2, 0.7])
    d0 = np.array([0.5, 1.0, -0.25])
    o_root = np.asarray(skel.joints[0].offset)
    rot2 = rot.copy()
    root2 = np.zeros_like(root)
    for t in range(2):
        combined = r0 * Rotation.from_rotvec(rot[t, 0])
        rot2[t, 0] = combined.as_rotvec()
        root2[t] = r0.apply(root[t] + o_root) + d0 - o_root
    moved = linear_blend_skin(
        skel, forward_kinematics(skel, rot2, root2), rig.vertices,
        rig.weight_matrix).data
    expected = base @ r0.as_matrix().T + d0
    assert np.abs(moved - expected).max() <= 1e-8


def test_weight_validation():
    with pytest.raises(ValueError, match="sums to"):
        validate_weights(np.array([[0.5, 0.3]]), 2)
    with pytest.raises(ValueError, match="non-negative"):
        validate_weights(np.array([[1.5, -0.5]]), 2)
    # within 1e-6 of row-stochastic is accepted
    validate_weights(np.array([[0.5, 0.5 + 5e-7]]), 2)


def test_fk_lbs_gradients_match_fd():
    rig = toy_rig()
    skel = rig.skeleton
    rng = np.random.default_rng(33)
    rot0 = rng.uniform(-0.9, 0.9, size=(3, 2, 3))
    mix = rng.normal(size=(3, len(rig.vertices), 3))

    def scalar_from(rot_arr):
        g = forward_kinematics(skel, rot_arr, np.zeros((3, 3)))
        skinned = linear_blend_skin(skel, g, rig.vertices, rig.weight_matrix)
        return skinned

    tape = ad.Tape()
    rot = tape.leaf(rot0)
    loss = ad.tsum(ad.mul(scalar_from(rot), mix))
    grad = tape.gradients(loss)[rot.node].data

    coords = rng.choice(rot0.size, size=8, replace=False)

    def f(arr):
        return float((scalar_from(arr).data * mix).sum())

    fd = central_fd_subset(f, rot0, coords, h=1e-5)
    assert_grad_close(grad.reshape(-1)[coords], fd)

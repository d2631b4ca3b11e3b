"""Small hand-built rigs used by tests, demos, and the bundled examples.

Every fixture is already in normalized scene units: character height 1.0,
ground plane at zero height, up along +y, sagittal mirror plane z = 0,
facing +x.  Meshes are axis-aligned boxes around each bone so skinning
weights are unambiguous and Laplacian neighborhoods are well defined.
"""

from __future__ import annotations

import numpy as np

from .skeleton import build_skeleton


def box_mesh(center, half):
    """8 corner vertices and 12 triangles of an axis-aligned box."""
    cx, cy, cz = center
    hx, hy, hz = half
    verts = np.array([
        [cx - hx, cy - hy, cz - hz],
        [cx + hx, cy - hy, cz - hz],
        [cx + hx, cy + hy, cz - hz],
        [cx - hx, cy + hy, cz - hz],
        [cx - hx, cy - hy, cz + hz],
        [cx + hx, cy - hy, cz + hz],
        [cx + hx, cy + hy, cz + hz],
        [cx - hx, cy + hy, cz + hz],
    ])
    faces = np.array([
        [0, 2, 1], [0, 3, 2],        # back
        [4, 5, 6], [4, 6, 7],        # front
        [0, 1, 5], [0, 5, 4],        # bottom
        [3, 6, 2], [3, 7, 6],        # top
        [0, 4, 7], [0, 7, 3],        # left
        [1, 2, 6], [1, 6, 5],        # right
    ])
    return verts, faces


class RigFixture:
    """Plain-data rig: skeleton plus a skinned box mesh."""

    def __init__(self, joint_dicts, boxes):
        """boxes: list of (center, half_extents, {joint_index: weight})."""
        self.skeleton = build_skeleton(joint_dicts)
        verts, faces, weights = [], [], []
        offset = 0
        for center, half, wmap in boxes:
            v, f = box_mesh(center, half)
            verts.append(v)
            faces.append(f + offset)
            weights.extend([dict(wmap)] * len(v))
            offset += len(v)
        self.vertices = np.concatenate(verts, axis=0)
        self.faces = np.concatenate(faces, axis=0)
        self.weights = weights          # list of {joint index: weight}
        self.joint_dicts = joint_dicts

    @property
    def weight_matrix(self):
        w = np.zeros((len(self.vertices), len(self.skeleton)))
        for i, wmap in enumerate(self.weights):
            for j, val in wmap.items():
                w[i, j] = val
        return w


def toy_rig() -> RigFixture:
    """Two-joint pendulum: a trunk box and a swinging arm box."""
    joints = [
        {"name": "root", "parent": None, "offset": (0.0, 0.3, 0.0),
         "category": "spine"},
        {"name": "arm", "parent": 0, "offset": (0.0, 0.4, 0.0),
         "category": "hinge-limb"},
    ]
    boxes = [
        ((0.0, 0.3, 0.0), (0.08, 0.3, 0.08), {0: 1.0}),
        ((0.0, 0.85, 0.0), (0.06, 0.15, 0.06), {1: 1.0}),
    ]
    return RigFixture(joints, boxes)


def biped_rig() -> RigFixture:
    """15-joint humanoid: spine, head, two legs, two arms."""
    joints = [
        {"name": "pelvis", "parent": None, "offset": (0.0, 0.55, 0.0), "category": "spine"},
        {"name": "spine_mid", "parent": 0, "offset": (0.0, 0.18, 0.0), "category": "spine"},
        {"name": "head", "parent": 1, "offset": (0.0, 0.22, 0.0), "category": "head"},
        {"name": "l_hip", "parent": 0, "offset": (0.0, -0.05, 0.10), "category": "ball-limb"},
        {"name": "l_knee", "parent": 3, "offset": (0.0, -0.25, 0.0), "category": "hinge-limb"},
        {"name": "l_foot", "parent": 4, "offset": (0.0, -0.23, 0.0), "category": "foot"},
        {"name": "r_hip", "parent": 0, "offset": (0.0, -0.05, -0.10), "category": "ball-limb"},
        {"name": "r_knee", "parent": 6, "offset": (0.0, -0.25, 0.0), "category": "hinge-limb"},
        {"name": "r_foot", "parent": 7, "offset": (0.0, -0.23, 0.0), "category": "foot"},
        {"name": "l_shoulder", "parent": 1, "offset": (0.0, 0.12, 0.16), "category": "ball-limb"},
        {"name": "l_elbow", "parent": 9, "offset": (0.0, -0.18, 0.02), "category": "hinge-limb"},
        {"name": "l_hand", "parent": 10, "offset": (0.0, -0.16, 0.0), "category": "other"},
        {"name": "r_shoulder", "parent": 1, "offset": (0.0, 0.12, -0.16), "category": "ball-limb"},
        {"name": "r_elbow", "parent": 12, "offset": (0.0, -0.18, -0.02), "category": "hinge-limb"},
        {"name": "r_hand", "parent": 13, "offset": (0.0, -0.16, 0.0), "category": "other"},
    ]
    boxes = [
        ((0.0, 0.64, 0.0), (0.09, 0.10, 0.11), {0: 0.5, 1: 0.5}),   # torso
        ((0.0, 0.88, 0.0), (0.06, 0.09, 0.06), {2: 1.0}),           # head
        ((0.0, 0.40, 0.10), (0.05, 0.12, 0.05), {3: 1.0}),          # l thigh
        ((0.0, 0.13, 0.10), (0.04, 0.11, 0.04), {4: 1.0}),          # l shin
        ((0.03, 0.02, 0.10), (0.07, 0.02, 0.04), {5: 1.0}),         # l foot
        ((0.0, 0.40, -0.10), (0.05, 0.12, 0.05), {6: 1.0}),         # r thigh
        ((0.0, 0.13, -0.10), (0.04, 0.11, 0.04), {7: 1.0}),         # r shin
        ((0.03, 0.02, -0.10), (0.07, 0.02, 0.04), {8: 1.0}),        # r foot
        ((0.0, 0.76, 0.17), (0.04, 0.09, 0.04), {9: 1.0}),          # l upper arm
        ((0.0, 0.59, 0.18), (0.035, 0.08, 0.035), {10: 1.0}),       # l forearm
        ((0.0, 0.76, -0.17), (0.04, 0.09, 0.04), {12: 1.0}),        # r upper arm
        ((0.0, 0.59, -0.18), (0.035, 0.08, 0.035), {13: 1.0}),      # r forearm
    ]
    return RigFixture(joints, boxes)


def quadruped_rig() -> RigFixture:
    """12-joint quadruped: horizontal spine, head, tail, four legs."""
    joints = [
        {"name": "pelvis", "parent": None, "offset": (-0.25, 0.60, 0.0), "category": "spine"},
        {"name": "chest", "parent": 0, "offset": (0.50, 0.0, 0.0), "category": "spine"},
        {"name": "head", "parent": 1, "offset": (0.18, 0.25, 0.0), "category": "head"},
        {"name": "tail", "parent": 0, "offset": (-0.20, 0.05, 0.0), "category": "tail"},
        {"name": "lf_hip", "parent": 1, "offset": (0.05, -0.10, 0.12), "category": "ball-limb"},
        {"name": "lf_foot", "parent": 4, "offset": (0.0, -0.45, 0.0), "category": "foot"},
        {"name": "rf_hip", "parent": 1, "offset": (0.05, -0.10, -0.12), "category": "ball-limb"},
        {"name": "rf_foot", "parent": 6, "offset": (0.0, -0.45, 0.0), "category": "foot"},
        {"name": "lh_hip", "parent": 0, "offset": (-0.05, -0.10, 0.12), "category": "ball-limb"},
        {"name": "lh_foot", "parent": 8, "offset": (0.0, -0.45, 0.0), "category": "foot"},
        {"name": "rh_hip", "parent": 0, "offset": (-0.05, -0.10, -0.12), "category": "ball-limb"},
        {"name": "rh_foot", "parent": 10, "offset": (0.0, -0.45, 0.0), "category": "foot"},
    ]
    boxes = [
        ((0.0, 0.62, 0.0), (0.30, 0.10, 0.10), {0: 0.5, 1: 0.5}),   # torso
        ((0.40, 0.83, 0.0), (0.09, 0.09, 0.07), {2: 1.0}),          # head
        ((-0.42, 0.66, 0.0), (0.10, 0.03, 0.03), {3: 1.0}),         # tail
        ((0.30, 0.28, 0.12), (0.04, 0.24, 0.04), {4: 1.0}),         # lf leg
        ((0.30, 0.03, 0.12), (0.05, 0.025, 0.04), {5: 1.0}),        # lf foot
        ((0.30, 0.28, -0.12), (0.04, 0.24, 0.04), {6: 1.0}),        # rf leg
        ((0.30, 0.03, -0.12), (0.05, 0.025, 0.04), {7: 1.0}),       # rf foot
        ((-0.30, 0.28, 0.12), (0.04, 0.24, 0.04), {8: 1.0}),        # lh leg
        ((-0.30, 0.03, 0.12), (0.05, 0.025, 0.04), {9: 1.0}),       # lh foot
        ((-0.30, 0.28, -0.12), (0.04, 0.24, 0.04), {10: 1.0}),      # rh leg
        ((-0.30, 0.03, -0.12), (0.05, 0.025, 0.04), {11: 1.0}),     # rh foot
    ]
    return RigFixture(joints, boxes)


def winged_rig() -> RigFixture:
    """Bird-like rig: short trunk, tail, and a wide lateral wing pair."""
    joints = [
        {"name": "body", "parent": None, "offset": (0.0, 0.45, 0.0), "category": "spine"},
        {"name": "head", "parent": 0, "offset": (0.12, 0.10, 0.0), "category": "head"},
        {"name": "tail", "parent": 0, "offset": (-0.15, -0.10, 0.0), "category": "tail"},
        {"name": "l_shoulder", "parent": 0, "offset": (0.0, 0.05, 0.20), "category": "ball-limb"},
        {"name": "l_wing_mid", "parent": 3, "offset": (0.0, 0.0, 0.30), "category": "hinge-limb"},
        {"name": "l_wing_tip", "parent": 4, "offset": (0.0, 0.0, 0.30), "category": "other"},
        {"name": "r_shoulder", "parent": 0, "offset": (0.0, 0.05, -0.20), "category": "ball-limb"},
        {"name": "r_wing_mid", "parent": 6, "offset": (0.0, 0.0, -0.30), "category": "hinge-limb"},
        {"name": "r_wing_tip", "parent": 7, "offset": (0.0, 0.0, -0.30), "category": "other"},
    ]
    boxes = [
        ((0.0, 0.45, 0.0), (0.12, 0.08, 0.10), {0: 1.0}),           # body
        ((0.12, 0.55, 0.0), (0.05, 0.05, 0.04), {1: 1.0}),          # head
        ((-0.15, 0.35, 0.0), (0.08, 0.03, 0.05), {2: 1.0}),         # tail
        ((0.0, 0.50, 0.35), (0.06, 0.02, 0.15), {3: 0.5, 4: 0.5}),  # l wing inner
        ((0.0, 0.50, 0.65), (0.05, 0.015, 0.15), {5: 1.0}),         # l wing outer
        ((0.0, 0.50, -0.35), (0.06, 0.02, 0.15), {6: 0.5, 7: 0.5}), # r wing inner
        ((0.0, 0.50, -0.65), (0.05, 0.015, 0.15), {8: 1.0}),        # r wing outer
    ]
    return RigFixture(joints, boxes)


def tail_rig() -> RigFixture:
    """Body box plus a two-segment tail, with one half-weighted blend box."""
    joints = [
        {"name": "body", "parent": None, "offset": (0.0, 0.5, 0.0), "category": "spine"},
        {"name": "tail_a", "parent": 0, "offset": (-0.2, 0.0, 0.0), "category": "tail"},
        {"name": "tail_b", "parent": 1, "offset": (-0.2, 0.0, 0.0), "category": "tail"},
    ]
    boxes = [
        ((0.0, 0.5, 0.0), (0.10, 0.10, 0.10), {0: 1.0}),            # body
        ((-0.15, 0.5, 0.0), (0.05, 0.06, 0.06), {0: 0.5, 1: 0.5}),  # tail base
        ((-0.28, 0.5, 0.0), (0.07, 0.05, 0.05), {1: 1.0}),          # tail mid
        ((-0.46, 0.5, 0.0), (0.08, 0.04, 0.04), {2: 1.0}),          # tail tip
    ]
    return RigFixture(joints, boxes)


def lamp_rig() -> RigFixture:
    """Single-chain desk lamp: base, two arm segments, head.  No limb pairs."""
    joints = [
        {"name": "base", "parent": None, "offset": (0.0, 0.05, 0.0), "category": "spine"},
        {"name": "arm_lower", "parent": 0, "offset": (0.0, 0.40, 0.0), "category": "hinge-limb"},
        {"name": "arm_upper", "parent": 1, "offset": (0.0, 0.35, 0.0), "category": "hinge-limb"},
        {"name": "lamp_head", "parent": 2, "offset": (0.15, 0.15, 0.0), "category": "head"},
    ]
    boxes = [
        ((0.0, 0.04, 0.0), (0.14, 0.04, 0.14), {0: 1.0}),
        ((0.0, 0.25, 0.0), (0.03, 0.20, 0.03), {1: 1.0}),
        ((0.0, 0.62, 0.0), (0.03, 0.18, 0.03), {2: 1.0}),
        ((0.15, 0.93, 0.0), (0.08, 0.06, 0.06), {3: 1.0}),
    ]
    return RigFixture(joints, boxes)

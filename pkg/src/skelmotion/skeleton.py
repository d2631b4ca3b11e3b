"""Joint hierarchies, rest-pose transforms, and axis-angle rotations.

A skeleton is an ordered joint tree (parents always precede children).
Rest-pose local rotations are identity, so the rest global transform of a
joint is a pure translation to its rest position and the inverse bind
matrix is the inverse of that translation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad

# Joint categories drive ROM limits, gait templates, and the dynamic mask.
# "tail" covers tails, capes, ears and other floppy appendages.
CATEGORIES = ("spine", "hinge-limb", "ball-limb", "foot", "head", "tail", "other")


@dataclass(frozen=True)
class Joint:
    name: str
    parent: int | None          # index into the joint list; None for the root
    offset: tuple               # rest offset from parent (root: from origin)
    category: str = "other"


@dataclass
class Skeleton:
    joints: list[Joint]
    children: list[list[int]] = field(repr=False)
    rest_positions: np.ndarray = field(repr=False)   # (J, 3)
    rest_globals: np.ndarray = field(repr=False)     # (J, 4, 4)
    inverse_bind: np.ndarray = field(repr=False)     # (J, 4, 4)

    def __len__(self):
        return len(self.joints)

    @property
    def names(self):
        return [j.name for j in self.joints]

    def index_of(self, name: str) -> int:
        for i, j in enumerate(self.joints):
            if j.name == name:
                return i
        raise KeyError(f"no joint named '{name}'")

    def parent_index(self, j: int) -> int | None:
        return self.joints[j].parent

    def leaf_indices(self) -> list[int]:
        return [i for i, c in enumerate(self.children) if not c]


def traversal_order(parents: list) -> list[int]:
    """Depth-first visit order (root first) for a parent-index list.

    This is the exact permutation build_skeleton applies when it reorders
    joints, so callers can remap per-joint data stored in original order.
    Unreachable joints (cycles) are simply absent from the result.
    """
    n = len(parents)
    roots = [i for i, p in enumerate(parents) if p is None]
    kids: list[list[int]] = [[] for _ in range(n)]
    for i, p in enumerate(parents):
        if p is not None and 0 <= p < n:
            kids[p].append(i)
    order: list[int] = []
    stack = list(reversed(roots[:1]))
    while stack:
        i = stack.pop()
        order.append(i)
        stack.extend(reversed(kids[i]))
    return order


def build_skeleton(joints) -> Skeleton:
    """Validate a joint list and reorder it depth-first from the root.

    Accepts Joint instances or dicts with keys name/parent/offset/category.
    Raises ValueError on multiple roots, missing root, dangling parent
    indices, or cyclic parent links.  Parent indices in the result refer to
    the reordered list.
    """
    raw = []
    for j in joints:
        if isinstance(j, Joint):
            raw.append(j)
        else:
            raw.append(Joint(
                name=str(j["name"]),
                parent=j.get("parent"),
                offset=tuple(float(v) for v in j["offset"]),
                category=j.get("category", "other"),
            ))
    n = len(raw)
    if n == 0:
        raise ValueError("skeleton needs at least one joint")
    roots = [i for i, j in enumerate(raw) if j.parent is None]
    if len(roots) == 0:
        raise ValueError("skeleton has no root joint (every joint names a parent)")
    if len(roots) > 1:
        names = ", ".join(raw[i].name for i in roots)
        raise ValueError(f"skeleton has multiple roots: {names}")
    for i, j in enumerate(raw):
        if j.parent is not None and not (0 <= j.parent < n):
            raise ValueError(f"joint '{j.name}' has dangling parent index {j.parent}")
        if j.parent == i:
            raise ValueError(f"joint '{j.name}' is its own parent")
        if j.category not in CATEGORIES:
            raise ValueError(f"joint '{j.name}' has unknown category '{j.category}'")

    order = traversal_order([j.parent for j in raw])
    if len(order) < n:
        missing = sorted(set(range(n)) - set(order))
        names = ", ".join(raw[i].name for i in missing)
        raise ValueError(f"cyclic parent links: unreachable joints {names}")

    remap = {old: new for new, old in enumerate(order)}
    reordered = [
        Joint(raw[i].name, None if raw[i].parent is None else remap[raw[i].parent],
              raw[i].offset, raw[i].category)
        for i in order
    ]
    children: list[list[int]] = [[] for _ in range(n)]
    for i, j in enumerate(reordered):
        if j.parent is not None:
            children[j.parent].append(i)

    positions = np.zeros((n, 3))
    for i, j in enumerate(reordered):
        off = np.asarray(j.offset, dtype=np.float64)
        positions[i] = off if j.parent is None else positions[j.parent] + off

    rest_globals = np.tile(np.eye(4), (n, 1, 1))
    rest_globals[:, :3, 3] = positions
    inverse_bind = np.tile(np.eye(4), (n, 1, 1))
    inverse_bind[:, :3, 3] = -positions

    return Skeleton(reordered, children, positions, rest_globals, inverse_bind)


@dataclass
class MotionParams:
    """Per-frame pose parameters: T frames over J joints.

    rotations: (T, J, 3) axis-angle per joint.  The direction is the axis,
    the length is the angle in radians; angles at or above pi are kept
    as-is, never re-wrapped.
    root_translation: (T, 3) world-space root offset.
    offsets: (T, J, 3) learned local translation deltas, zero at rest.
    """

    rotations: np.ndarray
    root_translation: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        self.rotations = np.asarray(self.rotations, dtype=np.float64)
        self.root_translation = np.asarray(self.root_translation, dtype=np.float64)
        self.offsets = np.asarray(self.offsets, dtype=np.float64)
        t, j, c = self.rotations.shape
        if c != 3:
            raise ValueError(f"rotations must be (T, J, 3), got {self.rotations.shape}")
        if self.root_translation.shape != (t, 3):
            raise ValueError(
                f"root_translation shape {self.root_translation.shape} "
                f"does not match (T={t}, 3)")
        if self.offsets.shape != (t, j, 3):
            raise ValueError(
                f"offsets shape {self.offsets.shape} does not match rotations "
                f"{self.rotations.shape}")

    @property
    def frames(self) -> int:
        return self.rotations.shape[0]

    @property
    def joints(self) -> int:
        return self.rotations.shape[1]

    @classmethod
    def rest(cls, frames: int, joints: int) -> "MotionParams":
        return cls(np.zeros((frames, joints, 3)), np.zeros((frames, 3)),
                   np.zeros((frames, joints, 3)))

    def copy(self) -> "MotionParams":
        return MotionParams(self.rotations.copy(), self.root_translation.copy(),
                            self.offsets.copy())


_SMALL_ANGLE = 1e-6


def axis_angle_to_matrix(r):
    """Rotation matrices from axis-angle vectors, shape (..., 3) -> (..., 3, 3).

    Accepts a Tensor (recorded) or a plain array (returns a constant Tensor).
    Below the small-angle threshold the sin/cos coefficients switch to
    second-order Taylor expansions; the two branches agree to ~1e-24 at the
    threshold, and the gradient at exactly zero rotation is finite.
    """
    r = r if isinstance(r, ad.Tensor) else ad.constant(r)
    if r.shape[-1] != 3:
        raise ValueError(f"axis-angle input must end in dim 3, got {r.shape}")
    batch = r.shape[:-1]

    rx = r[..., 0:1]
    ry = r[..., 1:2]
    rz = r[..., 2:3]
    zero = ad.mul(rx, 0.0)
    row0 = ad.concat([zero, ad.neg(rz), ry], axis=-1)
    row1 = ad.concat([rz, zero, ad.neg(rx)], axis=-1)
    row2 = ad.concat([ad.neg(ry), rx, zero], axis=-1)
    k = ad.stack([row0, row1, row2], axis=-2)            # (..., 3, 3)

    s2 = ad.squared_norm(r, axis=-1, keepdims=True)       # theta^2, (..., 1)
    s2m = ad.reshape(s2, batch + (1, 1))
    small = s2m.data < _SMALL_ANGLE ** 2
    s2_safe = ad.max_scalar(s2m, _SMALL_ANGLE ** 2)
    theta = ad.sqrt(s2_safe)

    sin_coef = ad.where(small,
                        ad.sub(1.0, ad.div(s2m, 6.0)),
                        ad.div(ad.sin(theta), theta))
    cos_coef = ad.where(small,
                        ad.sub(0.5, ad.div(s2m, 24.0)),
                        ad.div(ad.sub(1.0, ad.cos(theta)), s2_safe))

    eye = ad.constant(np.broadcast_to(np.eye(3), batch + (3, 3)).copy())
    kk = ad.matmul(k, k)
    return ad.add(eye, ad.add(ad.mul(sin_coef, k), ad.mul(cos_coef, kk)))


def homogeneous(rotation, translation):
    """Assemble [R | t; 0 1] transforms from (..., 3, 3) and (..., 3)."""
    rotation = rotation if isinstance(rotation, ad.Tensor) else ad.constant(rotation)
    translation = translation if isinstance(translation, ad.Tensor) \
        else ad.constant(translation)
    batch = rotation.shape[:-2]
    t_col = ad.reshape(translation, batch + (3, 1))
    top = ad.concat([rotation, t_col], axis=-1)           # (..., 3, 4)
    bottom = ad.constant(np.broadcast_to(
        np.array([0.0, 0.0, 0.0, 1.0]), batch + (1, 4)).copy())
    return ad.concat([top, bottom], axis=-2)              # (..., 4, 4)

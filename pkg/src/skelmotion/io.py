"""Rig and animation file plumbing.

Formats: skeleton and skin weights as versioned JSON, meshes as OBJ,
motion as versioned JSON with one record per frame.  Floats are written
through the default JSON repr, which is shortest-round-trip: loading an
exported motion reproduces the arrays bitwise.  All writes go through a
temp-file-then-rename so a crash never leaves a half-written file.

Loading normalizes the character to unit height with the mesh's lowest
point on the ground plane, so every height-relative threshold in the
losses and simulator is scale-free.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass

import numpy as np

from .skeleton import (MotionParams, Skeleton, build_skeleton,
                       traversal_order)

FORMAT_VERSION = "1.0"
MAX_INFLUENCES = 8
ROW_SUM_ERROR = 1e-3            # beyond this the file is rejected
ROW_SUM_WARN = 1e-6             # beyond this rows renormalize with a warning
UP_INDEX = {"x": 0, "y": 1, "z": 2}


def _check_version(raw: dict, path: str) -> None:
    version = str(raw.get("format_version", ""))
    if version.split(".")[0] != FORMAT_VERSION.split(".")[0]:
        raise ValueError(f"{path}: unsupported format_version "
                         f"{version or '<missing>'}")


def atomic_write_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# skeleton JSON


def save_skeleton(path: str, skel: Skeleton) -> None:
    doc = {"format_version": FORMAT_VERSION, "joints": [
        {"name": j.name, "parent": j.parent,
         "offset": [float(x) for x in j.offset], "category": j.category}
        for j in skel.joints]}
    atomic_write_text(path, json.dumps(doc, indent=2) + "\n")


def _read_joint_dicts(path: str) -> list[dict]:
    with open(path) as fh:
        raw = json.load(fh)
    _check_version(raw, path)
    joints = raw.get("joints")
    if not isinstance(joints, list) or not joints:
        raise ValueError(f"{path}: 'joints' must be a non-empty list")
    for i, j in enumerate(joints):
        for fieldname in ("name", "offset"):
            if fieldname not in j:
                raise ValueError(
                    f"{path}: joint {i} missing field '{fieldname}'")
        if len(j["offset"]) != 3:
            raise ValueError(f"{path}: joint {i} ('{j['name']}') offset "
                             "must have 3 components")
    return joints


def load_skeleton(path: str) -> Skeleton:
    joints = _read_joint_dicts(path)
    try:
        return build_skeleton(joints)
    except ValueError as err:
        raise ValueError(f"{path}: {err}") from err


# ---------------------------------------------------------------------------
# skin weights JSON


def save_weights(path: str, weights: np.ndarray) -> None:
    rows = []
    for row in np.asarray(weights, dtype=np.float64):
        nz = np.nonzero(row)[0]
        rows.append({str(int(j)): float(row[j]) for j in nz})
    doc = {"format_version": FORMAT_VERSION, "weights": rows}
    atomic_write_text(path, json.dumps(doc) + "\n")


def load_weights(path: str, n_vertices: int, n_joints: int) -> np.ndarray:
    with open(path) as fh:
        raw = json.load(fh)
    _check_version(raw, path)
    rows = raw.get("weights")
    if not isinstance(rows, list) or len(rows) != n_vertices:
        got = len(rows) if isinstance(rows, list) else "missing"
        raise ValueError(f"{path}: expected {n_vertices} weight rows, "
                         f"got {got}")
    weights = np.zeros((n_vertices, n_joints))
    renormalized = []
    for i, row in enumerate(rows):
        if not isinstance(row, dict) or not row:
            raise ValueError(f"{path}: weight row {i} must be a non-empty "
                             "{joint: weight} map")
        if len(row) > MAX_INFLUENCES:
            raise ValueError(f"{path}: weight row {i} has {len(row)} "
                             f"influences, limit is {MAX_INFLUENCES}")
        for key, value in row.items():
            try:
                j = int(key)
            except ValueError:
                raise ValueError(f"{path}: weight row {i} has non-integer "
                                 f"joint key '{key}'") from None
            if not 0 <= j < n_joints:
                raise ValueError(f"{path}: weight row {i} references joint "
                                 f"{j}, skeleton has {n_joints}")
            if value < 0.0:
                raise ValueError(f"{path}: weight row {i} joint {j} is "
                                 f"negative ({value})")
            weights[i, j] = value
        total = weights[i].sum()
        # the 1e-3 boundary is inclusive: fl(1 - 0.999) sits one ulp above
        # 1e-3, and a row summing to 0.999 must renormalize, not fail
        if abs(total - 1.0) > ROW_SUM_ERROR * (1.0 + 1e-9):
            raise ValueError(f"{path}: weight row {i} sums to {total:.9f}, "
                             f"outside 1 ± {ROW_SUM_ERROR:g}")
        if abs(total - 1.0) > ROW_SUM_WARN:
            weights[i] /= total
            renormalized.append(i)
    if renormalized:
        warnings.warn(
            f"{path}: renormalized {len(renormalized)} weight rows whose "
            f"sums strayed past {ROW_SUM_WARN:g}; first few: "
            f"{renormalized[:5]}", stacklevel=2)
    return weights


# ---------------------------------------------------------------------------
# OBJ meshes


def save_obj(path: str, vertices: np.ndarray, faces: np.ndarray) -> None:
    lines = [f"v {float(x)!r} {float(y)!r} {float(z)!r}" for x, y, z in
             np.asarray(vertices, dtype=np.float64)]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in
              np.asarray(faces, dtype=np.int64)]
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_obj(path: str):
    """Triangle mesh (vertices, faces) from a minimal OBJ subset."""
    vertices, faces = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise ValueError(f"{path}:{lineno}: vertex needs 3 "
                                     "coordinates")
                try:
                    vertices.append([float(p) for p in parts[1:4]])
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: malformed vertex "
                                     f"coordinate") from None
            elif tag == "f":
                refs = parts[1:]
                if len(refs) != 3:
                    raise ValueError(f"{path}:{lineno}: only triangle faces "
                                     f"are supported, got {len(refs)} "
                                     "vertices")
                idx = []
                for ref in refs:
                    head = ref.split("/")[0]
                    try:
                        value = int(head)
                    except ValueError:
                        raise ValueError(f"{path}:{lineno}: malformed face "
                                         f"reference '{ref}'") from None
                    if value == 0:
                        raise ValueError(f"{path}:{lineno}: OBJ indices are "
                                         "1-based, found 0")
                    idx.append(value - 1 if value > 0 else value)
                faces.append(idx)
            # other tags (vn, vt, usemtl, ...) are ignored
    verts = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    tris = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if tris.size:
        tris = np.where(tris < 0, tris + len(verts), tris)
        if tris.min() < 0 or tris.max() >= len(verts):
            raise ValueError(f"{path}: face references vertex "
                             f"{int(tris.max()) + 1} of {len(verts)}")
    return verts, tris


# ---------------------------------------------------------------------------
# rig bundles


@dataclass
class SkinnedMesh:
    vertices: np.ndarray          # (V, 3)
    faces: np.ndarray             # (F, 3) int
    weights: np.ndarray           # (V, J) dense row-stochastic


@dataclass
class RigBundle:
    skeleton: Skeleton
    mesh: SkinnedMesh
    mask: np.ndarray | None = None
    scale: float = 1.0            # normalization factor applied at load
    lift: float = 0.0             # up-axis shift applied at load


def normalize_rig(skel: Skeleton, mesh: SkinnedMesh, up_axis: int = 1):
    """Unit character height, ground plane at zero along the up axis."""
    up_coords = mesh.vertices[:, up_axis]
    height = float(up_coords.max() - up_coords.min())
    if height <= 0.0:
        raise ValueError("mesh has no vertical extent to normalize")
    ground = float(up_coords.min())
    shift = np.zeros(3)
    shift[up_axis] = ground
    vertices = (mesh.vertices - shift) / height

    joints = []
    for j in skel.joints:
        offset = np.asarray(j.offset, dtype=np.float64)
        offset = (offset - shift) / height if j.parent is None \
            else offset / height
        joints.append({"name": j.name, "parent": j.parent,
                       "offset": offset.tolist(), "category": j.category})
    return (build_skeleton(joints),
            SkinnedMesh(vertices=vertices, faces=mesh.faces,
                        weights=mesh.weights),
            1.0 / height, ground)


def load_rig(rig_dir: str, up_axis: int = 1, normalize: bool = True
             ) -> RigBundle:
    """Load skeleton.json + mesh.obj + weights.json (+ optional mask.json).

    Joints are reordered depth-first internally; weight columns (keyed by
    joint index in the skeleton file) are permuted to match.
    """
    skel_path = os.path.join(rig_dir, "skeleton.json")
    joint_dicts = _read_joint_dicts(skel_path)
    try:
        skel = build_skeleton(joint_dicts)
    except ValueError as err:
        raise ValueError(f"{skel_path}: {err}") from err
    vertices, faces = load_obj(os.path.join(rig_dir, "mesh.obj"))
    if not len(vertices):
        raise ValueError(f"{rig_dir}/mesh.obj: mesh has no vertices")
    weights = load_weights(os.path.join(rig_dir, "weights.json"),
                           len(vertices), len(skel))
    order = traversal_order([j.get("parent") for j in joint_dicts])
    if order != list(range(len(skel))):
        weights = weights[:, order]
    mask = None
    mask_path = os.path.join(rig_dir, "mask.json")
    if os.path.exists(mask_path):
        with open(mask_path) as fh:
            raw = json.load(fh)
        _check_version(raw, mask_path)
        values = raw.get("mask", [])
        if len(values) != len(vertices):
            raise ValueError(f"{mask_path}: expected {len(vertices)} mask "
                             f"entries, got {len(values)}")
        mask = np.asarray(values, dtype=bool)

    mesh = SkinnedMesh(vertices=vertices, faces=faces, weights=weights)
    scale, lift = 1.0, 0.0
    if normalize:
        skel, mesh, scale, lift = normalize_rig(skel, mesh, up_axis)
    return RigBundle(skeleton=skel, mesh=mesh, mask=mask,
                     scale=scale, lift=lift)


def save_rig(rig_dir: str, skel: Skeleton, vertices: np.ndarray,
             faces: np.ndarray, weights: np.ndarray) -> None:
    os.makedirs(rig_dir, exist_ok=True)
    save_skeleton(os.path.join(rig_dir, "skeleton.json"), skel)
    save_obj(os.path.join(rig_dir, "mesh.obj"), vertices, faces)
    save_weights(os.path.join(rig_dir, "weights.json"), weights)


# ---------------------------------------------------------------------------
# motion JSON


def save_motion(path: str, motion: MotionParams, fps: int = 24) -> None:
    frames = []
    for t in range(motion.rotations.shape[0]):
        frames.append({
            "root": motion.root_translation[t].tolist(),
            "rotations": motion.rotations[t].tolist(),
            "offsets": motion.offsets[t].tolist(),
        })
    doc = {"format_version": FORMAT_VERSION, "fps": int(fps),
           "frames": frames}
    atomic_write_text(path, json.dumps(doc) + "\n")


def load_motion(path: str):
    """Returns (MotionParams, fps); arrays reproduce the saved data bitwise."""
    with open(path) as fh:
        raw = json.load(fh)
    _check_version(raw, path)
    frames = raw.get("frames")
    if not isinstance(frames, list) or not frames:
        raise ValueError(f"{path}: 'frames' must be a non-empty list")
    rots, roots, offs = [], [], []
    n_joints = None
    for t, frame in enumerate(frames):
        for key in ("root", "rotations", "offsets"):
            if key not in frame:
                raise ValueError(f"{path}: frame {t} missing '{key}'")
        rot = np.asarray(frame["rotations"], dtype=np.float64)
        off = np.asarray(frame["offsets"], dtype=np.float64)
        if rot.ndim != 2 or rot.shape[1] != 3:
            raise ValueError(f"{path}: frame {t} rotations must be (J, 3)")
        if n_joints is None:
            n_joints = rot.shape[0]
        if rot.shape[0] != n_joints or off.shape != rot.shape:
            raise ValueError(f"{path}: frame {t} joint count differs from "
                             "frame 0")
        rots.append(rot)
        roots.append(np.asarray(frame["root"], dtype=np.float64))
        offs.append(off)
    motion = MotionParams(rotations=np.stack(rots),
                          root_translation=np.stack(roots),
                          offsets=np.stack(offs))
    return motion, int(raw.get("fps", 24))


# ---------------------------------------------------------------------------
# image and sequence export


def save_png(path: str, image: np.ndarray) -> None:
    """Write (C, H, W) uint8 as grayscale (C=1) or RGB (C=3)."""
    from PIL import Image
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[0] not in (1, 3):
        raise ValueError("PNG export expects (1|3, H, W) uint8")
    if image.shape[0] == 1:
        pil = Image.fromarray(image[0], mode="L")
    else:
        pil = Image.fromarray(np.moveaxis(image, 0, 2), mode="RGB")
    tmp = f"{path}.tmp"
    pil.save(tmp, format="PNG")
    os.replace(tmp, path)


def export_animation(out_dir: str, motion: MotionParams, fps: int,
                     vertices: np.ndarray | None = None,
                     faces: np.ndarray | None = None,
                     frames: np.ndarray | None = None,
                     export_obj: bool = False,
                     export_png: bool = False) -> dict:
    """Write motion.json (always) plus optional OBJ/PNG sequences.

    Returns a manifest of written paths.
    """
    from .renderer import frames_to_uint8
    os.makedirs(out_dir, exist_ok=True)
    manifest = {"motion": os.path.join(out_dir, "motion.json")}
    save_motion(manifest["motion"], motion, fps)

    if export_obj:
        if vertices is None or faces is None:
            raise ValueError("OBJ export requires deformed vertices and "
                             "faces")
        obj_dir = os.path.join(out_dir, "obj")
        os.makedirs(obj_dir, exist_ok=True)
        paths = []
        for t in range(vertices.shape[0]):
            p = os.path.join(obj_dir, f"frame_{t:04d}.obj")
            save_obj(p, vertices[t], faces)
            paths.append(p)
        manifest["obj"] = paths

    if export_png:
        if frames is None:
            raise ValueError("PNG export requires rendered frames")
        png_dir = os.path.join(out_dir, "png")
        os.makedirs(png_dir, exist_ok=True)
        pixels = frames_to_uint8(frames)
        paths = []
        for t in range(pixels.shape[0]):
            p = os.path.join(png_dir, f"frame_{t:04d}.png")
            save_png(p, pixels[t])
            paths.append(p)
        manifest["png"] = paths
    return manifest

"""AdamW and the full guided-optimization loop.

Each iteration runs the whole differentiable pipeline: spline sampling (in
control-point mode), forward kinematics with learned offsets, skinning,
secondary dynamics where the rig has soft regions, rendering, the critic
proxy loss, and the kinematic/environment regularizers under progressive
weight schedules.  Parameters update with decoupled weight decay applied
before the Adam step and gradients clipped by global norm.

Determinism: one Generator owns every random draw; its bit-generator
state rides along in checkpoints, so a resumed run continues the exact
stream.  A non-finite loss aborts the run and reports the last finished
iteration's parameters.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import losses, mosds, nurbs, renderer, springmass, wire
from .config import RunConfig, schedule_multiplier
from .kinematics import forward_kinematics, joint_positions, linear_blend_skin
from .motion_init import MotionInit, prepare_motion
from .skeleton import MotionParams, Skeleton

CHECKPOINT_VERSION = "1.0"
TRANSPORT_ERRORS = (OSError, wire.WireError, wire.BridgeError)


# ---------------------------------------------------------------------------
# AdamW


@dataclass
class ParamGroup:
    name: str
    value: np.ndarray
    lr: float
    weight_decay: float = 0.0


@dataclass
class AdamW:
    groups: list
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    moments: dict = field(default_factory=dict)

    def __post_init__(self):
        for g in self.groups:
            g.value = np.asarray(g.value, dtype=np.float64)
            self.moments.setdefault(
                g.name, (np.zeros_like(g.value), np.zeros_like(g.value)))

    def step(self, grads: dict) -> None:
        self.step_count += 1
        c1 = 1.0 - self.beta1 ** self.step_count
        c2 = 1.0 - self.beta2 ** self.step_count
        for g in self.groups:
            grad = np.asarray(grads[g.name], dtype=np.float64)
            if grad.shape != g.value.shape:
                raise ValueError(
                    f"gradient shape {grad.shape} != param shape "
                    f"{g.value.shape} in group '{g.name}'")
            m, v = self.moments[g.name]
            g.value *= 1.0 - g.lr * g.weight_decay
            m[...] = self.beta1 * m + (1.0 - self.beta1) * grad
            v[...] = self.beta2 * v + (1.0 - self.beta2) * grad * grad
            g.value -= g.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def group(self, name: str) -> ParamGroup:
        for g in self.groups:
            if g.name == name:
                return g
        raise KeyError(name)


def clip_by_global_norm(grads: dict, max_norm: float):
    """Scale all gradients jointly so their stacked norm is <= max_norm."""
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if max_norm <= 0.0 or total <= max_norm or total == 0.0:
        return grads, total, False
    scale = max_norm / total
    return {k: g * scale for k, g in grads.items()}, total, True


# ---------------------------------------------------------------------------
# parameterization


@dataclass
class MotionVariables:
    """Leaf arrays plus the recipe turning them into per-frame motion."""

    mode: str
    rot_coeff: np.ndarray | None   # (J, T, K) spline sampling, control mode
    root_coeff: np.ndarray | None  # (T, K)
    values: dict = field(default_factory=dict)

    @classmethod
    def from_init(cls, init: MotionInit, mode: str) -> "MotionVariables":
        if mode == "control_points":
            rot_controls = np.stack([c.controls for c in init.joint_curves])
            values = {
                "rotations": rot_controls.copy(),            # (J, K, 3)
                "root": init.root_curve.controls.copy(),     # (K, 3)
                "offsets": init.motion.offsets.copy(),       # (T, J, 3)
            }
            return cls(mode=mode, rot_coeff=init.rot_coeff.copy(),
                       root_coeff=init.root_coeff.copy(), values=values)
        if mode == "per_frame":
            values = {
                "rotations": init.motion.rotations.copy(),
                "root": init.motion.root_translation.copy(),
                "offsets": init.motion.offsets.copy(),
            }
            return cls(mode=mode, rot_coeff=None, root_coeff=None,
                       values=values)
        raise ValueError(f"unknown optimization mode '{mode}'")

    def leaves(self, tape: ad.Tape) -> dict:
        return {name: tape.leaf(arr) for name, arr in self.values.items()}

    def motion_tensors(self, leaves: dict):
        """(rotations, root, offsets) tensors shaped per frame."""
        if self.mode == "per_frame":
            return leaves["rotations"], leaves["root"], leaves["offsets"]
        per_joint = [nurbs.sample_controls(self.rot_coeff[j],
                                           leaves["rotations"][j])
                     for j in range(self.rot_coeff.shape[0])]
        rotations = ad.stack(per_joint, axis=1)           # (T, J, 3)
        root = nurbs.sample_controls(self.root_coeff, leaves["root"])
        return rotations, root, leaves["offsets"]

    def motion_params(self) -> MotionParams:
        """Current per-frame motion as plain arrays."""
        if self.mode == "per_frame":
            return MotionParams(rotations=self.values["rotations"].copy(),
                                root_translation=self.values["root"].copy(),
                                offsets=self.values["offsets"].copy())
        rotations = np.einsum("jtk,jkd->tjd", self.rot_coeff,
                              self.values["rotations"])
        root = self.root_coeff @ self.values["root"]
        return MotionParams(rotations=rotations, root_translation=root,
                            offsets=self.values["offsets"].copy())


# ---------------------------------------------------------------------------
# pipeline plumbing


@dataclass
class Rig:
    skeleton: Skeleton
    rest_vertices: np.ndarray
    faces: np.ndarray
    weights: np.ndarray


def synthesize_frames(rig: Rig, motion: MotionParams, config: RunConfig,
                      mask=None):
    """Render a motion without recording gradients.

    Returns (frames (T,C,H,W), vertices (T,V,3)) as plain arrays.
    """
    globals_t = forward_kinematics(rig.skeleton, motion.rotations,
                                   motion.root_translation, motion.offsets)
    skinned = linear_blend_skin(rig.skeleton, globals_t, rig.rest_vertices,
                                rig.weights)
    if mask is None:
        mask = springmass.build_mask(rig.skeleton, rig.weights)
    if mask.dynamic.any():
        skinned = springmass.simulate_sequence(
            skinned, mask, rig.rest_vertices, rig.faces, config.springmass,
            up_axis=config.up_index)
    frames = renderer.render(skinned, config.camera)
    return frames.data, skinned.data


@dataclass
class OptimizationResult:
    motion: MotionParams
    init: MotionInit
    frames: np.ndarray            # (T, C, H, W) render of the final motion
    vertices: np.ndarray          # (T, V, 3) final deformed vertices
    log: list
    iterations_run: int
    aborted: bool = False
    abort_reason: str | None = None


def _call_critic(critic, req):
    """One blocking critic call with a single retry on transport failure."""
    try:
        return critic(req)
    except TRANSPORT_ERRORS as first:
        try:
            return critic(req)
        except TRANSPORT_ERRORS as second:
            raise RuntimeError(
                f"critic transport failed twice: {first}; retry: {second}"
            ) from second


# ---------------------------------------------------------------------------
# checkpoints


def _atomic_savez(path: str, payload: dict) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        np.savez(fh, **payload)
    os.replace(tmp, path)


def save_checkpoint(path: str, variables: MotionVariables, opt: AdamW,
                    iteration: int, rng: np.random.Generator) -> None:
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "mode": variables.mode,
        "iteration": np.int64(iteration),
        "step_count": np.int64(opt.step_count),
        "rng_state": json.dumps(rng.bit_generator.state),
    }
    for name, arr in variables.values.items():
        payload[f"param_{name}"] = arr
    for name, (m, v) in opt.moments.items():
        payload[f"m_{name}"] = m
        payload[f"v_{name}"] = v
    _atomic_savez(path, payload)


def load_checkpoint(path: str, variables: MotionVariables, opt: AdamW,
                    rng: np.random.Generator) -> int:
    """Restore params, moments, and RNG stream in place; returns the next
    iteration index."""
    with np.load(path, allow_pickle=False) as data:
        version = str(data["format_version"])
        if version.split(".")[0] != CHECKPOINT_VERSION.split(".")[0]:
            raise ValueError(f"unsupported checkpoint version {version}")
        mode = str(data["mode"])
        if mode != variables.mode:
            raise ValueError(
                f"checkpoint mode '{mode}' != configured '{variables.mode}'")
        for name in variables.values:
            variables.values[name] = data[f"param_{name}"].copy()
        for g in opt.groups:
            g.value = variables.values[g.name]
            opt.moments[g.name] = (data[f"m_{g.name}"].copy(),
                                   data[f"v_{g.name}"].copy())
        opt.step_count = int(data["step_count"])
        rng.bit_generator.state = json.loads(str(data["rng_state"]))
        return int(data["iteration"]) + 1


# ---------------------------------------------------------------------------
# the loop


def run_optimization(rig: Rig, prompt: str, config: RunConfig,
                     critic=None, init: MotionInit | None = None,
                     out_dir: str | None = None,
                     resume_from: str | None = None) -> OptimizationResult:
    """Guided motion optimization; returns final params and rendered frames.

    critic: callable CriticRequest -> CriticResponse.  None selects the
    built-in mock whose target is the rendered initialization.
    """
    skel = rig.skeleton
    up = config.up_index
    if init is None:
        init = prepare_motion(skel, prompt, config.frames, config)
    morph = init.morphology

    mask = springmass.build_mask(skel, rig.weights)
    soft_body = bool(mask.dynamic.any())
    if critic is None:
        target, _ = synthesize_frames(rig, init.motion, config, mask=mask)
        critic = mosds.MockCritic(target, kappa=config.mosds.kappa)

    variables = MotionVariables.from_init(init, config.optim.mode)
    oc = config.optim
    opt = AdamW(groups=[
        ParamGroup("rotations", variables.values["rotations"],
                   oc.lr_rotations, oc.weight_decay),
        ParamGroup("root", variables.values["root"],
                   oc.lr_root, oc.weight_decay),
        ParamGroup("offsets", variables.values["offsets"],
                   oc.lr_offsets, oc.weight_decay),
    ], beta1=oc.beta1, beta2=oc.beta2, eps=oc.eps)
    for g in opt.groups:                     # groups share the leaf arrays
        variables.values[g.name] = g.value

    rng = np.random.default_rng(config.seed)
    start = 0
    if resume_from is not None:
        start = load_checkpoint(resume_from, variables, opt, rng)

    pairs = losses.mirror_joint_pairs(morph)
    feet = losses.find_foot_joints(skel, morph, config.foot_height_frac)
    tau_contact = losses.contact_threshold(morph, config.contact_height_frac)
    ground_h = float(rig.rest_vertices[:, up].min())
    weights = config.weights

    log: list = []
    log_fh = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        log_fh = open(os.path.join(out_dir, "progress.jsonl"), "a")

    aborted = False
    abort_reason = None
    total_iters = max(oc.iterations, 0)
    last_good = {k: v.copy() for k, v in variables.values.items()}
    it = start
    try:
        for it in range(start, total_iters):
            fraction = it / total_iters if total_iters else 0.0
            mosds_scale = schedule_multiplier(
                config.schedules.get("mosds", []), fraction)
            contact_scale = schedule_multiplier(
                config.schedules.get("contact", []), fraction)

            tau = mosds.sample_timestep(rng, config.mosds.tau_min,
                                        config.mosds.tau_max)
            eps_seed = int(rng.integers(2 ** 63))

            try:
                record = _iterate(
                    rig, config, variables, opt, critic, init, prompt,
                    tau, eps_seed, mosds_scale, contact_scale,
                    mask if soft_body else None, pairs, feet, tau_contact,
                    ground_h, weights)
            except ad.NonFiniteError as err:
                aborted = True
                abort_reason = f"non-finite loss at iteration {it}: {err}"
                for name, arr in last_good.items():
                    variables.values[name][...] = arr
                if out_dir is not None:
                    save_checkpoint(os.path.join(out_dir, "last_good.npz"),
                                    variables, opt, it - 1, rng)
                break

            for name, arr in variables.values.items():
                last_good[name][...] = arr
            record["iteration"] = it
            log.append(record)
            if log_fh is not None:
                log_fh.write(json.dumps(record) + "\n")
                log_fh.flush()
            if (oc.checkpoint_every and out_dir is not None
                    and (it + 1) % oc.checkpoint_every == 0):
                save_checkpoint(os.path.join(out_dir, "checkpoint.npz"),
                                variables, opt, it, rng)
    finally:
        if log_fh is not None:
            log_fh.close()

    motion = variables.motion_params()
    frames, vertices = synthesize_frames(rig, motion, config, mask=mask)
    return OptimizationResult(
        motion=motion, init=init, frames=frames, vertices=vertices, log=log,
        iterations_run=(it if aborted else total_iters) - start,
        aborted=aborted, abort_reason=abort_reason)


def _iterate(rig, config, variables, opt, critic, init, prompt, tau,
             eps_seed, mosds_scale, contact_scale, mask, pairs, feet,
             tau_contact, ground_h, weights) -> dict:
    """One full forward/backward/update pass; returns the log record."""
    skel = rig.skeleton
    up = config.up_index
    tape = ad.Tape()
    leaves = variables.leaves(tape)
    rotations, root, offsets = variables.motion_tensors(leaves)

    globals_t = forward_kinematics(skel, rotations, root, offsets)
    skinned = linear_blend_skin(skel, globals_t, rig.rest_vertices,
                                rig.weights)
    if mask is not None:
        skinned = springmass.simulate_sequence(
            skinned, mask, rig.rest_vertices, rig.faces, config.springmass,
            up_axis=up)
    frames = renderer.render(skinned, config.camera)

    if weights.mosds * mosds_scale != 0.0:
        req = mosds.CriticRequest(
            frames=np.clip(frames.data, -1.0, 1.0), prompt=prompt,
            tau=tau, cfg_scale=config.mosds.cfg_scale, seed=eps_seed)
        resp = _call_critic(critic, req)
        guidance = mosds.mosds_gradient(
            resp, config.mosds.cfg_scale, weights.appear, weights.motion,
            tau=tau)
        proxy = mosds.proxy_loss(frames, guidance, config.mosds.eta)
    else:
        proxy = ad.constant(0.0)

    smooth = losses.smoothness_loss(rotations, root, weights)
    rom = losses.rom_loss(skel, rotations, config.rom)
    sym = losses.symmetry_loss(rotations, pairs)
    cyc = (losses.cyclic_loss(rotations, root) if init.closed
           else ad.constant(0.0))
    phy = losses.physics_loss(weights, smooth, rom, sym, cyc)

    joints = joint_positions(globals_t)
    foot_pos = [joints[:, f] for f in feet]
    ground = losses.ground_loss(skinned, ground_h, up_axis=up)
    contact = losses.contact_loss(foot_pos, tau_contact, up_axis=up)
    env = losses.environment_loss(weights, ground, contact, contact_scale)

    off = losses.offset_loss(offsets, weights.offset_vel)
    total = losses.total_loss(weights, proxy, phy, env, off, mosds_scale)

    grad_tensors = tape.gradients(total)
    grads = {name: grad_tensors[leaf.node].data
             for name, leaf in leaves.items()}
    grads, grad_norm, clipped = clip_by_global_norm(grads,
                                                    config.optim.grad_clip)
    opt.step(grads)

    return {
        "total": float(total.data), "proxy": float(proxy.data),
        "smooth": float(smooth.data), "rom": float(rom.data),
        "sym": float(sym.data), "cyclic": float(cyc.data),
        "ground": float(ground.data), "contact": float(contact.data),
        "offset": float(off.data), "tau": tau,
        "mosds_scale": mosds_scale, "contact_scale": contact_scale,
        "grad_norm": grad_norm, "clipped": clipped,
    }

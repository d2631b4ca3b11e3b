"""Structured motion prior: morphology, prompt parsing, gait curves.

Builds the starting motion for the optimizer in four steps: classify the
skeleton's body plan, map the prompt to an action label, synthesize a dense
per-joint trajectory from an editable gait table, and compress it onto
rational spline curves whose control weights emphasize foot-contact and
torso samples.  Everything here is pure numpy; only the final sampling step
touches the autodiff tape (via nurbs.sample_controls in the optimizer).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .config import NurbsConfig, RomLimits, RunConfig
from .kinematics import forward_kinematics
from .nurbs import NurbsCurve, project_trajectory, projection_indices
from .skeleton import MotionParams, Skeleton

ACTIONS = ("walk", "run", "jump", "idle", "strike", "swim-fly", "custom")
MORPHOLOGY_LABELS = ("biped", "quadruped", "non-living", "flying-aquatic")

# Leaves at or below this fraction of character height count as ground-reaching.
GROUND_LEAF_FRAC = 0.25
# Mirror-pair matching tolerance, as a fraction of character height.
MIRROR_TOL_FRAC = 0.08
# Lateral span must exceed height by this factor for the winged/finned class.
WING_SPAN_FACTOR = 1.0

GAIT_TEMPLATE_RESOURCE = "gait_templates.json"
ACTION_LEXICON_RESOURCE = "action_lexicon.json"


# ---------------------------------------------------------------------------
# morphology


@dataclass(frozen=True)
class MorphologyDiagnostics:
    """Reproducible summary statistics backing a classification."""

    tree_depth: int
    branching_factor: int
    limb_pair_count: int
    bone_length_min: float
    bone_length_mean: float
    bone_length_max: float


@dataclass(frozen=True)
class LimbChain:
    """A limb hanging off the trunk, ordered attachment-side first."""

    joints: tuple[int, ...]
    attachment: int          # trunk joint the chain branches from
    ground: bool             # leaf reaches near ground level at rest
    side: float              # signed mean coordinate along the mirror axis


@dataclass(frozen=True)
class MorphologyClass:
    label: str
    diagnostics: MorphologyDiagnostics
    trunk: tuple[int, ...]
    chains: tuple[LimbChain, ...]
    pairs: tuple[tuple[int, int], ...]   # indices into chains
    mirror_axis: int
    up_axis: int
    height: float
    ground_level: float


def _root_to_leaf_path(skel: Skeleton, leaf: int) -> list[int]:
    path = [leaf]
    while skel.joints[path[-1]].parent is not None:
        path.append(skel.parent_index(path[-1]))
    return path[::-1]


def _match_pairs(chains, positions, axis: int, tol: float):
    """Greedy mirror pairing of chains across the given axis."""
    pairs = []
    used = set()
    for i in range(len(chains)):
        if i in used:
            continue
        best, best_d = None, tol
        leaf_i = positions[chains[i].joints[-1]].copy()
        for j in range(i + 1, len(chains)):
            if j in used:
                continue
            if len(chains[j].joints) != len(chains[i].joints):
                continue
            if chains[j].ground != chains[i].ground:
                continue
            leaf_j = positions[chains[j].joints[-1]].copy()
            leaf_j[axis] = -leaf_j[axis]
            d = float(np.linalg.norm(leaf_i - leaf_j))
            if d < best_d:
                best, best_d = j, d
        if best is not None:
            used.update((i, best))
            pairs.append((i, best))
    return tuple(pairs)


def classify_morphology(skel: Skeleton, up_axis: int = 1) -> MorphologyClass:
    """Deterministic body-plan classification from rest geometry alone.

    Rules, applied in order: at least four mirror-paired ground-reaching
    limb chains give a quadruped; exactly two ground-reaching chains plus a
    non-ground pair give a biped; a lateral span wider than the character is
    tall, carried by non-ground pairs, gives the winged/finned class;
    anything else falls back to non-living.
    """
    positions = skel.rest_positions
    up = positions[:, up_axis]
    ground_level = float(up.min())
    height = float(up.max() - up.min())
    if height <= 0.0:
        height = 1.0

    leaves = skel.leaf_indices()
    # Trunk: root-to-leaf path ending highest; ties break to the longer path.
    trunk = max((_root_to_leaf_path(skel, leaf) for leaf in leaves),
                key=lambda p: (up[p[-1]], len(p), -p[-1]))
    trunk_set = set(trunk)

    raw_chains = []
    for leaf in leaves:
        if leaf in trunk_set:
            continue
        path = _root_to_leaf_path(skel, leaf)
        cut = max(k for k, j in enumerate(path) if j in trunk_set)
        joints = tuple(path[cut + 1:])
        if len(joints) < 2:
            continue
        ground = up[leaf] <= ground_level + GROUND_LEAF_FRAC * height
        raw_chains.append((joints, path[cut], ground))

    # A mirror axis aligned with a horizontal trunk would pair front with
    # hind limbs, so trunk alignment is penalized ahead of lateral spread.
    trunk_dir = positions[trunk[-1]] - positions[trunk[0]]
    trunk_dir[up_axis] = 0.0
    norm = np.linalg.norm(trunk_dir)
    trunk_dir = trunk_dir / norm if norm > 0.2 * height else np.zeros(3)

    lateral_axes = [a for a in range(3) if a != up_axis]
    tol = MIRROR_TOL_FRAC * height
    best = None
    for axis in lateral_axes:
        chains = tuple(
            LimbChain(joints, attach, ground,
                      float(np.mean(positions[list(joints), axis])))
            for joints, attach, ground in raw_chains)
        pairs = _match_pairs(chains, positions, axis, tol)
        spread = sum(abs(c.side) for c in chains)
        key = (len(pairs), -abs(trunk_dir[axis]), spread, -axis)
        if best is None or key > best[0]:
            best = (key, axis, chains, pairs)
    _, mirror_axis, chains, pairs = best

    ground_chains = [c for c in chains if c.ground]
    ground_pairs = [p for p in pairs if chains[p[0]].ground]
    nonground_pairs = [p for p in pairs if not chains[p[0]].ground]
    span = float(positions[:, mirror_axis].max() - positions[:, mirror_axis].min())

    if 2 * len(ground_pairs) >= 4:
        label = "quadruped"
    elif len(ground_chains) == 2 and len(nonground_pairs) >= 1:
        label = "biped"
    elif len(nonground_pairs) >= 1 and span > WING_SPAN_FACTOR * height:
        label = "flying-aquatic"
    else:
        label = "non-living"

    offsets = [np.linalg.norm(j.offset) for j in skel.joints if j.parent is not None]
    diag = MorphologyDiagnostics(
        tree_depth=max(len(_root_to_leaf_path(skel, leaf)) for leaf in leaves),
        branching_factor=max(len(kids) for kids in skel.children) if len(skel) else 0,
        limb_pair_count=len(pairs),
        bone_length_min=float(min(offsets)) if offsets else 0.0,
        bone_length_mean=float(np.mean(offsets)) if offsets else 0.0,
        bone_length_max=float(max(offsets)) if offsets else 0.0,
    )
    return MorphologyClass(label=label, diagnostics=diag, trunk=tuple(trunk),
                           chains=chains, pairs=pairs, mirror_axis=mirror_axis,
                           up_axis=up_axis, height=height,
                           ground_level=ground_level)


# ---------------------------------------------------------------------------
# prompt parsing


def _load_packaged(name: str) -> dict:
    path = resources.files("skelmotion").joinpath("data").joinpath(name)
    with path.open("r", encoding="utf-8") as fh:
        return json.load(fh)


def load_action_lexicon(path: str | None = None) -> dict[str, str]:
    raw = json.load(open(path, encoding="utf-8")) if path else \
        _load_packaged(ACTION_LEXICON_RESOURCE)
    phrases = raw["phrases"]
    valid = set(raw.get("actions", ACTIONS))
    for phrase, action in phrases.items():
        if action not in valid:
            raise ValueError(f"lexicon phrase '{phrase}' maps to unknown action '{action}'")
    return dict(phrases)


def _tokenize(text: str) -> list[str]:
    out, word = [], []
    for ch in text.lower():
        if ch.isalnum():
            word.append(ch)
        elif word:
            out.append("".join(word))
            word = []
    if word:
        out.append("".join(word))
    return out


def parse_action(prompt: str, lexicon: dict[str, str] | None = None) -> str:
    """Keyword lookup with longest-match priority; unmatched prompts idle.

    Longer phrases (more words, then more characters) win; remaining ties
    break toward the earliest occurrence in the prompt.
    """
    if not prompt or not prompt.strip():
        raise ValueError("prompt must be non-empty")
    if lexicon is None:
        lexicon = load_action_lexicon()
    tokens = _tokenize(prompt)
    best = None
    for phrase, action in lexicon.items():
        words = _tokenize(phrase)
        n = len(words)
        for start in range(len(tokens) - n + 1):
            if tokens[start:start + n] == words:
                key = (n, len(phrase), -start, phrase)
                if best is None or key > best[0]:
                    best = (key, action)
                break
    if best is None:
        warnings.warn(f"no action keyword in prompt {prompt!r}; defaulting to idle")
        return "idle"
    return best[1]


# ---------------------------------------------------------------------------
# gait templates


def _as_vec3(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(3, float(arr))
    if arr.shape != (3,):
        raise ValueError(f"expected scalar or 3-vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class ChannelSpec:
    """Sinusoid parameters for one joint role: per-axis A, phase, bias."""

    amplitude: np.ndarray
    phase: np.ndarray
    bias: np.ndarray


@dataclass(frozen=True)
class BumpSpec:
    """One smooth compact bump: rises on [w0,w1], holds, falls on [w2,w3]."""

    amplitude: np.ndarray
    window: tuple[float, float, float, float]
    role: str | None = None


@dataclass(frozen=True)
class RootBob:
    amplitude: np.ndarray
    freq_multiple: float
    phase: float


@dataclass(frozen=True)
class GaitTemplate:
    action: str
    kind: str                    # "cyclic" | "event" | "idle"
    antiphase: bool
    root_advance: float
    root_bob: RootBob
    frequency: float = 1.0       # cycles per clip, cyclic kinds only
    channels: dict = field(default_factory=dict)
    root_bumps: tuple = ()
    joint_bumps: tuple = ()
    limb_selection: str = "all"

    @property
    def cyclic(self) -> bool:
        return self.kind == "cyclic"


def _parse_window(raw) -> tuple[float, float, float, float]:
    w = tuple(float(x) for x in raw)
    if len(w) != 4 or not (0.0 <= w[0] <= w[1] <= w[2] <= w[3] <= 1.0):
        raise ValueError(f"bump window must be 4 non-decreasing values in [0,1], got {raw}")
    return w


def _parse_template(action: str, raw: dict) -> GaitTemplate:
    kind = raw.get("kind", "cyclic")
    if kind not in ("cyclic", "event", "idle"):
        raise ValueError(f"unknown template kind '{kind}'")
    frequency = float(raw.get("frequency", 1.0))
    if kind == "cyclic" and frequency <= 0:
        raise ValueError("cyclic template frequency must be positive")
    bob_raw = raw.get("root_bob", {})
    bob = RootBob(amplitude=_as_vec3(bob_raw.get("amplitude", 0.0)),
                  freq_multiple=float(bob_raw.get("freq_multiple", 1.0)),
                  phase=float(bob_raw.get("phase", 0.0)))
    channels = {
        role: ChannelSpec(amplitude=_as_vec3(spec.get("amplitude", 0.0)),
                          phase=_as_vec3(spec.get("phase", 0.0)),
                          bias=_as_vec3(spec.get("bias", 0.0)))
        for role, spec in raw.get("channels", {}).items()}
    root_bumps = tuple(BumpSpec(_as_vec3(b["amplitude"]), _parse_window(b["window"]))
                       for b in raw.get("root_bumps", ()))
    joint_bumps = tuple(BumpSpec(_as_vec3(b["amplitude"]), _parse_window(b["window"]),
                                 role=b["role"])
                        for b in raw.get("joint_bumps", ()))
    return GaitTemplate(action=action, kind=kind, frequency=frequency,
                        antiphase=bool(raw.get("antiphase", False)),
                        root_advance=float(raw.get("root_advance", 0.0)),
                        root_bob=bob, channels=channels, root_bumps=root_bumps,
                        joint_bumps=joint_bumps,
                        limb_selection=raw.get("limb_selection", "all"))


def load_gait_templates(path: str | None = None) -> dict[str, dict[str, GaitTemplate]]:
    raw = json.load(open(path, encoding="utf-8")) if path else \
        _load_packaged(GAIT_TEMPLATE_RESOURCE)
    version = str(raw.get("format_version", "1.0"))
    if version.split(".")[0] != "1":
        raise ValueError(f"unsupported gait table version {version}")
    tables = {}
    for morph, actions in raw["templates"].items():
        tables[morph] = {action: _parse_template(action, spec)
                         for action, spec in actions.items()}
    return tables


def resolve_template(tables: dict, morphology: str, action: str) -> GaitTemplate:
    """Template lookup with graceful fallback to defaults, then to idle."""
    for morph_key, action_key in ((morphology, action), ("defaults", action),
                                  (morphology, "idle"), ("defaults", "idle")):
        tpl = tables.get(morph_key, {}).get(action_key)
        if tpl is not None:
            return tpl
    raise ValueError("gait table has no idle fallback template")


# ---------------------------------------------------------------------------
# dense trajectory synthesis


def smoothstep(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def bump(u: np.ndarray, window: tuple[float, float, float, float]) -> np.ndarray:
    """C1 window function: 0 outside [w0,w3], 1 on [w1,w2], smooth edges."""
    w0, w1, w2, w3 = window
    rise = smoothstep((u - w0) / (w1 - w0)) if w1 > w0 else (u >= w0).astype(float)
    fall = 1.0 - (smoothstep((u - w2) / (w3 - w2)) if w3 > w2
                  else (u > w2).astype(float))
    return rise * fall


def assign_roles(skel: Skeleton, morph: MorphologyClass) -> dict[int, str]:
    """Map each joint to a gait-table role; unmapped joints stay motionless.

    Category roles (head, tail) take precedence, then trunk membership, then
    position along a limb chain: a chain's first joint is the limb root, its
    last the end, anything between a mid.
    """
    roles: dict[int, str] = {}
    for chain in morph.chains:
        prefix = "ground_limb" if chain.ground else "nonground_limb"
        joints = chain.joints
        roles[joints[0]] = f"{prefix}_root"
        roles[joints[-1]] = f"{prefix}_end"
        for j in joints[1:-1]:
            roles[j] = f"{prefix}_mid"
    for j in morph.trunk:
        roles.setdefault(j, "trunk")
    for j, joint in enumerate(skel.joints):
        if joint.category == "head":
            roles[j] = "head"
        elif joint.category == "tail":
            roles[j] = "tail"
    return roles


def _resolve_channel(channels: dict, role: str) -> ChannelSpec | None:
    spec = channels.get(role)
    if spec is None and "_limb_" in role:
        spec = channels.get("any_limb_" + role.rsplit("_", 1)[-1])
    return spec


def _bump_matches(bump_role: str, joint_role: str) -> bool:
    if bump_role == joint_role:
        return True
    return (bump_role.startswith("any_limb_") and "_limb_" in joint_role
            and joint_role.rsplit("_", 1)[-1] == bump_role.rsplit("_", 1)[-1])


def _chain_flips(template: GaitTemplate, morph: MorphologyClass) -> dict[int, float]:
    """Phase flip (0 or pi) per chain index for antiphase cyclic gaits.

    Mirror-side members of a pair run half a cycle apart.  On horizontal
    trunks the front/hind split flips once more, producing a diagonal gait;
    non-ground chains flip relative to the same-side ground chain so arms
    counter-swing the legs.
    """
    flips = {i: 0.0 for i in range(len(morph.chains))}
    if not (template.cyclic and template.antiphase):
        return flips

    # Front/hind split only matters with >= 3 ground chains (quadruped-like);
    # attachment order along the trunk separates the two girdles.
    ground_ids = [i for i, c in enumerate(morph.chains) if c.ground]
    hind = {i: False for i in range(len(morph.chains))}
    if len(ground_ids) >= 3:
        trunk_order = {j: k for k, j in enumerate(morph.trunk)}
        vals = {i: trunk_order.get(morph.chains[i].attachment, 0)
                for i in ground_ids}
        lo, hi = min(vals.values()), max(vals.values())
        if hi > lo:
            mid = 0.5 * (lo + hi)
            for i in ground_ids:
                hind[i] = vals[i] < mid

    for i, chain in enumerate(morph.chains):
        positive = chain.side > 0
        if chain.ground:
            flips[i] = np.pi * float(positive ^ hind[i])
        else:
            flips[i] = np.pi * float(not positive)
    return flips


def _select_single_chain(morph: MorphologyClass) -> int | None:
    """Deterministic pick of the acting limb for single-limb events."""
    candidates = [i for i, c in enumerate(morph.chains) if not c.ground]
    if not candidates:
        candidates = [i for i, c in enumerate(morph.chains) if c.ground]
    if not candidates:
        return None
    candidates.sort(key=lambda i: (-float(morph.chains[i].side > 0),
                                   morph.chains[i].joints[0]))
    return candidates[0]


def generate_dense_trajectory(skel: Skeleton, template: GaitTemplate, t_frames: int,
                              morph: MorphologyClass | None = None,
                              rom: RomLimits | None = None,
                              up_axis: int = 1):
    """Analytic per-frame rotations (T, J, 3) and root path (T, 3).

    Cyclic templates evaluate A*sin(2*pi*freq*t/T + phase) + bias per role,
    with paired limbs half a cycle apart; event templates sum smooth bumps
    on the [0, 1] clip timeline.  Joints without a role stay at rest.
    """
    if t_frames < 8:
        raise ValueError("need at least 8 frames")
    if morph is None:
        morph = classify_morphology(skel, up_axis=up_axis)
    if rom is None:
        rom = RomLimits()

    j_joints = len(skel)
    rotations = np.zeros((t_frames, j_joints, 3))
    root = np.tile(skel.rest_positions[0], (t_frames, 1))

    roles = assign_roles(skel, morph)
    chain_of = {j: i for i, c in enumerate(morph.chains) for j in c.joints}
    flips = _chain_flips(template, morph)

    t_hat = np.arange(t_frames) / t_frames          # cyclic timeline
    u = np.arange(t_frames) / (t_frames - 1)        # event timeline

    if template.kind == "cyclic":
        omega = 2.0 * np.pi * template.frequency
        for j in range(j_joints):
            role = roles.get(j)
            if role is None:
                continue
            spec = _resolve_channel(template.channels, role)
            if spec is None:
                continue
            flip = flips.get(chain_of.get(j, -1), 0.0)
            theta = omega * t_hat[:, None] + spec.phase[None, :] + flip
            rotations[:, j, :] = spec.amplitude * np.sin(theta) + spec.bias
        bob = template.root_bob
        root += bob.amplitude * np.sin(
            2.0 * np.pi * template.frequency * bob.freq_multiple * t_hat[:, None]
            + bob.phase)
    elif template.kind == "event":
        selected = None
        if template.limb_selection == "single":
            selected = _select_single_chain(morph)
        for spec in template.joint_bumps:
            envelope = bump(u, spec.window)
            for j in range(j_joints):
                role = roles.get(j)
                if role is None or not _bump_matches(spec.role, role):
                    continue
                if (selected is not None and "_limb_" in role
                        and chain_of.get(j) != selected):
                    continue
                rotations[:, j, :] += spec.amplitude * envelope[:, None]
        for spec in template.root_bumps:
            root += spec.amplitude * bump(u, spec.window)[:, None]
    # "idle" kind: rest pose throughout.

    if template.root_advance != 0.0:
        facing = [a for a in range(3) if a not in (up_axis, morph.mirror_axis)]
        if facing:
            root[:, facing[0]] += template.root_advance * u

    for j in range(j_joints):
        limit = rom.for_category(skel.joints[j].category)
        peak = float(np.abs(rotations[:, j, :]).max())
        if peak > limit + 1e-9:
            raise ValueError(
                f"template drives joint '{skel.joints[j].name}' to {peak:.3f} rad, "
                f"outside its {limit:.3f} rad category limit")
    return rotations, root


# ---------------------------------------------------------------------------
# contact phases and spline projection


def foot_joints_of(morph: MorphologyClass) -> tuple[int, ...]:
    return tuple(c.joints[-1] for c in morph.chains if c.ground)


def detect_contact_phases(skel: Skeleton, rotations: np.ndarray, root: np.ndarray,
                          foot_joints, up_axis: int = 1,
                          frac: float = 0.30) -> dict[int, np.ndarray]:
    """Per-foot boolean contact masks from the dense trajectory's geometry.

    A frame is a contact frame when the foot's world height sits in the
    lowest `frac` of that foot's height range over the clip.  Constant
    heights mark every frame as contact.
    """
    if not foot_joints:
        return {}
    g = forward_kinematics(skel, rotations, root).data
    heights = g[:, :, up_axis, 3]
    masks = {}
    for j in foot_joints:
        h = heights[:, j]
        lo, hi = float(h.min()), float(h.max())
        masks[int(j)] = h <= lo + frac * (hi - lo) + 1e-12
    return masks


def build_curves(skel: Skeleton, rotations: np.ndarray, root: np.ndarray,
                 morph: MorphologyClass, contact_masks: dict[int, np.ndarray],
                 nurbs_cfg: NurbsConfig, closed: bool):
    """Project rotations and root path onto weighted rational curves.

    Control weights: contact-phase samples of ground-chain joints get
    `contact_weight`, spine-category joints get `torso_weight` throughout,
    everything else 1.  Returns per-joint curves, the root curve, and the
    constant sampling matrices for frames at s = t/(T-1).
    """
    t_frames, j_joints = rotations.shape[0], rotations.shape[1]
    n_controls, degree = nurbs_cfg.n_controls, nurbs_cfg.degree
    if n_controls > t_frames:
        raise ValueError("more control points than frames")
    idx = projection_indices(t_frames, n_controls, closed)
    sample_frames = idx % t_frames

    # Contact weighting targets the contact end of each ground chain; the
    # proximal joints keep uniform weights so mirrored limbs stay exact
    # antiphase copies after projection.
    chain_mask = {}
    for c in morph.chains:
        if c.ground and c.joints[-1] in contact_masks:
            chain_mask[c.joints[-1]] = contact_masks[c.joints[-1]]

    s_values = np.arange(t_frames) / (t_frames - 1)
    joint_curves, rot_coeff = [], []
    for j in range(j_joints):
        weights = np.ones(n_controls)
        if skel.joints[j].category == "spine":
            weights[:] = nurbs_cfg.torso_weight
        elif j in chain_mask:
            weights[chain_mask[j][sample_frames]] = nurbs_cfg.contact_weight
        curve = project_trajectory(rotations[:, j, :], n_controls, degree,
                                   closed=closed, control_weights=weights)
        joint_curves.append(curve)
        rot_coeff.append(curve.coefficient_matrix(s_values))

    root_curve = project_trajectory(
        root, n_controls, degree, closed=closed,
        control_weights=np.full(n_controls, nurbs_cfg.torso_weight))
    root_coeff = root_curve.coefficient_matrix(s_values)
    return joint_curves, root_curve, np.stack(rot_coeff), root_coeff


# ---------------------------------------------------------------------------
# top-level initialization


@dataclass
class MotionInit:
    """Everything the optimizer needs from the initialization stage."""

    motion: MotionParams
    morphology: MorphologyClass
    action: str
    template: GaitTemplate
    foot_joints: tuple[int, ...]
    contact_masks: dict[int, np.ndarray]
    joint_curves: list[NurbsCurve]
    root_curve: NurbsCurve
    rot_coeff: np.ndarray      # (J, T, K+1) constant sampling matrices
    root_coeff: np.ndarray     # (T, K+1)
    closed: bool


def prepare_motion(skel: Skeleton, prompt: str, t_frames: int,
                   config: RunConfig | None = None) -> MotionInit:
    """Full initialization pipeline from rig and prompt to spline motion."""
    config = config or RunConfig()
    up = config.up_index
    morph = classify_morphology(skel, up_axis=up)
    lexicon = load_action_lexicon(config.action_lexicon)
    action = parse_action(prompt, lexicon)
    tables = load_gait_templates(config.gait_templates)
    template = resolve_template(tables, morph.label, action)

    rotations, root = generate_dense_trajectory(
        skel, template, t_frames, morph=morph, rom=config.rom, up_axis=up)
    feet = foot_joints_of(morph)
    contact_masks = detect_contact_phases(
        skel, rotations, root, feet, up_axis=up, frac=config.contact_phase_frac)

    closed = template.cyclic
    joint_curves, root_curve, rot_coeff, root_coeff = build_curves(
        skel, rotations, root, morph, contact_masks, config.nurbs, closed)

    # Sample the curves back at frame parameters; offsets start at zero.
    sampled_rot = np.einsum("jtk,jkd->tjd",
                            rot_coeff,
                            np.stack([c.controls for c in joint_curves]))
    sampled_root = root_coeff @ root_curve.controls
    motion = MotionParams(rotations=sampled_rot, root_translation=sampled_root,
                          offsets=np.zeros((t_frames, len(skel), 3)))
    return MotionInit(motion=motion, morphology=morph, action=action,
                      template=template, foot_joints=feet,
                      contact_masks=contact_masks, joint_curves=joint_curves,
                      root_curve=root_curve, rot_coeff=rot_coeff,
                      root_coeff=root_coeff, closed=closed)


def initialize_motion(skel: Skeleton, prompt: str, t_frames: int,
                      config: RunConfig | None = None) -> MotionParams:
    """Prompt-conditioned starting motion; offsets are all zero."""
    return prepare_motion(skel, prompt, t_frames, config).motion

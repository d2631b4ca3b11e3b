"""Morphology, prompt parsing, gait synthesis, and spline initialization.

Frozen oracle values, derived by hand before implementation:
  - walk templates run at 2 cycles per clip, so a 48-frame clip has a
    24-frame period (autocorrelation peak at lag 24) and mirrored limbs
    trail each other by half a period = 12 frames.
  - the lamp fixture has a single root-to-leaf chain, hence zero limb
    chains and zero mirror pairs, which the rules map to non-living.
"""

from __future__ import annotations

import numpy as np
import pytest

from skelmotion import motion_init as mi
from skelmotion.config import RomLimits, RunConfig
from skelmotion.fixtures import (biped_rig, lamp_rig, quadruped_rig, toy_rig,
                                 winged_rig)
from skelmotion.skeleton import MotionParams

FRAMES = 48


# ---------------------------------------------------------------------------
# morphology


def test_biped_fixture_classifies_as_biped():
    morph = mi.classify_morphology(biped_rig().skeleton)
    assert morph.label == "biped"
    ground = [c for c in morph.chains if c.ground]
    assert len(ground) == 2
    assert morph.diagnostics.limb_pair_count == 2


def test_quadruped_fixture_classifies_as_quadruped():
    morph = mi.classify_morphology(quadruped_rig().skeleton)
    assert morph.label == "quadruped"
    assert sum(c.ground for c in morph.chains) == 4
    assert morph.diagnostics.limb_pair_count == 2
    # mirror plane separates left from right, not front from hind
    assert morph.mirror_axis == 2


def test_lamp_fixture_rule_trace():
    # Rule trace done by hand: one leaf only, so the trunk passes through
    # every joint, no chains branch off, and no pair rule can fire.
    morph = mi.classify_morphology(lamp_rig().skeleton)
    assert len(morph.chains) == 0
    assert morph.diagnostics.limb_pair_count == 0
    assert morph.label == "non-living"


def test_winged_fixture_classifies_as_flying_aquatic():
    morph = mi.classify_morphology(winged_rig().skeleton)
    assert morph.label == "flying-aquatic"
    assert all(not c.ground for c in morph.chains)


def test_morphology_is_deterministic():
    a = mi.classify_morphology(biped_rig().skeleton)
    b = mi.classify_morphology(biped_rig().skeleton)
    assert a == b


def test_quadruped_diagnostics_summary():
    skel = quadruped_rig().skeleton
    diag = mi.classify_morphology(skel).diagnostics
    assert diag.tree_depth == 4              # pelvis -> chest -> hip -> foot
    assert diag.branching_factor == 4        # pelvis: chest, tail, two hips
    assert 0.0 < diag.bone_length_min <= diag.bone_length_mean <= diag.bone_length_max


# ---------------------------------------------------------------------------
# prompt parsing


def test_parse_action_keyword_hits():
    assert mi.parse_action("a corgi walking happily") == "walk"
    assert mi.parse_action("the robot jumps over a box") == "jump"


def test_parse_action_fallback_warns_and_idles():
    with pytest.warns(UserWarning):
        assert mi.parse_action("a serene scene") == "idle"


def test_parse_action_longest_match_priority():
    # "swinging a sword" (three words) must beat the earlier "standing".
    assert mi.parse_action("standing still, then swinging a sword") == "strike"


def test_parse_action_ignores_case_and_punctuation():
    assert mi.parse_action("A DOG, RUNNING!") == "run"


def test_parse_action_requires_text():
    with pytest.raises(ValueError):
        mi.parse_action("   ")


def test_parse_action_is_deterministic():
    prompt = "a knight marching and striking"
    assert mi.parse_action(prompt) == mi.parse_action(prompt)


def test_lexicon_rejects_unknown_action(tmp_path):
    bad = tmp_path / "lex.json"
    bad.write_text('{"actions": ["walk"], "phrases": {"moonwalk": "dance"}}')
    with pytest.raises(ValueError):
        mi.load_action_lexicon(str(bad))


# ---------------------------------------------------------------------------
# gait templates and dense trajectories


def test_template_table_loads_and_resolves_everywhere():
    tables = mi.load_gait_templates()
    for morph in ("biped", "quadruped", "non-living", "flying-aquatic"):
        for action in ("walk", "run", "jump", "idle", "strike", "swim-fly"):
            tpl = mi.resolve_template(tables, morph, action)
            assert tpl.kind in ("cyclic", "event", "idle")


def test_cyclic_template_phases_stay_on_half_cycle_grid():
    # Phases of 0 or pi keep closed-loop projections velocity-exact at the
    # seam; this guards the shipped table against drift.
    tables = mi.load_gait_templates()
    for actions in tables.values():
        for tpl in actions.values():
            if not tpl.cyclic:
                continue
            for spec in tpl.channels.values():
                reduced = np.abs(np.sin(spec.phase))
                assert np.all(reduced < 1e-12)


def test_zero_amplitude_gives_constant_bias_trajectory():
    skel = biped_rig().skeleton
    morph = mi.classify_morphology(skel)
    bias = np.array([0.1, 0.0, 0.2])
    tpl = mi.GaitTemplate(
        action="custom", kind="cyclic", antiphase=False, root_advance=0.0,
        root_bob=mi.RootBob(np.zeros(3), 1.0, 0.0), frequency=2.0,
        channels={"any_limb_root": mi.ChannelSpec(np.zeros(3), np.zeros(3), bias)})
    rot, root = mi.generate_dense_trajectory(skel, tpl, FRAMES, morph=morph)
    assert np.all(root == root[0])
    roles = mi.assign_roles(skel, morph)
    for j in range(len(skel)):
        expected = bias if roles.get(j, "").endswith("_limb_root") else np.zeros(3)
        assert np.allclose(rot[:, j, :], expected)


def test_walk_dense_period_is_24_frames():
    # Oracle: period = T / omega = 48 / 2 = 24, frozen ahead of time.
    skel = biped_rig().skeleton
    tables = mi.load_gait_templates()
    tpl = mi.resolve_template(tables, "biped", "walk")
    rot, _ = mi.generate_dense_trajectory(skel, tpl, FRAMES)
    signal = rot.reshape(FRAMES, -1)
    signal = signal - signal.mean(axis=0)
    corr = [float(np.sum(signal * np.roll(signal, lag, axis=0)))
            for lag in range(FRAMES)]
    assert int(np.argmax(corr[1:])) + 1 == 24


def test_walk_dense_hip_antiphase_identity():
    skel = biped_rig().skeleton
    tables = mi.load_gait_templates()
    tpl = mi.resolve_template(tables, "biped", "walk")
    rot, _ = mi.generate_dense_trajectory(skel, tpl, FRAMES)
    bias = tpl.channels["ground_limb_root"].bias
    l_hip, r_hip = skel.index_of("l_hip"), skel.index_of("r_hip")
    assert np.allclose(rot[:, l_hip, :] - bias, -(rot[:, r_hip, :] - bias),
                       atol=1e-12)


def test_quadruped_run_uses_diagonal_phase_pattern():
    skel = quadruped_rig().skeleton
    tables = mi.load_gait_templates()
    tpl = mi.resolve_template(tables, "quadruped", "run")
    rot, _ = mi.generate_dense_trajectory(skel, tpl, FRAMES)
    lf, rf = skel.index_of("lf_hip"), skel.index_of("rf_hip")
    lh, rh = skel.index_of("lh_hip"), skel.index_of("rh_hip")
    assert np.allclose(rot[:, lf, :], rot[:, rh, :], atol=1e-12)
    assert np.allclose(rot[:, rf, :], rot[:, lh, :], atol=1e-12)
    assert np.allclose(rot[:, lf, :], -rot[:, rf, :], atol=1e-12)


def test_winged_flap_is_in_phase_across_the_pair():
    skel = winged_rig().skeleton
    tables = mi.load_gait_templates()
    tpl = mi.resolve_template(tables, "flying-aquatic", "swim-fly")
    rot, _ = mi.generate_dense_trajectory(skel, tpl, FRAMES)
    left, right = skel.index_of("l_shoulder"), skel.index_of("r_shoulder")
    assert np.allclose(rot[:, left, :], rot[:, right, :], atol=1e-12)
    assert np.abs(rot[:, left, 0]).max() > 0.1


def test_jump_template_is_smooth_and_returns_to_rest():
    skel = biped_rig().skeleton
    tables = mi.load_gait_templates()
    tpl = mi.resolve_template(tables, "biped", "jump")
    rot, root = mi.generate_dense_trajectory(skel, tpl, 96)
    assert np.allclose(rot[0], 0.0) and np.allclose(rot[-1], 0.0, atol=1e-6)
    # C1 joins: frame-to-frame velocity jumps shrink with the step size,
    # staying far below the curve's own velocity scale.
    up = root[:, 1]
    vel = np.diff(up)
    acc = np.diff(vel)
    assert np.abs(acc).max() < 0.25 * np.abs(vel).max()


def test_too_few_frames_rejected():
    skel = biped_rig().skeleton
    tables = mi.load_gait_templates()
    tpl = mi.resolve_template(tables, "biped", "walk")
    with pytest.raises(ValueError):
        mi.generate_dense_trajectory(skel, tpl, 7)


def test_rom_violating_template_rejected():
    skel = biped_rig().skeleton
    tpl = mi.GaitTemplate(
        action="custom", kind="cyclic", antiphase=False, root_advance=0.0,
        root_bob=mi.RootBob(np.zeros(3), 1.0, 0.0), frequency=2.0,
        channels={"any_limb_root": mi.ChannelSpec(
            np.array([0.0, 0.0, 9.9]), np.zeros(3), np.zeros(3))})
    with pytest.raises(ValueError, match="rad"):
        mi.generate_dense_trajectory(skel, tpl, FRAMES)


def test_unmapped_roles_stay_at_rest():
    skel = lamp_rig().skeleton
    tables = mi.load_gait_templates()
    tpl = mi.resolve_template(tables, "biped", "walk")   # limb roles, no limbs
    rot, _ = mi.generate_dense_trajectory(skel, tpl, FRAMES)
    morph = mi.classify_morphology(skel)
    roles = mi.assign_roles(skel, morph)
    for j in range(len(skel)):
        if roles.get(j) not in tpl.channels:
            assert np.allclose(rot[:, j, :], 0.0)


# ---------------------------------------------------------------------------
# contact phases


def test_constant_height_marks_every_frame_as_contact():
    skel = biped_rig().skeleton
    rot = np.zeros((FRAMES, len(skel), 3))
    root = np.tile(skel.rest_positions[0], (FRAMES, 1))
    feet = (skel.index_of("l_foot"), skel.index_of("r_foot"))
    masks = mi.detect_contact_phases(skel, rot, root, feet)
    for mask in masks.values():
        assert mask.all()


def test_moving_feet_get_partial_contact_masks():
    skel = biped_rig().skeleton
    init = mi.prepare_motion(skel, "a person walking", FRAMES)
    for mask in init.contact_masks.values():
        assert 0 < int(mask.sum()) < FRAMES


def test_contact_masks_follow_height_rule():
    skel = biped_rig().skeleton
    tables = mi.load_gait_templates()
    tpl = mi.resolve_template(tables, "biped", "walk")
    rot, root = mi.generate_dense_trajectory(skel, tpl, FRAMES)
    foot = skel.index_of("l_foot")
    masks = mi.detect_contact_phases(skel, rot, root, (foot,), frac=0.30)
    from skelmotion.kinematics import forward_kinematics
    h = forward_kinematics(skel, rot, root).data[:, foot, 1, 3]
    expected = h <= h.min() + 0.30 * (h.max() - h.min()) + 1e-12
    assert np.array_equal(masks[foot], expected)


# ---------------------------------------------------------------------------
# spline projection and full initialization


def test_contact_controls_get_larger_weights():
    skel = biped_rig().skeleton
    init = mi.prepare_motion(skel, "a person walking", FRAMES)
    cfg = RunConfig()
    foot = skel.index_of("l_foot")
    curve = init.joint_curves[foot]
    assert set(np.unique(curve.weights)) <= {1.0, cfg.nurbs.contact_weight}
    assert (curve.weights == cfg.nurbs.contact_weight).any()
    spine_curve = init.joint_curves[skel.index_of("spine_mid")]
    assert np.all(spine_curve.weights == cfg.nurbs.torso_weight)
    # proximal leg joints and arms keep uniform weights
    for name in ("l_hip", "l_knee", "l_elbow"):
        assert np.all(init.joint_curves[skel.index_of(name)].weights == 1.0)


def test_initialized_walk_keeps_hip_antiphase():
    # Half-period lag oracle: 24-frame period means the right hip trails
    # the left by 12 frames; anything else is a phase error >= 1 frame.
    skel = biped_rig().skeleton
    motion = mi.initialize_motion(skel, "a person walking", FRAMES)
    l_hip, r_hip = skel.index_of("l_hip"), skel.index_of("r_hip")
    a = motion.rotations[:, l_hip, 2]
    b = motion.rotations[:, r_hip, 2]
    a, b = a - a.mean(), b - b.mean()
    corr = [float(np.dot(a, np.roll(b, lag))) for lag in range(FRAMES)]
    assert int(np.argmax(corr)) == 12


def test_initialized_offsets_are_all_zero():
    skel = biped_rig().skeleton
    motion = mi.initialize_motion(skel, "a person walking", FRAMES)
    assert np.all(motion.offsets == 0.0)


@pytest.mark.parametrize("rig,prompt", [
    (biped_rig, "a person walking"),
    (biped_rig, "an athlete running"),
    (quadruped_rig, "a wolf trotting"),
    (winged_rig, "a bird soaring"),
])
def test_cyclic_init_loops_with_tiny_cyclic_residual(rig, prompt):
    skel = rig().skeleton
    m = mi.initialize_motion(skel, prompt, FRAMES)
    pose = np.concatenate([m.rotations.reshape(FRAMES, -1), m.root_translation],
                          axis=1)
    gap = np.sum((pose[0] - pose[-1]) ** 2)
    vel_gap = np.sum(((pose[1] - pose[0]) - (pose[-1] - pose[-2])) ** 2)
    assert gap + vel_gap <= 1e-2


def test_idle_init_is_exactly_rest():
    skel = biped_rig().skeleton
    m = mi.initialize_motion(skel, "just standing", FRAMES)
    assert np.all(m.rotations == 0.0)
    assert np.allclose(m.root_translation, skel.rest_positions[0])
    assert np.all(m.offsets == 0.0)


def test_initialize_motion_is_deterministic():
    skel = quadruped_rig().skeleton
    a = mi.initialize_motion(skel, "a dog runs", FRAMES)
    b = mi.initialize_motion(skel, "a dog runs", FRAMES)
    assert np.array_equal(a.rotations, b.rotations)
    assert np.array_equal(a.root_translation, b.root_translation)


@pytest.mark.parametrize("rig", [toy_rig, biped_rig, quadruped_rig, lamp_rig,
                                 winged_rig])
@pytest.mark.parametrize("prompt", ["walking", "running", "jumping", "idle",
                                    "punching", "swimming"])
def test_every_fixture_action_combination_initializes(rig, prompt):
    skel = rig().skeleton
    m = mi.initialize_motion(skel, prompt, FRAMES)
    assert isinstance(m, MotionParams)
    assert m.rotations.shape == (FRAMES, len(skel), 3)
    assert np.isfinite(m.rotations).all()
    assert np.isfinite(m.root_translation).all()
    limits = RomLimits()
    for j, joint in enumerate(skel.joints):
        cap = limits.for_category(joint.category)
        assert np.abs(m.rotations[:, j, :]).max() <= cap + 1e-6


def test_prepare_motion_sampling_matrices_reproduce_motion():
    skel = biped_rig().skeleton
    init = mi.prepare_motion(skel, "a person walking", FRAMES)
    controls = np.stack([c.controls for c in init.joint_curves])
    resampled = np.einsum("jtk,jkd->tjd", init.rot_coeff, controls)
    assert np.allclose(resampled, init.motion.rotations, atol=1e-12)
    assert np.allclose(init.root_coeff @ init.root_curve.controls,
                       init.motion.root_translation, atol=1e-12)

"""Command-line surface.

Subcommands: animate, init-only, simulate, metrics mld, validate-rig.
Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 runtime
error (diverged optimization, critic transport failure).

All load/validate failures map to 2, including a malformed --bridge-addr.
The bridge address may also come from the SKELMOTION_BRIDGE_ADDR
environment variable; the flag wins when both are set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import io, metrics, mosds, wire
from .config import RunConfig
from .motion_init import prepare_motion
from .optimizer import Rig, run_optimization, synthesize_frames

BRIDGE_ADDR_ENV = "SKELMOTION_BRIDGE_ADDR"


def _add_rig_options(p: argparse.ArgumentParser, prompt: bool = False):
    p.add_argument("--rig", required=True,
                   help="rig bundle directory (skeleton.json, mesh.obj, "
                        "weights.json)")
    if prompt:
        p.add_argument("--prompt", required=True,
                       help="action text, e.g. 'a biped walking'")
    p.add_argument("--config", help="run configuration JSON")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--frames", type=int, help="override the frame count")


def _add_export_options(p: argparse.ArgumentParser):
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--export-obj", action="store_true",
                   help="write per-frame deformed OBJ meshes")
    p.add_argument("--export-png", action="store_true",
                   help="write per-frame rendered PNGs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skelmotion",
        description="Skeleton-driven text-to-3D-animation synthesis.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("animate",
                       help="optimize a guided motion for a rig")
    _add_rig_options(p, prompt=True)
    _add_export_options(p)
    p.add_argument("--critic", choices=("mock", "bridge"), default="mock")
    p.add_argument("--bridge-addr", help="host:port of a critic server "
                   f"(or set {BRIDGE_ADDR_ENV})")
    p.add_argument("--iterations", type=int,
                   help="override the iteration count")
    p.add_argument("--resume", help="checkpoint file to resume from")
    p.set_defaults(func=cmd_animate)

    p = sub.add_parser("init-only",
                       help="emit the curve-based prior without optimization")
    _add_rig_options(p, prompt=True)
    _add_export_options(p)
    p.set_defaults(func=cmd_init_only)

    p = sub.add_parser("simulate",
                       help="run skinning + soft-body pass over a motion "
                            "file")
    _add_rig_options(p)
    _add_export_options(p)
    p.add_argument("--motion", required=True, help="motion JSON file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("metrics", help="evaluation metrics")
    metric_sub = p.add_subparsers(dest="metric", required=True)
    m = metric_sub.add_parser("mld", help="mesh Laplacian distortion")
    _add_rig_options(m)
    m.add_argument("--motion", required=True, help="motion JSON file")
    m.add_argument("--report", help="also write the JSON report here")
    m.set_defaults(func=cmd_metrics_mld)

    p = sub.add_parser("validate-rig", help="load and validate a rig bundle")
    p.add_argument("--rig", required=True)
    p.set_defaults(func=cmd_validate_rig)
    return parser


# ---------------------------------------------------------------------------
# shared plumbing


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "frames", None) is not None:
        cfg = RunConfig.from_dict({**cfg.to_dict(), "frames": args.frames})
    if getattr(args, "iterations", None) is not None:
        cfg.optim.iterations = args.iterations
    return cfg


def _load_rig(args, cfg: RunConfig):
    bundle = io.load_rig(args.rig, up_axis=cfg.up_index)
    rig = Rig(skeleton=bundle.skeleton, rest_vertices=bundle.mesh.vertices,
              faces=bundle.mesh.faces, weights=bundle.mesh.weights)
    return rig, bundle


def _make_critic(args, cfg: RunConfig, rig: Rig):
    """None selects the optimizer's built-in init-target mock."""
    if args.critic == "bridge":
        addr = args.bridge_addr or os.environ.get(BRIDGE_ADDR_ENV)
        if not addr:
            raise ValueError("bridge critic needs --bridge-addr or "
                             f"{BRIDGE_ADDR_ENV}")
        return wire.BridgeCritic(addr)
    target_src = cfg.mosds.mock_target
    if target_src == "init":
        return None
    if target_src.endswith(".npz"):
        with np.load(target_src) as data:
            target = np.asarray(data["frames"], dtype=np.float64)
    else:
        motion, _ = io.load_motion(target_src)
        target, _ = synthesize_frames(rig, motion, cfg)
    return mosds.MockCritic(target, kappa=cfg.mosds.kappa)


def _export(args, cfg, rig, motion, frames=None, vertices=None) -> dict:
    need_frames = args.export_png and frames is None
    need_verts = args.export_obj and vertices is None
    if need_frames or need_verts:
        frames, vertices = synthesize_frames(rig, motion, cfg)
    return io.export_animation(args.out, motion, cfg.fps,
                               vertices=vertices, faces=rig.faces,
                               frames=frames, export_obj=args.export_obj,
                               export_png=args.export_png)


# ---------------------------------------------------------------------------
# subcommands


def cmd_animate(args) -> int:
    cfg = _load_config(args)
    rig, _ = _load_rig(args, cfg)
    critic = _make_critic(args, cfg, rig)
    result = run_optimization(rig, args.prompt, cfg, critic=critic,
                              out_dir=args.out, resume_from=args.resume)
    manifest = _export(args, cfg, rig, result.motion,
                       frames=result.frames, vertices=result.vertices)
    if result.aborted:
        print(f"aborted after {result.iterations_run} iterations: "
              f"{result.abort_reason}", file=sys.stderr)
        print(f"last-good motion written to {manifest['motion']}",
              file=sys.stderr)
        return 3
    final_total = result.log[-1]["total"] if result.log else 0.0
    print(f"completed {result.iterations_run} iterations, "
          f"final total loss {final_total:.6g}")
    print(f"motion written to {manifest['motion']}")
    return 0


def cmd_init_only(args) -> int:
    cfg = _load_config(args)
    rig, _ = _load_rig(args, cfg)
    init = prepare_motion(rig.skeleton, args.prompt, cfg.frames, cfg)
    manifest = _export(args, cfg, rig, init.motion)
    print(f"prior for '{init.action}' ({init.morphology.label} gait "
          f"'{init.template.action}') written to {manifest['motion']}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    rig, _ = _load_rig(args, cfg)
    motion, fps = io.load_motion(args.motion)
    if motion.rotations.shape[1] != len(rig.skeleton):
        raise ValueError(f"{args.motion}: motion has "
                         f"{motion.rotations.shape[1]} joints, rig has "
                         f"{len(rig.skeleton)}")
    frames, vertices = synthesize_frames(rig, motion, cfg)
    cfg.fps = fps
    manifest = _export(args, cfg, rig, motion, frames=frames,
                       vertices=vertices)
    print(f"simulated {vertices.shape[0]} frames over "
          f"{vertices.shape[1]} vertices; outputs in {args.out}")
    return 0


def cmd_metrics_mld(args) -> int:
    cfg = _load_config(args)
    rig, _ = _load_rig(args, cfg)
    motion, _ = io.load_motion(args.motion)
    if motion.rotations.shape[1] != len(rig.skeleton):
        raise ValueError(f"{args.motion}: motion has "
                         f"{motion.rotations.shape[1]} joints, rig has "
                         f"{len(rig.skeleton)}")
    _, vertices = synthesize_frames(rig, motion, cfg)
    report = metrics.mld(rig.rest_vertices, vertices, rig.faces)
    doc = {"format_version": io.FORMAT_VERSION, **report.to_dict()}
    text = json.dumps(doc)
    print(text)
    if args.report:
        io.atomic_write_text(args.report, text + "\n")
    return 0


def cmd_validate_rig(args) -> int:
    bundle = io.load_rig(args.rig)
    mesh = bundle.mesh
    print(f"rig OK: {len(bundle.skeleton)} joints, "
          f"{len(mesh.vertices)} vertices, {len(mesh.faces)} faces "
          f"(normalized by {bundle.scale:.6g}, lifted {-bundle.lift:.6g})")
    return 0


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (RuntimeError, ArithmeticError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except (OSError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

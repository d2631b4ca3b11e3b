"""Run configuration: plain dataclasses mirrored one-to-one by the JSON
config file format (format_version 1).

Defaults here are the single source of truth; the introspection tests pin
the externally meaningful ones (frame count, guidance scale, learning
rates, timestep range, curve degree).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

CONFIG_FORMAT_VERSION = "1.0"

UP_AXES = {"x": 0, "y": 1, "z": 2}


@dataclass
class LossWeights:
    vel: float = 1.0            # velocity term inside smoothness
    accel: float = 0.5          # acceleration term inside smoothness
    smooth: float = 1.0
    rom: float = 1.0
    sym: float = 0.5
    cyclic: float = 0.5
    ground: float = 10.0
    contact: float = 1.0
    offset: float = 1.0
    offset_vel: float = 1.0     # temporal-delta term inside the offset loss
    mosds: float = 1.0
    phy: float = 1.0
    env: float = 1.0
    appear: float = 0.1         # appearance split of the critic gradient
    motion: float = 1.0         # motion split of the critic gradient


@dataclass
class RomLimits:
    """Per-category rotation magnitude limits, radians."""

    spine: float = 0.4
    hinge_limb: float = 1.5
    ball_limb: float = 1.2
    foot: float = 0.8
    head: float = 0.6
    tail: float = 2.0
    other: float = 1.0

    def for_category(self, category: str) -> float:
        return getattr(self, category.replace("-", "_"))


@dataclass
class NurbsConfig:
    n_controls: int = 13        # K + 1
    degree: int = 3
    contact_weight: float = 5.0
    torso_weight: float = 2.0


@dataclass
class SpringMassConfig:
    # near-critical damping: a displaced region settles below 1e-6 scene
    # units within 200 substeps, yet still lags enough to read as follow-through
    k_pos: float = 300.0
    k_struct: float = 120.0
    damping: float = 35.0
    gravity: float = 9.8
    dt: float = 1.0 / 240.0
    substeps: int = 5
    vel_max: float = 10.0
    d_max_frac: float = 0.15    # of the dynamic region's bbox diagonal
    mass: float = 1.0
    stretch_clamp: float = 0.30
    region_overrides: dict = field(default_factory=dict)

    def for_region(self, region: str | None) -> "SpringMassConfig":
        if not region or region not in self.region_overrides:
            return self
        merged = dataclasses.asdict(self)
        merged.pop("region_overrides")
        merged.update(self.region_overrides[region])
        return SpringMassConfig(**merged, region_overrides={})


@dataclass
class CameraConfig:
    view: tuple = (0.0, 0.0, -1.0)
    up: tuple = (0.0, 1.0, 0.0)
    center: tuple = (0.0, 0.5, 0.0)
    extent: float = 1.6         # world height covered by the image
    width: int = 64
    height: int = 64
    splat_sigma: float = 1.5
    channels: int = 1


@dataclass
class MoSDSConfig:
    tau_min: float = 0.02
    tau_max: float = 0.50
    cfg_scale: float = 10.0
    eta: float = 1.0            # virtual step length inside the proxy loss
    kappa: float = 1.0          # mock critic pull gain
    mock_target: str = "init"   # "init" or a path to frames (.npz) / motion (.json)


@dataclass
class OptimConfig:
    iterations: int = 600
    mode: str = "control_points"       # or "per_frame"
    lr_rotations: float = 1.5e-2
    lr_root: float = 2.0e-2
    lr_offsets: float = 5.0e-3
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float = 10.0
    checkpoint_every: int = 0          # 0 disables periodic checkpoints


def default_schedules() -> dict:
    """Piecewise-linear weight ramps, keyed by loss term.

    Breakpoints are (run fraction, multiplier); values clamp outside the
    listed range.  Guidance fades in over the first tenth, foot contact
    joins once gross motion has settled.
    """
    return {
        "mosds": [[0.0, 0.0], [0.1, 1.0]],
        "contact": [[0.2, 0.0], [0.3, 1.0]],
    }


def schedule_multiplier(points, fraction: float) -> float:
    if not points:
        return 1.0
    pts = sorted((float(f), float(m)) for f, m in points)
    if fraction <= pts[0][0]:
        return pts[0][1]
    for (f0, m0), (f1, m1) in zip(pts, pts[1:]):
        if fraction <= f1:
            if f1 == f0:
                return m1
            return m0 + (m1 - m0) * (fraction - f0) / (f1 - f0)
    return pts[-1][1]


@dataclass
class RunConfig:
    frames: int = 48
    fps: int = 24
    seed: int = 0
    up_axis: str = "y"
    contact_height_frac: float = 0.025   # of character height
    foot_height_frac: float = 0.10       # rest-height decile for foot joints
    contact_phase_frac: float = 0.30     # lowest fraction of foot-height range
    weights: LossWeights = field(default_factory=LossWeights)
    rom: RomLimits = field(default_factory=RomLimits)
    nurbs: NurbsConfig = field(default_factory=NurbsConfig)
    springmass: SpringMassConfig = field(default_factory=SpringMassConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    mosds: MoSDSConfig = field(default_factory=MoSDSConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    schedules: dict = field(default_factory=default_schedules)
    gait_templates: str | None = None    # None: packaged defaults
    action_lexicon: str | None = None

    def __post_init__(self):
        if self.up_axis not in UP_AXES:
            raise ValueError(f"up_axis must be one of {sorted(UP_AXES)}")
        if self.frames < 8:
            raise ValueError("need at least 8 frames")
        if self.optim.mode not in ("control_points", "per_frame"):
            raise ValueError(f"unknown optimization mode '{self.optim.mode}'")

    @property
    def up_index(self) -> int:
        return UP_AXES[self.up_axis]

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["format_version"] = CONFIG_FORMAT_VERSION
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        raw = dict(raw)
        version = str(raw.pop("format_version", CONFIG_FORMAT_VERSION))
        if version.split(".")[0] != CONFIG_FORMAT_VERSION.split(".")[0]:
            raise ValueError(f"unsupported config format_version {version}")
        nested = {
            "weights": LossWeights, "rom": RomLimits, "nurbs": NurbsConfig,
            "springmass": SpringMassConfig, "camera": CameraConfig,
            "mosds": MoSDSConfig, "optim": OptimConfig,
        }
        kwargs = {}
        for key, value in raw.items():
            if key in nested and isinstance(value, dict):
                kwargs[key] = nested[key](**value)
            else:
                kwargs[key] = value
        for tup_key in ("view", "up", "center"):
            cam = kwargs.get("camera")
            if cam is not None and isinstance(getattr(cam, tup_key), list):
                setattr(cam, tup_key, tuple(getattr(cam, tup_key)))
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

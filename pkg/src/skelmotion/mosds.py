"""Critic-guided motion gradients.

The critic contract is request/response over arrays: the engine sends
rendered frames, a prompt, a sampled timestep fraction, and a noise seed;
the critic answers with unconditional, text-conditioned, and injected
noise arrays plus a schedule weight.  Everything downstream is plain
array math here: classifier-free combination, the temporal mean /
deviation split, and a proxy mean-squared loss whose tape gradient equals
the assembled guidance direction up to the documented 2/N factor.

Exactness notes: when both split weights are equal, the combined gradient
is computed directly from the residual, so plain score distillation is
recovered bitwise.  The split itself reconstructs the residual to the
last unit in the last place; elements where the residual is exactly zero
stay exactly zero through every path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad

TAU_MIN = 0.02
TAU_MAX = 0.50


@dataclass
class CriticRequest:
    frames: np.ndarray          # (T, C, H, W) in [-1, 1]
    prompt: str
    tau: float
    cfg_scale: float = 10.0
    seed: int = 0

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 4:
            raise ValueError("frames must be (frames, channels, height, width)")
        if not (TAU_MIN <= self.tau <= TAU_MAX):
            raise ValueError(
                f"timestep fraction {self.tau} outside [{TAU_MIN}, {TAU_MAX}]")
        lo, hi = float(self.frames.min(initial=0.0)), float(
            self.frames.max(initial=0.0))
        if lo < -1.0 or hi > 1.0:
            raise ValueError(f"frame values [{lo}, {hi}] escape [-1, 1]")


@dataclass
class CriticResponse:
    eps_uncond: np.ndarray
    eps_text: np.ndarray
    eps_injected: np.ndarray
    latent_shape: tuple
    schedule_weight: float

    def __post_init__(self):
        self.eps_uncond = np.asarray(self.eps_uncond, dtype=np.float64)
        self.eps_text = np.asarray(self.eps_text, dtype=np.float64)
        self.eps_injected = np.asarray(self.eps_injected, dtype=np.float64)
        if not (self.eps_uncond.shape == self.eps_text.shape
                == self.eps_injected.shape):
            raise ValueError("critic noise arrays disagree in shape")
        for name in ("eps_uncond", "eps_text", "eps_injected"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"critic returned non-finite {name}")
        self.latent_shape = tuple(self.latent_shape)


@dataclass
class MoSDSGradient:
    appearance: np.ndarray      # temporal-mean component, broadcast over frames
    motion: np.ndarray          # zero-temporal-mean deviation component
    combined: np.ndarray        # assembled guidance direction on the latents
    tau: float
    diagnostics: dict = field(default_factory=dict)


def sample_timestep(rng: np.random.Generator, lo: float = TAU_MIN,
                    hi: float = TAU_MAX) -> float:
    """Uniform timestep fraction in [lo, hi], deterministic per rng state."""
    return float(rng.uniform(lo, hi))


def cfg_combine(resp: CriticResponse, scale: float) -> np.ndarray:
    """Classifier-free extrapolation from unconditional toward text."""
    if resp.eps_uncond.shape != resp.eps_text.shape:
        raise ValueError("noise prediction shapes disagree")
    return resp.eps_uncond + scale * (resp.eps_text - resp.eps_uncond)


def decompose(delta: np.ndarray):
    """Split a residual into its temporal mean and the per-frame deviation.

    Returns (appearance, motion), both shaped like delta; appearance
    repeats the frame-axis mean, motion is the remainder.
    """
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape[0] < 2:
        raise ValueError("decomposition needs at least 2 frames")
    appearance = np.broadcast_to(delta.mean(axis=0, keepdims=True),
                                 delta.shape).copy()
    motion = delta - appearance
    return appearance, motion


def mosds_gradient(resp: CriticResponse, cfg_scale: float,
                   lambda_appear: float, lambda_motion: float,
                   tau: float = float("nan")) -> MoSDSGradient:
    """Assemble the guidance direction from a critic response.

    combined = schedule_weight * (lambda_appear * appearance
                                  + lambda_motion * motion); equal lambdas
    take the algebraically identical direct route through the residual so
    plain score distillation is recovered bitwise.
    """
    delta = cfg_combine(resp, cfg_scale) - resp.eps_injected
    appearance, motion = decompose(delta)
    if lambda_appear == lambda_motion:
        combined = resp.schedule_weight * (lambda_motion * delta)
    else:
        combined = resp.schedule_weight * (lambda_appear * appearance
                                           + lambda_motion * motion)
    diagnostics = {
        "delta_norm": float(np.linalg.norm(delta)),
        "appearance_norm": float(np.linalg.norm(appearance)),
        "motion_norm": float(np.linalg.norm(motion)),
        "schedule_weight": resp.schedule_weight,
    }
    return MoSDSGradient(appearance=appearance, motion=motion,
                         combined=combined, tau=tau, diagnostics=diagnostics)


def proxy_loss(z: ad.Tensor, grad: MoSDSGradient, eta: float) -> ad.Tensor:
    """MSE against a detached gradient-shifted copy of z.

    The target is constant, so backward() yields (2/N) * eta * combined,
    which is how an externally computed direction enters the tape.
    """
    z = ad._as_tensor(z)
    target = z.data - eta * grad.combined
    diff = ad.sub(z, target)
    return ad.tmean(ad.mul(diff, diff))


def mock_critic(req: CriticRequest, target: np.ndarray,
                kappa: float = 1.0) -> CriticResponse:
    """Deterministic stand-in critic that pulls frames toward a target.

    Treats frames as latents directly (identity encoder).  The injected
    noise is seeded Gaussian; the text branch shifts it by
    kappa * (frames - target) so guidance points at the target; the
    schedule weight is 1 - tau.  Pixels already matching the target
    produce an exactly zero residual.
    """
    target = np.asarray(target, dtype=np.float64)
    if target.shape != req.frames.shape:
        raise ValueError(
            f"target shape {target.shape} != frames shape {req.frames.shape}")
    rng = np.random.default_rng(req.seed)
    eps = rng.standard_normal(req.frames.shape)
    eps_text = eps + kappa * (req.frames - target)
    return CriticResponse(eps_uncond=eps, eps_text=eps_text, eps_injected=eps,
                          latent_shape=req.frames.shape,
                          schedule_weight=1.0 - req.tau)


class MockCritic:
    """Callable critic bound to a fixed target frame stack."""

    def __init__(self, target: np.ndarray, kappa: float = 1.0):
        self.target = np.asarray(target, dtype=np.float64)
        self.kappa = kappa

    def __call__(self, req: CriticRequest) -> CriticResponse:
        return mock_critic(req, self.target, self.kappa)

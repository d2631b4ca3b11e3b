"""Noise-prediction backends behind the wire protocol.

A backend is a callable taking (frames, tau, prompt, cfg_scale, seed) and
returning a BackendResult.  The echo backend answers without any model and
exists so protocol conformance can be tested end to end; the real-model
loader requires a locally available diffusion runtime and weights.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np


@dataclass
class BackendResult:
    eps_uncond: np.ndarray
    eps_text: np.ndarray
    eps_injected: np.ndarray
    schedule_weight: float


class BackendUnavailable(RuntimeError):
    """The requested backend cannot be constructed on this machine."""


class EchoBackend:
    """Model-free stand-in: zero noise predictions at the frame shape.

    With no encoder in the loop the latent space is the frame space
    itself, so all three noise arrays are zeros shaped like the request
    frames.  The schedule weight follows the same fade the real sampler
    uses, one minus the timestep fraction.
    """

    def __call__(self, frames: np.ndarray, tau: float, prompt: str,
                 cfg_scale: float, seed: int) -> BackendResult:
        zeros = np.zeros(frames.shape, dtype=np.float32)
        return BackendResult(eps_uncond=zeros, eps_text=zeros,
                             eps_injected=zeros,
                             schedule_weight=1.0 - float(tau))


def load_model_backend(model: str):
    """Construct a real text-to-video backend from a local model path.

    Serving a real model needs the diffusion runtime importable and the
    weights already on disk; neither ships with this package.
    """
    if not os.path.exists(model):
        raise BackendUnavailable(
            f"model weights not found locally at {model!r}; "
            "download them first or run with --echo")
    try:
        import torch  # noqa: F401
        import diffusers  # noqa: F401
    except ImportError as exc:
        raise BackendUnavailable(
            f"real-model serving needs the diffusion runtime ({exc}); "
            "install it or run with --echo") from exc
    raise BackendUnavailable(
        "real-model serving is not wired up in this build; run with --echo")

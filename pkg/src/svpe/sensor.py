"""Programmable-sensor capture: per-pixel integration, noise, response."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import DimensionError
from .patterns import ExposureMap

READ_NOISE_RANGE = (1e-3, 3e-2)
SHOT_NOISE_RANGE = (1e-4, 1e-2)


@dataclass(frozen=True)
class FrameStack:
    """``T`` consecutive linear-intensity frames, shape (T, H, W)."""

    frames: np.ndarray
    frame_rate: float = 240.0

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=np.float64)
        if f.ndim != 3 or f.shape[0] < 1:
            raise DimensionError(f"frame stack must be (T, H, W), got {f.shape}")
        if not np.all(np.isfinite(f)) or f.min() < 0.0 or f.max() > 1.0:
            raise ValueError("frame intensities must be finite and in [0, 1]")
        object.__setattr__(self, "frames", f)

    @property
    def T(self) -> int:
        return self.frames.shape[0]

    @property
    def shape(self):
        return self.frames.shape[1:]


@dataclass(frozen=True)
class NoiseParams:
    sigma_r: float = 0.0
    sigma_s: float = 0.0

    def __post_init__(self):
        if self.sigma_r < 0 or self.sigma_s < 0:
            raise ValueError("noise gains must be non-negative")


NOISELESS = NoiseParams(0.0, 0.0)


@dataclass(frozen=True)
class RawCapture:
    image: np.ndarray
    gains: NoiseParams
    emap: ExposureMap
    seed: int | None = None
    bit_depth: int = 0
    extra: dict = field(default_factory=dict, compare=False)


def _frames_array(frames) -> np.ndarray:
    if isinstance(frames, FrameStack):
        return frames.frames
    return np.asarray(frames, dtype=np.float64)


def integrate(frames, emap: ExposureMap) -> np.ndarray:
    """Noiseless exposure: sum of the first ``emap[p]`` frames, divided by T."""
    f = _frames_array(frames)
    T = emap.max_exposure
    if f.ndim != 3 or f.shape[0] != T:
        raise DimensionError(f"need {T} frames for max exposure {T}, got stack of shape {f.shape}")
    if f.shape[1:] != emap.shape:
        raise DimensionError(f"frame size {f.shape[1:]} does not match exposure map {emap.shape}")
    csum = np.cumsum(f, axis=0)
    idx = (emap.values - 1)[None]
    return np.take_along_axis(csum, idx, axis=0)[0] / T


def noise_std(x, params: NoiseParams):
    return np.sqrt(params.sigma_r**2 + params.sigma_s * np.asarray(x))


def add_noise(image, params: NoiseParams, seed) -> np.ndarray:
    """Heteroscedastic Gaussian: variance ``sigma_r**2 + sigma_s * x``."""
    x = np.asarray(image, dtype=np.float64)
    if np.any(x < 0):
        raise ValueError("noise model needs non-negative intensities")
    if params.sigma_r == 0 and params.sigma_s == 0:
        return x.copy()
    z = np.random.default_rng(seed).standard_normal(x.shape)
    return x + noise_std(x, params) * z


def apply_response(image, bit_depth: int = 0) -> np.ndarray:
    """Clip to [0, 1]; quantize to ``2**bit_depth`` levels when bit_depth > 0."""
    y = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    if bit_depth > 0:
        levels = 2**bit_depth - 1
        y = np.floor(y * levels + 0.5) / levels
    return y


def sample_gains(seed) -> NoiseParams:
    rng = np.random.default_rng(seed)
    return NoiseParams(
        sigma_r=float(rng.uniform(*READ_NOISE_RANGE)),
        sigma_s=float(rng.uniform(*SHOT_NOISE_RANGE)),
    )


def capture(frames, emap: ExposureMap, seed, bit_depth: int = 0, gains: NoiseParams | None = None) -> RawCapture:
    """Full simulated readout. ``gains`` overrides the seeded gain draw."""
    params = sample_gains(seed) if gains is None else gains
    exposure = integrate(frames, emap)
    image = apply_response(add_noise(exposure, params, seed), bit_depth)
    return RawCapture(image=image, gains=params, emap=emap, seed=seed, bit_depth=bit_depth)


def burst_average(frames) -> np.ndarray:
    """Per-pixel mean of every frame; the no-decoder baseline."""
    return _frames_array(frames).mean(axis=0)


# --- differentiable path used during training ---------------------------------

class _IntegrateSurrogate(torch.autograd.Function):
    """Sum of the first q frames / T with a marginal-frame gradient in q.

    d/dq is the next frame to be added (forward difference) and, at q == T,
    the last frame included (backward difference).
    """

    @staticmethod
    def forward(ctx, frames, q):
        T = frames.shape[-3]
        qi = q.detach().long().clamp(1, T)
        idx = (qi - 1).expand(*frames.shape[:-3], 1, *qi.shape[-2:])
        csum = torch.cumsum(frames, dim=-3)
        out = torch.gather(csum, -3, idx).squeeze(-3) / T
        marg_idx = torch.where(qi < T, qi, qi - 1).expand_as(idx)
        marginal = torch.gather(frames, -3, marg_idx).squeeze(-3) / T
        ctx.save_for_backward(marginal, idx)
        ctx.frames_shape = frames.shape
        ctx.q_shape = q.shape
        return out

    @staticmethod
    def backward(ctx, grad):
        marginal, idx = ctx.saved_tensors
        grad_frames = None
        if ctx.needs_input_grad[0]:
            T = ctx.frames_shape[-3]
            pos = torch.arange(T, device=grad.device).view(T, 1, 1)
            mask = (pos <= idx).to(grad.dtype)
            grad_frames = grad.unsqueeze(-3) * mask / T
        grad_q = None
        if ctx.needs_input_grad[1]:
            g = grad * marginal
            while g.dim() > len(ctx.q_shape):
                g = g.sum(0)
            grad_q = g
        return grad_frames, grad_q


def integrate_torch(frames: torch.Tensor, q: torch.Tensor) -> torch.Tensor:
    """Differentiable :func:`integrate`. ``frames`` is (..., T, H, W), ``q`` is (H, W)."""
    return _IntegrateSurrogate.apply(frames, q)


def add_noise_torch(x: torch.Tensor, sigma_r, sigma_s, z: torch.Tensor) -> torch.Tensor:
    """Reparameterised noise so gradients flow through the signal level."""
    var = sigma_r**2 + sigma_s * x.clamp_min(0)
    return x + torch.sqrt(var.clamp_min(1e-20)) * z

"""Spatially varying pixel exposure: coded capture simulation, interpolation and learned decoding."""
__version__ = "0.1.0"

from .errors import (ClassAbsentError, DimensionError, DivergenceError, NumericError, PatternError,
                     PatternFormatError, SVPEError)
from .patterns import ExposureMap, LearnedExposure, PatternKind, generate, load_pattern, serialize_pattern
from .sensor import FrameStack, NoiseParams, RawCapture, capture, integrate
from .interp import ChannelStack, InterpPlan, make_plan, rescale_channels
from .metrics import psnr, ssim

__all__ = [
    "__version__", "SVPEError", "DimensionError", "PatternError", "PatternFormatError", "ClassAbsentError",
    "NumericError", "DivergenceError", "ExposureMap", "LearnedExposure", "PatternKind", "generate",
    "load_pattern", "serialize_pattern", "FrameStack", "NoiseParams", "RawCapture", "capture", "integrate",
    "ChannelStack", "InterpPlan", "make_plan", "rescale_channels", "psnr", "ssim",
]

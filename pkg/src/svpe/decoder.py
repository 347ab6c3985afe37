"""U-Net decoder as pure functions over a keyed parameter dict."""
from __future__ import annotations

import math
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .errors import DimensionError

MAX_WIDTH = 512
MAGIC = b"SVPEUNET"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class DecoderConfig:
    in_channels: int
    depth: int = 3
    base_channels: int = 32
    use_norm: bool = False

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("decoder depth must be >= 1")
        if self.base_channels < 1 or self.in_channels < 1:
            raise ValueError("channel counts must be positive")

    def widths(self):
        return [min(self.base_channels * 2**s, MAX_WIDTH) for s in range(self.depth)]


def param_shapes(config: DecoderConfig) -> dict[str, tuple]:
    w = config.widths()
    shapes = {}
    c = config.in_channels
    for s in range(config.depth):
        shapes[f"down{s}.conv.weight"] = (w[s], c, 3, 3)
        shapes[f"down{s}.conv.bias"] = (w[s],)
        c = w[s]
    for s in reversed(range(config.depth)):
        # ConvTranspose2d weights are (in, out, kh, kw)
        shapes[f"up{s}.tconv.weight"] = (c, w[s], 4, 4)
        shapes[f"up{s}.tconv.bias"] = (w[s],)
        shapes[f"up{s}.conv1.weight"] = (w[s], 2 * w[s], 3, 3)
        shapes[f"up{s}.conv1.bias"] = (w[s],)
        shapes[f"up{s}.conv2.weight"] = (w[s], w[s], 3, 3)
        shapes[f"up{s}.conv2.bias"] = (w[s],)
        c = w[s]
    shapes["final.weight"] = (1, w[0], 1, 1)
    shapes["final.bias"] = (1,)
    return shapes


def param_count(config: DecoderConfig) -> int:
    return sum(math.prod(s) for s in param_shapes(config).values())


def fan_in(key: str, shape) -> int:
    if ".tconv." in key:
        # each output pixel of a stride-2 transposed conv sees in * (k/2)^2 inputs
        return shape[0] * (shape[2] // 2) * (shape[3] // 2)
    return shape[1] * shape[2] * shape[3]


def init_params(config: DecoderConfig, seed: int, dtype=torch.float32) -> dict[str, torch.Tensor]:
    """He-normal kernels (std = sqrt(2 / fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for key, shape in param_shapes(config).items():
        if key.endswith(".bias"):
            arr = np.zeros(shape)
        else:
            arr = rng.standard_normal(shape) * math.sqrt(2.0 / fan_in(key, shape))
        params[key] = torch.tensor(arr, dtype=dtype, requires_grad=True)
    return params


def _norm(x, config):
    return F.batch_norm(x, None, None, training=True) if config.use_norm else x


def forward(params, x: torch.Tensor, config: DecoderConfig, skips: bool = True) -> torch.Tensor:
    """(B, C, H, W) -> (B, 1, H, W). ``skips=False`` zeroes the skip paths."""
    if x.dim() == 3:
        x = x.unsqueeze(0)
    H, W = x.shape[-2:]
    m = 2**config.depth
    if H % m or W % m:
        raise DimensionError(f"input {H}x{W} is not divisible by 2**depth = {m}")
    if x.shape[1] != config.in_channels:
        raise DimensionError(f"expected {config.in_channels} channels, got {x.shape[1]}")
    saved = []
    for s in range(config.depth):
        x = F.relu(_norm(F.conv2d(x, params[f"down{s}.conv.weight"], params[f"down{s}.conv.bias"], padding=1), config))
        saved.append(x)
        x = F.max_pool2d(x, 2)
    for s in reversed(range(config.depth)):
        x = F.conv_transpose2d(x, params[f"up{s}.tconv.weight"], params[f"up{s}.tconv.bias"], stride=2, padding=1)
        skip = saved[s] if skips else torch.zeros_like(saved[s])
        x = torch.cat([skip, x], dim=1)
        x = F.relu(_norm(F.conv2d(x, params[f"up{s}.conv1.weight"], params[f"up{s}.conv1.bias"], padding=1), config))
        x = F.relu(_norm(F.conv2d(x, params[f"up{s}.conv2.weight"], params[f"up{s}.conv2.bias"], padding=1), config))
    return F.conv2d(x, params["final.weight"], params["final.bias"])


# --- serialization --------------------------------------------------------------

def save_params(params, config: DecoderConfig, path) -> None:
    """Binary checkpoint plus a ``<name>.manifest.txt`` listing keys and shapes."""
    path = Path(path)
    keys = sorted(params)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIIII", FORMAT_VERSION, config.in_channels, config.depth,
                             config.base_channels, int(config.use_norm)))
        fh.write(struct.pack("<I", len(keys)))
        for k in keys:
            fh.write(params[k].detach().cpu().numpy().astype("<f4").tobytes())
    lines = [f"{k} {'x'.join(str(d) for d in params[k].shape)}" for k in keys]
    Path(str(path) + ".manifest.txt").write_text("\n".join(lines) + "\n")


def load_params(path, dtype=torch.float32):
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not a decoder checkpoint")
    version, cin, depth, base, norm = struct.unpack_from("<IIIII", data, 8)
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    (nkeys,) = struct.unpack_from("<I", data, 28)
    config = DecoderConfig(in_channels=cin, depth=depth, base_channels=base, use_norm=bool(norm))
    shapes = param_shapes(config)
    if nkeys != len(shapes):
        raise ValueError(f"{path}: expected {len(shapes)} tensors, header says {nkeys}")
    off = 32
    params = {}
    for k in sorted(shapes):
        n = math.prod(shapes[k])
        arr = np.frombuffer(data, dtype="<f4", count=n, offset=off).reshape(shapes[k])
        off += 4 * n
        params[k] = torch.tensor(arr.astype(np.float32), dtype=dtype, requires_grad=True)
    if off != len(data):
        raise ValueError(f"{path}: trailing bytes after tensors")
    return params, config


def config_dict(config: DecoderConfig) -> dict:
    return asdict(config)

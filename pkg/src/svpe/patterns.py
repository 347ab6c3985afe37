"""Spatially varying exposure maps.

Fixed baselines (global, tiled, random) plus a trainable exposure whose
integer view comes from a straight-through quantizer.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from ._accel import njit, resolve_backend
from .errors import DimensionError, NumericError, PatternFormatError

DEFAULT_T = 8


class PatternKind(str, enum.Enum):
    QUAD = "quad"
    NONAD = "nonad"
    UNIFORM = "uniform"
    POISSON = "poisson"
    SHORT = "short"
    MEDIUM = "medium"
    LONG = "long"
    LEARNED = "learned"


@dataclass(frozen=True, eq=False)
class ExposureMap:
    """Integer exposure length per pixel, each in ``[1, max_exposure]``."""

    values: np.ndarray
    max_exposure: int = DEFAULT_T

    def __post_init__(self):
        v = np.array(self.values, dtype=np.int64, copy=True)
        if v.ndim != 2 or v.size == 0:
            raise DimensionError(f"exposure map must be a non-empty 2-D grid, got shape {v.shape}")
        if self.max_exposure < 1:
            raise ValueError("max_exposure must be >= 1")
        if v.min() < 1 or v.max() > self.max_exposure:
            raise PatternFormatError(
                f"exposure lengths must lie in [1, {self.max_exposure}], "
                f"got range [{v.min()}, {v.max()}]"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    @property
    def lengths(self) -> np.ndarray:
        return np.unique(self.values)

    @property
    def channels(self) -> int:
        return len(self.lengths)

    def counts(self) -> dict[int, int]:
        lengths, counts = np.unique(self.values, return_counts=True)
        return {int(k): int(c) for k, c in zip(lengths, counts)}

    def __eq__(self, other):
        if not isinstance(other, ExposureMap):
            return NotImplemented
        return self.max_exposure == other.max_exposure and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.max_exposure, self.values.shape, self.values.tobytes()))


def unique_lengths(emap: ExposureMap) -> np.ndarray:
    return emap.lengths


def _check_positive(height, width):
    if height < 1 or width < 1:
        raise DimensionError(f"dimensions must be positive, got {height}x{width}")


def _tile(tile, height, width):
    th, tw = tile.shape
    return np.tile(tile, (height // th, width // tw))


def quad_tile(T: int = DEFAULT_T) -> np.ndarray:
    """Long-medium-medium-short 2x2 tile."""
    if T < 2:
        raise ValueError("Quad needs T >= 2")
    return np.array([[T, T // 2], [T // 2, 1]], dtype=np.int64)


def gen_quad(height: int, width: int, T: int = DEFAULT_T) -> ExposureMap:
    _check_positive(height, width)
    if height % 2 or width % 2:
        raise DimensionError(f"Quad needs even dimensions, got {height}x{width}")
    return ExposureMap(_tile(quad_tile(T), height, width), T)


def nonad_tile(seed: int, T: int = DEFAULT_T) -> np.ndarray:
    if T > 8:
        raise ValueError("a 3x3 tile holds at most 8 distinct lengths plus one repeat")
    base = [(i % T) + 1 for i in range(8)] + [1]
    rng = np.random.default_rng(seed)
    return rng.permutation(np.array(base, dtype=np.int64)).reshape(3, 3)


def gen_nonad(height: int, width: int, seed: int, T: int = DEFAULT_T) -> ExposureMap:
    _check_positive(height, width)
    if height % 3 or width % 3:
        raise DimensionError(f"Nonad needs dimensions divisible by 3, got {height}x{width}")
    return ExposureMap(_tile(nonad_tile(seed, T), height, width), T)


def gen_uniform_random(height: int, width: int, seed: int, T: int = DEFAULT_T) -> ExposureMap:
    _check_positive(height, width)
    rng = np.random.default_rng(seed)
    return ExposureMap(rng.integers(1, T + 1, size=(height, width)), T)


def gen_global(height: int, width: int, length: int, T: int = DEFAULT_T) -> ExposureMap:
    _check_positive(height, width)
    return ExposureMap(np.full((height, width), length, dtype=np.int64), T)


def global_length(kind: PatternKind | str, T: int = DEFAULT_T) -> int:
    kind = PatternKind(kind)
    return {PatternKind.SHORT: 1, PatternKind.MEDIUM: max(1, T // 2), PatternKind.LONG: T}[kind]


def _dart_throw(height, width, T, r2_schedule, order, prio):
    # 0 marks an unfilled pixel; counts[c] holds samples of length c
    out = np.zeros((height, width), dtype=np.int64)
    counts = np.zeros(T + 1, dtype=np.int64)
    tried = np.zeros(T + 1, dtype=np.bool_)
    unfilled = 0
    for p in range(r2_schedule.shape[0]):
        r2 = r2_schedule[p]
        reach = int(np.ceil(np.sqrt(r2)))
        unfilled = 0
        for n in range(order.shape[0]):
            idx = order[n]
            i = idx // width
            j = idx % width
            if out[i, j] != 0:
                continue
            for c in range(1, T + 1):
                tried[c] = False
            placed = False
            for _ in range(T):
                # least-filled untried class first, random priority breaks ties
                best = -1
                for c in range(1, T + 1):
                    if tried[c]:
                        continue
                    if best < 0 or counts[c] < counts[best] or (
                        counts[c] == counts[best] and prio[idx, c - 1] < prio[idx, best - 1]
                    ):
                        best = c
                tried[best] = True
                ok = True
                for di in range(-reach, reach + 1):
                    ii = i + di
                    if ii < 0 or ii >= height:
                        continue
                    for dj in range(-reach, reach + 1):
                        jj = j + dj
                        if jj < 0 or jj >= width:
                            continue
                        if di * di + dj * dj < r2 and out[ii, jj] == best:
                            ok = False
                            break
                    if not ok:
                        break
                if ok:
                    out[i, j] = best
                    counts[best] += 1
                    placed = True
                    break
            if not placed:
                unfilled += 1
    # balanced fill of whatever the radius constraint rejected
    for n in range(order.shape[0]):
        idx = order[n]
        i = idx // width
        j = idx % width
        if out[i, j] != 0:
            continue
        best = 1
        for c in range(2, T + 1):
            if counts[c] < counts[best] or (
                counts[c] == counts[best] and prio[idx, c - 1] < prio[idx, best - 1]
            ):
                best = c
        out[i, j] = best
        counts[best] += 1
    return out, unfilled


def radius_schedule(T, min_radius=2.0):
    """Squared radii for successive dart-throwing passes.

    Starts at ``sqrt(T)`` and relaxes through every lattice distance down to
    ``min_radius``; a single pass at ``sqrt(T)`` jams with ~40% of pixels empty.
    """
    r2_max = float(T)
    r2_min = min(float(min_radius) ** 2, r2_max)
    lattice = sorted({a * a + b * b for a in range(0, T + 1) for b in range(0, T + 1)})
    steps = [float(d) for d in lattice if r2_min < d < r2_max]
    return np.array([r2_max] + steps[::-1] + ([r2_min] if r2_min < r2_max else []), dtype=np.float64)


_dart_throw_nb = njit(cache=True)(_dart_throw)


def poisson_fill(height, width, seed, T=DEFAULT_T, min_radius=2.0, backend=None):
    """Multi-class dart throwing on the pixel grid.

    Returns the filled grid and the number of pixels the distance constraint
    left empty before the balanced fill.
    """
    _check_positive(height, width)
    rng = np.random.default_rng(seed)
    order = rng.permutation(height * width).astype(np.int64)
    prio = rng.random((height * width, T))
    kernel = _dart_throw_nb if resolve_backend(backend) == "numba" else _dart_throw
    out, unfilled = kernel(height, width, T, radius_schedule(T, min_radius), order, prio)
    return out, int(unfilled)


def gen_poisson_random(height: int, width: int, seed: int, T: int = DEFAULT_T, backend=None) -> ExposureMap:
    if height < 3 or width < 3:
        raise DimensionError(f"Poisson pattern needs dimensions >= 3, got {height}x{width}")
    values, _ = poisson_fill(height, width, seed, T, backend=backend)
    return ExposureMap(values, T)


def generate(kind, height, width, seed=0, T=DEFAULT_T) -> ExposureMap:
    """Build any fixed pattern by kind; ``learned`` starts from Quad."""
    kind = PatternKind(kind)
    if kind in (PatternKind.QUAD, PatternKind.LEARNED):
        return gen_quad(height, width, T)
    if kind is PatternKind.NONAD:
        return gen_nonad(height, width, seed, T)
    if kind is PatternKind.UNIFORM:
        return gen_uniform_random(height, width, seed, T)
    if kind is PatternKind.POISSON:
        return gen_poisson_random(height, width, seed, T)
    return gen_global(height, width, global_length(kind, T), T)


# --- straight-through quantization -------------------------------------------

def round_half_away(x):
    """Round to nearest integer, halves away from zero (numpy or torch)."""
    if isinstance(x, torch.Tensor):
        return torch.sign(x) * torch.floor(torch.abs(x) + 0.5)
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize(theta, T: int = DEFAULT_T) -> ExposureMap:
    """Forward half of the quantizer: round, then clamp into ``[1, T]``."""
    theta = np.asarray(theta, dtype=np.float64)
    if not np.all(np.isfinite(theta)):
        raise NumericError("exposure parameters contain NaN or inf")
    q = np.clip(round_half_away(theta), 1, T)
    return ExposureMap(q.astype(np.int64), T)


class _STEQuantize(torch.autograd.Function):
    @staticmethod
    def forward(ctx, theta, T):
        return torch.clamp(round_half_away(theta), 1, T)

    @staticmethod
    def backward(ctx, grad):
        # identity everywhere, clamped entries included
        return grad, None


def quantize_ste(theta: torch.Tensor, T: int = DEFAULT_T) -> torch.Tensor:
    """Quantized exposure lengths as a float tensor with identity gradient."""
    if torch.isnan(theta).any() or torch.isinf(theta).any():
        raise NumericError("exposure parameters contain NaN or inf")
    return _STEQuantize.apply(theta, T)


class LearnedExposure(torch.nn.Module):
    """Trainable continuous exposure lengths."""

    def __init__(self, init: ExposureMap | np.ndarray, T: int | None = None):
        super().__init__()
        if isinstance(init, ExposureMap):
            T = init.max_exposure if T is None else T
            init = init.values
        self.T = DEFAULT_T if T is None else int(T)
        self.theta = torch.nn.Parameter(torch.as_tensor(np.asarray(init, dtype=np.float64)).float())

    def forward(self) -> torch.Tensor:
        return quantize_ste(self.theta, self.T)

    def exposure_map(self) -> ExposureMap:
        return quantize(self.theta.detach().cpu().double().numpy(), self.T)


# --- pattern files ------------------------------------------------------------

def serialize_pattern(emap: ExposureMap, path) -> None:
    """Write as 8-bit single-channel PNG, or as a text grid for ``.txt``."""
    path = Path(path)
    if path.suffix.lower() == ".txt":
        lines = [" ".join(str(int(v)) for v in row) for row in emap.values]
        path.write_text("\n".join(lines) + "\n")
        return
    if emap.max_exposure > 255:
        raise PatternFormatError("8-bit pattern files hold lengths up to 255")
    Image.fromarray(emap.values.astype(np.uint8), mode="L").save(path, format="PNG")


def load_pattern(path, T: int = DEFAULT_T) -> ExposureMap:
    path = Path(path)
    if path.suffix.lower() == ".txt":
        try:
            rows = [[int(t) for t in line.split()] for line in path.read_text().splitlines() if line.strip()]
            values = np.array(rows, dtype=np.int64)
        except ValueError as exc:
            raise PatternFormatError(f"{path}: malformed text grid") from exc
    else:
        with Image.open(path) as img:
            if img.mode not in ("L", "P", "I", "I;16"):
                raise PatternFormatError(f"{path}: expected single-channel image, got mode {img.mode}")
            values = np.asarray(img, dtype=np.int64)
    if values.ndim != 2:
        raise PatternFormatError(f"{path}: expected a 2-D grid")
    if values.min() < 1 or values.max() > T:
        raise PatternFormatError(f"{path}: lengths must lie in [1, {T}], found [{values.min()}, {values.max()}]")
    return ExposureMap(values, T)

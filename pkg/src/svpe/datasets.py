"""Training segments: ingestion of high-speed video frames and synthetic scenes."""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DimensionError

log = logging.getLogger(__name__)

MOTION_KINDS = ("static", "local", "global")


@dataclass(frozen=True)
class SegmentSpec:
    segments_per_video: int = 8
    frames_per_segment: int = 8
    crop: int | None = 512
    train_fraction: float = 0.8


@dataclass(frozen=True)
class Segment:
    frames: np.ndarray  # (T, H, W) in [0, 1]
    video: str = ""
    start: int = 0
    seed: int = 0


# --- ingestion ------------------------------------------------------------------

def _frame_key(p: Path):
    nums = re.findall(r"\d+", p.stem)
    return (int(nums[-1]) if nums else -1, p.name)


def read_frame(path) -> np.ndarray:
    """Grayscale PNG as float in [0, 1] (8- or 16-bit input)."""
    with Image.open(path) as img:
        if img.mode in ("RGB", "RGBA"):
            img = img.convert("L")
        arr = np.asarray(img)
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    if arr.dtype in (np.uint16, np.int32, np.int64) or img.mode.startswith("I"):
        return np.clip(arr.astype(np.float64) / 65535.0, 0.0, 1.0)
    return np.clip(arr.astype(np.float64), 0.0, 1.0)


def write_frame(path, frame, bits: int = 8) -> None:
    f = np.clip(np.asarray(frame, dtype=np.float64), 0.0, 1.0)
    if bits == 16:
        Image.fromarray(np.round(f * 65535).astype(np.uint16)).save(path, format="PNG")
    else:
        Image.fromarray(np.round(f * 255).astype(np.uint8), mode="L").save(path, format="PNG")


def list_frames(frame_dir) -> list[Path]:
    return sorted(Path(frame_dir).glob("*.png"), key=_frame_key)


def center_crop(frames: np.ndarray, size: int | None) -> np.ndarray:
    if size is None:
        return frames
    H, W = frames.shape[-2:]
    if H < size or W < size:
        raise DimensionError(f"frames of {H}x{W} are smaller than the {size}x{size} crop")
    top = (H - size) // 2
    left = (W - size) // 2
    return frames[..., top:top + size, left:left + size]


def segment_starts(n_frames: int, spec: SegmentSpec, rng) -> np.ndarray:
    """Without replacement when the video allows it, with replacement otherwise."""
    n_starts = n_frames - spec.frames_per_segment + 1
    if n_starts >= spec.segments_per_video:
        return np.sort(rng.choice(n_starts, size=spec.segments_per_video, replace=False))
    return np.sort(rng.integers(0, n_starts, size=spec.segments_per_video))


def segment_videos(frame_dirs, spec: SegmentSpec = SegmentSpec(), seed: int = 0, split: float | None = None):
    """Cut each video into random segments and split train/test at video level.

    Returns ``(train, test)`` lists of :class:`Segment`.
    """
    split = spec.train_fraction if split is None else split
    rng = np.random.default_rng(seed)
    dirs = [Path(d) for d in frame_dirs]
    usable = []
    for d in dirs:
        paths = list_frames(d)
        if len(paths) < spec.frames_per_segment:
            log.warning("skipping %s: %d frames < %d", d, len(paths), spec.frames_per_segment)
            continue
        usable.append((d, paths))
    order = rng.permutation(len(usable))
    n_train = int(round(split * len(usable)))
    train, test = [], []
    for rank, vi in enumerate(order):
        d, paths = usable[vi]
        starts = segment_starts(len(paths), spec, rng)
        cache = {}
        for s in starts:
            for t in range(s, s + spec.frames_per_segment):
                if t not in cache:
                    cache[t] = read_frame(paths[t])
            frames = center_crop(np.stack([cache[t] for t in range(s, s + spec.frames_per_segment)]), spec.crop)
            seg = Segment(frames=frames, video=d.name, start=int(s), seed=int(rng.integers(2**31)))
            (train if rank < n_train else test).append(seg)
    return train, test


def write_manifest(path, train, test, seed) -> None:
    with open(path, "w") as fh:
        fh.write(f"# seed={seed}\n")
        fh.write("split\tvideo\tstart\tseed\n")
        for name, segs in (("train", train), ("test", test)):
            for s in segs:
                fh.write(f"{name}\t{s.video}\t{s.start}\t{s.seed}\n")


# --- augmentation ---------------------------------------------------------------

def augment_ops(seed):
    """Seeded draw of (hflip, vflip, quarter turns)."""
    rng = np.random.default_rng(seed)
    return bool(rng.integers(2)), bool(rng.integers(2)), int(rng.integers(4))


def apply_ops(frames: np.ndarray, hflip: bool, vflip: bool, k: int) -> np.ndarray:
    if k % 2 and frames.shape[-1] != frames.shape[-2]:
        raise DimensionError("90-degree rotations need square frames")
    out = frames
    if hflip:
        out = out[..., :, ::-1]
    if vflip:
        out = out[..., ::-1, :]
    if k:
        out = np.rot90(out, k, axes=(-2, -1))
    return np.ascontiguousarray(out)


def augment(segment, seed):
    """Same random flip/rotation applied to every frame of the segment."""
    frames = segment.frames if isinstance(segment, Segment) else np.asarray(segment)
    out = apply_ops(frames, *augment_ops(seed))
    if isinstance(segment, Segment):
        return Segment(frames=out, video=segment.video, start=segment.start, seed=segment.seed)
    return out


# --- synthetic scenes -----------------------------------------------------------

@dataclass(frozen=True)
class Shape:
    center: tuple  # (row, col) at frame 0, sub-pixel
    radius: float
    intensity: float
    velocity: tuple = (0.0, 0.0)  # pixels per frame
    kind: str = "disc"


@dataclass(frozen=True)
class SceneSpec:
    size: int = 64
    T: int = 8
    shapes: tuple = field(default_factory=tuple)
    motion: str = "local"
    background_velocity: tuple = (0.0, 0.0)
    texture_seed: int = 0
    texture_amplitude: float = 0.25
    background_level: float = 0.45


def _texture(rows, cols, seed, amplitude, level):
    # smooth analytic texture so sub-pixel shifts are exact
    rng = np.random.default_rng(seed)
    out = np.full(np.broadcast(rows, cols).shape, level, dtype=np.float64)
    if amplitude == 0:
        return out
    n = 6
    freqs = rng.uniform(0.05, 0.6, size=n)
    angles = rng.uniform(0, np.pi, size=n)
    phases = rng.uniform(0, 2 * np.pi, size=n)
    for f, a, ph in zip(freqs, angles, phases):
        out += (amplitude / n) * np.sin(f * (rows * np.cos(a) + cols * np.sin(a)) + ph)
    return out


def _coverage(rows, cols, shape: Shape, t):
    cr = shape.center[0] + shape.velocity[0] * t
    cc = shape.center[1] + shape.velocity[1] * t
    if shape.kind == "square":
        dr = shape.radius + 0.5 - np.abs(rows - cr)
        dc = shape.radius + 0.5 - np.abs(cols - cc)
        return np.clip(dr, 0, 1) * np.clip(dc, 0, 1)
    d = np.hypot(rows - cr, cols - cc)
    return np.clip(shape.radius + 0.5 - d, 0.0, 1.0)


def synth_scene(spec: SceneSpec, seed: int = 0) -> np.ndarray:
    """T frames of shapes translating over a smooth texture, shape (T, H, W).

    Shape edges are anti-aliased with a one-pixel linear ramp, so positions
    are sub-pixel accurate.
    """
    n = spec.size
    rows, cols = np.meshgrid(np.arange(n, dtype=np.float64), np.arange(n, dtype=np.float64), indexing="ij")
    frames = np.empty((spec.T, n, n))
    bv = spec.background_velocity if spec.motion == "global" else (0.0, 0.0)
    for t in range(spec.T):
        img = _texture(rows - bv[0] * t, cols - bv[1] * t, spec.texture_seed,
                       spec.texture_amplitude, spec.background_level)
        for s in spec.shapes:
            if spec.motion == "static":
                s = Shape(s.center, s.radius, s.intensity, (0.0, 0.0), s.kind)
            cov = _coverage(rows, cols, s, t)
            img = img * (1 - cov) + s.intensity * cov
        frames[t] = img
    return np.clip(frames, 0.0, 1.0)


def random_scene_spec(seed: int, size: int = 64, T: int = 8, motion: str | None = None,
                      n_shapes=(2, 5), max_speed: float = 2.5) -> SceneSpec:
    """Random scene of the requested motion kind; velocities keep shapes inside the canvas."""
    rng = np.random.default_rng(seed)
    motion = MOTION_KINDS[int(rng.integers(3))] if motion is None else motion
    k = int(rng.integers(n_shapes[0], n_shapes[1] + 1))
    shapes = []
    for _ in range(k):
        radius = float(rng.uniform(0.06, 0.16) * size)
        speed = float(rng.uniform(0.5, 1.0) * max_speed)
        ang = float(rng.uniform(0, 2 * np.pi))
        vel = (speed * np.sin(ang), speed * np.cos(ang))
        travel = [abs(v) * (T - 1) for v in vel]
        lo = [radius + 1 + (travel[i] if vel[i] < 0 else 0) for i in range(2)]
        hi = [size - radius - 2 - (travel[i] if vel[i] > 0 else 0) for i in range(2)]
        if hi[0] <= lo[0] or hi[1] <= lo[1]:
            vel = (0.0, 0.0)
            lo, hi = [radius + 1] * 2, [size - radius - 2] * 2
        center = (float(rng.uniform(lo[0], hi[0])), float(rng.uniform(lo[1], hi[1])))
        intensity = float(rng.choice([rng.uniform(0.0, 0.2), rng.uniform(0.75, 1.0)]))
        shapes.append(Shape(center, radius, intensity, vel, "square" if rng.random() < 0.4 else "disc"))
    bang = float(rng.uniform(0, 2 * np.pi))
    bspeed = float(rng.uniform(0.5, 1.0) * max_speed)
    return SceneSpec(size=size, T=T, shapes=tuple(shapes), motion=motion,
                     background_velocity=(bspeed * np.sin(bang), bspeed * np.cos(bang)),
                     texture_seed=int(rng.integers(2**31)))


def synth_dataset(n_train: int, n_test: int, seed: int = 0, size: int = 64, T: int = 8, max_speed: float = 2.5):
    """Synthetic (train, test) segments, motion kinds cycling static/local/global."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_train + n_test):
        s = int(rng.integers(2**31))
        spec = random_scene_spec(s, size, T, MOTION_KINDS[i % 3], max_speed=max_speed)
        out.append(Segment(frames=synth_scene(spec, s), video=f"synth{i:04d}", start=0, seed=s))
    return out[:n_train], out[n_train:]


def write_dataset(root, segments) -> list[Path]:
    """One directory of numbered 16-bit PNG frames per segment."""
    root = Path(root)
    dirs = []
    for seg in segments:
        d = root / seg.video
        d.mkdir(parents=True, exist_ok=True)
        for t, f in enumerate(seg.frames):
            write_frame(d / f"{t:05d}.png", f, bits=16)
        dirs.append(d)
    return dirs

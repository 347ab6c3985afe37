"""Joint training of exposure pattern and decoder, plus evaluation."""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import torch
import torch.nn.functional as F

from . import decoder as dec
from .datasets import Segment, apply_ops, augment_ops
from .errors import DivergenceError, DimensionError
from .interp import ChannelStack, InterpPlan, make_plan
from .metrics import PSNR_CAP, MetricResult, psnr, ssim, summarize
from .optim import AdamW, ReduceLROnPlateau
from .patterns import DEFAULT_T, ExposureMap, LearnedExposure, PatternKind, generate, quantize_ste
from .sensor import NOISELESS, add_noise_torch, integrate_torch, sample_gains
from .seeding import derive_seed

log = logging.getLogger(__name__)

FULL = "full"
PATTERN_CHOICES = [k.value for k in PatternKind] + [FULL]


@dataclass
class TrainConfig:
    epochs: int = 1000
    batch_size: int = 2
    exposure_lr: float = 2e-4
    decoder_lr: float | None = None  # 5e-4 learned, 2e-4 fixed patterns
    adam_betas: tuple = (0.9, 0.999)
    weight_decay: float = 1e-2
    exposure_weight_decay: float = 0.0
    lambda_percep: float = 100.0
    scheduler_patience: int = 20
    scheduler_factor: float = 0.8
    seed: int = 0
    pattern_kind: str = "learned"
    interp_method: str = "scatter"
    ste_on: bool = True
    interp_k: int = 3
    interp_r: float = 1.0
    T: int = DEFAULT_T
    depth: int = 6
    base_channels: int = 32
    bit_depth: int = 0
    noise: bool = True
    val_fraction: float = 0.1
    augment: bool = True

    def __post_init__(self):
        if self.pattern_kind not in PATTERN_CHOICES:
            raise ValueError(f"unknown pattern kind {self.pattern_kind!r}")
        if self.decoder_lr is None:
            self.decoder_lr = 5e-4 if self.pattern_kind == PatternKind.LEARNED.value else 2e-4
        # exposure_lr == 0 is allowed: it freezes a learned pattern at its initialization
        if self.exposure_lr < 0 or self.decoder_lr <= 0:
            raise ValueError("decoder_lr must be positive and exposure_lr non-negative")
        if self.lambda_percep < 0:
            raise ValueError("lambda_percep must be non-negative")
        self.adam_betas = tuple(float(b) for b in self.adam_betas)

    @property
    def learned(self) -> bool:
        return self.pattern_kind == PatternKind.LEARNED.value


DESK_SCALE = dict(epochs=200, batch_size=8, decoder_lr=2e-3, exposure_lr=1e-3, depth=3, base_channels=16)


def desk_config(**overrides) -> TrainConfig:
    """Settings sized for a single CPU core: 64x64 crops, ~1200 steps.

    With ~250x fewer steps than a full run, both learning rates are scaled
    up, and the decoder uses one rate for every pattern.
    """
    return TrainConfig(**{**DESK_SCALE, **overrides})


def config_from_mapping(values: dict, base: TrainConfig | None = None) -> TrainConfig:
    """Build a config from string or typed values keyed by field name."""
    base = base or TrainConfig()
    kinds = {f.name: f for f in fields(TrainConfig)}
    out = {}
    for key, raw in values.items():
        if key not in kinds:
            raise KeyError(f"unknown training config key {key!r}")
        current = getattr(base, key)
        out[key] = _coerce(raw, current, key)
    merged = asdict(base)
    merged.update(out)
    if "pattern_kind" in out and "decoder_lr" not in out:
        merged["decoder_lr"] = None
    return TrainConfig(**merged)


def _coerce(raw, current, key):
    if not isinstance(raw, str):
        return raw
    s = raw.strip()
    if isinstance(current, bool):
        return s.lower() in ("1", "true", "yes", "on")
    if isinstance(current, tuple):
        return tuple(float(v) for v in s.replace("(", "").replace(")", "").split(","))
    if isinstance(current, int):
        return int(s)
    if isinstance(current, float) or key == "decoder_lr":
        return None if s.lower() == "none" else float(s)
    return s


# --- front end: capture + interpolation -------------------------------------------

@dataclass
class Encoder:
    """Everything between the scene and the decoder input."""

    kind: str
    emap: ExposureMap | None
    interp: str = "scatter"
    k: int = 3
    r: float = 1.0
    T: int = DEFAULT_T
    bit_depth: int = 0
    noise: bool = True

    def __post_init__(self):
        if self.kind != FULL and self.emap is None:
            raise ValueError("a pattern kind other than 'full' needs an exposure map")
        if self.kind in (PatternKind.SHORT.value, PatternKind.MEDIUM.value, PatternKind.LONG.value):
            # a single global class needs no interpolation
            self.interp = "none"

    @property
    def slots(self) -> np.ndarray:
        """Exposure length carried by each decoder input channel."""
        if self.kind == FULL:
            return np.array([1, max(1, self.T // 2), self.T])
        if self.kind == PatternKind.LEARNED.value:
            return np.arange(1, self.T + 1)
        return self.emap.lengths

    @property
    def in_channels(self) -> int:
        return len(self.slots)


def build_encoder(config: TrainConfig, size: int) -> Encoder:
    if config.pattern_kind == FULL:
        emap = None
    else:
        emap = generate(config.pattern_kind, size, size, derive_seed(config.seed, "pattern"), config.T)
    interp = config.interp_method
    if interp == "bilinear" and config.pattern_kind not in ("quad", "nonad"):
        raise ValueError(f"bilinear interpolation needs a tiled pattern, not {config.pattern_kind}")
    return Encoder(config.pattern_kind, emap, interp, config.interp_k, config.interp_r, config.T,
                   config.bit_depth, config.noise)


class _PlanCache:
    def __init__(self):
        self.key = None
        self.plan: InterpPlan | None = None
        self.tensors = None

    def get(self, enc: Encoder, emap: ExposureMap, dtype):
        key = (emap.values.tobytes(), enc.interp, enc.k, enc.r, dtype)
        if key != self.key:
            allow = enc.kind == PatternKind.LEARNED.value
            self.plan = make_plan(emap, enc.interp, enc.k, enc.r, lengths=enc.slots, allow_absent=allow)
            self.tensors = self.plan.torch_tensors(dtype)
            self.key = key
        return self.plan, self.tensors


class _STERound(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, levels):
        return torch.floor(x * levels + 0.5) / levels

    @staticmethod
    def backward(ctx, g):
        return g, None


def noise_draw(seed, shape, noise=True):
    """Gains and standard-normal field for one capture, as in :func:`sensor.capture`."""
    if not noise:
        return NOISELESS, np.zeros(shape)
    return sample_gains(seed), np.random.default_rng(seed).standard_normal(shape)


def _capture_torch(frames, q, gains, z, bit_depth):
    E = integrate_torch(frames, q)
    sr = torch.tensor([g.sigma_r for g in gains], dtype=frames.dtype).view(-1, 1, 1)
    ss = torch.tensor([g.sigma_s for g in gains], dtype=frames.dtype).view(-1, 1, 1)
    y = add_noise_torch(E, sr, ss, z).clamp(0.0, 1.0)
    if bit_depth > 0:
        y = _STERound.apply(y, float(2**bit_depth - 1))
    return y


def slot_coverage(emap: ExposureMap, slots) -> np.ndarray:
    """Per-slot confidence ``min(1, count / (H*W/T))``.

    A length held by only a few pixels interpolates into a near-constant
    field; damping it keeps a freshly appearing class from dominating.
    """
    counts = np.array([np.count_nonzero(emap.values == c) for c in slots], dtype=np.float64)
    share = emap.values.size / emap.max_exposure
    return np.minimum(1.0, counts / share)


class Frontend:
    """Differentiable capture and interpolation for a batch of segments."""

    def __init__(self, enc: Encoder, learned: LearnedExposure | None = None, dtype=torch.float32):
        self.enc = enc
        self.learned = learned
        self.dtype = dtype
        self.cache = _PlanCache()

    def current_map(self) -> ExposureMap | None:
        if self.learned is not None:
            return self.learned.exposure_map()
        return self.enc.emap

    def __call__(self, frames: np.ndarray, seeds) -> torch.Tensor:
        """``frames`` (B, T, H, W) -> decoder input (B, C, H, W)."""
        enc = self.enc
        B, T, H, W = frames.shape
        if T != enc.T:
            raise DimensionError(f"segments have {T} frames, sensor expects {enc.T}")
        ft = torch.as_tensor(frames, dtype=self.dtype)
        if enc.kind == FULL:
            chans = []
            for ci, length in enumerate(enc.slots):
                draws = [noise_draw(derive_seed(s, "full", ci), (H, W), enc.noise) for s in seeds]
                z = torch.as_tensor(np.stack([d[1] for d in draws]), dtype=self.dtype)
                q = torch.full((H, W), float(length), dtype=self.dtype)
                y = _capture_torch(ft, q, [d[0] for d in draws], z, enc.bit_depth)
                chans.append(y * (enc.T / float(length)))
            return torch.stack(chans, dim=1)
        if self.learned is not None:
            q = quantize_ste(self.learned.theta, enc.T).to(self.dtype)
            emap = self.learned.exposure_map()
        else:
            emap = enc.emap
            q = torch.tensor(emap.values, dtype=self.dtype)
        if emap.shape != (H, W):
            raise DimensionError(f"segment size {(H, W)} does not match exposure map {emap.shape}")
        draws = [noise_draw(s, (H, W), enc.noise) for s in seeds]
        z = torch.as_tensor(np.stack([d[1] for d in draws]), dtype=self.dtype)
        y = _capture_torch(ft, q, [d[0] for d in draws], z, enc.bit_depth)
        plan, tensors = self.cache.get(enc, emap, self.dtype)
        x = plan.apply_torch(y, tensors)
        scale = enc.T / enc.slots.astype(np.float64)
        if enc.kind == PatternKind.LEARNED.value:
            scale = scale * slot_coverage(emap, enc.slots)
        return x * torch.as_tensor(scale, dtype=self.dtype).view(1, -1, 1, 1)


def make_full_stack(frames, seed, T: int | None = None, noise: bool = True, bit_depth: int = 0) -> ChannelStack:
    """Short, medium and long global captures of one segment, each rescaled to full brightness."""
    frames = np.asarray(getattr(frames, "frames", frames), dtype=np.float64)
    T = frames.shape[0] if T is None else T
    enc = Encoder(FULL, None, "none", T=T, bit_depth=bit_depth, noise=noise)
    with torch.no_grad():
        x = Frontend(enc, dtype=torch.float64)(frames[None], [seed])[0].numpy()
    return ChannelStack(x, enc.slots)


# --- losses ---------------------------------------------------------------------

def loss_l2(pred: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    if pred.shape != gt.shape:
        raise DimensionError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(gt.shape)}")
    return torch.mean((pred - gt) ** 2)


class PerceptualExtractor(torch.nn.Module):
    """Frozen multi-scale conv pyramid used as a stand-in for VGG features.

    Default weights are seeded random He-normal kernels; :meth:`load` accepts
    an ``.npz`` holding ``scale{i}.weight`` / ``scale{i}.bias`` arrays.
    """

    def __init__(self, widths=(8, 16, 32), seed: int = 1234, in_channels: int = 1):
        super().__init__()
        self.widths = tuple(widths)
        rng = np.random.default_rng(seed)
        c = in_channels
        for i, w in enumerate(self.widths):
            k = rng.standard_normal((w, c, 3, 3)) * math.sqrt(2.0 / (c * 9))
            self.register_buffer(f"w{i}", torch.tensor(k, dtype=torch.float32))
            self.register_buffer(f"b{i}", torch.zeros(w))
            c = w

    def manifest(self):
        return {f"scale{i}.{p}": tuple(getattr(self, f"{p[0]}{i}").shape)
                for i in range(len(self.widths)) for p in ("weight", "bias")}

    def load(self, path):
        data = np.load(path)
        for key, shape in self.manifest().items():
            if key not in data or tuple(data[key].shape) != shape:
                raise ValueError(f"{path}: missing or misshaped {key}, expected {shape}")
            i = int(key[5:key.index(".")])
            name = ("w" if key.endswith("weight") else "b") + str(i)
            getattr(self, name).copy_(torch.as_tensor(data[key]))
        return self

    def save(self, path):
        np.savez(path, **{k: getattr(self, ("w" if k.endswith("weight") else "b") + k[5:k.index(".")]).numpy()
                          for k in self.manifest()})

    def forward(self, x):
        feats = []
        for i in range(len(self.widths)):
            w = getattr(self, f"w{i}").to(x.dtype)
            b = getattr(self, f"b{i}").to(x.dtype)
            if i:
                x = F.avg_pool2d(x, 2)
            x = F.relu(F.conv2d(x, w, b, padding=1))
            feats.append(x)
        return feats


def feature_distance(pred, gt, extractor: PerceptualExtractor) -> torch.Tensor:
    """Sum over pyramid scales of the mean squared feature difference."""
    fp = extractor(pred)
    with torch.no_grad():
        fg = extractor(gt)
    return sum(torch.mean((a - b) ** 2) for a, b in zip(fp, fg))


def loss_perceptual(pred, gt, extractor: PerceptualExtractor | None, lam: float = 100.0) -> torch.Tensor:
    l2 = loss_l2(pred, gt)
    if lam == 0 or extractor is None:
        return l2
    return l2 + lam * feature_distance(pred, gt, extractor)


# --- training -----------------------------------------------------------------

@dataclass
class TrainReport:
    epochs: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_psnr: list = field(default_factory=list)
    val_ssim: list = field(default_factory=list)
    lr_decoder: list = field(default_factory=list)
    lr_exposure: list = field(default_factory=list)
    pattern_changes: list = field(default_factory=list)
    initial_loss: float = math.nan
    initial_map: ExposureMap | None = None
    final_map: ExposureMap | None = None
    encoder: Encoder | None = None  # front end as trained; for a learned pattern, its final map
    decoder_config: dec.DecoderConfig | None = None
    wall_clock: float = 0.0
    steps: int = 0
    theta: torch.Tensor | None = None

    def rows(self):
        for i, e in enumerate(self.epochs):
            yield (e, self.train_loss[i], self.val_loss[i], self.lr_decoder[i], self.lr_exposure[i])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_loss", "lr_decoder", "lr_exposure"])
            for e, tl, vl, ld, le in self.rows():
                w.writerow([e, f"{tl:.8e}", f"{vl:.8e}", f"{ld:.8e}", f"{le:.8e}"])


def _as_frames(ds):
    return [s.frames if isinstance(s, Segment) else np.asarray(s) for s in ds]


def _seg_seed(seg, i):
    return seg.seed if isinstance(seg, Segment) else i


def _split_val(n, fraction, seed):
    if n < 2 or fraction <= 0:
        return list(range(n)), []
    rng = np.random.default_rng(derive_seed(seed, "val-split"))
    perm = rng.permutation(n)
    n_val = max(1, int(round(fraction * n)))
    return sorted(perm[n_val:].tolist()), sorted(perm[:n_val].tolist())


def _batches(frames_list, seeds, bs):
    for i in range(0, len(frames_list), bs):
        yield np.stack(frames_list[i:i + bs]), seeds[i:i + bs]


def _eval_loss(frontend, params, dconf, frames, seeds, extractor, lam, bs=16):
    total, n = 0.0, 0
    preds = []
    with torch.no_grad():
        for fb, sb in _batches(frames, seeds, bs):
            x = frontend(fb, sb)
            pred = dec.forward(params, x, dconf)
            gt = torch.as_tensor(fb[:, :1], dtype=pred.dtype)
            total += float(loss_perceptual(pred, gt, extractor, lam)) * len(fb)
            n += len(fb)
            preds.append(pred[:, 0].double().numpy())
    return total / max(n, 1), np.concatenate(preds) if preds else None


def train(config: TrainConfig, dataset, extractor: PerceptualExtractor | None = None, progress=None):
    """Jointly fit exposure parameters (learned pattern) and decoder.

    Returns ``(params, exposure_map, report)``; ``exposure_map`` is None for
    the full-stack baseline.
    """
    t0 = time.perf_counter()
    segs = list(dataset)
    if not segs:
        raise ValueError("dataset is empty")
    if config.learned and not config.ste_on:
        raise ValueError("a learned pattern needs the straight-through estimator (ste_on)")
    torch.manual_seed(config.seed)
    frames_all = _as_frames(segs)
    size = frames_all[0].shape[-1]
    enc = build_encoder(config, size)
    learned = LearnedExposure(enc.emap, config.T) if config.learned else None
    frontend = Frontend(enc, learned)
    dconf = dec.DecoderConfig(enc.in_channels, config.depth, config.base_channels)
    params = dec.init_params(dconf, derive_seed(config.seed, "decoder"))
    if learned is not None:
        # slots with no pixels yet start disconnected, so a class appearing
        # mid-training with a handful of samples cannot swamp the output
        absent = np.nonzero(~np.isin(enc.slots, enc.emap.lengths))[0]
        with torch.no_grad():
            params["down0.conv.weight"][:, torch.as_tensor(absent)] = 0.0
    if extractor is None and config.lambda_percep > 0:
        extractor = PerceptualExtractor()

    groups = [{"params": list(params.values()), "lr": config.decoder_lr, "weight_decay": config.weight_decay}]
    if learned is not None:
        groups.append({"params": [learned.theta], "lr": config.exposure_lr,
                       "weight_decay": config.exposure_weight_decay})
    opt = AdamW(groups, betas=config.adam_betas)
    sched = ReduceLROnPlateau(opt, patience=config.scheduler_patience, factor=config.scheduler_factor)

    tr_idx, va_idx = _split_val(len(segs), config.val_fraction, config.seed)
    val_frames = [frames_all[i] for i in va_idx]
    val_seeds = [derive_seed(config.seed, "val-noise", i) for i in va_idx]
    rng = np.random.default_rng(derive_seed(config.seed, "train-loop"))
    report = TrainReport(encoder=enc, decoder_config=dconf, initial_map=enc.emap)

    for epoch in range(config.epochs):
        order = rng.permutation(len(tr_idx))
        losses = []
        for b in range(0, len(order), config.batch_size):
            ids = [tr_idx[j] for j in order[b:b + config.batch_size]]
            batch = []
            for i in ids:
                f = frames_all[i]
                if config.augment:
                    ops = augment_ops(int(rng.integers(2**31)))
                    if f.shape[-1] != f.shape[-2]:
                        ops = (ops[0], ops[1], 0)
                    f = apply_ops(f, *ops)
                batch.append(f)
            fb = np.stack(batch)
            seeds = [int(s) for s in rng.integers(0, 2**31, size=len(ids))]
            x = frontend(fb, seeds)
            pred = dec.forward(params, x, dconf)
            gt = torch.as_tensor(fb[:, :1], dtype=pred.dtype)
            loss = loss_perceptual(pred, gt, extractor, config.lambda_percep)
            if not torch.isfinite(loss):
                raise DivergenceError(f"loss became {float(loss.detach())} at epoch {epoch}")
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
            losses.append(float(loss.detach()))
            report.steps += 1
            if math.isnan(report.initial_loss):
                report.initial_loss = losses[0]
        train_loss = float(np.mean(losses))
        if val_frames:
            val_loss, preds = _eval_loss(frontend, params, dconf, val_frames, val_seeds,
                                         extractor, config.lambda_percep)
            gts = [f[0] for f in val_frames]
            clipped = [np.clip(p, 0, 1) for p in preds]
            report.val_psnr.append(float(np.mean([psnr(p, g) for p, g in zip(clipped, gts)])))
            report.val_ssim.append(float(np.mean([ssim(p, g) for p, g in zip(clipped, gts)]))
                                   if min(gts[0].shape) >= 11 else math.nan)
        else:
            val_loss = train_loss
            report.val_psnr.append(math.nan)
            report.val_ssim.append(math.nan)
        report.epochs.append(epoch)
        report.train_loss.append(train_loss)
        report.val_loss.append(val_loss)
        report.lr_decoder.append(opt.param_groups[0]["lr"])
        report.lr_exposure.append(opt.param_groups[1]["lr"] if learned is not None else 0.0)
        if learned is not None:
            report.pattern_changes.append(int(np.count_nonzero(frontend.current_map().values != enc.emap.values)))
        sched.step(val_loss)
        if progress is not None:
            progress(epoch, train_loss, val_loss)

    if learned is not None:
        report.theta = learned.theta.detach().clone()
        report.encoder = Encoder(enc.kind, frontend.current_map(), enc.interp, enc.k, enc.r, enc.T,
                                 enc.bit_depth, enc.noise)
    report.final_map = frontend.current_map()
    report.wall_clock = time.perf_counter() - t0
    return params, report.final_map, report


# --- evaluation -------------------------------------------------------------------

def _resolve_encoder(pattern, interp, T, noise, bit_depth, k, r):
    if isinstance(pattern, Encoder):
        return pattern
    if isinstance(pattern, str) and pattern == FULL:
        return Encoder(FULL, None, "none", T=T, noise=noise, bit_depth=bit_depth)
    if isinstance(pattern, ExposureMap):
        return Encoder("fixed", pattern, interp, k, r, pattern.max_exposure, bit_depth, noise)
    raise TypeError(f"cannot evaluate pattern of type {type(pattern).__name__}")


def predict(params, pattern, frames, decoder_config, interp="scatter", seed=0, *, T=DEFAULT_T,
            noise=True, bit_depth=0, k=3, r=1.0, batch_size=16):
    """Decoder outputs (N, H, W), unclipped, for a list of segments."""
    enc = _resolve_encoder(pattern, interp, T, noise, bit_depth, k, r)
    frontend = Frontend(enc)
    segs = list(frames)
    fl = _as_frames(segs)
    seeds = [derive_seed(seed, "test-noise", _seg_seed(s, i)) for i, s in enumerate(segs)]
    out = []
    with torch.no_grad():
        for fb, sb in _batches(fl, seeds, batch_size):
            out.append(dec.forward(params, frontend(fb, sb), decoder_config)[:, 0].double().numpy())
    return np.concatenate(out)


def evaluate(params, pattern, dataset, interp="scatter", *, decoder_config, seed=0, T=DEFAULT_T,
             noise=True, bit_depth=0, k=3, r=1.0, cap=PSNR_CAP):
    """Mean and std of PSNR/SSIM against frame 0 over a test set."""
    segs = list(dataset)
    if not segs:
        raise ValueError("evaluation dataset is empty")
    preds = predict(params, pattern, segs, decoder_config, interp, seed, T=T, noise=noise,
                    bit_depth=bit_depth, k=k, r=r)
    results = []
    for p, f in zip(preds, _as_frames(segs)):
        p = np.clip(p, 0.0, 1.0)
        results.append(MetricResult(psnr(p, f[0], cap=cap), ssim(p, f[0])))
    table = summarize(results)
    table["per_image"] = results
    table["ids"] = [s.video if isinstance(s, Segment) else str(i) for i, s in enumerate(segs)]
    return table


def evaluate_images(preds, dataset, cap=PSNR_CAP):
    """Metrics table for precomputed reconstructions (e.g. Burst Average)."""
    results = [MetricResult(psnr(np.clip(p, 0, 1), f[0], cap=cap), ssim(np.clip(p, 0, 1), f[0]))
               for p, f in zip(preds, _as_frames(dataset))]
    table = summarize(results)
    table["per_image"] = results
    return table


def burst_average_baseline(dataset, seed=0, *, T=DEFAULT_T, noise=True, bit_depth=0):
    """Long global capture shown as-is: the mean of all frames plus sensor noise, no decoder.

    Uses the same per-segment noise draws as :func:`evaluate`.
    """
    segs = list(dataset)
    fl = _as_frames(segs)
    H, W = fl[0].shape[-2:]
    enc = Encoder(PatternKind.LONG.value, generate("long", H, W, 0, T), "none", T=T, noise=noise,
                  bit_depth=bit_depth)
    frontend = Frontend(enc, dtype=torch.float64)
    seeds = [derive_seed(seed, "test-noise", _seg_seed(s, i)) for i, s in enumerate(segs)]
    with torch.no_grad():
        imgs = [frontend(fb, sb)[:, 0].numpy() for fb, sb in _batches(fl, seeds, 16)]
    return evaluate_images(np.concatenate(imgs), segs)


def reconstruct_rgb(params, pattern, rgb_frames, interp="scatter", *, decoder_config, seed=0, **kw):
    """Run the grayscale pipeline on each colour plane.

    ``rgb_frames`` is a (T, H, W, 3) array or a sequence of three (T, H, W) stacks.
    """
    if isinstance(rgb_frames, (list, tuple)):
        shapes = {np.shape(p) for p in rgb_frames}
        if len(rgb_frames) != 3 or len(shapes) != 1:
            raise DimensionError(f"need three aligned colour planes, got shapes {sorted(shapes)}")
        rgb_frames = np.stack(rgb_frames, axis=-1)
    rgb = np.asarray(rgb_frames, dtype=np.float64)
    if rgb.ndim != 4 or rgb.shape[-1] != 3:
        raise DimensionError(f"expected (T, H, W, 3) frames, got {rgb.shape}")
    planes = [Segment(frames=np.ascontiguousarray(rgb[..., c]), video="plane", seed=seed) for c in range(3)]
    out = predict(params, pattern, planes, decoder_config, interp, seed, **kw)
    return np.stack(list(out), axis=-1)

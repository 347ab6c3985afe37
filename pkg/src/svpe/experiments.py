"""Desk-scale studies: interpolation sweep, baseline ordering, pipeline smoke run."""
from __future__ import annotations

import logging
import time
from pathlib import Path

import numpy as np

from . import decoder as dec
from .datasets import synth_dataset, write_dataset
from .interp import bilinear_interp, rescale_channels, scatter_interp
from .metrics import psnr, ssim, write_metrics_csv
from .patterns import gen_global, generate, serialize_pattern
from .sensor import add_noise, apply_response, integrate, sample_gains
from .seeding import derive_seed
from .train import Encoder, burst_average_baseline, desk_config, evaluate, train

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ("method", "k", "seconds_per_image", "psnr", "ssim")


def _channel_truth(frames, emap, lengths):
    """Noiseless full-resolution exposure at each length."""
    return np.stack([integrate(frames, gen_global(*emap.shape, int(c), emap.max_exposure)) for c in lengths])


def interp_sweep(pattern="quad", methods=("bilinear", "scatter"), ks=(3, 4, 5), r=1.0, n_images=8, size=128,
                 seed=0, T=8, bit_depth=0, noise=False, repeats=3, segments=None):
    """Time and accuracy of each interpolation method over simulated captures.

    Accuracy compares every interpolated channel with the noiseless
    full-resolution exposure at that length, both rescaled to full brightness
    and clipped, averaged over channels then images. ``noise`` adds sensor
    noise to the mosaic capture only.
    """
    if segments is None:
        segments, _ = synth_dataset(n_images, 0, seed=derive_seed(seed, "sweep-data"), size=size, T=T)
    emap = generate(pattern, size, size, derive_seed(seed, "pattern"), T)
    caps = []
    for i, seg in enumerate(segments):
        s = derive_seed(seed, "sweep-noise", i)
        e = integrate(seg.frames, emap)
        if noise:
            e = add_noise(e, sample_gains(s), s)
        caps.append((apply_response(e, bit_depth), _channel_truth(seg.frames, emap, emap.lengths)))

    def run(fn):
        fn(caps[0][0])  # warm-up (JIT compile)
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            outs = [fn(raw) for raw, _ in caps]
            best = min(best, (time.perf_counter() - t0) / len(caps))
        ps, ss = [], []
        for stack, (_, truth) in zip(outs, caps):
            est = np.clip(rescale_channels(stack, T).channels, 0, 1)
            ref = np.clip(truth * (T / emap.lengths.astype(float))[:, None, None], 0, 1)
            ps.append(np.mean([psnr(a, b) for a, b in zip(est, ref)]))
            ss.append(np.mean([ssim(a, b) for a, b in zip(est, ref)]))
        return best, float(np.mean(ps)), float(np.mean(ss))

    rows = []
    for method in methods:
        if method == "bilinear":
            t, p, s = run(lambda raw: bilinear_interp(raw, emap))
            rows.append(("bilinear", "", t, p, s))
        elif method == "scatter":
            for k in ks:
                t, p, s = run(lambda raw, k=k: scatter_interp(raw, emap, k, r))
                rows.append(("scatter", k, t, p, s))
        else:
            raise ValueError(f"unknown interpolation method {method!r}")
    return rows


def write_sweep_csv(path, rows):
    with open(path, "w") as fh:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for m, k, t, p, s in rows:
            fh.write(f"{m},{k},{t:.6f},{p:.4f},{s:.4f}\n")


def ordering_study(lam=0.0, seed=0, n_train=48, n_test=24, size=64, max_speed=1.0, data=None, **overrides):
    """Train Long, Full, Quad-scatter and learned models; compare with Burst Average."""
    train_set, test_set = data or synth_dataset(n_train, n_test, seed=seed, size=size, max_speed=max_speed)
    eval_seed = derive_seed(seed, "eval")
    out = {"burst": burst_average_baseline(test_set, seed=eval_seed)}
    for name, kind, interp in (("long", "long", "none"), ("full", "full", "none"),
                               ("quad_scatter", "quad", "scatter"), ("learned", "learned", "scatter")):
        cfg = desk_config(pattern_kind=kind, interp_method=interp, lambda_percep=lam, seed=seed, **overrides)
        t0 = time.perf_counter()
        params, emap, rep = train(cfg, train_set)
        table = evaluate(params, rep.encoder, test_set, decoder_config=rep.decoder_config, seed=eval_seed)
        table["seconds"] = time.perf_counter() - t0
        table["report"] = rep
        if kind == "learned":
            table["changed_pixels"] = int(np.count_nonzero(emap.values != rep.initial_map.values))
        out[name] = table
        log.info("%s: %.3f dB (%.1fs)", name, table["psnr_mean"], table["seconds"])
    return out


def pipeline_smoke(out_dir, seed=0, size=32, n_train=8, n_test=4, epochs=3, depth=2, base_channels=4,
                   pattern="learned", interp="scatter", lam=0.0):
    """synth-data -> train -> eval at toy scale; every artifact lands in ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stages = []
    try:
        stage = "synth-data"
        train_set, test_set = synth_dataset(n_train, n_test, seed=derive_seed(seed, stage), size=size)
        write_dataset(out_dir / "data" / "train", train_set)
        write_dataset(out_dir / "data" / "test", test_set)
        stages.append(stage)

        stage = "train"
        cfg = desk_config(epochs=epochs, depth=depth, base_channels=base_channels, pattern_kind=pattern,
                          interp_method=interp, lambda_percep=lam, seed=derive_seed(seed, stage), batch_size=4)
        params, emap, rep = train(cfg, train_set)
        rep.write_csv(out_dir / "train_report.csv")
        dec.save_params(params, rep.decoder_config, out_dir / "decoder.bin")
        if emap is not None:
            serialize_pattern(emap, out_dir / "pattern.png")
        stages.append(stage)

        stage = "eval"
        table = evaluate(params, rep.encoder, test_set, decoder_config=rep.decoder_config,
                         seed=derive_seed(seed, stage))
        write_metrics_csv(out_dir / "metrics.csv", [s.video for s in test_set], table["per_image"])
        stages.append(stage)
    except Exception as exc:
        raise RuntimeError(f"pipeline stage {stage!r} failed: {exc}") from exc
    return {"stages": stages, "metrics": table, "out_dir": str(out_dir)}

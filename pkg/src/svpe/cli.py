"""Command-line front end: ``svpe <command> [flags]``."""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from . import __version__
from . import decoder as dec
from .datasets import (Segment, SegmentSpec, list_frames, read_frame, segment_videos, synth_dataset,
                       write_dataset, write_frame, write_manifest)
from .errors import SVPEError
from .experiments import interp_sweep, pipeline_smoke, write_sweep_csv
from .interp import make_plan, rescale_channels
from .metrics import write_metrics_csv
from .patterns import ExposureMap, generate, load_pattern, serialize_pattern
from .sensor import capture
from .seeding import derive_seed
from .train import (FULL, PATTERN_CHOICES, Encoder, TrainConfig, config_from_mapping, desk_config,
                    evaluate, reconstruct_rgb, train)

log = logging.getLogger("svpe")

INTERP_CHOICES = ["bilinear", "scatter", "none"]

# flag dest -> TrainConfig field
TRAIN_FLAGS = {
    "pattern": "pattern_kind", "interp": "interp_method", "k": "interp_k", "r": "interp_r",
    "epochs": "epochs", "batch": "batch_size", "lr_decoder": "decoder_lr", "lr_exposure": "exposure_lr",
    "lam": "lambda_percep", "seed": "seed", "depth": "depth", "bit_depth": "bit_depth",
}


class UsageError(Exception):
    pass


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_run_manifest(path, command, cfg: dict, seeds: dict, artifacts=()):
    """Reproducibility header written next to every artifact set."""
    lines = [f"svpe_version = {__version__}", f"command = {command}",
             f"config_hash = {config_hash(cfg)}"]
    lines += [f"seed.{k} = {v}" for k, v in sorted(seeds.items())]
    lines += [f"config.{k} = {v}" for k, v in sorted(cfg.items())]
    lines += [f"artifact = {a}" for a in artifacts]
    Path(path).write_text("\n".join(lines) + "\n")


def _csv_ints(s):
    return [int(v) for v in s.split(",") if v.strip()]


def _csv_strs(s):
    return [v.strip() for v in s.split(",") if v.strip()]


# --- data loading ------------------------------------------------------------------

def load_segments(data_dir, T=8, crop=None, seed=0):
    """``data_dir/{train,test}/<segment>/`` as written by ``synth-data``, or a
    directory of video folders that is cut and split here."""
    root = Path(data_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory {root} does not exist")
    if (root / "train").is_dir() or (root / "test").is_dir():
        out = []
        for split in ("train", "test"):
            segs = []
            for d in sorted(p for p in (root / split).glob("*") if p.is_dir()):
                paths = list_frames(d)
                if len(paths) < T:
                    log.warning("skipping %s: fewer than %d frames", d, T)
                    continue
                frames = np.stack([read_frame(p) for p in paths[:T]])
                segs.append(Segment(frames=frames, video=d.name, start=0, seed=derive_seed(seed, d.name)))
            out.append(segs)
        return out[0], out[1]
    videos = sorted(p for p in root.iterdir() if p.is_dir())
    if not videos:
        raise FileNotFoundError(f"dataset directory {root} holds no video folders")
    return segment_videos(videos, SegmentSpec(frames_per_segment=T, crop=crop), seed=seed)


def _emap_for(args, size, T=8):
    if getattr(args, "pattern_file", None):
        return load_pattern(args.pattern_file, T)
    kind = args.pattern
    if kind == FULL:
        return None
    return generate(kind, size, size, derive_seed(args.seed, "pattern"), T)


# --- commands ------------------------------------------------------------------------

def cmd_pattern(args):
    emap = generate(args.kind, args.size, args.size, args.seed, args.T)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    serialize_pattern(emap, out)
    cfg = {"kind": args.kind, "size": args.size, "T": args.T}
    write_run_manifest(str(out) + ".manifest.txt", "pattern", cfg, {"master": args.seed}, [out.name])
    print(f"wrote {out} ({emap.counts()})")


def cmd_simulate(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.frames:
        paths = list_frames(args.frames)[:args.T]
        frames = np.stack([read_frame(p) for p in paths])
    else:
        (seg,), _ = synth_dataset(1, 0, seed=derive_seed(args.seed, "synth"), size=args.size, T=args.T)
        frames = seg.frames
    if frames.shape[0] != args.T:
        raise SVPEError(f"need {args.T} frames, found {frames.shape[0]}")
    emap = _emap_for(args, frames.shape[-1], args.T) if args.pattern != FULL else None
    if emap is None:
        raise UsageError("simulate needs a mosaic pattern, not 'full'")
    seed = derive_seed(args.seed, "capture")
    cap = capture(frames, emap, seed, args.bit_depth)
    write_frame(out / "capture.png", cap.image, bits=16)
    (out / "capture.txt").write_text(
        f"sigma_r = {cap.gains.sigma_r!r}\nsigma_s = {cap.gains.sigma_s!r}\nseed = {seed}\n"
        f"bit_depth = {args.bit_depth}\n")
    serialize_pattern(emap, out / "pattern.png")
    artifacts = ["capture.png", "capture.txt", "pattern.png"]
    if args.interp != "none" or args.pattern in ("short", "medium", "long"):
        plan = make_plan(emap, args.interp, args.k, args.r)
        stack = rescale_channels(plan.apply(cap), args.T, clamp=True)
        for c, length in enumerate(stack.lengths):
            write_frame(out / f"channel_{int(length)}.png", stack.channels[c], bits=16)
            artifacts.append(f"channel_{int(length)}.png")
        (out / "channels.txt").write_text("\n".join(str(int(v)) for v in stack.lengths) + "\n")
        artifacts.append("channels.txt")
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    write_run_manifest(out / "manifest.txt", "simulate", cfg, {"master": args.seed, "capture": seed}, artifacts)
    print(f"wrote capture to {out}")


def cmd_interp_sweep(args):
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    segments = None
    if args.data:
        train_set, test_set = load_segments(args.data, seed=args.seed)
        segments = test_set or train_set
        args.size = segments[0].frames.shape[-1]
    rows = interp_sweep(args.pattern, _csv_strs(args.methods), _csv_ints(args.k), args.r, args.n_images,
                        args.size, args.seed, bit_depth=args.bit_depth, noise=args.noise, segments=segments)
    write_sweep_csv(out, rows)
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    write_run_manifest(str(out) + ".manifest.txt", "interp-sweep", cfg, {"master": args.seed}, [out.name])
    for row in rows:
        print(",".join(str(v) for v in row))


def resolve_train_config(args) -> TrainConfig:
    """Defaults < config file < flags."""
    cfg = desk_config()
    if args.config:
        cfg = config_from_mapping(read_config_file(args.config), cfg)
    flags = {}
    for dest, key in TRAIN_FLAGS.items():
        v = getattr(args, dest, None)
        if v is not None:
            flags[key] = v
    if "pattern_kind" in flags and flags["pattern_kind"] in ("short", "medium", "long", "full"):
        flags.setdefault("interp_method", "none")
    return config_from_mapping(flags, cfg)


def cmd_train(args):
    cfg = resolve_train_config(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.data:
        train_set, test_set = load_segments(args.data, cfg.T, seed=cfg.seed)
    else:
        train_set, test_set = synth_dataset(args.n_train, args.n_test, seed=derive_seed(cfg.seed, "synth-data"),
                                            size=args.size, T=cfg.T)
    if not train_set:
        raise SVPEError(f"dataset {args.data} has no training segments")
    params, emap, rep = train(cfg, train_set, progress=_progress(args))
    rep.write_csv(out / "report.csv")
    dec.save_params(params, rep.decoder_config, out / "decoder.bin")
    artifacts = ["report.csv", "decoder.bin", "decoder.bin.manifest.txt"]
    if emap is not None:
        serialize_pattern(emap, out / "pattern.png")
        artifacts.append("pattern.png")
    if rep.theta is not None:
        rep.theta.numpy().astype("<f4").tofile(out / "theta.f32")
        artifacts.append("theta.f32")
    enc = rep.encoder
    (out / "run.txt").write_text(
        f"pattern = {cfg.pattern_kind}\ninterp = {enc.interp}\nk = {enc.k}\nr = {enc.r}\nT = {enc.T}\n"
        f"bit_depth = {enc.bit_depth}\nnoise = {enc.noise}\n")
    artifacts.append("run.txt")
    if test_set:
        table = evaluate(params, enc, test_set, decoder_config=rep.decoder_config,
                         seed=derive_seed(cfg.seed, "eval"))
        write_metrics_csv(out / "metrics.csv", [s.video for s in test_set], table["per_image"])
        artifacts.append("metrics.csv")
        print(f"test PSNR {table['psnr_mean']:.3f} +/- {table['psnr_std']:.3f} dB, "
              f"SSIM {table['ssim_mean']:.4f} +/- {table['ssim_std']:.4f}")
    write_run_manifest(out / "manifest.txt", "train", asdict(cfg), {"master": cfg.seed}, artifacts)
    print(f"wrote run to {out}")


def _progress(args):
    if not getattr(args, "verbose", False):
        return None

    def report(epoch, tl, vl):
        log.info("epoch %d train %.5f val %.5f", epoch, tl, vl)

    return report


def load_run(run_dir):
    """Decoder, encoder and config of a finished ``train`` run."""
    run = Path(run_dir)
    if not (run / "decoder.bin").exists():
        raise FileNotFoundError(f"{run} holds no decoder.bin")
    params, dconf = dec.load_params(run / "decoder.bin")
    info = read_config_file(run / "run.txt")
    T = int(info["T"])
    kind = info["pattern"]
    emap = load_pattern(run / "pattern.png", T) if kind != FULL else None
    enc = Encoder(kind, emap, info["interp"], int(info["k"]), float(info["r"]), T, int(info["bit_depth"]),
                  info["noise"] == "True")
    return params, dconf, enc


def cmd_eval(args):
    params, dconf, enc = load_run(args.run)
    if args.pattern_file:
        enc = Encoder(enc.kind, load_pattern(args.pattern_file, enc.T), enc.interp, enc.k, enc.r, enc.T,
                      enc.bit_depth, enc.noise)
    if args.interp:
        enc.interp = args.interp
    train_set, test_set = load_segments(args.data, enc.T, seed=args.seed)
    segs = test_set or train_set
    if not segs:
        raise SVPEError(f"dataset {args.data} has no segments")
    table = evaluate(params, enc, segs, decoder_config=dconf, seed=derive_seed(args.seed, "eval"))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(out / "metrics.csv", [s.video for s in segs], table["per_image"])
    cfg = {"run": str(args.run), "data": str(args.data), "interp": enc.interp}
    write_run_manifest(out / "manifest.txt", "eval", cfg, {"master": args.seed}, ["metrics.csv"])
    print(f"PSNR {table['psnr_mean']:.3f} +/- {table['psnr_std']:.3f} dB, "
          f"SSIM {table['ssim_mean']:.4f} +/- {table['ssim_std']:.4f}")


def cmd_reconstruct(args):
    params, dconf, enc = load_run(args.run)
    paths = list_frames(args.frames)[:enc.T]
    if len(paths) < enc.T:
        raise SVPEError(f"{args.frames} has {len(paths)} frames, need {enc.T}")
    from PIL import Image
    planes = []
    for p in paths:
        with Image.open(p) as img:
            arr = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
        planes.append(arr)
    rgb = np.stack(planes)
    out = reconstruct_rgb(params, enc, rgb, decoder_config=dconf, seed=derive_seed(args.seed, "reconstruct"))
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.round(np.clip(out, 0, 1) * 255).astype(np.uint8), mode="RGB").save(args.out)
    cfg = {"run": str(args.run), "frames": str(args.frames)}
    write_run_manifest(str(args.out) + ".manifest.txt", "reconstruct", cfg, {"master": args.seed},
                       [Path(args.out).name])
    print(f"wrote {args.out}")


def cmd_synth_data(args):
    out = Path(args.out_dir)
    train_set, test_set = synth_dataset(args.n_train, args.n_test, seed=derive_seed(args.seed, "synth-data"),
                                        size=args.size, T=args.T, max_speed=args.max_speed)
    write_dataset(out / "train", train_set)
    write_dataset(out / "test", test_set)
    write_manifest(out / "segments.tsv", train_set, test_set, args.seed)
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    write_run_manifest(out / "manifest.txt", "synth-data", cfg, {"master": args.seed}, ["segments.tsv"])
    print(f"wrote {len(train_set)} train and {len(test_set)} test segments to {out}")


def cmd_smoke(args):
    res = pipeline_smoke(args.out_dir, seed=args.seed, size=args.size, epochs=args.epochs)
    cfg = {"size": args.size, "epochs": args.epochs}
    write_run_manifest(Path(args.out_dir) / "manifest.txt", "smoke", cfg, {"master": args.seed},
                       ["train_report.csv", "decoder.bin", "pattern.png", "metrics.csv"])
    print("stages: " + ", ".join(res["stages"]))


# --- parser ----------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="svpe", description="Learned spatially varying pixel exposure lab.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        if seed:
            sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("-v", "--verbose", action="store_true")

    sp = sub.add_parser("pattern", help="generate an exposure pattern file")
    sp.add_argument("--kind", "--pattern", dest="kind", choices=[c for c in PATTERN_CHOICES if c != FULL],
                    default="quad")
    sp.add_argument("--size", type=int, default=512)
    sp.add_argument("--T", type=int, default=8)
    sp.add_argument("--out", required=True)
    common(sp)
    sp.set_defaults(func=cmd_pattern)

    sp = sub.add_parser("simulate", help="simulate one coded capture")
    sp.add_argument("--pattern", choices=PATTERN_CHOICES, default="quad")
    sp.add_argument("--pattern-file")
    sp.add_argument("--frames", help="directory of numbered grayscale PNG frames")
    sp.add_argument("--interp", choices=INTERP_CHOICES, default="scatter")
    sp.add_argument("--k", type=int, default=3)
    sp.add_argument("--r", type=float, default=1.0)
    sp.add_argument("--size", type=int, default=64)
    sp.add_argument("--T", type=int, default=8)
    sp.add_argument("--bit-depth", type=int, default=8)
    sp.add_argument("--out-dir", required=True)
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("interp-sweep", help="time/accuracy table of interpolation methods")
    sp.add_argument("--pattern", choices=["quad", "nonad", "uniform", "poisson"], default="quad")
    sp.add_argument("--methods", default="bilinear,scatter")
    sp.add_argument("--k", default="3,4,5")
    sp.add_argument("--r", type=float, default=1.0)
    sp.add_argument("--size", type=int, default=128)
    sp.add_argument("--n-images", type=int, default=8)
    sp.add_argument("--bit-depth", type=int, default=0)
    sp.add_argument("--noise", action="store_true", help="add sensor noise to the mosaic")
    sp.add_argument("--data")
    sp.add_argument("--out", "--out-csv", dest="out", default="interp_sweep.csv")
    common(sp)
    sp.set_defaults(func=cmd_interp_sweep)

    sp = sub.add_parser("train", help="train decoder (and learned pattern)")
    sp.add_argument("--config", help="flat key=value file of training settings")
    sp.add_argument("--pattern", choices=PATTERN_CHOICES)
    sp.add_argument("--interp", choices=INTERP_CHOICES)
    sp.add_argument("--k", type=int)
    sp.add_argument("--r", type=float)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--batch", type=int)
    sp.add_argument("--lr-decoder", type=float)
    sp.add_argument("--lr-exposure", type=float)
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--depth", type=int)
    sp.add_argument("--bit-depth", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--size", type=int, default=64)
    sp.add_argument("--data", help="dataset directory (default: synthesize)")
    sp.add_argument("--n-train", type=int, default=48)
    sp.add_argument("--n-test", type=int, default=24)
    sp.add_argument("--out-dir", required=True)
    common(sp, seed=False)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="evaluate a trained run on a dataset")
    sp.add_argument("--run", required=True, help="output directory of a train run")
    sp.add_argument("--data", required=True)
    sp.add_argument("--pattern-file")
    sp.add_argument("--interp", choices=INTERP_CHOICES)
    sp.add_argument("--out-dir", required=True)
    common(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("reconstruct", help="per-channel RGB reconstruction of a frame burst")
    sp.add_argument("--run", required=True)
    sp.add_argument("--frames", required=True, help="directory of numbered RGB PNG frames")
    sp.add_argument("--out", required=True)
    common(sp)
    sp.set_defaults(func=cmd_reconstruct)

    sp = sub.add_parser("synth-data", help="write a synthetic moving-shapes dataset")
    sp.add_argument("--n-train", type=int, default=48)
    sp.add_argument("--n-test", type=int, default=24)
    sp.add_argument("--size", type=int, default=64)
    sp.add_argument("--T", type=int, default=8)
    sp.add_argument("--max-speed", type=float, default=1.0)
    sp.add_argument("--out-dir", required=True)
    common(sp)
    sp.set_defaults(func=cmd_synth_data)

    sp = sub.add_parser("smoke", help="synth-data -> train -> eval at toy scale")
    sp.add_argument("--size", type=int, default=32)
    sp.add_argument("--epochs", type=int, default=3)
    sp.add_argument("--out-dir", required=True)
    common(sp)
    sp.set_defaults(func=cmd_smoke)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    torch.set_num_threads(max(1, torch.get_num_threads()))
    try:
        args.func(args)
    except UsageError as exc:
        print(f"svpe {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (SVPEError, OSError, ValueError, KeyError, RuntimeError) as exc:
        msg = str(exc)
        if isinstance(exc, FileNotFoundError) and "dataset" not in msg:
            msg = f"dataset or input not found: {msg}"
        print(f"svpe {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

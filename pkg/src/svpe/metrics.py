"""PSNR and SSIM."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

PSNR_CAP = 100.0


@dataclass(frozen=True)
class MetricResult:
    psnr: float
    ssim: float


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b, peak: float = 1.0, cap: float = PSNR_CAP) -> float:
    a, b = _pair(a, b)
    if peak <= 0:
        raise ValueError("peak must be positive")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return cap
    return min(cap, 10.0 * math.log10(peak * peak / mse))


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    return g / g.sum()


def _filter_valid(img, g):
    # separable 'valid' correlation
    k = len(g)
    H, W = img.shape
    rows = sum(g[i] * img[i:H - k + 1 + i, :] for i in range(k))
    return sum(g[j] * rows[:, j:W - k + 1 + j] for j in range(k))


def ssim_map(a, b, win: int = 11, sigma: float = 1.5, k1: float = 0.01, k2: float = 0.03, peak: float = 1.0):
    a, b = _pair(a, b)
    if a.ndim != 2:
        raise ValueError("ssim expects single-channel 2-D images")
    if a.shape[0] < win or a.shape[1] < win:
        raise ValueError(f"images of shape {a.shape} are smaller than the {win}x{win} window")
    g = gaussian_window(win, sigma)
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2
    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a**2
    var_b = _filter_valid(b * b, g) - mu_b**2
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a, b, **kw) -> float:
    """Mean local SSIM, 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03."""
    return float(np.mean(ssim_map(a, b, **kw)))


def evaluate_pair(pred, gt, peak: float = 1.0) -> MetricResult:
    return MetricResult(psnr(pred, gt, peak), ssim(pred, gt, peak=peak))


def summarize(results):
    ps = np.array([r.psnr for r in results])
    ss = np.array([r.ssim for r in results])
    return {"psnr_mean": float(ps.mean()), "psnr_std": float(ps.std()),
            "ssim_mean": float(ss.mean()), "ssim_std": float(ss.std())}


def write_metrics_csv(path, ids, results):
    """Per-image rows then ``mean`` and ``std`` summary rows."""
    summ = summarize(results)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["image_id", "psnr", "ssim"])
        for i, r in zip(ids, results):
            w.writerow([i, f"{r.psnr:.6f}", f"{r.ssim:.6f}"])
        w.writerow(["mean", f"{summ['psnr_mean']:.6f}", f"{summ['ssim_mean']:.6f}"])
        w.writerow(["std", f"{summ['psnr_std']:.6f}", f"{summ['ssim_std']:.6f}"])
    return summ

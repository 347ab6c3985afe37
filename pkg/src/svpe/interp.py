"""Mosaic expansion: one full-resolution channel per exposure length.

Every method is linear in the raw capture, so each is compiled once per
exposure map into an :class:`InterpPlan` (neighbour indices and weights) and
then applied to any number of captures, in numpy or in torch.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from scipy.spatial import cKDTree

from ._accel import njit, resolve_backend
from .errors import ClassAbsentError, PatternError
from .patterns import ExposureMap


@dataclass(frozen=True)
class ChannelStack:
    channels: np.ndarray  # (C, H, W)
    lengths: np.ndarray

    @property
    def C(self) -> int:
        return self.channels.shape[0]


@dataclass(frozen=True, eq=False)
class InterpPlan:
    """``out[c].flat[p] = sum_k w[c, p, k] * raw.flat[idx[c, p, k]] / sum_k w[c, p, k]``."""

    lengths: np.ndarray
    idx: np.ndarray  # (C, H*W, K) int64
    weights: np.ndarray  # (C, H*W, K) float64
    shape: tuple
    method: str

    def apply(self, raw) -> ChannelStack:
        image = raw.image if hasattr(raw, "image") else np.asarray(raw, dtype=np.float64)
        flat = np.asarray(image, dtype=np.float64).reshape(-1)
        vals = flat[self.idx]
        num = self.weights[..., 0] * vals[..., 0]
        den = self.weights[..., 0].copy()
        for k in range(1, self.idx.shape[-1]):
            num = num + self.weights[..., k] * vals[..., k]
            den = den + self.weights[..., k]
        out = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
        return ChannelStack(out.reshape(len(self.lengths), *self.shape), self.lengths.copy())

    def torch_tensors(self, dtype=torch.float32):
        w = self.weights
        den = w.sum(-1, keepdims=True)
        wn = np.divide(w, den, out=np.zeros_like(w), where=den > 0)
        return torch.from_numpy(self.idx.copy()), torch.from_numpy(wn).to(dtype)

    def apply_torch(self, raw: torch.Tensor, tensors=None) -> torch.Tensor:
        """Differentiable apply: ``raw`` (B, H, W) -> (B, C, H, W)."""
        idx, wn = self.torch_tensors(raw.dtype) if tensors is None else tensors
        B = raw.shape[0]
        flat = raw.reshape(B, -1)
        C, P, K = idx.shape
        vals = flat[:, idx.reshape(-1)].reshape(B, C, P, K)
        return (vals * wn).sum(-1).reshape(B, C, *self.shape)


# --- neighbour search ---------------------------------------------------------

class NeighborIndex:
    """Per-class k-d trees over pixel coordinates.

    Queries are exact; equal distances are ordered by row-major position.
    """

    def __init__(self, emap: ExposureMap):
        self.emap = emap
        self.shape = emap.shape
        self._coords = {}
        self._trees = {}
        for c in emap.lengths:
            rc = np.argwhere(emap.values == c)  # row-major order
            self._coords[int(c)] = rc
            self._trees[int(c)] = cKDTree(rc)

    def count(self, cls) -> int:
        rc = self._coords.get(int(cls))
        return 0 if rc is None else len(rc)

    def coords(self, cls) -> np.ndarray:
        if self.count(cls) == 0:
            raise ClassAbsentError(f"no pixels of exposure length {cls}")
        return self._coords[int(cls)]

    def query_many(self, points, cls, n):
        """Neighbour indices (into :meth:`coords`) and integer squared distances."""
        rc = self.coords(cls)
        points = np.atleast_2d(np.asarray(points, dtype=np.int64))
        n_eff = min(n, len(rc))
        k = min(len(rc), n_eff + 16)
        _, cand = self._trees[int(cls)].query(points, k=k)
        cand = np.asarray(cand).reshape(len(points), k)
        d2 = ((rc[cand] - points[:, None, :]) ** 2).sum(-1)
        order = np.argsort(d2 * len(rc) + cand, axis=1, kind="stable")
        d2s = np.take_along_axis(d2, order, 1)
        cands = np.take_along_axis(cand, order, 1)
        # candidates beyond the k-th may tie with the n-th; settle those with a ball query
        if k < len(rc):
            risky = np.nonzero(d2s[:, -1] <= d2s[:, n_eff - 1])[0]
            for r in risky:
                ball = np.array(
                    self._trees[int(cls)].query_ball_point(points[r], np.sqrt(d2s[r, n_eff - 1]) + 1e-9),
                    dtype=np.int64,
                )
                bd2 = ((rc[ball] - points[r]) ** 2).sum(-1)
                o = np.argsort(bd2 * len(rc) + ball, kind="stable")[:n_eff]
                cands[r, :n_eff] = ball[o]
                d2s[r, :n_eff] = bd2[o]
        return cands[:, :n_eff], d2s[:, :n_eff]

    def query(self, p, cls, n):
        """The ``n`` nearest class-``cls`` pixels to ``p`` as (row, col) pairs."""
        cand, _ = self.query_many([p], cls, n)
        return [tuple(int(v) for v in self._coords[int(cls)][i]) for i in cand[0]]


def build_neighbor_index(emap: ExposureMap) -> NeighborIndex:
    return NeighborIndex(emap)


def _scatter_search(values, cls, n, out_idx, out_d2):
    # ring search outward in Chebyshev radius; exact for Euclidean distance
    H, W = values.shape
    big = np.int64(1) << 62
    max_r = max(H, W)
    bd = np.empty(n, dtype=np.int64)
    bi = np.empty(n, dtype=np.int64)
    for i in range(H):
        for j in range(W):
            p = i * W + j
            if values[i, j] == cls:
                out_idx[p, 0] = p
                out_d2[p, 0] = 0
                for k in range(1, n):
                    out_idx[p, k] = p
                    out_d2[p, k] = -1
                continue
            for k in range(n):
                bd[k] = big
                bi[k] = big
            for R in range(1, max_r + 1):
                for di in range(-R, R + 1):
                    ii = i + di
                    if ii < 0 or ii >= H:
                        continue
                    edge = di == -R or di == R
                    step = 1 if edge else 2 * R
                    for dj in range(-R, R + 1, step):
                        jj = j + dj
                        if jj < 0 or jj >= W or values[ii, jj] != cls:
                            continue
                        d2 = di * di + dj * dj
                        q = ii * W + jj
                        if d2 > bd[n - 1] or (d2 == bd[n - 1] and q > bi[n - 1]):
                            continue
                        k = n - 1
                        while k > 0 and (bd[k - 1] > d2 or (bd[k - 1] == d2 and bi[k - 1] > q)):
                            bd[k] = bd[k - 1]
                            bi[k] = bi[k - 1]
                            k -= 1
                        bd[k] = d2
                        bi[k] = q
                # nothing outside ring R can be closer than (R + 1)
                if bd[n - 1] < (R + 1) * (R + 1):
                    break
            for k in range(n):
                out_idx[p, k] = bi[k]
                out_d2[p, k] = bd[k]


_scatter_search_nb = njit(cache=True)(_scatter_search)


def _scatter_search_numpy(emap, cls, n, index):
    H, W = emap.shape
    flat = emap.values.reshape(-1)
    out_idx = np.repeat(np.arange(H * W, dtype=np.int64)[:, None], n, axis=1)
    out_d2 = np.full((H * W, n), -1, dtype=np.int64)
    out_d2[:, 0] = 0
    miss = np.nonzero(flat != cls)[0]
    if len(miss):
        pts = np.stack(np.divmod(miss, W), axis=1)
        cand, d2 = index.query_many(pts, cls, n)
        rc = index.coords(cls)
        out_idx[miss] = rc[cand, 0] * W + rc[cand, 1]
        out_d2[miss] = d2
    return out_idx, out_d2


def scatter_neighbors(emap: ExposureMap, cls: int, n: int, backend=None, index=None):
    """Flat neighbour indices and squared distances, shape (H*W, n_eff).

    Sampled sites point at themselves with d2 = 0 in slot 0 and d2 = -1
    (unused) in the remaining slots.
    """
    count = int(np.count_nonzero(emap.values == cls))
    if count == 0:
        raise ClassAbsentError(f"no pixels of exposure length {cls}")
    n_eff = min(n, count)
    if resolve_backend(backend) == "numba":
        H, W = emap.shape
        out_idx = np.empty((H * W, n_eff), dtype=np.int64)
        out_d2 = np.empty((H * W, n_eff), dtype=np.int64)
        _scatter_search_nb(np.ascontiguousarray(emap.values), int(cls), n_eff, out_idx, out_d2)
        return out_idx, out_d2
    return _scatter_search_numpy(emap, cls, n_eff, index or NeighborIndex(emap))


def idw_weights(d2, r):
    """Inverse-distance weights ``1 / d**r``; self-sites get 1 and unused slots 0."""
    d2 = np.asarray(d2)
    w = np.zeros(d2.shape, dtype=np.float64)
    pos = d2 > 0
    w[pos] = 1.0 / (np.sqrt(d2[pos].astype(np.float64)) ** r)
    w[d2 == 0] = 1.0
    return w


def _resolve_lengths(emap, lengths, allow_absent):
    present = emap.lengths
    if lengths is None:
        return present
    lengths = np.asarray(lengths, dtype=np.int64)
    if not allow_absent:
        missing = np.setdiff1d(lengths, present)
        if len(missing):
            raise ClassAbsentError(f"no pixels of exposure length(s) {missing.tolist()}")
    return lengths


def _pad(blocks, K):
    out_i, out_w = [], []
    for idx, w in blocks:
        P, k = idx.shape
        if k < K:
            idx = np.concatenate([idx, np.repeat(idx[:, :1], K - k, 1)], 1)
            w = np.concatenate([w, np.zeros((P, K - k))], 1)
        out_i.append(idx)
        out_w.append(w)
    return np.stack(out_i), np.stack(out_w)


def scatter_plan(emap: ExposureMap, n: int = 3, r: float = 1.0, lengths=None, allow_absent=False, backend=None):
    if n < 1:
        raise ValueError("need at least one neighbour")
    if r <= 0:
        raise ValueError("inverse-distance power must be positive")
    lengths = _resolve_lengths(emap, lengths, allow_absent)
    backend = resolve_backend(backend)
    index = NeighborIndex(emap) if backend == "numpy" else None
    P = emap.height * emap.width
    blocks = []
    for c in lengths:
        if not np.any(emap.values == c):
            blocks.append((np.zeros((P, 1), dtype=np.int64), np.zeros((P, 1))))
            continue
        idx, d2 = scatter_neighbors(emap, int(c), n, backend=backend, index=index)
        blocks.append((idx, idw_weights(d2, r)))
    idx, w = _pad(blocks, max(b[0].shape[1] for b in blocks))
    return InterpPlan(np.asarray(lengths), idx, w, emap.shape, "scatter")


def scatter_interp(raw, emap: ExposureMap, n: int = 3, r: float = 1.0, backend=None) -> ChannelStack:
    return scatter_plan(emap, n, r, backend=backend).apply(raw)


def tile_period(emap: ExposureMap):
    """Smallest period in {1, 2, 3} shared by rows and columns, else None."""
    v = emap.values
    for p in (1, 2, 3):
        if v.shape[0] < p or v.shape[1] < p:
            continue
        if np.array_equal(v[p:], v[:-p]) and np.array_equal(v[:, p:], v[:, :-p]):
            return p
    return None


def _axis_weights(n_pix, offset, period):
    # lattice rows offset, offset + period, ...; clamp at the borders
    n_lat = (n_pix - offset + period - 1) // period
    u = (np.arange(n_pix) - offset) / period
    u0 = np.floor(u).astype(np.int64)
    f = u - u0
    lo = np.clip(u0, 0, n_lat - 1)
    hi = np.clip(u0 + 1, 0, n_lat - 1)
    return offset + lo * period, offset + hi * period, 1.0 - f, f


def bilinear_plan(emap: ExposureMap, lengths=None, allow_absent=False):
    period = tile_period(emap)
    if period is None:
        raise PatternError("bilinear interpolation needs a 2x2- or 3x3-periodic exposure map")
    lengths = _resolve_lengths(emap, lengths, allow_absent)
    H, W = emap.shape
    tile = emap.values[:period, :period]
    flat = emap.values.reshape(-1)
    self_idx = np.arange(H * W, dtype=np.int64)
    blocks = []
    for c in lengths:
        offsets = np.argwhere(tile == c)
        if len(offsets) == 0:
            blocks.append((np.zeros((H * W, 1), dtype=np.int64), np.zeros((H * W, 1))))
            continue
        m = len(offsets)
        idx = np.empty((H, W, 4 * m), dtype=np.int64)
        w = np.empty((H, W, 4 * m))
        # a class with several tile sites is the mean of one bilinear field per site
        for s, (a, b) in enumerate(offsets):
            r0, r1, wr0, wr1 = _axis_weights(H, a, period)
            c0, c1, wc0, wc1 = _axis_weights(W, b, period)
            for k, (rr, wr) in enumerate(((r0, wr0), (r1, wr1))):
                for l, (cc, wc) in enumerate(((c0, wc0), (c1, wc1))):
                    idx[:, :, 4 * s + 2 * k + l] = rr[:, None] * W + cc[None, :]
                    w[:, :, 4 * s + 2 * k + l] = (wr[:, None] * wc[None, :]) / m
        idx = idx.reshape(H * W, -1)
        w = w.reshape(H * W, -1)
        hit = flat == c
        idx[hit] = self_idx[hit, None]
        w[hit] = 0.0
        w[hit, 0] = 1.0
        blocks.append((idx, w))
    idx, w = _pad(blocks, max(b[0].shape[1] for b in blocks))
    return InterpPlan(np.asarray(lengths), idx, w, emap.shape, "bilinear")


def bilinear_interp(raw, emap: ExposureMap) -> ChannelStack:
    """Separable bilinear fill over each class's sampling lattice.

    Direct route, equal to ``bilinear_plan(emap).apply(raw)`` without
    materialising the plan.
    """
    period = tile_period(emap)
    if period is None:
        raise PatternError("bilinear interpolation needs a 2x2- or 3x3-periodic exposure map")
    image = raw.image if hasattr(raw, "image") else np.asarray(raw, dtype=np.float64)
    H, W = emap.shape
    tile = emap.values[:period, :period]
    lengths = emap.lengths
    out = np.empty((len(lengths), H, W))
    for ci, c in enumerate(lengths):
        offsets = np.argwhere(tile == c)
        acc = np.zeros((H, W))
        for a, b in offsets:
            r0, r1, wr0, wr1 = _axis_weights(H, a, period)
            c0, c1, wc0, wc1 = _axis_weights(W, b, period)
            rows = wr0[:, None] * image[r0] + wr1[:, None] * image[r1]
            acc += wc0[None, :] * rows[:, c0] + wc1[None, :] * rows[:, c1]
        acc /= len(offsets)
        hit = emap.values == c
        acc[hit] = image[hit]
        out[ci] = acc
    return ChannelStack(out, lengths.copy())


def mask_plan(emap: ExposureMap, lengths=None, allow_absent=False):
    """No interpolation: each channel keeps only its own sampled sites, zeros elsewhere."""
    lengths = _resolve_lengths(emap, lengths, allow_absent)
    flat = emap.values.reshape(-1)
    idx = np.broadcast_to(np.arange(flat.size, dtype=np.int64)[None, :, None], (len(lengths), flat.size, 1)).copy()
    w = np.stack([(flat == c).astype(np.float64) for c in lengths])[..., None]
    return InterpPlan(np.asarray(lengths), idx, w, emap.shape, "none")


def make_plan(emap: ExposureMap, method: str = "scatter", n: int = 3, r: float = 1.0, lengths=None,
              allow_absent=False, backend=None) -> InterpPlan:
    if method == "scatter":
        return scatter_plan(emap, n, r, lengths, allow_absent, backend)
    if method == "bilinear":
        return bilinear_plan(emap, lengths, allow_absent)
    if method == "none":
        return mask_plan(emap, lengths, allow_absent)
    raise ValueError(f"unknown interpolation method {method!r}")


def rescale_channels(stack: ChannelStack, T: int, enabled: bool = True, clamp: bool = False) -> ChannelStack:
    """Bring each channel to full-exposure brightness by ``T / length``."""
    if not enabled:
        return stack
    lengths = np.asarray(stack.lengths, dtype=np.float64)
    if np.any(lengths <= 0):
        raise ValueError("exposure lengths must be positive")
    out = stack.channels * (T / lengths)[:, None, None]
    if clamp:
        out = np.clip(out, 0.0, 1.0)
    return ChannelStack(out, stack.lengths)

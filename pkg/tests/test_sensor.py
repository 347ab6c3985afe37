import numpy as np
import pytest
import torch

from svpe import patterns as pt
from svpe import sensor as sn
from svpe.errors import DimensionError


def _const(v, h=4, w=4, T=8):
    return np.full((T, h, w), v)


@pytest.mark.parametrize("length,expected", [(8, 1.0), (4, 0.5), (1, 0.125)])
def test_integrate_constant_scene(length, expected):
    emap = pt.gen_global(4, 4, length)
    assert np.allclose(sn.integrate(_const(1.0), emap), expected)


def test_integrate_impulse():
    rng = np.random.default_rng(0)
    emap = pt.ExposureMap(rng.integers(1, 9, size=(5, 5)), 8)
    frames = np.zeros((8, 5, 5))
    frames[0, 2, 3] = 1.0
    out = sn.integrate(frames, emap)
    expect = np.zeros((5, 5))
    expect[2, 3] = 1 / 8
    assert np.array_equal(out, expect)


def test_integrate_matches_direct_sum():
    rng = np.random.default_rng(1)
    emap = pt.gen_uniform_random(6, 7, 2)
    frames = rng.random((8, 6, 7))
    ref = np.zeros((6, 7))
    for i in range(6):
        for j in range(7):
            ref[i, j] = frames[: emap.values[i, j], i, j].sum() / 8
    assert np.allclose(sn.integrate(frames, emap), ref, atol=1e-15)


def test_integrate_shape_errors():
    emap = pt.gen_quad(4, 4)
    with pytest.raises(DimensionError):
        sn.integrate(np.zeros((7, 4, 4)), emap)
    with pytest.raises(DimensionError):
        sn.integrate(np.zeros((8, 4, 6)), emap)


def test_integrate_linear_and_monotone():
    rng = np.random.default_rng(2)
    emap = pt.gen_uniform_random(8, 8, 0)
    x, y = rng.random((2, 8, 8, 8))
    lhs = sn.integrate(0.3 * x + 0.7 * y, emap)
    assert np.allclose(lhs, 0.3 * sn.integrate(x, emap) + 0.7 * sn.integrate(y, emap))
    prev = None
    for length in range(1, 9):
        cur = sn.integrate(x, pt.gen_global(8, 8, length))
        if prev is not None:
            assert np.all(cur >= prev)
        prev = cur


def test_global_maps_match_baselines():
    rng = np.random.default_rng(3)
    f = rng.random((8, 5, 5))
    assert np.allclose(sn.integrate(f, pt.gen_global(5, 5, 1)), f[0] / 8)
    assert np.allclose(sn.integrate(f, pt.gen_global(5, 5, 8)), sn.burst_average(f))


def test_frame_stack_validation():
    with pytest.raises(ValueError):
        sn.FrameStack(np.full((8, 2, 2), 1.5))
    with pytest.raises(DimensionError):
        sn.FrameStack(np.zeros((2, 2)))
    assert sn.FrameStack(np.zeros((8, 3, 3))).T == 8


def test_zero_noise_is_exact():
    img = np.random.default_rng(0).random((16, 16))
    assert np.array_equal(sn.add_noise(img, sn.NOISELESS, 5), img)


def test_read_noise_only_std():
    out = sn.add_noise(np.zeros(10**6), sn.NoiseParams(0.01, 0.005), 1)
    assert abs(out.std() - 0.01) / 0.01 < 0.02


def test_noise_variance_half():
    out = sn.add_noise(np.full(10**6, 0.5), sn.NoiseParams(1e-3, 1e-2), 2)
    target = 1e-6 + 5e-3
    assert abs(out.var() - target) / target < 0.02


def test_noise_unbiased():
    n = 200_000
    x = np.full(n, 0.3)
    p = sn.NoiseParams(0.02, 0.005)
    out = sn.add_noise(x, p, 3)
    assert abs(out.mean() - 0.3) < 3 * sn.noise_std(0.3, p) / np.sqrt(n)


def test_noise_seeded():
    x = np.full((8, 8), 0.4)
    p = sn.NoiseParams(0.01, 0.001)
    assert np.array_equal(sn.add_noise(x, p, 9), sn.add_noise(x, p, 9))
    assert not np.array_equal(sn.add_noise(x, p, 9), sn.add_noise(x, p, 10))


def test_noise_rejects_negative():
    with pytest.raises(ValueError):
        sn.add_noise(np.array([-0.1]), sn.NoiseParams(0.01, 0.0), 0)


def test_response():
    assert sn.apply_response(np.array([1.2, -0.1]), 0).tolist() == [1.0, 0.0]
    assert sn.apply_response(np.array([0.5]), 8)[0] == 128 / 255
    assert sn.apply_response(np.array([0.3]), 0)[0] == 0.3


def test_gains():
    for seed in range(50):
        g = sn.sample_gains(seed)
        assert 1e-3 <= g.sigma_r <= 3e-2
        assert 1e-4 <= g.sigma_s <= 1e-2
    assert sn.sample_gains(4) == sn.sample_gains(4)
    mean_r = np.mean([sn.sample_gains(s).sigma_r for s in range(10_000)])
    assert abs(mean_r - 0.0155) / 0.0155 < 0.03


def test_capture_noiseless_quad():
    cap = sn.capture(_const(1.0), pt.gen_quad(4, 4), 0, gains=sn.NOISELESS)
    tile = np.array([[1.0, 0.5], [0.5, 0.125]])
    assert np.array_equal(cap.image, np.tile(tile, (2, 2)))


def test_capture_reduces_to_integrate():
    rng = np.random.default_rng(4)
    f = rng.random((8, 6, 6))
    emap = pt.gen_uniform_random(6, 6, 1)
    assert np.array_equal(sn.capture(f, emap, 0, gains=sn.NOISELESS).image, sn.integrate(f, emap))


def test_capture_deterministic_and_in_range():
    rng = np.random.default_rng(5)
    f = rng.random((8, 16, 16))
    emap = pt.gen_quad(16, 16)
    a, b = sn.capture(f, emap, 11, 8), sn.capture(f, emap, 11, 8)
    assert np.array_equal(a.image, b.image) and a.gains == b.gains
    assert a.image.min() >= 0 and a.image.max() <= 1


def test_integrate_torch_matches_numpy():
    rng = np.random.default_rng(6)
    f = rng.random((8, 5, 5))
    emap = pt.gen_uniform_random(5, 5, 3)
    out = sn.integrate_torch(torch.tensor(f), torch.tensor(emap.values, dtype=torch.float64))
    assert np.allclose(out.numpy(), sn.integrate(f, emap), atol=1e-15)


def test_surrogate_gradient():
    rng = np.random.default_rng(7)
    f = torch.tensor(rng.random((8, 3, 3)))
    q = torch.tensor([[1.0, 4.0, 8.0], [2.0, 7.0, 8.0], [5.0, 3.0, 1.0]], requires_grad=True)
    sn.integrate_torch(f, q.double()).sum().backward()
    qi = q.detach().long().numpy()
    for i in range(3):
        for j in range(3):
            k = qi[i, j] if qi[i, j] < 8 else 7  # next frame, or the last one at q = T
            assert q.grad[i, j].item() == pytest.approx(f[k, i, j].item() / 8)


def test_surrogate_frame_gradient():
    f = torch.rand(8, 2, 2, dtype=torch.float64, requires_grad=True)
    q = torch.tensor([[1.0, 8.0], [3.0, 5.0]], dtype=torch.float64)
    sn.integrate_torch(f, q).sum().backward()
    for i, j, n in [(0, 0, 1), (0, 1, 8), (1, 0, 3), (1, 1, 5)]:
        col = f.grad[:, i, j].numpy()
        assert np.allclose(col[:n], 1 / 8) and np.allclose(col[n:], 0)

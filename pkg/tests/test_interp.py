import numpy as np
import pytest
import torch

from svpe import interp as ip
from svpe import patterns as pt
from svpe._accel import HAVE_NUMBA
from svpe.errors import ClassAbsentError, PatternError

from oracles import brute_neighbors, brute_scatter

BACKENDS = ["numpy"] + (["numba"] if HAVE_NUMBA else [])


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("n,r", [(1, 1), (3, 1), (5, 2)])
def test_scatter_matches_brute_force(backend, n, r):
    rng = np.random.default_rng(n * 10 + r)
    emap = pt.gen_uniform_random(16, 16, n + r)
    raw = rng.random((16, 16))
    got = ip.scatter_plan(emap, n, r, backend=backend).apply(raw).channels
    assert np.array_equal(got, brute_scatter(raw, emap.values, n, r))


def test_backends_agree_on_poisson():
    emap = pt.gen_poisson_random(24, 24, 3)
    for cls in emap.lengths:
        a = ip.scatter_neighbors(emap, int(cls), 4, backend="numpy")
        if HAVE_NUMBA:
            b = ip.scatter_neighbors(emap, int(cls), 4, backend="numba")
            assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_index_matches_brute_force_queries():
    emap = pt.gen_uniform_random(32, 32, 8)
    index = ip.build_neighbor_index(emap)
    rng = np.random.default_rng(0)
    for _ in range(100):
        p = tuple(int(v) for v in rng.integers(0, 32, 2))
        cls = int(rng.integers(1, 9))
        n = int(rng.integers(1, 6))
        expect = [rc for _, _, rc in brute_neighbors(emap.values, p, cls, n)]
        assert index.query(p, cls, n) == expect


def test_quad_nearest_short_is_diagonal():
    emap = pt.gen_quad(8, 8)
    index = ip.build_neighbor_index(emap)
    (a, b), = index.query((2, 2), 1, 1)
    assert (a - 2) ** 2 + (b - 2) ** 2 == 2


def test_single_class_map():
    emap = pt.gen_global(5, 5, 4)
    index = ip.build_neighbor_index(emap)
    assert index.query((1, 1), 4, 1) == [(1, 1)]
    with pytest.raises(ClassAbsentError):
        index.query((1, 1), 8, 1)


def test_constant_raw():
    emap = pt.gen_poisson_random(16, 16, 0)
    out = ip.scatter_interp(np.full((16, 16), 0.37), emap, 3, 1).channels
    assert np.allclose(out, 0.37)


def test_hand_case_one_third():
    # class-2 samples at distance 1 (value 0) and 2 (value 1) from (0, 0)
    v = np.array([[1, 2, 2, 1, 1]])
    raw = np.array([[0.9, 0.0, 1.0, 0.9, 0.9]])
    stack = ip.scatter_interp(raw, pt.ExposureMap(v, 8), n=2, r=1)
    c = list(stack.lengths).index(2)
    assert stack.channels[c, 0, 0] == pytest.approx(1 / 3)


def test_pass_through_all_methods():
    rng = np.random.default_rng(1)
    raw = rng.random((12, 12))
    for emap, method in [(pt.gen_quad(12, 12), "bilinear"), (pt.gen_nonad(12, 12, 2), "bilinear"),
                         (pt.gen_uniform_random(12, 12, 3), "scatter"), (pt.gen_quad(12, 12), "none")]:
        stack = ip.make_plan(emap, method).apply(raw)
        for c, length in enumerate(stack.lengths):
            hit = emap.values == length
            assert np.array_equal(stack.channels[c][hit], raw[hit])


def test_range_preserved():
    rng = np.random.default_rng(2)
    raw = rng.random((16, 16))
    emap = pt.gen_uniform_random(16, 16, 4)
    stack = ip.scatter_interp(raw, emap, 4, 2)
    for c, length in enumerate(stack.lengths):
        s = raw[emap.values == length]
        assert stack.channels[c].min() >= s.min() and stack.channels[c].max() <= s.max()


def test_r_invariant_when_equidistant():
    # quad length-1 sites seen from a length-8 site: four diagonal neighbours at sqrt(2)
    emap = pt.gen_quad(8, 8)
    raw = np.random.default_rng(3).random((8, 8))
    c = list(emap.lengths).index(1)
    a = ip.scatter_interp(raw, emap, 4, 1).channels[c, 2, 2]
    b = ip.scatter_interp(raw, emap, 4, 2).channels[c, 2, 2]
    assert a == pytest.approx(b, abs=1e-15)


def test_absent_class():
    emap = pt.gen_quad(4, 4)
    with pytest.raises(ClassAbsentError):
        ip.scatter_plan(emap, lengths=[1, 2])
    plan = ip.scatter_plan(emap, lengths=[1, 2], allow_absent=True)
    assert np.all(plan.apply(np.ones((4, 4))).channels[1] == 0)


def test_bad_scatter_args():
    emap = pt.gen_quad(4, 4)
    with pytest.raises(ValueError):
        ip.scatter_plan(emap, n=0)
    with pytest.raises(ValueError):
        ip.scatter_plan(emap, r=0)


def test_bilinear_constant_and_half():
    emap = pt.gen_quad(8, 8)
    assert np.allclose(ip.bilinear_interp(np.full((8, 8), 0.2), emap).channels, 0.2)
    # length-1 lattice sits at odd (row, col); (2, 2) is midway between (1,1), (1,3), (3,1), (3,3)
    raw = np.zeros((8, 8))
    raw[3, 1] = raw[3, 3] = 1.0
    c = list(emap.lengths).index(1)
    assert ip.bilinear_interp(raw, emap).channels[c, 2, 2] == pytest.approx(0.5)


def test_bilinear_separable_interior():
    emap = pt.gen_quad(10, 10)
    raw = np.random.default_rng(4).random((10, 10))
    ch = ip.bilinear_interp(raw, emap).channels[list(emap.lengths).index(8)]
    # length-8 lattice is even rows/cols; (3, 4) sits between rows 2 and 4 on column 4
    assert ch[3, 4] == pytest.approx(0.5 * (raw[2, 4] + raw[4, 4]))
    assert ch[3, 5] == pytest.approx(0.25 * (raw[2, 4] + raw[2, 6] + raw[4, 4] + raw[4, 6]))


@pytest.mark.parametrize("emap", [pt.gen_quad(12, 12), pt.gen_nonad(12, 12, 7)])
def test_bilinear_direct_equals_plan(emap):
    raw = np.random.default_rng(5).random((12, 12))
    a = ip.bilinear_interp(raw, emap).channels
    b = ip.bilinear_plan(emap).apply(raw).channels
    assert np.allclose(a, b, atol=1e-14)


def test_bilinear_rejects_random_map():
    with pytest.raises(PatternError):
        ip.bilinear_interp(np.zeros((8, 8)), pt.gen_uniform_random(8, 8, 0))


def test_nearest_neighbour_when_n_is_one():
    emap = pt.gen_uniform_random(12, 12, 6)
    raw = np.random.default_rng(6).random((12, 12))
    stack = ip.scatter_interp(raw, emap, 1, 1)
    for c, cls in enumerate(stack.lengths):
        for i, j in [(0, 0), (5, 7), (11, 3)]:
            (_, _, (a, b)), = brute_neighbors(emap.values, (i, j), cls, 1)
            assert stack.channels[c, i, j] == pytest.approx(raw[a, b], rel=1e-15)


def test_torch_apply_matches_numpy():
    emap = pt.gen_poisson_random(16, 16, 1)
    raw = np.random.default_rng(7).random((2, 16, 16))
    plan = ip.scatter_plan(emap)
    got = plan.apply_torch(torch.tensor(raw)).numpy()
    for b in range(2):
        assert np.allclose(got[b], plan.apply(raw[b]).channels, atol=1e-14)


def test_rescale():
    stack = ip.ChannelStack(np.full((3, 2, 2), 0.125), np.array([1, 4, 8]))
    out = ip.rescale_channels(stack, 8)
    assert np.allclose(out.channels[0], 1.0)
    assert np.allclose(out.channels[2], 0.125)
    assert ip.rescale_channels(stack, 8, enabled=False) is stack
    assert ip.rescale_channels(ip.ChannelStack(np.ones((1, 1, 1)), np.array([1])), 8, clamp=True).channels.max() == 1

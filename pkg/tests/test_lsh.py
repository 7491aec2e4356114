import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import racekit as rk
from racekit import lsh, oracle
from racekit.errors import DimensionMismatchError, InvalidParameterError, ZeroVectorError

# Single-hash 2-stable collision probability at bandwidth 0.5, distance 0.5,
# frozen from the closed form and confirmed by Monte Carlo below.
PSTABLE_HALF = 0.3687463803725072


def test_new_family_smoke():
    fam = rk.new_family("srp", dim=2, depth=1, width=2, seed=7)
    assert fam.kind is rk.HashKind.SRP
    # one sign bit covers the two buckets exactly
    assert 2 ** fam.depth == fam.width

    fam = rk.new_family("euclidean", dim=3, depth=2, width=100, bandwidth=0.5, seed=1)
    assert fam.bandwidth == 0.5


@pytest.mark.parametrize("kwargs", [
    dict(kind="srp", dim=0, depth=1, width=2),
    dict(kind="srp", dim=2, depth=0, width=2),
    dict(kind="srp", dim=2, depth=1, width=1),
    dict(kind="euclidean", dim=2, depth=1, width=4),              # missing bandwidth
    dict(kind="euclidean", dim=2, depth=1, width=4, bandwidth=0.0),
    dict(kind="euclidean", dim=2, depth=1, width=4, bandwidth=-1.0),
    dict(kind="srp", dim=2, depth=1, width=4, seed=-1),
])
def test_new_family_rejects_bad_parameters(kwargs):
    with pytest.raises(InvalidParameterError):
        rk.new_family(**kwargs)


def test_srp_bandwidth_is_dropped():
    fam = rk.new_family("srp", dim=2, depth=2, width=8, bandwidth=3.0, seed=0)
    assert fam.bandwidth is None


def _forced_params(proj_rows):
    proj = np.asarray(proj_rows, dtype=np.float64)
    rows = proj.shape[0]
    return lsh._RowParams(proj=proj, offsets=None,
                          mix_a=np.ones((rows, 1), dtype=np.uint64),
                          mix_b=np.zeros(rows, dtype=np.uint64))


def test_srp_single_bit_with_forced_projection(monkeypatch):
    fam = rk.new_family("srp", dim=2, depth=1, width=2, seed=7)
    monkeypatch.setattr(lsh, "_row_params", lambda f, rows: _forced_params([[1.0, 0.0]]))
    assert rk.hash_point(fam, 0, [3.0, 0.0]) == 1
    assert rk.hash_point(fam, 0, [-3.0, 1.0]) == 0
    # sign(0) counts as positive so the streaming path never fails
    assert rk.hash_point(fam, 0, [0.0, 0.0]) == 1


def test_srp_scale_invariance():
    fam = rk.new_family("srp", dim=3, depth=4, width=50, seed=5)
    x = np.array([0.3, -1.2, 0.7])
    a = rk.hash_batch(fam, 200, x[None, :])
    b = rk.hash_batch(fam, 200, (2.0 * x)[None, :])
    assert (a == b).all()


def test_euclidean_identical_points_always_collide():
    fam = rk.new_family("euclidean", dim=4, depth=3, width=64, bandwidth=0.7, seed=9)
    x = np.array([0.1, 0.2, -0.3, 0.4])
    a = rk.hash_batch(fam, 500, x[None, :])
    b = rk.hash_batch(fam, 500, x.copy()[None, :])
    assert (a == b).all()


@pytest.mark.parametrize("kind,kwargs", [
    ("srp", {}),
    ("euclidean", {"bandwidth": 0.5}),
])
def test_buckets_in_range_and_deterministic(kind, kwargs):
    fam = rk.new_family(kind, dim=3, depth=5, width=17, seed=123, **kwargs)
    pts = np.random.default_rng(0).standard_normal((50, 3))
    buckets = rk.hash_batch(fam, 300, pts)
    assert buckets.min() >= 0 and buckets.max() < fam.width
    again = rk.hash_batch(rk.new_family(kind, dim=3, depth=5, width=17, seed=123,
                                        **kwargs), 300, pts)
    assert (buckets == again).all()


def test_hash_point_agrees_with_any_batch_size():
    for kind, kwargs in [("srp", {}), ("euclidean", {"bandwidth": 0.4})]:
        for depth in (1, 4, 8):
            fam = rk.new_family(kind, dim=2, depth=depth, width=50, seed=11, **kwargs)
            x = np.array([1.0, 0.3])
            big = rk.hash_batch(fam, 120, x[None, :])[:, 0]
            assert all(rk.hash_point(fam, r, x) == big[r] for r in range(120))


def test_rows_use_distinct_parameters():
    fam = rk.new_family("srp", dim=2, depth=2, width=8, seed=1)
    params = lsh._row_params(fam, 10)
    flat = params.proj.reshape(10, -1)
    assert len({tuple(row) for row in map(tuple, flat)}) == 10


def test_dimension_mismatch():
    fam = rk.new_family("srp", dim=3, depth=2, width=8, seed=1)
    with pytest.raises(DimensionMismatchError):
        rk.hash_batch(fam, 10, np.zeros((4, 2)))
    with pytest.raises(DimensionMismatchError):
        rk.collision_probability(fam, np.zeros(3), np.zeros(2))


def test_collision_probability_srp_closed_forms():
    fam = rk.new_family("srp", dim=2, depth=1, width=2, seed=0)
    assert rk.collision_probability(fam, [1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.5)
    fam4 = rk.new_family("srp", dim=2, depth=4, width=16, seed=0)
    assert rk.collision_probability(fam4, [0.4, -0.2], [0.4, -0.2]) == pytest.approx(1.0)
    # opposite direction never collides
    assert rk.collision_probability(fam4, [1.0, 0.0], [-1.0, 0.0]) == pytest.approx(0.0)


def test_collision_probability_rejects_zero_vectors():
    fam = rk.new_family("srp", dim=2, depth=1, width=2, seed=0)
    with pytest.raises(ZeroVectorError):
        rk.collision_probability(fam, [0.0, 0.0], [1.0, 0.0])
    with pytest.raises(ZeroVectorError):
        rk.collision_probability(fam, [1.0, 0.0], [0.0, 0.0])


def test_pstable_collision_matches_monte_carlo():
    fam = rk.new_family("euclidean", dim=3, depth=1, width=100, bandwidth=0.5, seed=1)
    x = np.zeros(3)
    y = np.array([0.5, 0.0, 0.0])
    analytic = rk.collision_probability(fam, x, y)
    assert analytic == pytest.approx(PSTABLE_HALF, abs=1e-12)
    mc = oracle.monte_carlo_collision(fam, x, y, trials=100_000, seed=21)
    assert abs(analytic - mc.value) <= 0.01


def test_srp_collision_scale_invariant():
    fam = rk.new_family("srp", dim=3, depth=3, width=8, seed=0)
    x = np.array([0.7, -0.1, 0.4])
    y = np.array([-0.3, 0.9, 0.2])
    base = rk.collision_probability(fam, x, y)
    assert rk.collision_probability(fam, 5.0 * x, y) == pytest.approx(base)
    assert rk.collision_probability(fam, x, 0.01 * y) == pytest.approx(base)


@pytest.mark.parametrize("kind,kwargs", [
    ("srp", {}),
    ("euclidean", {"bandwidth": 0.8}),
    ("asymmetric-srp", {}),
])
def test_self_collision_is_one(kind, kwargs):
    fam = rk.new_family(kind, dim=4, depth=3, width=32, seed=2, **kwargs)
    rng = np.random.default_rng(7)
    for _ in range(5):
        x = rng.standard_normal(4)
        assert rk.collision_probability(fam, x, x) == pytest.approx(1.0)


def test_kernel_monotone_in_angle_and_distance():
    srp = rk.new_family("srp", dim=2, depth=3, width=8, seed=0)
    angles = np.linspace(0.0, math.pi, 25)
    vals = [rk.collision_probability(srp, [1.0, 0.0],
                                     [math.cos(a), math.sin(a)]) for a in angles]
    assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))

    euc = rk.new_family("euclidean", dim=3, depth=2, width=64, bandwidth=0.5, seed=0)
    dists = np.linspace(0.0, 3.0, 25)
    vals = [rk.collision_probability(euc, np.zeros(3), [d, 0.0, 0.0]) for d in dists]
    assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("kind,depth,width,kwargs", [
    ("srp", 4, 50, {}),                     # identity bucketing, no allowance
    ("srp", 8, 50, {}),                     # 2^8 codes squeezed into 50 buckets
    ("euclidean", 2, 100, {"bandwidth": 0.5}),
])
def test_empirical_collision_matches_kernel_plus_allowance(kind, depth, width, kwargs):
    fam = rk.new_family(kind, dim=3, depth=depth, width=width, seed=13, **kwargs)
    x = np.array([0.1, 0.25, -0.2])
    y = x + np.array([0.18, -0.1, 0.12])
    k = rk.collision_probability(fam, x, y)
    rows = 10_000
    bx = rk.hash_batch(fam, rows, x[None, :])[:, 0]
    by = rk.hash_batch(fam, rows, y[None, :])[:, 0]
    observed = float((bx == by).mean())
    upper = k + (1.0 - k) / width
    sigma = math.sqrt(max(upper * (1 - upper), k * (1 - k)) / rows)
    assert k - 3 * sigma <= observed <= upper + 3 * sigma


def test_rebucket_allowance_values():
    identity = rk.new_family("srp", dim=2, depth=4, width=16, seed=0)
    assert rk.rebucket_allowance(identity, 1000) == 0.0
    squeezed = rk.new_family("srp", dim=2, depth=8, width=16, seed=0)
    assert rk.rebucket_allowance(squeezed, 1000) == pytest.approx(1000 / 16)
    euc = rk.new_family("euclidean", dim=2, depth=1, width=50, bandwidth=1.0, seed=0)
    assert rk.rebucket_allowance(euc, 500) == pytest.approx(10.0)


def test_asymmetric_pair_transform_examples():
    zp, zm = rk.asymmetric_pair_transform([1.0, 2.0], 3.0)
    assert zp.tolist() == [1.0, 2.0, 3.0]
    assert zm.tolist() == [-1.0, -2.0, -3.0]
    zp, zm = rk.asymmetric_pair_transform([0.0], 0.0)
    assert zp.tolist() == [0.0, 0.0] and zm.tolist() == [0.0, 0.0]
    zp, zm = rk.asymmetric_pair_transform([1.0], -1.0)
    assert zp.tolist() == [1.0, -1.0] and zm.tolist() == [-1.0, 1.0]


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=6),
       st.floats(-1e6, 1e6))
def test_asymmetric_pair_transform_is_a_negated_concat(x, y):
    zp, zm = rk.asymmetric_pair_transform(x, y)
    assert zp.shape == (len(x) + 1,)
    assert np.array_equal(zm, -zp)
    assert zp[-1] == y and np.array_equal(zp[:-1], np.asarray(x))

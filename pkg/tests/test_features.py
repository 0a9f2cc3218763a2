import numpy as np
import pytest

from splitgnc.errors import ValidationError
from splitgnc.features import (
    CorrespondenceSet,
    FeatureParams,
    compute_fpfh,
    estimate_normals,
    feature_bins,
    match_descriptors,
    mutual_match,
    pair_features,
    prepare_cloud,
    usable_descriptors,
)
from splitgnc.geometry import PointCloud, apply

from .conftest import random_transform
from .oracles import naive_fpfh


def _sphere(rng, n=400):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def test_correspondence_set_rejects_duplicates():
    with pytest.raises(ValidationError):
        CorrespondenceSet([0, 1, 0], [1, 2, 1])
    assert len(CorrespondenceSet([0, 0], [1, 2])) == 2  # one-to-many is allowed
    with pytest.raises(ValidationError):
        CorrespondenceSet([0, -1], [0, 1])


def test_paired_points_order():
    src = np.arange(12.0).reshape(4, 3)
    tgt = -np.arange(9.0).reshape(3, 3)
    p, q = CorrespondenceSet([3, 0], [1, 2]).paired_points(src, tgt)
    assert np.array_equal(p, tgt[[1, 2]])
    assert np.array_equal(q, src[[3, 0]])
    with pytest.raises(ValidationError):
        CorrespondenceSet([4], [0]).paired_points(src, tgt)


def test_sphere_normals_point_outward(rng):
    pts = _sphere(rng, 2000)
    c = estimate_normals(PointCloud(pts), radius=0.25)
    assert np.all(np.einsum("ij,ij->i", c.normals, pts) >= 0.99)


def test_isolated_points_get_invalid_normals():
    pts = np.array([[0.0, 0, 0], [0.01, 0, 0], [0, 0.01, 0], [5.0, 5, 5]])
    c = estimate_normals(PointCloud(pts), radius=0.05)
    assert c.valid_normals.tolist() == [True, True, True, False]


def test_pair_features_parallel_normals_on_line():
    a, f, t = pair_features(np.zeros((1, 3)), np.array([[1.0, 0, 0]]),
                            np.array([[1.0, 0, 0]]), np.array([[1.0, 0, 0]]))
    assert (a[0], f[0], t[0]) == (0.0, 1.0, 0.0)
    assert [int(b[0]) for b in feature_bins(a, f, t)] == [5, 10, 5]


def test_pair_features_hand_computed_frame():
    # u = (0,0,1), v = (0,-1,0), w = (1,0,0); target normal (0,1,0)
    a, f, t = pair_features(np.zeros((1, 3)), np.array([[0, 0, 1.0]]),
                            np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]))
    assert np.allclose([a[0], f[0], t[0]], [-1.0, 0.0, 0.0])
    assert [int(b[0]) for b in feature_bins(a, f, t)] == [0, 5, 5]


def test_pair_features_symmetric_under_swap(rng):
    ps, pt = rng.normal(size=(200, 3)), rng.normal(size=(200, 3))
    ns, nt = _sphere(rng, 200), _sphere(rng, 200)
    fwd = np.array(pair_features(ps, ns, pt, nt))
    bwd = np.array(pair_features(pt, nt, ps, ns))
    assert np.allclose(fwd, bwd, atol=1e-12)


def test_pair_features_match_naive(rng):
    ps, pt = rng.normal(size=(100, 3)), rng.normal(size=(100, 3))
    ns, nt = _sphere(rng, 100), _sphere(rng, 100)
    got = np.array(pair_features(ps, ns, pt, nt)).T
    ref = np.array([naive_fpfh.pair_feature(*map(list, x)) for x in zip(ps, ns, pt, nt)])
    assert np.allclose(got, ref, atol=1e-12)


def test_fpfh_matches_naive_loops(rng):
    pts = rng.uniform(size=(80, 3))
    c = estimate_normals(PointCloud(pts), radius=0.3)
    got = compute_fpfh(c, 0.25)
    ref = np.array(naive_fpfh.fpfh(pts.tolist(), c.normals.tolist(), 0.25))
    assert np.allclose(got, ref, atol=1e-9)


def test_fpfh_blocks_sum_to_100(rng):
    c = estimate_normals(PointCloud(_sphere(rng, 500)), radius=0.3)
    d = compute_fpfh(c, 0.4)
    sums = d.reshape(-1, 3, 11).sum(axis=2)
    assert np.allclose(sums[usable_descriptors(d)], 100.0)


def test_fpfh_requires_normals():
    with pytest.raises(ValidationError):
        compute_fpfh(PointCloud(np.zeros((3, 3))), 1.0)


def test_fpfh_rigid_invariance(rng):
    c = estimate_normals(PointCloud(rng.uniform(size=(300, 3))), radius=0.2)
    base = compute_fpfh(c, 0.3)
    for _ in range(5):
        moved = apply(random_transform(rng), c)
        assert np.max(np.abs(compute_fpfh(moved, 0.3) - base)) <= 1e-6


def test_mutual_match_toy_1d():
    corr = mutual_match([0.0, 10.0], [1.0, 2.0])
    assert list(zip(corr.source_indices.tolist(), corr.target_indices.tolist())) == [(0, 0)]


def test_mutual_match_matches_brute_force(rng):
    for _ in range(10):
        dp = rng.integers(0, 4, size=(30, 3)).astype(float)  # ties on purpose
        dq = rng.integers(0, 4, size=(25, 3)).astype(float)
        corr = mutual_match(dp, dq)
        got = list(zip(corr.source_indices.tolist(), corr.target_indices.tolist()))
        assert got == naive_fpfh.reciprocal_pairs(dp.tolist(), dq.tolist())


def test_mutual_match_respects_masks(rng):
    dp = rng.normal(size=(40, 4))
    dq = rng.normal(size=(35, 4))
    vp, vq = rng.uniform(size=40) < 0.7, rng.uniform(size=35) < 0.7
    corr = mutual_match(dp, dq, vp, vq)
    got = list(zip(corr.source_indices.tolist(), corr.target_indices.tolist()))
    assert got == naive_fpfh.reciprocal_pairs(dp.tolist(), dq.tolist(), vp, vq)


def test_match_descriptors_skips_zero_rows():
    dp = np.array([[0.0, 0.0], [1.0, 1.0]])
    dq = np.array([[0.0, 0.0], [1.0, 1.1]])
    corr = match_descriptors(dp, dq)
    assert corr.source_indices.tolist() == [1] and corr.target_indices.tolist() == [1]


def test_prepare_cloud_self_match(standin):
    params = FeatureParams(voxel_size=0.05)
    c, d = prepare_cloud(standin, params)
    corr = match_descriptors(d, d)
    assert len(corr) > 0.9 * usable_descriptors(d).sum()
    assert np.array_equal(corr.source_indices, corr.target_indices)
    assert c.has_normals

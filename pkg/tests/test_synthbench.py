import json

import numpy as np
import pytest

from splitgnc.errors import ConfigError
from splitgnc.geometry import PointCloud, RigidTransform, rotation_about_axis
from splitgnc.splitting import SplitConfig
from splitgnc.synthbench import (
    CSV_COLUMNS,
    DecoyConfig,
    Method,
    ScenarioConfig,
    generate_pair,
    is_success,
    make_standin_cloud,
    random_rotation,
    rotation_error,
    run_campaign,
    translation_error,
)

# geodesic angles from tests/oracles/compute_oracles.py (ROT_CASES)
ROT_ORACLE = [((1, 2, 3), 40.0, (0, 0, 1), 25.0, 24.746961724107354),
              ((1, 0, 0), 170.0, (0, 1, 0), 100.0, 173.57691647154564)]


def _t(axis, deg, t=(0, 0, 0)):
    return RigidTransform(rotation_about_axis(axis, np.radians(deg)), t)


def test_standin_cloud_shape():
    c = make_standin_cloud()
    assert len(c) == 5000
    assert np.array_equal(c.points, make_standin_cloud().points)
    extent = c.points.max(axis=0) - c.points.min(axis=0)
    assert 1.0 < extent.max() < 2.5


def test_errors_trivial():
    a = _t([0, 0, 1], 180.0)
    assert rotation_error(a, a) == 0.0 and translation_error(a, a) == 0.0
    assert rotation_error(a, RigidTransform.identity()) == pytest.approx(180.0)
    assert translation_error(_t([0, 0, 1], 0, (3, 4, 0)), RigidTransform.identity()) == 5.0


@pytest.mark.parametrize("ax_a,da,ax_b,db,expected", ROT_ORACLE)
def test_rotation_error_matches_quaternion_oracle(ax_a, da, ax_b, db, expected):
    assert rotation_error(_t(ax_a, da), _t(ax_b, db)) == pytest.approx(expected, abs=1e-9)


def test_random_rotation_is_proper(rng):
    for _ in range(20):
        R = random_rotation(rng)
        assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
        assert np.isclose(np.linalg.det(R), 1.0)


def test_success_rule():
    assert is_success(10.0, 1.0) and not is_success(10.01, 0.0) and not is_success(0.0, 1.01)


def test_clean_pair_is_exact(bench_source):
    pair = generate_pair(bench_source, ScenarioConfig(outlier_rate=0.0), 3)
    assert np.array_equal(pair.target.points, pair.ground_truth.transform_points(bench_source.points))
    assert not pair.outlier_mask.any()


def test_outliers_on_unit_sphere(rng):
    src = PointCloud(rng.normal(size=(1000, 3)))
    pair = generate_pair(src, ScenarioConfig(outlier_rate=0.5), 11)
    assert pair.outlier_mask.sum() == 500
    # sphere centre: centroid of the target before corruption
    clean = pair.ground_truth.transform_points(src.points)
    center = clean.mean(axis=0)
    r = np.linalg.norm(pair.target.points[pair.outlier_mask] - center, axis=1)
    assert np.allclose(r, 1.0, atol=1e-9)


def test_generation_is_deterministic(bench_source):
    cfg = ScenarioConfig(outlier_rate=0.8, inlier_noise_sigma=0.01)
    a = generate_pair(bench_source, cfg, np.random.SeedSequence([1, 2]))
    b = generate_pair(bench_source, cfg, np.random.SeedSequence([1, 2]))
    assert np.array_equal(a.target.points, b.target.points)
    assert np.array_equal(a.ground_truth.as_matrix(), b.ground_truth.as_matrix())


def test_decoy_layout(bench_source):
    n = len(bench_source)
    pair = generate_pair(bench_source, ScenarioConfig(outlier_rate=0.6, decoy=DecoyConfig()), 0)
    n_in = n - round(0.6 * n)
    assert not pair.outlier_mask[:n_in].any() and pair.outlier_mask[n_in:].all()
    assert pair.decoy_mask.sum() == round(0.45 * n)
    decoy_t = pair.ground_truth @ RigidTransform(np.eye(3), [1.5, 0, 0])
    d = pair.decoy_mask
    assert np.allclose(pair.target.points[d], decoy_t.transform_points(bench_source.points[d]))


def test_decoy_fraction_bounded():
    with pytest.raises(ConfigError):
        ScenarioConfig(outlier_rate=0.3, decoy=DecoyConfig(decoy_fraction=0.45))


def test_scenario_validation():
    for bad in ({"outlier_rate": 1.0}, {"outlier_rate": -0.1}, {"trials": 0}, {"inlier_noise_sigma": -1}):
        with pytest.raises(ConfigError):
            ScenarioConfig(**bad)


def test_campaign_clean_all_succeed(bench_source):
    res = run_campaign(bench_source, [ScenarioConfig(outlier_rate=0.0, trials=10)], [Method("m")])
    assert res.aggregates[0].success_rate == 1.0
    assert len(res.records) == 10


def test_campaign_csv_and_records(bench_source):
    methods = [Method("s1"), Method("s4", split=SplitConfig(num_splits=4))]
    cfgs = [ScenarioConfig(outlier_rate=r, trials=3) for r in (0.2, 0.5)]
    res = run_campaign(bench_source, cfgs, methods)
    lines = res.to_csv(timing=False).splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 1 + 4
    again = run_campaign(bench_source, cfgs, methods)
    assert again.to_csv(timing=False) == res.to_csv(timing=False)
    for line in res.records_jsonl().splitlines():
        rec = json.loads(line)
        assert rec["success"] == is_success(rec["rotation_error"], rec["translation_error"])


def test_failed_trials_are_recorded():
    line = PointCloud(np.c_[np.arange(30.0), np.zeros(30), np.zeros(30)])
    res = run_campaign(line, [ScenarioConfig(outlier_rate=0.0, trials=2)], [Method("m")])
    assert all(not r.success and r.error for r in res.records)
    assert res.aggregates[0].success_rate == 0.0


def test_campaign_needs_inputs(bench_source):
    with pytest.raises(ConfigError):
        run_campaign(bench_source, [], [Method("m")])

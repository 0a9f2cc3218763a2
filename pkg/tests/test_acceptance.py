"""Acceptance criteria, one test each, at the stated tolerances.

Every test records a PASS/FAIL line; the lines are printed in the pytest
terminal summary, or directly when this file is run as a script.
"""

import time

import numpy as np
import pytest

from splitgnc import cli, fileio
from splitgnc.features import compute_fpfh, estimate_normals, mutual_match
from splitgnc.geometry import PointCloud, RigidTransform, apply, voxel_downsample
from splitgnc.solver import GncConfig, geman_mcclure_loss, irls_solve, irls_weights, weighted_svd
from splitgnc.splitting import SCHEMES, SplitConfig, partition, solve_split_pairs
from splitgnc.synthbench import (
    DecoyConfig,
    Method,
    ScenarioConfig,
    make_standin_cloud,
    random_rotation,
    rotation_error,
    run_campaign,
    translation_error,
)

from .oracles import naive_fpfh
from .test_fileio import FIXTURES, MALFORMED

RESULTS = {}
CAMPAIGN_RATES = (0.5, 0.8, 0.9, 0.95)


def report(number, title, ok, detail):
    RESULTS[number] = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    assert ok, detail


def _rng_transform(rng, scale=2.0):
    return RigidTransform(random_rotation(rng), rng.uniform(-scale, scale, 3))


@pytest.fixture(scope="module")
def campaign(bench_source):
    methods = [Method("s1", split=SplitConfig(num_splits=1)),
               Method("s4", split=SplitConfig(num_splits=4))]
    cfgs = [ScenarioConfig(outlier_rate=r, trials=40, seed=2024) for r in CAMPAIGN_RATES]
    start = time.perf_counter()
    res = run_campaign(bench_source, cfgs, methods)
    return res, time.perf_counter() - start, len(bench_source)


def test_c01_exact_recovery():
    rng = np.random.default_rng(1)
    irls_solve(rng.normal(size=(100, 3)), rng.normal(size=(100, 3)))  # warm-up
    worst_rot = worst_tr = worst_ms = 0.0
    for _ in range(100):
        gt = _rng_transform(rng)
        q = rng.normal(size=(100, 3))
        p = gt.transform_points(q)
        t0 = time.perf_counter()
        est = irls_solve(p, q).transform
        worst_ms = max(worst_ms, (time.perf_counter() - t0) * 1e3)
        worst_rot = max(worst_rot, rotation_error(est, gt))
        worst_tr = max(worst_tr, translation_error(est, gt))
    ok = worst_rot < 1e-6 and worst_tr < 1e-9 and worst_ms < 5.0
    report(1, "exact recovery", ok,
           f"max rot {worst_rot:.2e} deg (<1e-6), max trans {worst_tr:.2e} m (<1e-9), "
           f"slowest solve {worst_ms:.2f} ms (<5)")


def test_c02_weight_matches_loss_slope():
    rng = np.random.default_rng(2)
    r = 10 ** rng.uniform(-2, 1, 1000)
    alpha = 10 ** rng.uniform(-2, 2, 1000)
    h = 1e-6 * np.maximum(r, 1e-3)
    worst = 0.0
    ratios = []
    for ri, ai, hi in zip(r, alpha, h):
        fd = (geman_mcclure_loss([ri + hi], ai) - geman_mcclure_loss([ri - hi], ai)) / (2 * hi)
        wr = irls_weights([ri], ai)[0] * ri
        worst = max(worst, abs(wr - fd) / abs(fd))
        ratios.append(wr / fd)
    report(2, "w*|r| vs dE/d|r| (central FD)", worst <= 1e-6,
           f"max relative error {worst:.3g} (<=1e-6); median w*|r| / FD = {np.median(ratios):.6f}")


def test_c03_weighted_svd_oracles():
    rng = np.random.default_rng(3)
    beaten = 0
    for _ in range(50):
        q = rng.normal(size=(10, 3))
        p = _rng_transform(rng).transform_points(q) + 0.3 * rng.normal(size=(10, 3))
        w = rng.uniform(0.05, 1.0, 10)
        est = weighted_svd(p, q, w)
        sse = np.sum(w * np.sum((p - est.transform_points(q)) ** 2, axis=1))
        Rs = np.stack([random_rotation(rng) for _ in range(10_000)])
        ts = rng.uniform(-3, 3, size=(10_000, 3)) + est.translation
        pred = np.einsum("kij,nj->kni", Rs, q) + ts[:, None, :]
        cand = np.sum(w * np.sum((p[None] - pred) ** 2, axis=2), axis=1)
        beaten += int(np.any(cand < sse))
    grid = np.linspace(-np.pi, np.pi, 200_001)
    worst_angle = 0.0
    for _ in range(10):
        q = np.c_[rng.normal(size=(10, 2)), np.zeros(10)]
        th = rng.uniform(-np.pi, np.pi)
        c, s = np.cos(th), np.sin(th)
        p = q @ np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]]).T + [*rng.normal(size=2), 0]
        p[:, :2] += 0.2 * rng.normal(size=(10, 2))
        w = rng.uniform(0.05, 1.0, 10)
        est = weighted_svd(p, q, w)
        got = np.arctan2(est.rotation[1, 0], est.rotation[0, 0])
        # best angle on a dense grid, translation solved in closed form per angle
        pb, qb = w @ p / w.sum(), w @ q / w.sum()
        pc, qc = p[:, :2] - pb[:2], q[:, :2] - qb[:2]
        cg, sg = np.cos(grid)[:, None], np.sin(grid)[:, None]
        rx = pc[None, :, 0] - (cg * qc[None, :, 0] - sg * qc[None, :, 1])
        ry = pc[None, :, 1] - (sg * qc[None, :, 0] + cg * qc[None, :, 1])
        best = grid[np.argmin((w * (rx ** 2 + ry ** 2)).sum(axis=1))]
        diff = abs((got - best + np.pi) % (2 * np.pi) - np.pi)
        worst_angle = max(worst_angle, diff)
    ok = beaten == 0 and worst_angle <= 1e-3
    report(3, "weighted SVD optimality", ok,
           f"{beaten}/50 instances beaten by a random candidate (need 0); "
           f"planar grid deviation {worst_angle:.2e} rad (<=1e-3)")


def test_c04_robustness_curve(campaign):
    res, seconds, n = campaign
    lines, ok = [], 1.4e3 <= n <= 1.6e3 and seconds < 300
    for a in res.aggregates:
        need = 0.95 if a.outlier_rate <= 0.9 else 0.5
        ok &= a.success_rate >= need
        lines.append(f"{a.method}@{a.outlier_rate}={a.success_rate:.3f}")
    report(4, "synthetic success curve", ok,
           f"N={n}, {' '.join(lines)} (>=0.95 up to 0.9, >=0.5 at 0.95), {seconds:.1f} s (<300)")


def test_c05_rotation_error_at_95(campaign):
    res, _, _ = campaign
    parts, ok = [], True
    for label in ("s1", "s4"):
        errs = [r.rotation_error for r in res.records
                if r.method == label and r.outlier_rate == 0.95 and r.success]
        med = float(np.median(errs)) if errs else float("inf")
        ok &= med <= 2.0
        parts.append(f"{label} median {med:.3g} deg over {len(errs)} successes")
    report(5, "rotation error at 95% outliers", ok, "; ".join(parts) + " (<=2)")


def test_c06_splitting_on_decoy(bench_source):
    cfg = ScenarioConfig(outlier_rate=0.6, trials=40, seed=606, decoy=DecoyConfig(decoy_fraction=0.45))
    methods = [Method(f"s{s}", split=SplitConfig(num_splits=s)) for s in (1, 2, 4)]
    res = run_campaign(bench_source, [cfg], methods)
    rate = {a.method: a.success_rate for a in res.aggregates}
    ok = all(rate[m] >= 0.7 and rate[m] > rate["s1"] for m in ("s2", "s4"))
    report(6, "splitting beats decoy outliers", ok,
           f"s1={rate['s1']:.3f} s2={rate['s2']:.3f} s4={rate['s4']:.3f} "
           "(s2, s4 >= 0.7 and > s1)")


def test_c07_splitting_correctness():
    rng = np.random.default_rng(7)
    identical = 0
    for _ in range(20):
        gt = _rng_transform(rng)
        q = rng.normal(size=(300, 3))
        p = gt.transform_points(q)
        bad = rng.uniform(size=300) < 0.5
        p[bad] = rng.normal(size=(bad.sum(), 3))
        a = solve_split_pairs(p, q, GncConfig(), SplitConfig(num_splits=1)).transform
        b = irls_solve(p, q, GncConfig()).transform
        identical += int(np.array_equal(a.as_matrix(), b.as_matrix()))

    def check(n, s, scheme, pts):
        blocks = partition(n, SplitConfig(num_splits=s, scheme=scheme, seed=n), pts)
        sizes = np.fromiter((len(b) for b in blocks), int, count=s)
        allpos = np.concatenate(blocks)
        return (len(blocks) == s and sizes.max() - sizes.min() <= 1 and allpos.size == n
                and np.array_equal(np.bincount(allpos, minlength=n), np.ones(n, dtype=int)))

    pts = rng.normal(size=(10_000, 3))
    bad_cases, checked = [], 0
    for n in range(3, 10_001):
        smax = n // 3
        # every s for small n; the extremes plus a few interior values beyond
        ss = range(1, smax + 1) if n <= 300 else sorted({1, 2, 3, 4, smax - 1, smax, 1 + n % smax})
        schemes = SCHEMES if n <= 300 or n % 97 == 0 else ("contiguous",)
        for s in ss:
            for scheme in schemes:
                checked += 1
                if not check(n, s, scheme, pts[:n]):
                    bad_cases.append((n, s, scheme))
    ok = identical == 20 and not bad_cases
    report(7, "splitting correctness", ok,
           f"s=1 bit-identical on {identical}/20; partition checks {checked} (N, s, scheme) cases, "
           f"{len(bad_cases)} violations")


def test_c08_performance(standin):
    src = voxel_downsample(standin, 0.04)
    keep = np.sort(np.random.default_rng(8).choice(len(src), 1600, replace=False))
    rng = np.random.default_rng(80)
    gt = _rng_transform(rng)
    q = src.points[keep]
    p = gt.transform_points(q)
    bad = rng.uniform(size=1600) < 0.9
    p[bad] = rng.normal(size=(bad.sum(), 3))

    def timed(s):
        best = []
        for _ in range(5):
            t0 = time.perf_counter()
            solve_split_pairs(p, q, GncConfig(), SplitConfig(num_splits=s))
            best.append((time.perf_counter() - t0) * 1e3)
        return float(np.median(best))

    timed(1)
    t1, t4 = timed(1), timed(4)
    ok = t1 <= 100.0 and t4 <= 10 * t1
    report(8, "performance envelope", ok,
           f"N=1600: s=1 {t1:.1f} ms (<=100), s=4 {t4:.1f} ms = {t4 / t1:.2f}x (<=10x)")


def test_c09_fpfh_sanity(standin):
    rng = np.random.default_rng(9)
    cloud = PointCloud(standin.points[np.sort(rng.choice(len(standin), 500, replace=False))])
    cloud = estimate_normals(cloud, radius=0.15)
    base = compute_fpfh(cloud, 0.25)
    worst = max(float(np.max(np.abs(compute_fpfh(apply(_rng_transform(rng), cloud), 0.25) - base)))
                for _ in range(20))
    mismatched = 0
    for k in range(50):
        dp = rng.normal(size=(rng.integers(5, 60), 33))
        dq = rng.normal(size=(rng.integers(5, 60), 33))
        if k % 2:  # coarse values force exact distance ties
            dp, dq = np.round(dp), np.round(dq)
        corr = mutual_match(dp, dq)
        got = list(zip(corr.source_indices.tolist(), corr.target_indices.tolist()))
        mismatched += int(got != naive_fpfh.reciprocal_pairs(dp.tolist(), dq.tolist()))
    ok = worst <= 1e-6 and mismatched == 0
    report(9, "FPFH invariance and mutual matching", ok,
           f"max bin deviation {worst:.2e} over 20 transforms (<=1e-6); "
           f"{mismatched}/50 mutual-match instances differ from brute force")


def test_c10_io(tmp_path, capsys):
    rng = np.random.default_rng(10)
    failures = 0
    for k in range(100):
        n = int(rng.integers(1, 2000))
        pts = rng.normal(size=(n, 3)) * 10 ** rng.uniform(-3, 3)
        nrm = None
        if k % 2:
            nrm = rng.normal(size=(n, 3))
            nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
        binary, dtype = bool(k % 3), ("double", "float")[k % 4 // 3]
        path = tmp_path / f"c{k}.ply"
        fileio.write_cloud(PointCloud(pts, nrm), path, binary=binary, dtype=dtype)
        back = fileio.read_cloud(path)
        stored = pts if dtype == "double" else pts.astype(np.float32).astype(float)
        failures += int(not np.array_equal(back.points, stored))
    wrong = []
    for name, (_, category) in sorted(MALFORMED.items()):
        code = cli.main(["register", str(FIXTURES / name), str(FIXTURES / "good_ascii.ply")])
        err = capsys.readouterr().err
        if code == 0 or f'"error": "{category}"' not in err:
            wrong.append(name)
    ok = failures == 0 and not wrong
    report(10, "I/O round trip and malformed files", ok,
           f"{100 - failures}/100 clouds round-trip exactly; "
           f"{len(MALFORMED) - len(wrong)}/{len(MALFORMED)} malformed fixtures give the right category "
           f"with nonzero exit{'; wrong: ' + ', '.join(wrong) if wrong else ''}")


if __name__ == "__main__":
    import sys

    code = pytest.main([__file__, "-q", "-p", "no:cacheprovider"])
    sys.exit(code)

"""Synthetic outlier benchmark.

Targets are rigidly moved copies of a source cloud in which a controlled
share of points is pushed radially onto a sphere around the target
centroid. Matches are the identity pairing, so the outlier count is exact.
An optional decoy rewires part of the outliers to agree with a second,
wrong transform, which mimics symmetric scenes.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, RegistrationError
from .features import CorrespondenceSet
from .geometry import PointCloud, RigidTransform, compose, rotation_about_axis
from .solver import GncConfig
from .splitting import SplitConfig, solve_split_pairs

SUCCESS_ROT_DEG = 10.0
SUCCESS_TRANS_M = 1.0
DECOY_OFFSET_M = 1.5

CSV_COLUMNS = (
    "method", "outlier_rate", "trials", "success_rate",
    "median_rot_err_deg", "median_trans_err_m", "mean_wall_ms",
)


def make_standin_cloud(n=5000, seed=0):
    """Procedural stand-in for a scanned standing person.

    Two upright ellipsoidal lobes of slightly different size side by side,
    about 1.7 m tall, with a little surface noise. Loosely left/right
    symmetric on purpose.
    """
    rng = np.random.default_rng(seed)
    lobes = [
        (np.array([-0.17, 0.0, 0.0]), np.array([0.16, 0.13, 0.85])),
        (np.array([0.19, 0.02, -0.05]), np.array([0.18, 0.12, 0.78])),
    ]
    n_left = n // 2
    out = []
    for (center, radii), m in zip(lobes, (n_left, n - n_left)):
        d = rng.normal(size=(m, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        pts = center + d * radii
        # shoulders-ish bulge on the upper half
        pts[:, 0] += 0.04 * np.sign(center[0]) * np.clip(pts[:, 2], 0, None)
        out.append(pts)
    pts = np.concatenate(out)
    pts += rng.normal(scale=0.003, size=pts.shape)
    return PointCloud(pts)


def random_rotation(rng):
    """Uniform rotation on SO(3) from a normalised Gaussian quaternion."""
    qv = rng.normal(size=4)
    w, x, y, z = qv / np.linalg.norm(qv)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def rotation_error(a: RigidTransform, b: RigidTransform) -> float:
    """Geodesic angle between the two rotations, degrees.

    Same value as ``arccos((trace(Ra Rb^T) - 1) / 2)``, but taken with atan2 of
    the skew and trace parts so tiny angles keep full precision.
    """
    R = a.rotation @ b.rotation.T
    c = (np.trace(R) - 1.0) / 2.0
    s = 0.5 * np.linalg.norm([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return float(np.degrees(np.arctan2(s, c)))


def translation_error(a: RigidTransform, b: RigidTransform) -> float:
    return float(np.linalg.norm(a.translation - b.translation))


def is_success(rot_err, trans_err, rot_deg=SUCCESS_ROT_DEG, trans_m=SUCCESS_TRANS_M):
    return bool(rot_err <= rot_deg and trans_err <= trans_m)


@dataclass(frozen=True)
class DecoyConfig:
    """Second, wrong copy of the source that the outlier matches point at.

    Decoy targets are ``ground_truth @ decoy_transform`` applied to the
    source points. ``decoy_fraction`` of all matches hit the copy exactly;
    the remaining outliers are sphere projections of copy points.
    ``decoy_transform=None`` places the copy 1.5 m along the source x axis,
    like a second identical object standing next to the first.
    """

    decoy_fraction: float = 0.45
    decoy_transform: RigidTransform | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    outlier_rate: float = 0.5
    inlier_noise_sigma: float = 0.0
    rotation_magnitude: float | None = None  # degrees; None = uniform on SO(3)
    translation_magnitude: float = 2.0       # half-width of the per-axis box, metres
    trials: int = 40
    seed: int = 0
    decoy: DecoyConfig | None = None
    sphere_radius: float = 1.0
    sphere_center: tuple | None = None       # None = centroid of the assembled target

    def __post_init__(self):
        if not 0.0 <= self.outlier_rate < 1.0:
            raise ConfigError(f"outlier_rate must lie in [0, 1), got {self.outlier_rate}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError(f"trials must be an integer >= 1, got {self.trials}")
        if self.inlier_noise_sigma < 0:
            raise ConfigError("inlier_noise_sigma must be >= 0")
        if self.translation_magnitude < 0:
            raise ConfigError("translation_magnitude must be >= 0")
        if not self.sphere_radius > 0:
            raise ConfigError("sphere_radius must be > 0")
        if self.decoy is not None:
            f = self.decoy.decoy_fraction
            if not 0.0 <= f <= self.outlier_rate + 1e-12:
                raise ConfigError(
                    f"decoy_fraction {f} plus inlier fraction {1 - self.outlier_rate} exceeds 1"
                )


@dataclass(frozen=True, eq=False)
class SyntheticPair:
    source: PointCloud
    target: PointCloud
    correspondences: CorrespondenceSet
    ground_truth: RigidTransform
    outlier_mask: np.ndarray
    decoy_mask: np.ndarray


def _sample_ground_truth(rng, config):
    if config.rotation_magnitude is None:
        R = random_rotation(rng)
    else:
        axis = rng.normal(size=3)
        R = rotation_about_axis(axis, np.radians(config.rotation_magnitude))
    t = rng.uniform(-config.translation_magnitude, config.translation_magnitude, size=3)
    return RigidTransform(R, t)


def _spread(count, total):
    """Boolean mask of length ``total`` with ``count`` evenly spaced True entries."""
    k = np.arange(total)
    return (k + 1) * count // total > k * count // total


def generate_pair(source: PointCloud, config: ScenarioConfig, trial_seed) -> SyntheticPair:
    """Build one corrupted target for ``source`` and the identity matches.

    Without a decoy the corrupted positions are drawn at random. With a
    decoy the inliers occupy the leading positions of the match list, and
    exact decoy matches and sphere outliers are interleaved evenly after
    them, so the structured outliers sit in a different block of the list
    than the inliers.
    """
    if len(source) == 0:
        raise ConfigError("source cloud is empty")
    rng = np.random.default_rng(trial_seed)
    n = len(source)
    gt = _sample_ground_truth(rng, config)
    tgt = gt.transform_points(source.points)
    if config.inlier_noise_sigma > 0:
        tgt = tgt + rng.normal(scale=config.inlier_noise_sigma, size=tgt.shape)

    n_out = int(round(config.outlier_rate * n))
    outlier = np.zeros(n, dtype=bool)
    decoy = np.zeros(n, dtype=bool)
    if config.decoy is None:
        outlier[rng.choice(n, size=n_out, replace=False)] = True
    else:
        n_dec = int(round(config.decoy.decoy_fraction * n))
        n_dec = min(n_dec, n_out)
        outlier[n - n_out:] = True
        decoy[n - n_out:] = _spread(n_dec, n_out)
        dt = config.decoy.decoy_transform
        if dt is None:
            dt = RigidTransform(np.eye(3), [DECOY_OFFSET_M, 0.0, 0.0])
        # every outlier lands on the decoy copy; the sphere step below then
        # corrupts the ones that are not kept exact
        tgt[outlier] = compose(gt, dt).transform_points(source.points[outlier])

    # centroid of the target as assembled so far, decoy copy included
    center = (np.asarray(config.sphere_center, dtype=float)
              if config.sphere_center is not None else tgt.mean(axis=0))
    sphere = outlier & ~decoy
    offsets = tgt[sphere] - center
    norms = np.linalg.norm(offsets, axis=1)
    bad = norms == 0
    if np.any(bad):
        d = rng.normal(size=(int(bad.sum()), 3))
        offsets[bad] = d / np.linalg.norm(d, axis=1, keepdims=True)
        norms[bad] = 1.0
    tgt[sphere] = center + config.sphere_radius * offsets / norms[:, None]

    return SyntheticPair(source, PointCloud(tgt), CorrespondenceSet.identity(n), gt, outlier, decoy)


@dataclass(frozen=True)
class Method:
    label: str
    gnc: GncConfig = field(default_factory=GncConfig)
    split: SplitConfig = field(default_factory=lambda: SplitConfig(num_splits=1))


@dataclass(frozen=True)
class TrialRecord:
    method: str
    outlier_rate: float
    trial: int
    ground_truth: list
    estimate: list | None
    rotation_error: float
    translation_error: float
    success: bool
    wall_time: float  # milliseconds
    error: str | None = None

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True, allow_nan=True)


@dataclass(frozen=True)
class Aggregate:
    method: str
    outlier_rate: float
    trials: int
    success_rate: float
    median_rot_err_deg: float
    median_trans_err_m: float
    mean_wall_ms: float
    rot_err_quantiles: tuple  # 25th, 50th, 75th percentile
    trans_err_quantiles: tuple


@dataclass(frozen=True, eq=False)
class CampaignResult:
    records: list[TrialRecord]
    aggregates: list[Aggregate]

    def to_csv(self, timing=True):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for a in self.aggregates:
            w.writerow([
                a.method, repr(a.outlier_rate), a.trials, repr(a.success_rate),
                repr(a.median_rot_err_deg), repr(a.median_trans_err_m),
                repr(a.mean_wall_ms) if timing else "",
            ])
        return buf.getvalue()

    def records_jsonl(self):
        return "".join(r.to_json() + "\n" for r in self.records)


def trial_seed(config: ScenarioConfig, trial: int):
    return np.random.SeedSequence([int(config.seed), int(trial)])


def run_trial(pair: SyntheticPair, method: Method, trial=0, outlier_rate=0.0,
              thresholds=(SUCCESS_ROT_DEG, SUCCESS_TRANS_M)) -> TrialRecord:
    p, q = pair.correspondences.paired_points(pair.source, pair.target)
    gt = pair.ground_truth
    start = time.perf_counter()
    try:
        est = solve_split_pairs(p, q, method.gnc, method.split).transform
        err = None
    except RegistrationError as exc:
        est, err = None, f"{exc.category}: {exc}"
    ms = (time.perf_counter() - start) * 1e3
    if est is None:
        return TrialRecord(method.label, outlier_rate, trial, gt.as_matrix().tolist(), None,
                           float("inf"), float("inf"), False, ms, err)
    re_, te = rotation_error(est, gt), translation_error(est, gt)
    return TrialRecord(method.label, outlier_rate, trial, gt.as_matrix().tolist(),
                       est.as_matrix().tolist(), re_, te, is_success(re_, te, *thresholds), ms)


def aggregate(records):
    groups = {}
    for r in records:
        groups.setdefault((r.method, r.outlier_rate), []).append(r)
    out = []
    for (method, rate), rs in groups.items():
        rot = np.array([r.rotation_error for r in rs])
        tr = np.array([r.translation_error for r in rs])
        out.append(Aggregate(
            method=method,
            outlier_rate=rate,
            trials=len(rs),
            success_rate=float(np.mean([r.success for r in rs])),
            median_rot_err_deg=float(np.median(rot)),
            median_trans_err_m=float(np.median(tr)),
            mean_wall_ms=float(np.mean([r.wall_time for r in rs])),
            rot_err_quantiles=tuple(float(x) for x in np.percentile(rot, [25, 50, 75], method="inverted_cdf")),
            trans_err_quantiles=tuple(float(x) for x in np.percentile(tr, [25, 50, 75], method="inverted_cdf")),
        ))
    return out


def run_campaign(source: PointCloud, configs, methods, thresholds=(SUCCESS_ROT_DEG, SUCCESS_TRANS_M),
                 progress=None) -> CampaignResult:
    """Run every method on every trial of every scenario.

    Each (scenario, trial) pair is generated once from a seed derived from
    the scenario seed and trial number, and every method sees the same
    data. A failed solve is recorded as an unsuccessful trial.
    """
    configs = list(configs)
    methods = list(methods)
    if not configs or not methods:
        raise ConfigError("need at least one scenario and one method")
    records = []
    for cfg in configs:
        for trial in range(cfg.trials):
            pair = generate_pair(source, cfg, trial_seed(cfg, trial))
            for m in methods:
                rec = run_trial(pair, m, trial, cfg.outlier_rate, thresholds)
                records.append(rec)
                if progress is not None:
                    progress(rec)
    return CampaignResult(records, aggregate(records))

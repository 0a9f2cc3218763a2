"""Correspondence front end: normals, FPFH descriptors and mutual best matching."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .geometry import NeighborIndex, PointCloud, voxel_downsample

FPFH_BINS = 11
FPFH_DIM = 3 * FPFH_BINS
SWAP_TIE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class CorrespondenceSet:
    """Putative matches ``source[source_indices[k]] <-> target[target_indices[k]]``."""

    source_indices: np.ndarray
    target_indices: np.ndarray

    def __post_init__(self):
        src = np.asarray(self.source_indices, dtype=np.int64).reshape(-1)
        tgt = np.asarray(self.target_indices, dtype=np.int64).reshape(-1)
        if src.shape != tgt.shape:
            raise ValidationError(f"index lists differ in length: {src.size} vs {tgt.size}")
        if src.size and (src.min() < 0 or tgt.min() < 0):
            raise ValidationError("correspondence indices must be non-negative")
        if src.size:
            pairs = np.unique(np.stack([src, tgt], axis=1), axis=0)
            if pairs.shape[0] != src.size:
                raise ValidationError("duplicate (source, target) pair in correspondence set")
        src.setflags(write=False)
        tgt.setflags(write=False)
        object.__setattr__(self, "source_indices", src)
        object.__setattr__(self, "target_indices", tgt)

    @classmethod
    def identity(cls, n):
        idx = np.arange(n)
        return cls(idx, idx.copy())

    def __len__(self):
        return self.source_indices.size

    @property
    def N(self):
        return len(self)

    def subset(self, positions):
        positions = np.asarray(positions, dtype=np.intp)
        return CorrespondenceSet(self.source_indices[positions], self.target_indices[positions])

    def check_bounds(self, n_source, n_target):
        if len(self) and (self.source_indices.max() >= n_source or self.target_indices.max() >= n_target):
            raise ValidationError(
                f"correspondence index out of range for clouds of size {n_source} and {n_target}"
            )

    def paired_points(self, source, target):
        """Return ``(p, q)`` arrays for the solver: target-side and source-side points."""
        src = source.points if isinstance(source, PointCloud) else np.asarray(source, dtype=float)
        tgt = target.points if isinstance(target, PointCloud) else np.asarray(target, dtype=float)
        self.check_bounds(len(src), len(tgt))
        return tgt[self.target_indices], src[self.source_indices]


def estimate_normals(c: PointCloud, radius: float, min_neighbors: int = 3) -> PointCloud:
    """Per-point normals from the covariance of the radius neighbourhood.

    The neighbourhood includes the point itself. Normals are flipped to point
    away from the cloud centroid. Points with fewer than ``min_neighbors``
    neighbourhood members get an all-zero (invalid) normal.
    """
    if not radius > 0:
        raise ValidationError(f"radius must be > 0, got {radius}")
    n = len(c)
    normals = np.zeros((n, 3))
    if n == 0:
        return PointCloud(c.points, normals)
    pts = c.points
    i, j, _ = NeighborIndex(pts).pairs_within(radius)
    counts = np.bincount(i, minlength=n) + 1
    # second moments of offsets relative to each query point
    d = pts[j] - pts[i]
    first = np.zeros((n, 3))
    np.add.at(first, i, d)
    second = np.zeros((n, 3, 3))
    np.add.at(second, i, d[:, :, None] * d[:, None, :])
    mean = first / counts[:, None]
    cov = second / counts[:, None, None] - mean[:, :, None] * mean[:, None, :]
    _, vecs = np.linalg.eigh(cov)
    normals = vecs[:, :, 0]
    outward = pts - c.centroid()
    flip = np.einsum("ij,ij->i", normals, outward) < 0
    normals[flip] *= -1.0
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    normals[counts < min_neighbors] = 0.0
    return PointCloud(pts, normals)


def pair_features(p_s, n_s, p_t, n_t):
    """Darboux-frame angle triplets ``(alpha, phi, theta)`` for arrays of point pairs.

    ``alpha`` and ``phi`` are cosines in [-1, 1]; ``theta`` is an arctangent in
    [-pi/2, pi/2]. The frame is anchored at whichever endpoint makes the
    smaller angle with the connecting line, so the triplet does not depend on
    pair order. When both angles agree to ``SWAP_TIE_TOL`` the endpoint giving
    ``phi >= 0`` is used.
    """
    dp = p_t - p_s
    dist = np.linalg.norm(dp, axis=1)
    dist_safe = np.where(dist > 0, dist, 1.0)
    cos_s = np.einsum("ij,ij->i", n_s, dp) / dist_safe
    cos_t = np.einsum("ij,ij->i", n_t, dp) / dist_safe
    swap = np.arccos(np.clip(np.abs(cos_s), 0, 1)) > np.arccos(np.clip(np.abs(cos_t), 0, 1))
    # equal angles (e.g. bit-identical normals) leave alpha and theta unchanged
    # either way; pick the orientation with phi >= 0 so rounding cannot flip it
    tie = np.abs(np.abs(cos_s) - np.abs(cos_t)) <= SWAP_TIE_TOL
    swap = np.where(tie, cos_s < 0, swap)
    u = np.where(swap[:, None], n_t, n_s)
    nt = np.where(swap[:, None], n_s, n_t)
    dp = np.where(swap[:, None], -dp, dp)
    phi = np.where(swap, -cos_t, cos_s)

    v = np.cross(dp, u)
    v_norm = np.linalg.norm(v, axis=1)
    ok = v_norm > 0
    v = v / np.where(ok, v_norm, 1.0)[:, None]
    w = np.cross(u, v)
    alpha = np.einsum("ij,ij->i", v, nt)
    y = np.einsum("ij,ij->i", w, nt)
    x = np.einsum("ij,ij->i", u, nt)
    sx = np.where(x < 0, -1.0, 1.0)
    theta = np.arctan2(y * sx, np.abs(x))
    # normal parallel to the connecting line: the frame is undefined about u
    alpha = np.where(ok, alpha, 0.0)
    theta = np.where(ok, theta, 0.0)
    zero = dist == 0
    return (
        np.where(zero, 0.0, alpha),
        np.where(zero, 0.0, np.clip(phi, -1.0, 1.0)),
        np.where(zero, 0.0, theta),
    )


def feature_bins(alpha, phi, theta, bins=FPFH_BINS):
    """Map angle features to bin indices; interior boundaries go to the upper bin."""

    def to_bin(x, lo, hi):
        b = np.floor(bins * (x - lo) / (hi - lo)).astype(np.int64)
        return np.clip(b, 0, bins - 1)

    half_pi = np.pi / 2
    return to_bin(alpha, -1.0, 1.0), to_bin(phi, -1.0, 1.0), to_bin(theta, -half_pi, half_pi)


def _normalize_blocks(hist):
    blocks = hist.reshape(hist.shape[0], 3, FPFH_BINS)
    sums = blocks.sum(axis=2, keepdims=True)
    out = np.where(sums > 0, blocks * (100.0 / np.where(sums > 0, sums, 1.0)), 0.0)
    return out.reshape(hist.shape)


def compute_fpfh(c: PointCloud, radius: float) -> np.ndarray:
    """FPFH descriptors, one 33-bin row per point.

    Rows of points without a valid normal or without neighbours are all
    zero; :func:`usable_descriptors` flags them.
    """
    if not c.has_normals:
        raise ValidationError("compute_fpfh requires a cloud with normals")
    if not radius > 0:
        raise ValidationError(f"radius must be > 0, got {radius}")
    n = len(c)
    desc = np.zeros((n, FPFH_DIM))
    valid = c.valid_normals
    vidx = np.flatnonzero(valid)
    if vidx.size == 0:
        return desc
    pts = c.points[vidx]
    nrm = c.normals[vidx]
    m = vidx.size
    i, j, dist = NeighborIndex(pts).pairs_within(radius)
    keep = dist > 0
    i, j, dist = i[keep], j[keep], dist[keep]
    k = np.bincount(i, minlength=m)

    a, f, t = pair_features(pts[i], nrm[i], pts[j], nrm[j])
    ba, bf, bt = feature_bins(a, f, t)
    incr = 100.0 / np.where(k > 0, k, 1)[i]
    spfh = np.zeros((m, FPFH_DIM))
    np.add.at(spfh, (i, ba), incr)
    np.add.at(spfh, (i, FPFH_BINS + bf), incr)
    np.add.at(spfh, (i, 2 * FPFH_BINS + bt), incr)

    fpfh = spfh.copy()
    contrib = spfh[j] * (1.0 / dist / np.where(k > 0, k, 1)[i])[:, None]
    np.add.at(fpfh, i, contrib)
    desc[vidx] = _normalize_blocks(fpfh)
    return desc


def usable_descriptors(desc):
    return np.any(np.asarray(desc) != 0.0, axis=1)


def mutual_match(desc_p, desc_q, valid_p=None, valid_q=None) -> CorrespondenceSet:
    """Pairs ``(i, j)`` where each descriptor is the other's L2 nearest neighbour.

    ``valid_p``/``valid_q`` are optional boolean masks of rows that may take
    part (see :func:`usable_descriptors` for FPFH output). Ties go to the
    lower index. Returned pairs are ordered by ``i``.
    """
    desc_p = np.asarray(desc_p, dtype=float)
    desc_q = np.asarray(desc_q, dtype=float)
    if desc_p.ndim == 1:
        desc_p = desc_p[:, None]
    if desc_q.ndim == 1:
        desc_q = desc_q[:, None]
    if desc_p.shape[1] != desc_q.shape[1]:
        raise ValidationError(f"descriptor widths differ: {desc_p.shape[1]} vs {desc_q.shape[1]}")
    ip = np.arange(len(desc_p)) if valid_p is None else np.flatnonzero(valid_p)
    iq = np.arange(len(desc_q)) if valid_q is None else np.flatnonzero(valid_q)
    if ip.size == 0 or iq.size == 0:
        return CorrespondenceSet([], [])
    fwd, _ = NeighborIndex(desc_q[iq]).knn_batch(desc_p[ip], 1)
    bwd, _ = NeighborIndex(desc_p[ip]).knn_batch(desc_q[iq], 1)
    fwd = fwd[:, 0]
    bwd = bwd[:, 0]
    mutual = bwd[fwd] == np.arange(ip.size)
    return CorrespondenceSet(ip[mutual], iq[fwd[mutual]])


def match_descriptors(desc_p, desc_q) -> CorrespondenceSet:
    """:func:`mutual_match` restricted to rows with a usable FPFH descriptor."""
    return mutual_match(desc_p, desc_q, usable_descriptors(desc_p), usable_descriptors(desc_q))


@dataclass(frozen=True)
class FeatureParams:
    """Front-end radii given as multiples of the voxel size."""

    voxel_size: float = 0.05
    normal_radius_factor: float = 2.0
    feature_radius_factor: float = 5.0
    min_neighbors: int = 3

    @property
    def normal_radius(self):
        return self.normal_radius_factor * self.voxel_size

    @property
    def feature_radius(self):
        return self.feature_radius_factor * self.voxel_size


def prepare_cloud(c: PointCloud, params: FeatureParams):
    """Downsample, estimate normals and compute FPFH. Returns ``(cloud, descriptors)``."""
    down = voxel_downsample(c, params.voxel_size)
    with_normals = estimate_normals(down, params.normal_radius, params.min_neighbors)
    return with_normals, compute_fpfh(with_normals, params.feature_radius)

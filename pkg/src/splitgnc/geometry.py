"""Point clouds, rigid transforms, voxel downsampling and neighbour search."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyIndexError, ValidationError

ROTATION_ATOL = 1e-9


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Ordered 3D points with optional per-point normals.

    A normal row of all zeros marks a point whose normal could not be
    estimated; every other normal row has unit length.
    """

    points: np.ndarray
    normals: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValidationError(f"points must have shape (n, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", _frozen(pts))
        if self.normals is not None:
            nrm = np.asarray(self.normals, dtype=float).reshape(-1, 3)
            if nrm.shape != pts.shape:
                raise ValidationError(
                    f"normals shape {nrm.shape} does not match points {pts.shape}"
                )
            if not np.all(np.isfinite(nrm)):
                raise ValidationError("normals contain non-finite values")
            lengths = np.linalg.norm(nrm, axis=1)
            ok = (np.abs(lengths - 1.0) <= 1e-6) | (lengths == 0.0)
            if not np.all(ok):
                bad = int(np.flatnonzero(~ok)[0])
                raise ValidationError(
                    f"normal {bad} has length {lengths[bad]:.9g}, expected 1"
                )
            object.__setattr__(self, "normals", _frozen(nrm))

    def __len__(self):
        return self.points.shape[0]

    @property
    def has_normals(self):
        return self.normals is not None

    @property
    def valid_normals(self):
        """Boolean mask of points carrying a usable (non-zero) normal."""
        if self.normals is None:
            return np.zeros(len(self), dtype=bool)
        return np.any(self.normals != 0.0, axis=1)

    def centroid(self):
        return self.points.mean(axis=0)

    def select(self, indices):
        idx = np.asarray(indices, dtype=np.intp)
        normals = None if self.normals is None else self.normals[idx]
        return PointCloud(self.points[idx], normals)


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Proper rigid motion ``x -> R @ x + t``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float).reshape(-1)
        if R.shape != (3, 3) or t.shape != (3,):
            raise ValidationError(
                f"expected 3x3 rotation and 3-vector translation, got {R.shape}, {t.shape}"
            )
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise ValidationError("transform contains non-finite values")
        check_rotation(R, ROTATION_ATOL)
        object.__setattr__(self, "rotation", _frozen(R))
        object.__setattr__(self, "translation", _frozen(t))

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix, atol=1e-6):
        """Build from a 4x4 homogeneous matrix.

        The rotation block must be orthonormal with determinant +1 to within
        ``atol``; it is then projected exactly onto SO(3).
        """
        M = np.asarray(matrix, dtype=float)
        if M.shape != (4, 4):
            raise ValidationError(f"expected a 4x4 matrix, got shape {M.shape}")
        if not np.all(np.isfinite(M)):
            raise ValidationError("matrix contains non-finite values")
        if not np.allclose(M[3], [0.0, 0.0, 0.0, 1.0], rtol=0.0, atol=atol):
            raise ValidationError(f"last row must be [0 0 0 1], got {M[3].tolist()}")
        R = M[:3, :3]
        check_rotation(R, atol)
        return cls(project_to_so3(R), M[:3, 3])

    def as_matrix(self):
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def transform_points(self, points):
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def __matmul__(self, other):
        return compose(self, other)

    def __repr__(self):
        return f"RigidTransform(rotation={self.rotation.tolist()}, translation={self.translation.tolist()})"


def check_rotation(R, atol):
    dev = np.max(np.abs(R.T @ R - np.eye(3)))
    if dev > atol:
        raise ValidationError(f"rotation not orthogonal: max|R^T R - I| = {dev:.3g} > {atol:g}")
    det = np.linalg.det(R)
    if abs(det - 1.0) > atol:
        raise ValidationError(f"rotation determinant {det:.12g} is not +1 (tolerance {atol:g})")


def project_to_so3(M):
    """Nearest proper rotation to ``M`` in the Frobenius sense."""
    U, _, Vt = np.linalg.svd(M)
    d = np.sign(np.linalg.det(U @ Vt))
    return U @ np.diag([1.0, 1.0, d]) @ Vt


def rotation_about_axis(axis, angle):
    """Rodrigues rotation matrix; ``angle`` in radians."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def apply(t: RigidTransform, c: PointCloud) -> PointCloud:
    """Transform points by ``R p + t``; normals are rotated only."""
    normals = None if c.normals is None else c.normals @ t.rotation.T
    return PointCloud(t.transform_points(c.points), normals)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform equivalent to applying ``b`` first, then ``a``."""
    R = project_to_so3(a.rotation @ b.rotation)
    return RigidTransform(R, a.rotation @ b.translation + a.translation)


def inverse(t: RigidTransform) -> RigidTransform:
    Rt = t.rotation.T
    return RigidTransform(Rt, -Rt @ t.translation)


def voxel_downsample(c: PointCloud, voxel_size: float) -> PointCloud:
    """Replace the points of every occupied voxel by their centroid.

    Voxel keys are ``floor(x / voxel_size)`` per axis and output follows
    ascending lexicographic key order. Normals are not carried over.
    """
    if not voxel_size > 0:
        raise ValidationError(f"voxel_size must be > 0, got {voxel_size}")
    if len(c) == 0:
        return PointCloud(np.empty((0, 3)))
    keys = np.floor(c.points / voxel_size).astype(np.int64)
    _, inverse_idx, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse_idx = inverse_idx.reshape(-1)
    sums = np.zeros((counts.size, 3))
    np.add.at(sums, inverse_idx, c.points)
    return PointCloud(sums / counts[:, None])


class NeighborIndex:
    """Exact nearest-neighbour queries over a fixed set of points.

    Works in any dimension. Distances are Euclidean and equal distances are
    ordered by lower point index, so results coincide with an exhaustive
    scan. Read-only after construction.
    """

    def __init__(self, data):
        if isinstance(data, PointCloud):
            data = data.points
        data = np.asarray(data, dtype=float)
        if data.ndim == 1:
            data = data.reshape(-1, 1)
        if data.shape[0] == 0:
            raise EmptyIndexError("cannot build a neighbour index over an empty point set")
        self.data = data
        self._tree = cKDTree(data)

    def __len__(self):
        return self.data.shape[0]

    def _dist(self, q, idx):
        return np.sqrt(np.sum((self.data[idx] - q) ** 2, axis=-1))

    def _ordered(self, q, idx):
        idx = np.asarray(idx, dtype=np.intp)
        d = self._dist(q, idx)
        order = np.lexsort((idx, d))
        return idx[order], d[order]

    def radius(self, query, radius):
        """All points within ``radius`` of ``query``, sorted by (distance, index)."""
        if not radius > 0:
            raise ValidationError(f"radius must be > 0, got {radius}")
        q = np.asarray(query, dtype=float).reshape(-1)
        slack = radius * (1.0 + 1e-9) + 1e-300
        idx, d = self._ordered(q, self._tree.query_ball_point(q, slack))
        keep = d <= radius
        return idx[keep], d[keep]

    def knn(self, query, k):
        """The ``min(k, n)`` nearest points to ``query``, sorted by (distance, index)."""
        if k < 1:
            raise ValidationError(f"k must be >= 1, got {k}")
        q = np.asarray(query, dtype=float).reshape(-1)
        n = len(self)
        k = min(int(k), n)
        m = min(k + 1, n)
        _, cand = self._tree.query(q, k=m)
        cand = np.atleast_1d(cand)
        idx, d = self._ordered(q, cand)
        if m > k and d[k] > d[k - 1]:
            return idx[:k], d[:k]
        if m == k:
            return idx, d
        # distance tie straddles the k-th slot: gather every tied point
        idx, d = self.radius(q, d[k - 1]) if d[k - 1] > 0 else self._exact_zero(q)
        return idx[:k], d[:k]

    def _exact_zero(self, q):
        idx = np.flatnonzero(np.all(self.data == q, axis=1))
        return idx, np.zeros(idx.size)

    def pairs_within(self, radius):
        """Every ordered pair ``(i, j)``, ``i != j``, at distance <= ``radius``.

        Returns ``(i, j, dist)`` sorted by ``i`` then ``j``.
        """
        if not radius > 0:
            raise ValidationError(f"radius must be > 0, got {radius}")
        pairs = self._tree.query_pairs(radius * (1.0 + 1e-9), output_type="ndarray")
        if pairs.size == 0:
            empty = np.empty(0, dtype=np.intp)
            return empty, empty.copy(), np.empty(0)
        i = np.concatenate([pairs[:, 0], pairs[:, 1]]).astype(np.intp)
        j = np.concatenate([pairs[:, 1], pairs[:, 0]]).astype(np.intp)
        d = np.sqrt(np.sum((self.data[i] - self.data[j]) ** 2, axis=1))
        keep = d <= radius
        i, j, d = i[keep], j[keep], d[keep]
        order = np.lexsort((j, i))
        return i[order], j[order], d[order]

    def knn_batch(self, queries, k):
        """Vectorised ``knn`` for many queries; returns ``(indices, distances)`` of shape (m, k')."""
        queries = np.asarray(queries, dtype=float)
        if queries.ndim == 1:
            queries = queries.reshape(-1, self.data.shape[1])
        n = len(self)
        k = min(int(k), n)
        m = min(k + 1, n)
        _, cand = self._tree.query(queries, k=m)
        cand = np.asarray(cand).reshape(len(queries), m)
        d = np.sqrt(np.sum((self.data[cand] - queries[:, None, :]) ** 2, axis=-1))
        order = np.lexsort((cand, d), axis=-1)
        cand = np.take_along_axis(cand, order, axis=1)
        d = np.take_along_axis(d, order, axis=1)
        out_i, out_d = cand[:, :k].copy(), d[:, :k].copy()
        if m > k:
            for row in np.flatnonzero(d[:, k] <= d[:, k - 1]):
                out_i[row], out_d[row] = self.knn(queries[row], k)
        return out_i, out_d

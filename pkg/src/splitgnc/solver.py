"""Geman-McClure registration by annealed iteratively reweighted least squares.

Residuals follow ``r_i = p_i - T q_i``: ``q`` holds source-side points and
``p`` the matching target-side points, so the returned transform maps the
source onto the target. The surrogate loss of a residual with squared norm
``s`` is ``alpha * s / (alpha + s)``. Large ``alpha`` makes it close to the
plain squared error; shrinking ``alpha`` geometrically by ``beta`` every
iteration moves it towards the non-convex Geman-McClure shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    ConfigError,
    DegenerateGeometryError,
    InsufficientCorrespondencesError,
    ValidationError,
)
from .geometry import RigidTransform

ALPHA_FLOOR_RATIO = 1e-12
RANK_RTOL = 1e-12


@dataclass(frozen=True)
class GncConfig:
    """Annealing schedule for :func:`irls_solve`.

    ``alpha0=None`` starts from the largest squared residual at ``t0``.
    ``epsilon`` bounds ``|gamma - gamma_prev| / (N * alpha0)``.
    """

    alpha0: float | None = None
    beta: float = 0.5
    epsilon: float = 1e-6
    max_iterations: int = 100
    t0: RigidTransform = field(default_factory=RigidTransform.identity)
    record_trace: bool = False

    def __post_init__(self):
        if self.alpha0 is not None and not (np.isfinite(self.alpha0) and self.alpha0 > 0):
            raise ConfigError(f"alpha0 must be a finite value > 0, got {self.alpha0}")
        if not 0.0 < self.beta < 1.0:
            raise ConfigError(f"beta must lie in (0, 1), got {self.beta}")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be an integer >= 1, got {self.max_iterations}")
        if not isinstance(self.t0, RigidTransform):
            raise ConfigError("t0 must be a RigidTransform")

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class IrlsState:
    """Snapshot taken at the top of one iteration, before the inner solve."""

    transform: RigidTransform
    residuals: np.ndarray
    weights: np.ndarray
    alpha: float
    gamma: float
    iteration: int


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    alpha: float
    gamma: float
    gamma_after: float  # loss of the updated transform at the same alpha
    weight_min: float
    weight_mean: float
    weight_max: float


@dataclass(frozen=True, eq=False)
class SolveReport:
    transform: RigidTransform
    final_gamma: float
    final_alpha: float
    alpha0: float
    iterations: int
    converged: bool
    num_correspondences: int
    weights: np.ndarray
    weight_trace: list[TraceEntry] | None = None


def geman_mcclure_loss(residual_norms, alpha):
    """Summed surrogate loss ``sum(alpha * r^2 / (alpha + r^2))``."""
    s = np.square(np.asarray(residual_norms, dtype=float))
    return float(np.sum(alpha * s / (alpha + s)))


def irls_weights(residual_norms, alpha):
    """``alpha^2 / (alpha + r^2)^2``: 1 at zero residual, decreasing towards 0."""
    s = np.square(np.asarray(residual_norms, dtype=float))
    return np.square(alpha / (alpha + s))


def gnc_loss_profiles(residuals, alphas):
    """Per-residual surrogate loss for each alpha, shape ``(len(alphas), len(residuals))``.

    Handy for plotting how the loss flattens as alpha shrinks.
    """
    r = np.asarray(residuals, dtype=float)
    a = np.asarray(alphas, dtype=float)[:, None]
    s = r[None, :] ** 2
    return a * s / (a + s)


def _as_pairs(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.ndim != 2 or p.shape[1] != 3 or p.shape != q.shape:
        raise ValidationError(f"expected two paired (N, 3) arrays, got {p.shape} and {q.shape}")
    return p, q


def weighted_svd(p_points, q_points, weights) -> RigidTransform:
    """Closed-form minimiser of ``sum w_i |p_i - (R q_i + t)|^2`` over proper rigid motions."""
    p, q = _as_pairs(p_points, q_points)
    w = np.asarray(weights, dtype=float).reshape(-1)
    n = p.shape[0]
    if n < 3:
        raise InsufficientCorrespondencesError(f"need at least 3 correspondences, got {n}")
    if w.shape[0] != n:
        raise ValidationError(f"{w.shape[0]} weights for {n} correspondences")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValidationError("weights must be finite and non-negative")
    wmax = w.max()
    if wmax <= 0:
        raise DegenerateGeometryError("all weights are zero")
    w = w / wmax  # argmin is scale free; avoids underflow for tiny weights
    wsum = w.sum()
    p_bar = w @ p / wsum
    q_bar = w @ q / wsum
    H = (q - q_bar).T @ ((p - p_bar) * w[:, None])
    U, S, Vt = np.linalg.svd(H)
    if S[0] == 0.0 or S[1] <= RANK_RTOL * S[0]:
        raise DegenerateGeometryError(
            f"weighted cross-covariance has rank < 2 (singular values {S.tolist()})"
        )
    V = Vt.T
    d = 1.0 if np.linalg.det(V @ U.T) >= 0 else -1.0
    R = V @ np.diag([1.0, 1.0, d]) @ U.T
    return RigidTransform(R, p_bar - R @ q_bar)


def _residual_norms(p, q, t):
    return np.linalg.norm(p - t.transform_points(q), axis=1)


def initial_alpha(p, q, t0):
    """Default starting alpha: the largest squared residual at ``t0`` (1.0 if all are zero)."""
    a = float(np.max(_residual_norms(p, q, t0)) ** 2)
    return a if a > 0 else 1.0


def irls_iterations(p_points, q_points, config: GncConfig | None = None):
    """Yield :class:`IrlsState` for every iteration of the annealed IRLS loop.

    The generator's return value (``StopIteration.value``) is the finished
    :class:`SolveReport`; :func:`irls_solve` is the usual entry point.
    """
    config = config or GncConfig()
    p, q = _as_pairs(p_points, q_points)
    n = p.shape[0]
    if n < 3:
        raise InsufficientCorrespondencesError(f"need at least 3 correspondences, got {n}")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
        raise ValidationError("correspondences contain non-finite coordinates")

    t = config.t0
    alpha0 = float(config.alpha0) if config.alpha0 is not None else initial_alpha(p, q, t)
    alpha = alpha0
    floor = ALPHA_FLOOR_RATIO * alpha0
    tol = config.epsilon * n * alpha0
    trace = [] if config.record_trace else None

    norms = _residual_norms(p, q, t)
    gamma_prev = None
    converged = False
    it = 0
    while it < config.max_iterations:
        it += 1
        w = irls_weights(norms, alpha)
        gamma = geman_mcclure_loss(norms, alpha)
        yield IrlsState(t, p - t.transform_points(q), w, alpha, gamma, it)
        t = weighted_svd(p, q, w)
        norms = _residual_norms(p, q, t)
        if trace is not None:
            trace.append(
                TraceEntry(it, alpha, gamma, geman_mcclure_loss(norms, alpha),
                           float(w.min()), float(w.mean()), float(w.max()))
            )
        alpha = max(alpha * config.beta, floor)
        if gamma_prev is not None and abs(gamma - gamma_prev) < tol:
            converged = True
            break
        gamma_prev = gamma

    return SolveReport(
        transform=t,
        final_gamma=geman_mcclure_loss(norms, alpha),
        final_alpha=alpha,
        alpha0=alpha0,
        iterations=it,
        converged=converged,
        num_correspondences=n,
        weights=irls_weights(norms, alpha),
        weight_trace=trace,
    )


def irls_solve(p_points, q_points, config: GncConfig | None = None) -> SolveReport:
    """Estimate ``T`` with ``p_i ~ T q_i`` under the annealed Geman-McClure loss."""
    gen = irls_iterations(p_points, q_points, config)
    while True:
        try:
            next(gen)
        except StopIteration as stop:
            return stop.value

"""Sub-cloud splitting: solve on disjoint blocks of matches, keep the best block.

Structured outliers (symmetric scenes, repeated objects) are rarely spread
evenly over the match list. Solving each block independently gives the
blocks that are mostly inliers a chance to converge on their own instead
of being dragged towards the dominant wrong mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AllSplitsFailedError, ConfigError, RegistrationError
from .features import CorrespondenceSet
from .geometry import RigidTransform
from .solver import GncConfig, SolveReport, geman_mcclure_loss, irls_solve

SCHEMES = ("contiguous", "shuffled", "spatial")
SELECTIONS = ("subcloud", "full")


@dataclass(frozen=True)
class SplitConfig:
    """How to partition the matches and how to pick the winning block.

    ``selection="subcloud"`` compares each block's own final loss,
    ``"full"`` re-scores every candidate on all matches at a shared alpha.
    """

    num_splits: int = 4
    scheme: str = "contiguous"
    seed: int = 0
    selection: str = "subcloud"
    common_alpha: float | None = None

    def __post_init__(self):
        if int(self.num_splits) != self.num_splits or self.num_splits < 1:
            raise ConfigError(f"num_splits must be an integer >= 1, got {self.num_splits}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.selection not in SELECTIONS:
            raise ConfigError(f"selection must be one of {SELECTIONS}, got {self.selection!r}")
        if self.common_alpha is not None and not self.common_alpha > 0:
            raise ConfigError(f"common_alpha must be > 0, got {self.common_alpha}")

    def check_size(self, n):
        if n < 3 * self.num_splits:
            raise ConfigError(
                f"{n} correspondences cannot feed {self.num_splits} splits "
                f"(need at least {3 * self.num_splits})"
            )


@dataclass(frozen=True, eq=False)
class SplitReport:
    reports: list[SolveReport | None]
    errors: list[tuple[int, Exception]]
    losses: np.ndarray  # comparison loss per split, inf for failed splits
    winner: int
    transform: RigidTransform
    blocks: list[np.ndarray] = field(repr=False)

    @property
    def winning_report(self):
        return self.reports[self.winner]


def partition(n, config: SplitConfig, source_points=None):
    """Positions ``0..n-1`` split into ``num_splits`` blocks whose sizes differ by at most one.

    Larger blocks come first. ``source_points`` (the source-side point of each
    match, shape ``(n, 3)``) is needed by the spatial scheme only. Only
    ``n >= num_splits`` is required here; the solving entry points also
    demand three matches per block.
    """
    s = config.num_splits
    if n < s:
        raise ConfigError(f"cannot cut {n} items into {s} non-empty blocks")
    if config.scheme == "contiguous":
        order = np.arange(n)
    elif config.scheme == "shuffled":
        order = np.random.default_rng(config.seed).permutation(n)
    else:
        if source_points is None:
            raise ConfigError("the spatial scheme needs the source points of the matches")
        pts = np.asarray(source_points, dtype=float)
        centered = pts - pts.mean(axis=0)
        _, vecs = np.linalg.eigh(centered.T @ centered)
        axis = vecs[:, -1]
        # fix the eigenvector sign so the order is reproducible
        if axis[np.argmax(np.abs(axis))] < 0:
            axis = -axis
        order = np.argsort(centered @ axis, kind="stable")
    base, extra = divmod(n, s)
    bounds = np.cumsum([0] + [base + 1] * extra + [base] * (s - extra))
    return [order[bounds[k]:bounds[k + 1]] for k in range(s)]


def split_correspondences(corr: CorrespondenceSet, config: SplitConfig, source_points=None):
    """Split a correspondence set into ``num_splits`` disjoint, balanced subsets."""
    src = None
    if config.scheme == "spatial":
        if source_points is None:
            raise ConfigError("the spatial scheme needs the source cloud")
        src = np.asarray(getattr(source_points, "points", source_points))[corr.source_indices]
    config.check_size(len(corr))
    return [corr.subset(b) for b in partition(len(corr), config, src)]


def _comparison_losses(reports, p, q, config):
    losses = np.full(len(reports), np.inf)
    if config.selection == "subcloud":
        for k, r in enumerate(reports):
            if r is not None:
                # per-match loss in units of the run's own final alpha
                losses[k] = r.final_gamma / (r.num_correspondences * r.final_alpha)
        return losses
    ok = [r for r in reports if r is not None]
    alpha = config.common_alpha or min(r.final_alpha for r in ok)
    for k, r in enumerate(reports):
        if r is not None:
            norms = np.linalg.norm(p - r.transform.transform_points(q), axis=1)
            losses[k] = geman_mcclure_loss(norms, alpha) / len(p)
    return losses


def solve_split_pairs(p, q, gnc: GncConfig | None = None, split: SplitConfig | None = None):
    """Splitting solve on already paired arrays (``p_i ~ T q_i``)."""
    gnc = gnc or GncConfig()
    split = split or SplitConfig()
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    split.check_size(len(p))
    blocks = partition(len(p), split, q)
    reports, errors = [], []
    for k, b in enumerate(blocks):
        try:
            reports.append(irls_solve(p[b], q[b], gnc))
        except RegistrationError as exc:
            reports.append(None)
            errors.append((k, exc))
    if len(errors) == len(blocks):
        raise AllSplitsFailedError(errors)
    losses = _comparison_losses(reports, p, q, split)
    winner = int(np.argmin(losses))  # first minimum, i.e. lowest split index on ties
    return SplitReport(reports, errors, losses, winner, reports[winner].transform, blocks)


def solve_with_splits(corr: CorrespondenceSet, source, target,
                      gnc: GncConfig | None = None, split: SplitConfig | None = None) -> SplitReport:
    """Estimate the transform mapping ``source`` onto ``target`` from matches ``corr``.

    Each block of ``corr`` is solved independently with :func:`irls_solve`
    and the block with the lowest comparison loss wins. ``blocks`` in the
    report are positions into ``corr``.
    """
    p, q = corr.paired_points(source, target)
    return solve_split_pairs(p, q, gnc, split)

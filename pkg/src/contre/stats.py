"""Rank correlations and class-separation statistics.

The estimators here are deliberately small and explicit:

* ``rank_transform``: average ranks (1-based, ties share the mean of the
  positions they occupy).
* ``spearman``: Pearson correlation of the two rank vectors,
  ``cov(rx, ry) / (std(rx) std(ry))``, clamped to [-1, 1].
* ``partial_spearman``: the first-order partial correlation of x and y with
  a control z removed, computed from pairwise Spearman values as
  ``(r_xy - r_xz r_yz) / sqrt((1 - r_xz^2)(1 - r_yz^2))``.
* ``scatter_matrices``: between-class scatter ``S_b = sum_i N_i (m_i - m)
  (m_i - m)^T`` and within-class scatter ``S_w = sum_i sum_{x in class i}
  (x - m_i)(x - m_i)^T``; with standard weighting these satisfy
  ``S_b + S_w = total scatter`` exactly.
* ``fisher_ratio``: ``trace(S_w^{-1} S_b)``, the multi-class separation
  measure, invariant under invertible linear maps of feature space.
* ``svd_reduce``: project onto the top right-singular directions of the
  centered data, reporting the retained variance fraction.
* ``consistency``: the gap between an accuracy and its contrastive
  counterpart.

Inputs must be finite; degenerate cases raise rather than returning NaN.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (ControlDegenerate, DegenerateVariance, DimensionTooLarge,
                     EmptyClass, EmptyDataset, LengthMismatch, NonFiniteInput,
                     ShapeMismatch, SingleClass, SingularWithin)

# |r| at or above this is treated as perfect correlation when deciding
# whether a partial correlation's denominator is zero.
_CONTROL_EPS = 1e-12

# 2-norm condition numbers above this mark S_w as numerically singular.
_COND_LIMIT = 1e12


def _as_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeMismatch(f"{name} must be 1-dimensional, "
                            f"got shape {arr.shape}")
    if arr.size == 0:
        raise EmptyDataset(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains non-finite values")
    return arr


def rank_transform(values) -> np.ndarray:
    """Average ranks, 1-based; tied values share the mean of their positions.

    Examples: [10, 20, 30] -> [1, 2, 3]; [10, 20, 20, 30] -> [1, 2.5, 2.5, 4].
    The rank sum is always n (n + 1) / 2.
    """
    arr = _as_vector(values, "values")
    n = arr.size
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(n, dtype=np.float64)
    sorted_vals = arr[order]
    start = 0
    while start < n:
        stop = start
        while stop + 1 < n and sorted_vals[stop + 1] == sorted_vals[start]:
            stop += 1
        # positions start..stop (0-based) share the average 1-based rank
        ranks[order[start:stop + 1]] = (start + stop) / 2.0 + 1.0
        start = stop + 1
    return ranks


def spearman(x, y) -> float:
    """Spearman rank correlation: Pearson correlation of the rank vectors.

    Raises LengthMismatch for unequal lengths, EmptyDataset for n < 3, and
    DegenerateVariance when either input is constant.  The result is clamped
    to [-1, 1] against floating-point drift.
    """
    xa = _as_vector(x, "x")
    ya = _as_vector(y, "y")
    if xa.size != ya.size:
        raise LengthMismatch(f"x has {xa.size} values, y has {ya.size}")
    if xa.size < 3:
        raise EmptyDataset(f"need at least 3 pairs, got {xa.size}")
    rx = rank_transform(xa)
    ry = rank_transform(ya)
    rx -= rx.mean()
    ry -= ry.mean()
    sxx = float(np.dot(rx, rx))
    syy = float(np.dot(ry, ry))
    if sxx == 0.0 or syy == 0.0:
        which = "x" if sxx == 0.0 else "y"
        raise DegenerateVariance(f"{which} is constant; rank correlation "
                                 f"is undefined")
    r = float(np.dot(rx, ry)) / float(np.sqrt(sxx * syy))
    return min(1.0, max(-1.0, r))


def partial_from_pairwise(r_xy: float, r_xz: float, r_yz: float) -> float:
    """First-order partial correlation from the three pairwise values."""
    denom_sq = (1.0 - r_xz * r_xz) * (1.0 - r_yz * r_yz)
    if denom_sq <= _CONTROL_EPS:
        raise ControlDegenerate(
            "control is perfectly rank-correlated with x or y; the partial "
            "correlation denominator is zero")
    r = (r_xy - r_xz * r_yz) / float(np.sqrt(denom_sq))
    return min(1.0, max(-1.0, r))


def partial_spearman(x, y, z) -> float:
    """Spearman correlation of x and y with the control z partialed out.

    Computes the three pairwise Spearman values and combines them; raises
    ControlDegenerate when z is perfectly rank-correlated with x or y (the
    denominator vanishes), and propagates DegenerateVariance from any
    constant input.
    """
    r_xy = spearman(x, y)
    r_xz = spearman(x, z)
    r_yz = spearman(y, z)
    return partial_from_pairwise(r_xy, r_xz, r_yz)


# --- class scatter -----------------------------------------------------------

@dataclass(frozen=True)
class ScatterPair:
    """Between/within scatter matrices plus the per-class bookkeeping."""

    s_b: np.ndarray
    s_w: np.ndarray
    class_counts: tuple[int, ...]
    class_means: np.ndarray
    grand_mean: np.ndarray
    weighting: str


def scatter_matrices(features, labels,
                     within_weighting: str = "standard") -> ScatterPair:
    """Between- and within-class scatter of (n, d) features.

    ``standard`` weighting sums plain within-class outer products, so
    ``s_b + s_w`` equals the total scatter ``sum (x - m)(x - m)^T`` exactly.
    ``paper_literal`` additionally multiplies each class's within-class
    contribution by its sample count; the identity above then no longer
    holds.  Classes are processed in sorted label order.
    """
    if within_weighting not in ("standard", "paper_literal"):
        raise ValueError(f"within_weighting must be 'standard' or "
                         f"'paper_literal', got {within_weighting!r}")
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatch(f"features must be (n, d), got shape {x.shape}")
    y = np.asarray(labels)
    if y.ndim != 1 or y.shape[0] != x.shape[0]:
        raise ShapeMismatch(f"labels shape {y.shape} does not match "
                            f"{x.shape[0]} feature rows")
    if x.shape[0] == 0:
        raise EmptyDataset("no samples")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("features contain non-finite values")

    classes = np.unique(y)
    if classes.size < 2:
        raise SingleClass(f"need at least 2 classes, got {classes.size}")
    d = x.shape[1]
    grand_mean = x.mean(axis=0)
    s_b = np.zeros((d, d), dtype=np.float64)
    s_w = np.zeros((d, d), dtype=np.float64)
    counts = []
    means = np.empty((classes.size, d), dtype=np.float64)
    for idx, cls in enumerate(classes):
        members = x[y == cls]
        n_i = members.shape[0]
        if n_i == 0:
            raise EmptyClass(f"class {cls} has no samples")
        counts.append(n_i)
        mean_i = members.mean(axis=0)
        means[idx] = mean_i
        diff = (mean_i - grand_mean)[:, None]
        s_b += n_i * (diff @ diff.T)
        centered = members - mean_i
        within = centered.T @ centered
        if within_weighting == "paper_literal":
            within = n_i * within
        s_w += within
    return ScatterPair(s_b=s_b, s_w=s_w, class_counts=tuple(counts),
                       class_means=means, grand_mean=grand_mean,
                       weighting=within_weighting)


def fisher_ratio(pair: ScatterPair, ridge: float = 0.0) -> float:
    """trace(S_w^{-1} S_b), with an optional ridge added to S_w's diagonal.

    Solves rather than inverting; raises SingularWithin when the (ridged)
    within-class scatter is numerically singular (2-norm condition number
    above 1e12 or a failed solve).
    """
    if ridge < 0.0:
        raise ValueError(f"ridge must be >= 0, got {ridge}")
    s_w = pair.s_w + ridge * np.eye(pair.s_w.shape[0])
    cond = float(np.linalg.cond(s_w))
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise SingularWithin(f"within-class scatter is singular "
                             f"(condition number {cond:.3e})")
    try:
        solved = np.linalg.solve(s_w, pair.s_b)
    except np.linalg.LinAlgError as exc:
        raise SingularWithin(f"within-class scatter solve failed: "
                             f"{exc}") from None
    return float(np.trace(solved))


def svd_reduce(features, target_dim: int) -> tuple[np.ndarray, float]:
    """Project centered features onto their top right-singular directions.

    Returns (projected (n, target_dim) array, retained variance fraction).
    Retained variance is the sum of the top target_dim squared singular
    values over the sum of all of them; an all-constant input retains 1.0
    by convention.  target_dim must lie in [1, min(n, d)].
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatch(f"features must be (n, d), got shape {x.shape}")
    if x.shape[0] == 0:
        raise EmptyDataset("no samples")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("features contain non-finite values")
    n, d = x.shape
    if not (1 <= target_dim <= min(n, d)):
        raise DimensionTooLarge(f"target_dim must lie in [1, {min(n, d)}] "
                                f"for a {n} x {d} input, got {target_dim}")
    centered = x - x.mean(axis=0)
    _u, s, vt = np.linalg.svd(centered, full_matrices=False)
    total = float(np.sum(s * s))
    if total == 0.0:
        return np.zeros((n, target_dim), dtype=np.float64), 1.0
    kept = float(np.sum(s[:target_dim] * s[:target_dim]))
    return centered @ vt[:target_dim].T, kept / total


def consistency(reference_accuracy: float, contrastive_accuracy: float) -> float:
    """Gap between a reference accuracy and its contrastive counterpart.

    Positive values mean the transforms cost accuracy; both inputs must lie
    in [0, 1] and the result lies in [-1, 1].
    """
    for name, value in (("reference_accuracy", reference_accuracy),
                        ("contrastive_accuracy", contrastive_accuracy)):
        if not (0.0 <= value <= 1.0):
            raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return reference_accuracy - contrastive_accuracy

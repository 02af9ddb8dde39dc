"""Choosing subspace widths.

Two selectors are provided:

* a stability cutting rule on the eigen-gaps of both domains, followed by
  two-fold cross-validation on the labelled source for ``d = 1 .. d_max``;
* the Levina-Bickel maximum-likelihood intrinsic dimension, estimated per
  domain so that source and target widths may differ.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .alignment import align_subspaces, fit_alignment, project_source
from .classifiers import LabeledDataset, nn_classify, stratified_two_fold
from .errors import DegenerateDataError, InvalidInputError
from .linalg import as_feature_matrix, pca


@dataclass(frozen=True)
class StabilityBoundParams:
    """Allowed deviation ``gamma``, confidence ``delta`` and sample-norm bound ``b_norm``."""

    gamma: float
    delta: float
    b_norm: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidInputError(f"gamma must be > 0, got {self.gamma}")
        if not 0 < self.delta < 1:
            raise InvalidInputError(f"delta must be in (0, 1), got {self.delta}")
        if not self.b_norm > 0:
            raise InvalidInputError(f"b_norm must be > 0, got {self.b_norm}")


@dataclass(frozen=True, eq=False)
class DimensionSelection:
    d_max: int
    d_star: int
    cv_errors: np.ndarray


def sample_norm_bound(*domains):
    """Largest row L2 norm over the given (z-normalized) domains."""
    return max(float(np.max(np.linalg.norm(as_feature_matrix(x), axis=1))) for x in domains)


def stability_threshold(d, n_min, params):
    """Minimum eigen-gap required at width ``d``.

    ``(1 + sqrt(ln(2/delta) / 2)) * 16 d^{3/2} B / (gamma sqrt(n_min))``
    """
    confidence = 1.0 + math.sqrt(math.log(2.0 / params.delta) / 2.0)
    return confidence * 16.0 * d ** 1.5 * params.b_norm / (params.gamma * math.sqrt(n_min))


def _descending(eigs, name):
    eigs = np.asarray(eigs, dtype=np.float64)
    if eigs.ndim != 1 or eigs.shape[0] < 2:
        raise InvalidInputError(f"{name} needs at least two eigenvalues")
    if np.any(np.diff(eigs) > 0):
        raise InvalidInputError(f"{name} is not in descending order")
    return eigs


def min_eigen_gaps(source_eigs, target_eigs):
    """``min(gap_S(d), gap_T(d))`` for ``d = 1 .. L - 1``, ``L`` the shorter length."""
    s = _descending(source_eigs, "source_eigs")
    t = _descending(target_eigs, "target_eigs")
    L = min(s.shape[0], t.shape[0])
    return np.minimum(s[: L - 1] - s[1:L], t[: L - 1] - t[1:L])


def compute_dmax(source_eigs, target_eigs, n_s, n_t, params):
    """Largest ``d`` whose eigen-gaps, and those of every smaller width, pass the bound.

    Returns 1 (with a warning) when even ``d = 1`` fails.
    """
    gaps = min_eigen_gaps(source_eigs, target_eigs)
    n_min = min(n_s, n_t)
    if n_min < 1:
        raise InvalidInputError("sample counts must be positive")
    d_max = 0
    for d, gap in enumerate(gaps, start=1):
        if gap < stability_threshold(d, n_min, params):
            break
        d_max = d
    if d_max == 0:
        warnings.warn(
            "no subspace width satisfies the stability bound; falling back to d_max = 1",
            stacklevel=2,
        )
        d_max = 1
    return d_max


def select_dim_cv(source, target, d_max, seed=0):
    """Pick ``d`` in ``1 .. d_max`` by two-fold 1-NN cross-validation on the source.

    The alignment at each width is fit on the full source and target (no
    labels involved); the source is then projected into the target-aligned
    coordinates, and a seeded stratified split of the source is classified
    fold against fold. Ties go to the smaller ``d``.
    """
    if not isinstance(source, LabeledDataset):
        raise InvalidInputError("source must be a LabeledDataset")
    target = as_feature_matrix(target, "target", min_rows=2)
    if not isinstance(d_max, (int, np.integer)) or d_max < 1:
        raise InvalidInputError(f"d_max must be a positive integer, got {d_max!r}")
    folds = stratified_two_fold(source.labels, np.random.default_rng(seed))

    # Nested leading eigenvectors: one decomposition per domain serves every d.
    full = fit_alignment(source.features, target, d_max)
    errors = np.empty(d_max)
    for d in range(1, d_max + 1):
        model = align_subspaces(full.source_subspace.truncate(d), full.target_subspace.truncate(d))
        projected = project_source(model, source.features)
        wrong = 0
        for fold in (0, 1):
            train = LabeledDataset(projected[folds != fold], source.labels[folds != fold])
            test = folds == fold
            wrong += int(np.sum(nn_classify(train, projected[test]) != source.labels[test]))
        errors[d - 1] = wrong / len(source)
    d_star = int(np.argmin(errors)) + 1
    return DimensionSelection(d_max=int(d_max), d_star=d_star, cv_errors=errors)


def mle_intrinsic_dim(data, return_pointwise=False):
    """Levina-Bickel intrinsic dimension with a fixed radius.

    The radius ``R`` is the mean distance over all pairs of distinct rows.
    For each row, the neighbours within ``R`` (inclusive; exact duplicates
    excluded) give ``1 / mean(log(R / dist))``. Rows without a usable
    neighbour are left out of the average.

    Returns
    -------
    d_hat : int
        ``d_raw`` rounded half-up and clamped to ``[1, min(n - 1, D)]``.
    d_raw : float
        Mean of the per-row estimates.
    """
    data = as_feature_matrix(data, min_rows=10)
    n, D = data.shape
    condensed = pdist(data)
    radius = float(condensed.mean())
    if radius <= 0:
        raise DegenerateDataError("all pairwise distances are zero")
    dist = squareform(condensed)
    inside = (dist <= radius) & (dist > 0)
    counts = inside.sum(axis=1)
    with np.errstate(divide="ignore"):
        logs = np.where(inside, np.log(radius / np.where(inside, dist, 1.0)), 0.0)
    sums = logs.sum(axis=1)
    usable = (counts > 0) & (sums > 0)
    if not usable.any():
        raise DegenerateDataError("no sample has a neighbour strictly inside the radius")
    pointwise = np.full(n, np.nan)
    pointwise[usable] = counts[usable] / sums[usable]
    d_raw = float(np.mean(pointwise[usable]))
    d_hat = int(min(max(math.floor(d_raw + 0.5), 1), min(n - 1, D)))
    if return_pointwise:
        return d_hat, d_raw, pointwise
    return d_hat, d_raw


def fit_alignment_mle(source, target, source_stats=None, target_stats=None):
    """Estimate each domain's width by MLE, then align (``d_s`` may differ from ``d_t``)."""
    source = as_feature_matrix(source, "source", min_rows=10)
    target = as_feature_matrix(target, "target", min_rows=10)
    d_s, _ = mle_intrinsic_dim(source)
    d_t, _ = mle_intrinsic_dim(target)
    return align_subspaces(
        pca(source, d_s), pca(target, d_t), source_stats=source_stats, target_stats=target_stats
    )

"""Z-normalization, covariance and PCA primitives.

Feature matrices are plain 2-D ``float64`` numpy arrays with one sample per
row. Covariances and standard deviations use the population convention
(divisor ``n``) throughout the package.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericError

#: Columns whose population std falls at or below this are treated as constant.
CONSTANT_TOL = 1e-12


def as_feature_matrix(data, name="data", min_rows=1):
    """Validate and convert ``data`` to a finite 2-D float64 array."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-D matrix, got ndim={arr.ndim}")
    n, D = arr.shape
    if D < 1:
        raise InvalidInputError(f"{name} must have at least one column")
    if n < min_rows:
        raise InvalidInputError(f"{name} needs at least {min_rows} rows, got {n}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class NormalizationStats:
    """Per-column mean and population std of a domain."""

    mean: np.ndarray
    std: np.ndarray

    @property
    def constant(self):
        """Boolean mask of zero-variance columns."""
        return self.std <= CONSTANT_TOL

    @property
    def dim(self):
        return self.mean.shape[0]

    def apply(self, data):
        """Normalize new rows with these frozen statistics.

        Constant columns map to zero.
        """
        data = as_feature_matrix(data)
        if data.shape[1] != self.dim:
            raise InvalidInputError(
                f"expected {self.dim} columns, got {data.shape[1]}"
            )
        scale = np.where(self.constant, 1.0, self.std)
        out = (data - self.mean) / scale
        out[:, self.constant] = 0.0
        return out


def zscore(data):
    """Standardize every column to zero mean and unit population std.

    Parameters
    ----------
    data : array-like, shape (n, D)
        At least two rows.

    Returns
    -------
    normalized : ndarray, shape (n, D)
    stats : NormalizationStats
        The statistics used; ``stats.constant`` flags zero-variance columns,
        which are mapped to 0 instead of raising.
    """
    data = as_feature_matrix(data, min_rows=2)
    stats = NormalizationStats(mean=data.mean(axis=0), std=data.std(axis=0))
    return stats.apply(data), stats


def covariance(data):
    """Population covariance matrix (divisor ``n``) of the rows of ``data``."""
    data = as_feature_matrix(data, min_rows=2)
    centered = data - data.mean(axis=0)
    cov = centered.T @ centered / data.shape[0]
    # Enforce exact symmetry; the product is symmetric only up to rounding.
    return 0.5 * (cov + cov.T)


@dataclass(frozen=True, eq=False)
class Subspace:
    """Orthonormal PCA basis (columns) with descending eigenvalues."""

    basis: np.ndarray
    eigenvalues: np.ndarray

    @property
    def d(self):
        return self.basis.shape[1]

    @property
    def ambient_dim(self):
        return self.basis.shape[0]

    def truncate(self, d):
        """Leading ``d`` directions; identical to refitting PCA at width ``d``."""
        if not 1 <= d <= self.d:
            raise InvalidInputError(f"cannot truncate a {self.d}-dim subspace to {d}")
        return Subspace(self.basis[:, :d].copy(), self.eigenvalues[:d].copy())

    def project(self, data):
        data = as_feature_matrix(data)
        if data.shape[1] != self.ambient_dim:
            raise InvalidInputError(
                f"expected {self.ambient_dim} columns, got {data.shape[1]}"
            )
        return data @ self.basis


def _order_and_sign(vals, vecs):
    # Descending eigenvalue, ties by original index.
    order = np.lexsort((np.arange(vals.shape[0]), -vals))
    vals = vals[order]
    vecs = vecs[:, order]
    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.where(vecs[pivot, np.arange(vecs.shape[1])] < 0, -1.0, 1.0)
    return vals, vecs * signs


def _complete_basis(vecs, count):
    """Extend orthonormal columns to an orthonormal set of ``count`` columns.

    Candidates are the standard basis vectors in index order, so the result
    is deterministic.
    """
    D = vecs.shape[0]
    basis = np.zeros((D, count))
    basis[:, : vecs.shape[1]] = vecs
    filled = vecs.shape[1]
    for k in range(D):
        if filled >= count:
            break
        e = np.zeros(D)
        e[k] = 1.0
        for _ in range(2):
            e -= basis[:, :filled] @ (basis[:, :filled].T @ e)
        norm = np.linalg.norm(e)
        if norm > 1e-8:
            basis[:, filled] = e / norm
            filled += 1
    return basis


def _eigen_decomposition(data):
    """Sorted, sign-fixed eigenpairs of the population covariance.

    Uses the ``D x D`` covariance when ``D <= n`` and the ``n x n`` Gram
    matrix otherwise. In the Gram route eigenvectors are recovered only for
    strictly positive eigenvalues; the remaining directions are an arbitrary
    (but deterministic) completion of the null space.
    """
    n, D = data.shape
    centered = data - data.mean(axis=0)
    try:
        if D <= n:
            cov = centered.T @ centered / n
            vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
        else:
            gram = centered @ centered.T / n
            gvals, gvecs = np.linalg.eigh(0.5 * (gram + gram.T))
            gvals, gvecs = _order_and_sign(gvals, gvecs)
            tol = max(gvals[0], 0.0) * max(n, D) * np.finfo(float).eps
            keep = gvals > tol
            vecs = centered.T @ gvecs[:, keep] / np.sqrt(n * gvals[keep])
            # One re-orthonormalization pass to remove rounding drift.
            vecs, r = np.linalg.qr(vecs)
            vecs = vecs * np.sign(np.diag(r))
            vecs = _complete_basis(vecs, min(n, D))
            vals = np.concatenate([gvals[keep], np.zeros(vecs.shape[1] - keep.sum())])
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"covariance eigendecomposition failed: {exc}") from exc
    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(vecs))):
        raise NumericError("covariance eigendecomposition produced non-finite values")
    vals = np.clip(vals, 0.0, None)
    return _order_and_sign(vals, vecs)


def eigen_spectrum(data):
    """All covariance eigenvalues of ``data`` in descending order."""
    data = as_feature_matrix(data, min_rows=2)
    vals, _ = _eigen_decomposition(data)
    return vals


def pca(data, d):
    """Top-``d`` principal directions of ``data``.

    Parameters
    ----------
    data : array-like, shape (n, D)
        Normally z-normalized already; the rows are centered again here.
    d : int
        Subspace width, ``1 <= d <= min(n - 1, D)``.

    Returns
    -------
    Subspace
        Eigenvectors sorted by descending eigenvalue (ties by index), each
        with its largest-magnitude entry positive.
    """
    data = as_feature_matrix(data, min_rows=2)
    n, D = data.shape
    if not isinstance(d, (int, np.integer)) or not 1 <= d <= min(n - 1, D):
        raise InvalidInputError(f"d must be an integer in [1, {min(n - 1, D)}], got {d!r}")
    vals, vecs = _eigen_decomposition(data)
    return Subspace(basis=vecs[:, :d].copy(), eigenvalues=vals[:d].copy())

"""Subspace alignment between a source and a target PCA basis.

The learned map is the closed-form minimizer of ``||Xs M - Xt||_F^2`` over
``M``, namely ``M = Xs' Xt``. Source rows are represented as ``y Xs M`` and
target rows as ``y Xt``; the induced similarity is ``ys A yt'`` with
``A = Xs Xs' Xt Xt'``.
"""

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import __version__
from .errors import InvalidInputError, ParseError
from .linalg import NormalizationStats, Subspace, as_feature_matrix, pca

#: Above this ambient dimension the D x D metric is never materialized.
MAX_DENSE_METRIC_DIM = 4096

MODEL_FORMAT = "subalign.alignment-model"
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class AlignmentModel:
    """A fitted source-to-target subspace alignment.

    Attributes
    ----------
    source_subspace, target_subspace : Subspace
        Bases ``Xs`` (D x d_s) and ``Xt`` (D x d_t).
    m_matrix : ndarray, shape (d_s, d_t)
        The alignment ``M``.
    source_stats, target_stats : NormalizationStats or None
        Per-domain z-normalization statistics frozen at fit time.
    source_transform : ndarray or None
        Optional D x D map applied to source rows before ``Xs`` (the
        Cholesky factor of a learned metric for ITML-PCA subspaces).
    """

    source_subspace: Subspace
    target_subspace: Subspace
    m_matrix: np.ndarray
    source_stats: NormalizationStats | None = None
    target_stats: NormalizationStats | None = None
    source_transform: np.ndarray | None = field(default=None)

    @property
    def d_s(self):
        return self.source_subspace.d

    @property
    def d_t(self):
        return self.target_subspace.d

    @property
    def ambient_dim(self):
        return self.source_subspace.ambient_dim

    @cached_property
    def aligned_source_basis(self):
        """Target-aligned source coordinate system ``Xs M`` (D x d_t)."""
        return self.source_subspace.basis @ self.m_matrix

    def normalize_source(self, raw):
        if self.source_stats is None:
            raise InvalidInputError("model carries no source normalization stats")
        return self.source_stats.apply(raw)

    def normalize_target(self, raw):
        if self.target_stats is None:
            raise InvalidInputError("model carries no target normalization stats")
        return self.target_stats.apply(raw)

    def metric(self):
        """The similarity metric induced by this alignment."""
        left = self.aligned_source_basis
        if self.source_transform is not None:
            left = self.source_transform @ left
        return SimilarityMetric(left=left, right=self.target_subspace.basis)


def align_subspaces(source_subspace, target_subspace, **extra):
    """Build a model from two precomputed bases using ``M = Xs' Xt``."""
    if source_subspace.ambient_dim != target_subspace.ambient_dim:
        raise InvalidInputError(
            "source and target subspaces live in different ambient dimensions"
        )
    m = source_subspace.basis.T @ target_subspace.basis
    return AlignmentModel(source_subspace, target_subspace, m, **extra)


def fit_alignment(source, target, d_s, d_t=None, source_stats=None, target_stats=None):
    """Fit PCA subspaces on both domains and align them.

    Parameters
    ----------
    source, target : array-like, shape (n_s, D) and (n_t, D)
        Z-normalized domains.
    d_s, d_t : int
        Subspace widths. ``d_t`` defaults to ``d_s``. Unequal widths are
        allowed (the Frobenius objective is then not square but ``Xs' Xt``
        is still the least-squares map).
    """
    source = as_feature_matrix(source, "source", min_rows=2)
    target = as_feature_matrix(target, "target", min_rows=2)
    if source.shape[1] != target.shape[1]:
        raise InvalidInputError(
            f"source has {source.shape[1]} columns but target has {target.shape[1]}"
        )
    if d_t is None:
        d_t = d_s
    return align_subspaces(
        pca(source, d_s),
        pca(target, d_t),
        source_stats=source_stats,
        target_stats=target_stats,
    )


def _check_columns(data, D, name):
    data = as_feature_matrix(data, name)
    if data.shape[1] != D:
        raise InvalidInputError(f"{name} has {data.shape[1]} columns, expected {D}")
    return data


def project_source(model, source):
    """Source rows in target-aligned coordinates: ``S Xs M`` (n x d_t)."""
    source = _check_columns(source, model.ambient_dim, "source")
    if model.source_transform is not None:
        source = source @ model.source_transform
    return source @ model.aligned_source_basis


def project_target(model, target):
    """Target rows in target-subspace coordinates: ``T Xt`` (n x d_t)."""
    target = _check_columns(target, model.ambient_dim, "target")
    return target @ model.target_subspace.basis


@dataclass(frozen=True, eq=False)
class SimilarityMetric:
    """Bilinear similarity ``ys A yt'`` stored in factored form.

    ``A = left @ right.T``; ``left=None``/``right=None`` stand for the
    identity. The factored form lets every representation used in the
    package (raw features, one-sided PCA projections, aligned subspaces)
    share the same code path: the source representation is ``ys @ left``
    and the target representation ``yt @ right``.
    """

    left: np.ndarray | None = None
    right: np.ndarray | None = None
    dim: int | None = None

    def __post_init__(self):
        dims = {m.shape[0] for m in (self.left, self.right) if m is not None}
        if self.dim is not None:
            dims.add(self.dim)
        if len(dims) > 1:
            raise InvalidInputError(f"inconsistent metric dimensions {sorted(dims)}")
        if (self.left is None) != (self.right is None):
            raise InvalidInputError("left and right factors must both be given or both omitted")
        if self.left is not None and self.left.shape[1] != self.right.shape[1]:
            raise InvalidInputError("left and right factors must have equal width")
        if not dims:
            raise InvalidInputError("identity metric needs an explicit dim")
        object.__setattr__(self, "dim", dims.pop())

    @classmethod
    def identity(cls, dim):
        return cls(dim=dim)

    @classmethod
    def from_basis(cls, basis):
        """Projection metric ``X X'`` of a single subspace."""
        return cls(left=basis, right=basis)

    @property
    def is_identity(self):
        return self.left is None

    @property
    def materializable(self):
        return self.dim <= MAX_DENSE_METRIC_DIM

    @cached_property
    def a_matrix(self):
        """Dense D x D metric; refused for D above ``MAX_DENSE_METRIC_DIM``."""
        if not self.materializable:
            raise InvalidInputError(
                f"refusing to materialize a {self.dim}x{self.dim} metric; "
                "use the factored representation"
            )
        if self.is_identity:
            return np.eye(self.dim)
        return self.left @ self.right.T

    def source_map(self, data):
        data = _check_columns(data, self.dim, "source")
        return data if self.is_identity else data @ self.left

    def target_map(self, data):
        data = _check_columns(data, self.dim, "target")
        return data if self.is_identity else data @ self.right

    def pairwise(self, source, target):
        """Matrix of similarities between every source and target row."""
        return self.source_map(source) @ self.target_map(target).T


def _as_vector(y, D, name):
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] != D:
        raise InvalidInputError(f"{name} must be a vector of length {D}, got shape {y.shape}")
    return y


def similarity(metric, y_s, y_t):
    """``Sim(ys, yt) = ys A yt'`` for a single pair of vectors."""
    y_s = _as_vector(y_s, metric.dim, "y_s")
    y_t = _as_vector(y_t, metric.dim, "y_t")
    if metric.is_identity:
        return float(y_s @ y_t)
    if metric.materializable:
        return float(y_s @ metric.a_matrix @ y_t)
    return float((y_s @ metric.left) @ (y_t @ metric.right))


def samle_distance(model, y_s, y_t):
    """Euclidean distance ``||ys Xs M - yt Xt||`` used by SA-MLE."""
    y_s = _as_vector(y_s, model.ambient_dim, "y_s")
    y_t = _as_vector(y_t, model.ambient_dim, "y_t")
    diff = project_source(model, y_s[None, :])[0] - project_target(model, y_t[None, :])[0]
    return float(np.linalg.norm(diff))


# -- serialization -----------------------------------------------------------


def _arr(a):
    return None if a is None else np.asarray(a, dtype=np.float64).tolist()


def _stats_to_dict(stats):
    if stats is None:
        return None
    return {"mean": _arr(stats.mean), "std": _arr(stats.std)}


def _stats_from_dict(obj):
    if obj is None:
        return None
    return NormalizationStats(mean=np.asarray(obj["mean"], float), std=np.asarray(obj["std"], float))


def model_to_dict(model):
    return {
        "format": MODEL_FORMAT,
        "format_version": MODEL_FORMAT_VERSION,
        "tool_version": __version__,
        "D": model.ambient_dim,
        "d_s": model.d_s,
        "d_t": model.d_t,
        "source_basis": _arr(model.source_subspace.basis),
        "source_eigenvalues": _arr(model.source_subspace.eigenvalues),
        "target_basis": _arr(model.target_subspace.basis),
        "target_eigenvalues": _arr(model.target_subspace.eigenvalues),
        "m_matrix": _arr(model.m_matrix),
        "source_stats": _stats_to_dict(model.source_stats),
        "target_stats": _stats_to_dict(model.target_stats),
        "source_transform": _arr(model.source_transform),
    }


def _matrix(obj, key, shape):
    try:
        a = np.asarray(obj[key], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"model field {key!r} missing or malformed") from exc
    if a.shape != shape:
        raise ParseError(f"model field {key!r} has shape {a.shape}, expected {shape}")
    return a


def model_from_dict(obj):
    if obj.get("format") != MODEL_FORMAT:
        raise ParseError("not an alignment model file")
    if obj.get("format_version") != MODEL_FORMAT_VERSION:
        raise ParseError(f"unsupported model format version {obj.get('format_version')}")
    try:
        D, d_s, d_t = (int(obj[k]) for k in ("D", "d_s", "d_t"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError("model dimensions missing or malformed") from exc
    source = Subspace(
        _matrix(obj, "source_basis", (D, d_s)), _matrix(obj, "source_eigenvalues", (d_s,))
    )
    target = Subspace(
        _matrix(obj, "target_basis", (D, d_t)), _matrix(obj, "target_eigenvalues", (d_t,))
    )
    transform = None
    if obj.get("source_transform") is not None:
        transform = _matrix(obj, "source_transform", (D, D))
    return AlignmentModel(
        source_subspace=source,
        target_subspace=target,
        m_matrix=_matrix(obj, "m_matrix", (d_s, d_t)),
        source_stats=_stats_from_dict(obj.get("source_stats")),
        target_stats=_stats_from_dict(obj.get("target_stats")),
        source_transform=transform,
    )


def save_model(model, path):
    """Write ``model`` as JSON. Floats are written with round-trip precision."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", path=path, line=exc.lineno) from exc
    return model_from_dict(obj)

"""Domain-discrepancy diagnostics.

* TDAS: mean number of target points whose similarity to a source point
  reaches a threshold (higher means closer domains, for local classifiers).
* H-delta-H proxy: accuracy of a linear SVM telling source from target
  (near 50 means indistinguishable, for global classifiers).
* Zero-mean Gaussian KL divergence and the matching mutual-information
  estimate ``H(T) - KL(S || T)``.
"""

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .alignment import SimilarityMetric, fit_alignment, project_source, project_target
from .classifiers import LabeledDataset, svm_classify, svm_train
from .errors import InvalidInputError, NumericError
from .linalg import as_feature_matrix, covariance, pca

DEFAULT_RIDGE = 1e-6


@dataclass(frozen=True)
class DivergenceReport:
    tdas: float
    hdh_accuracy: float
    gaussian_kl: float
    mi_estimate: float
    epsilon_used: float
    seed: int

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, obj):
        return cls(**{k: obj[k] for k in cls.__dataclass_fields__})


def tdas(metric, source, target):
    """Target density around source.

    ``epsilon`` is the mean, over source rows, of the similarity to the most
    similar target row. TDAS is the mean number of target rows with
    similarity ``>= epsilon`` per source row.

    Returns
    -------
    (tdas, epsilon) : (float, float)
    """
    source = as_feature_matrix(source, "source")
    target = as_feature_matrix(target, "target")
    if source.shape[0] == 0 or target.shape[0] == 0:
        raise InvalidInputError("TDAS needs non-empty domains")
    sims = metric.pairwise(source, target)
    epsilon = float(np.mean(np.max(sims, axis=1)))
    counts = np.count_nonzero(sims >= epsilon, axis=1)
    return float(np.mean(counts)), epsilon


def _halves(n, rng):
    perm = rng.permutation(n)
    return perm[: n // 2], perm[n // 2:]


def hdh_divergence(source, target, seed=0):
    """Empirical H-delta-H proxy: held-out accuracy (percent) of a source-vs-target SVM.

    Each domain is split in half at random; the linear SVM is trained on
    the two first halves (source labelled +1, target -1) and scored on the
    two second halves.
    """
    source = as_feature_matrix(source, "source")
    target = as_feature_matrix(target, "target")
    if source.shape[0] < 4 or target.shape[0] < 4:
        raise InvalidInputError("each domain needs at least 4 samples")
    if source.shape[1] != target.shape[1]:
        raise InvalidInputError("source and target representations differ in width")
    rng = np.random.default_rng(seed)
    s_train, s_test = _halves(source.shape[0], rng)
    t_train, t_test = _halves(target.shape[0], rng)
    train = LabeledDataset(
        np.vstack([source[s_train], target[t_train]]),
        np.concatenate([np.ones(s_train.size, int), -np.ones(t_train.size, int)]),
    )
    model = svm_train(train, seed=seed)
    pred, _ = svm_classify(model, np.vstack([source[s_test], target[t_test]]))
    truth = np.concatenate([np.ones(s_test.size, int), -np.ones(t_test.size, int)])
    return 100.0 * float(np.mean(pred == truth))


def _regularized(cov, ridge):
    return cov + ridge * np.eye(cov.shape[0])


def gaussian_kl_from_cov(cov_s, cov_t, ridge=DEFAULT_RIDGE):
    """``KL(N(0, cov_s) || N(0, cov_t))`` after adding ``ridge * I`` to both."""
    cov_s = _regularized(np.atleast_2d(np.asarray(cov_s, float)), ridge)
    cov_t = _regularized(np.atleast_2d(np.asarray(cov_t, float)), ridge)
    d = cov_s.shape[0]
    try:
        trace = float(np.trace(np.linalg.solve(cov_t, cov_s)))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"target covariance is singular: {exc}") from exc
    sign_s, logdet_s = np.linalg.slogdet(cov_s)
    sign_t, logdet_t = np.linalg.slogdet(cov_t)
    if sign_s <= 0 or sign_t <= 0:
        raise NumericError("covariance is not positive definite; increase the ridge")
    kl = 0.5 * (trace - d - (logdet_s - logdet_t))
    if not math.isfinite(kl):
        raise NumericError("Gaussian KL is not finite")
    return kl


def gaussian_kl(source, target, ridge=DEFAULT_RIDGE):
    """Zero-mean Gaussian KL divergence between the empirical domain covariances."""
    return gaussian_kl_from_cov(covariance(source), covariance(target), ridge)


def gaussian_entropy(cov, ridge=DEFAULT_RIDGE):
    """Differential entropy of ``N(0, cov + ridge I)`` in nats."""
    cov = _regularized(np.atleast_2d(np.asarray(cov, float)), ridge)
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise NumericError("covariance is not positive definite; increase the ridge")
    d = cov.shape[0]
    return 0.5 * (d * math.log(2.0 * math.pi * math.e) + logdet)


def gaussian_mutual_information(source, target, ridge=DEFAULT_RIDGE):
    """Gaussian approximation ``H(T) - KL(S || T)``."""
    cov_t = covariance(target)
    return gaussian_entropy(cov_t, ridge) - gaussian_kl_from_cov(covariance(source), cov_t, ridge)


def kl_reduction_after_alignment(source, target, d, ridge=DEFAULT_RIDGE):
    """Gaussian KL before and after aligning ``d``-dimensional subspaces.

    ``kl_before`` compares both domains in the top-``d`` PCA coordinates of
    the pooled data; ``kl_after`` compares the aligned source projection
    with the target-subspace projection.
    """
    source = as_feature_matrix(source, "source", min_rows=2)
    target = as_feature_matrix(target, "target", min_rows=2)
    joint = pca(np.vstack([source, target]), d)
    kl_before = gaussian_kl(joint.project(source), joint.project(target), ridge)
    model = fit_alignment(source, target, d)
    kl_after = gaussian_kl(project_source(model, source), project_target(model, target), ridge)
    return kl_before, kl_after


def divergence_report(metric, source, target, seed=0, ridge=DEFAULT_RIDGE):
    """All diagnostics for one representation.

    ``metric`` defines both the similarity used by TDAS and the
    representations (``metric.source_map`` / ``metric.target_map``) fed to
    the H-delta-H classifier and the Gaussian quantities.
    """
    if not isinstance(metric, SimilarityMetric):
        raise InvalidInputError("metric must be a SimilarityMetric")
    source = as_feature_matrix(source, "source")
    target = as_feature_matrix(target, "target")
    t, eps = tdas(metric, source, target)
    rs, rt = metric.source_map(source), metric.target_map(target)
    return DivergenceReport(
        tdas=t,
        hdh_accuracy=hdh_divergence(rs, rt, seed),
        gaussian_kl=gaussian_kl(rs, rt, ridge),
        mi_estimate=gaussian_mutual_information(rs, rt, ridge),
        epsilon_used=eps,
        seed=int(seed),
    )

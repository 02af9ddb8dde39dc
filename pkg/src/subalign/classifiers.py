"""Evaluation classifiers: exact 1-NN, a linear SVM, and ranking metrics."""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InvalidInputError, StratificationError
from .linalg import as_feature_matrix

#: Multipliers applied to the mean training similarity to form the C grid.
C_GRID_FACTORS = (0.01, 0.1, 1.0, 10.0, 100.0)


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Feature rows with one class label per row."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = as_feature_matrix(self.features, "features")
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise InvalidInputError(
                f"got {labels.shape} labels for {features.shape[0]} rows"
            )
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.features.shape[0]

    @property
    def classes(self):
        return np.unique(self.labels)

    @property
    def dim(self):
        return self.features.shape[1]

    def subset(self, index):
        return LabeledDataset(self.features[index], self.labels[index])

    def with_features(self, features):
        return LabeledDataset(features, self.labels)


def stratified_two_fold(labels, rng):
    """Assign every sample to fold 0 or 1, balancing each class.

    Raises
    ------
    StratificationError
        If some class has fewer than two samples.
    """
    labels = np.asarray(labels)
    folds = np.empty(labels.shape[0], dtype=np.int64)
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        if members.shape[0] < 2:
            raise StratificationError(
                f"class {cls} has {members.shape[0]} sample(s); "
                "two-fold stratification needs at least 2"
            )
        members = rng.permutation(members)
        folds[members] = np.arange(members.shape[0]) % 2
    return folds


def nn_classify(train, test, chunk_size=2048):
    """Label each test row with the label of its nearest training row.

    Distances are Euclidean; ties go to the lowest training index.
    """
    test = as_feature_matrix(test, "test")
    if test.shape[1] != train.dim:
        raise InvalidInputError(
            f"test has {test.shape[1]} columns, training data has {train.dim}"
        )
    nearest = np.empty(test.shape[0], dtype=np.int64)
    for start in range(0, test.shape[0], chunk_size):
        block = cdist(test[start:start + chunk_size], train.features, "sqeuclidean")
        nearest[start:start + chunk_size] = np.argmin(block, axis=1)
    return train.labels[nearest]


def accuracy(predicted, truth):
    """Percentage of matching labels."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise InvalidInputError("prediction and truth lengths differ")
    return 100.0 * float(np.mean(predicted == truth))


# -- linear SVM ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearModel:
    """One-vs-rest linear classifiers: ``score_k(x) = weights[k] . x + biases[k]``."""

    classes: np.ndarray
    weights: np.ndarray
    biases: np.ndarray
    c_value: float

    @property
    def dim(self):
        return self.weights.shape[1]


def mean_similarity(features):
    """Mean absolute dot product between training rows (diagonal included)."""
    gram = features @ features.T
    return float(np.mean(np.abs(gram)))


def default_c_grid(features):
    center = mean_similarity(features)
    if center <= 0:
        center = 1.0
    return [center * f for f in C_GRID_FACTORS]


def _one_vs_rest_targets(labels, classes):
    return np.where(labels[:, None] == classes[None, :], 1.0, -1.0)


def _pegasos(x, targets, c, rng, epochs):
    """Primal subgradient solver for all one-vs-rest problems at once.

    Minimizes ``lam/2 ||w||^2 + mean_i hinge(y_i (w . [x_i, 1]))`` with
    ``lam = 1 / (c n)``, i.e. ``1/2 ||w||^2 + c sum_i hinge``. The bias is
    handled as an extra constant feature and is therefore regularized.
    """
    n = x.shape[0]
    xa = np.hstack([x, np.ones((n, 1))])
    k = targets.shape[1]
    lam = 1.0 / (c * n)
    radius = 1.0 / np.sqrt(lam)
    w = np.zeros((k, xa.shape[1]))
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            yi = targets[i]
            active = yi * (w @ xa[i]) < 1.0
            w *= 1.0 - eta * lam
            if active.any():
                w[active] += eta * np.outer(yi[active], xa[i])
            norms = np.linalg.norm(w, axis=1)
            over = norms > radius
            if over.any():
                w[over] *= (radius / norms[over])[:, None]
    return w[:, :-1].copy(), w[:, -1].copy()


def _fit_linear(features, labels, classes, c, seed, epochs):
    rng = np.random.default_rng(seed)
    targets = _one_vs_rest_targets(labels, classes)
    weights, biases = _pegasos(features, targets, c, rng, epochs)
    return LinearModel(classes=classes, weights=weights, biases=biases, c_value=float(c))


def svm_train(train, c_grid=None, seed=0, epochs=50):
    """Train one-vs-rest linear SVMs, choosing C by two-fold CV.

    Parameters
    ----------
    train : LabeledDataset
        At least two classes.
    c_grid : sequence of float, optional
        Candidate C values. Defaults to the mean training similarity times
        ``C_GRID_FACTORS``. With a single candidate no CV is run.
    seed : int
        Seeds both the CV split and the sample order of the solver.
    """
    classes = train.classes
    if classes.shape[0] < 2:
        raise InvalidInputError("svm_train needs at least two classes")
    if c_grid is None:
        c_grid = default_c_grid(train.features)
    c_grid = [float(c) for c in c_grid]
    if not c_grid or any(not np.isfinite(c) or c <= 0 for c in c_grid):
        raise InvalidInputError(f"C values must be positive and finite, got {c_grid}")

    best_c = c_grid[0]
    if len(c_grid) > 1:
        rng = np.random.default_rng(seed)
        try:
            folds = stratified_two_fold(train.labels, rng)
        except StratificationError as exc:
            best_c = c_grid[len(c_grid) // 2]
            warnings.warn(f"skipping C search ({exc}); using C={best_c:g}", stacklevel=2)
        else:
            best_acc = -1.0
            for c in c_grid:
                correct = 0
                for fold in (0, 1):
                    tr, te = folds != fold, folds == fold
                    model = _fit_linear(
                        train.features[tr], train.labels[tr], classes, c, seed, epochs
                    )
                    pred, _ = svm_classify(model, train.features[te])
                    correct += int(np.sum(pred == train.labels[te]))
                acc = correct / len(train)
                if acc > best_acc:
                    best_acc, best_c = acc, c
    return _fit_linear(train.features, train.labels, classes, best_c, seed, epochs)


def svm_classify(model, test):
    """Predicted labels and the per-class score matrix (n x k)."""
    test = as_feature_matrix(test, "test")
    if test.shape[1] != model.dim:
        raise InvalidInputError(f"test has {test.shape[1]} columns, model expects {model.dim}")
    scores = test @ model.weights.T + model.biases
    return model.classes[np.argmax(scores, axis=1)], scores


# -- precomputed-similarity SVM -------------------------------------------------


@dataclass(frozen=True, eq=False)
class KernelModel:
    """One-vs-rest kernel classifiers: ``score = K(test, train) @ coef.T + bias``."""

    classes: np.ndarray
    coef: np.ndarray
    bias: np.ndarray
    c_value: float


def svm_train_precomputed(gram, labels, c=None, seed=0, epochs=50):
    """Kernelized Pegasos on a precomputed train x train similarity matrix.

    The similarity need not be positive semidefinite; convergence is then
    not guaranteed, but the solver still returns its final iterate. A
    constant 1 is added to every similarity to account for the bias.
    """
    gram = np.asarray(gram, dtype=np.float64)
    labels = np.asarray(labels)
    n = labels.shape[0]
    if gram.shape != (n, n):
        raise InvalidInputError(f"gram must be {n}x{n}, got {gram.shape}")
    classes = np.unique(labels)
    if classes.shape[0] < 2:
        raise InvalidInputError("svm_train_precomputed needs at least two classes")
    if c is None:
        c = float(np.mean(np.abs(gram))) or 1.0
    lam = 1.0 / (c * n)
    kb = gram + 1.0
    targets = _one_vs_rest_targets(labels, classes)
    alpha = np.zeros((classes.shape[0], n))
    rng = np.random.default_rng(seed)
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            margin = targets[i] * ((alpha * targets.T) @ kb[:, i]) / (lam * t)
            alpha[margin < 1.0, i] += 1.0
    coef = alpha * targets.T / (lam * t)
    return KernelModel(classes=classes, coef=coef, bias=coef.sum(axis=1), c_value=float(c))


def svm_classify_precomputed(model, similarities):
    """Classify from a test x train similarity matrix."""
    similarities = np.asarray(similarities, dtype=np.float64)
    if similarities.ndim != 2 or similarities.shape[1] != model.coef.shape[1]:
        raise InvalidInputError("similarity matrix does not match the training set size")
    scores = similarities @ model.coef.T + model.bias
    return model.classes[np.argmax(scores, axis=1)], scores


# -- ranking -------------------------------------------------------------------


def average_precision(scores, truth):
    """Average of precision@rank over the ranks of the positives.

    Rows are ranked by descending score, ties by index.
    """
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth, dtype=bool)
    order = np.lexsort((np.arange(scores.shape[0]), -scores))
    hits = truth[order]
    if not hits.any():
        raise InvalidInputError("average precision is undefined without positives")
    ranks = np.flatnonzero(hits) + 1
    return float(np.mean(np.arange(1, ranks.shape[0] + 1) / ranks))


def mean_average_precision(scores, truth):
    """Mean over classes of the per-class average precision.

    Parameters
    ----------
    scores : array-like, shape (n, k)
    truth : array-like of bool, shape (n, k)
        Multi-label ground truth. Classes without positives are skipped
        with a warning.
    """
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth, dtype=bool)
    if scores.ndim == 1:
        scores, truth = scores[:, None], truth.reshape(-1, 1)
    if scores.shape != truth.shape:
        raise InvalidInputError(f"scores {scores.shape} and truth {truth.shape} differ")
    aps = []
    for k in range(scores.shape[1]):
        if not truth[:, k].any():
            warnings.warn(f"class column {k} has no positives; excluded from mAP", stacklevel=2)
            continue
        aps.append(average_precision(scores[:, k], truth[:, k]))
    if not aps:
        raise InvalidInputError("no class has any positive sample")
    return float(np.mean(aps))

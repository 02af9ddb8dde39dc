import numpy as np
import pytest
from oracles import average_precision_brute, hinge_qp_ovr, nn_brute

from subalign import (
    InvalidInputError,
    LabeledDataset,
    StratificationError,
    mean_average_precision,
    nn_classify,
    svm_classify,
    svm_train,
)
from subalign.classifiers import (
    LinearModel,
    accuracy,
    average_precision,
    default_c_grid,
    mean_similarity,
    stratified_two_fold,
    svm_classify_precomputed,
    svm_train_precomputed,
)


def blobs(rng, n_per_class=40, classes=3, D=4, sep=2.0):
    labels = np.repeat(np.arange(classes), n_per_class)
    x = rng.standard_normal((labels.size, D))
    x[:, :classes] += sep * np.eye(classes)[labels]
    return LabeledDataset(x, labels)


def test_nn_single_training_point():
    train = LabeledDataset(np.array([[0.0, 0.0]]), np.array([7]))
    assert nn_classify(train, np.array([[5.0, -3.0], [1.0, 1.0]])).tolist() == [7, 7]


def test_nn_training_points_classify_themselves(rng):
    data = blobs(rng)
    np.testing.assert_array_equal(nn_classify(data, data.features), data.labels)


def test_nn_matches_brute_force(rng):
    train = LabeledDataset(rng.standard_normal((100, 3)), rng.integers(0, 5, 100))
    test = rng.standard_normal((100, 3))
    np.testing.assert_array_equal(nn_classify(train, test, chunk_size=17), nn_brute(train.features, train.labels, test))


def test_nn_is_invariant_to_rotation(rng):
    train = LabeledDataset(rng.standard_normal((60, 5)), rng.integers(0, 3, 60))
    test = rng.standard_normal((40, 5))
    rot, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    np.testing.assert_array_equal(
        nn_classify(train, test), nn_classify(train.with_features(train.features @ rot), test @ rot)
    )


def test_nn_ties_go_to_lowest_index():
    train = LabeledDataset(np.array([[1.0], [-1.0]]), np.array([3, 4]))
    assert nn_classify(train, np.array([[0.0]])).tolist() == [3]


def test_nn_rejects_width_mismatch(rng):
    with pytest.raises(InvalidInputError):
        nn_classify(blobs(rng), np.zeros((2, 3)))


def test_accuracy_percent():
    assert accuracy([1, 2, 3, 4], [1, 2, 0, 0]) == 50.0
    with pytest.raises(InvalidInputError):
        accuracy([1], [1, 2])


def test_svm_separable_training_set(rng):
    data = blobs(rng, sep=10.0)
    pred, _ = svm_classify(svm_train(data), data.features)
    assert accuracy(pred, data.labels) == 100.0


def test_svm_label_flip_symmetry(rng):
    data = LabeledDataset(rng.standard_normal((60, 3)) + [[1.0, 0, 0]], np.repeat([0, 1], 30))
    data = data.with_features(data.features + np.where(data.labels[:, None] == 1, 1.5, -1.5) * [1, 0, 0])
    flipped = LabeledDataset(data.features, 1 - data.labels)
    a = svm_train(data, c_grid=[1.0])
    b = svm_train(flipped, c_grid=[1.0])
    test = rng.standard_normal((50, 3))
    pa, _ = svm_classify(a, test)
    pb, _ = svm_classify(b, test)
    np.testing.assert_array_equal(pa, 1 - pb)


@pytest.mark.parametrize("c", [0.1, 1.0])
def test_svm_close_to_exact_qp(c):
    rng = np.random.default_rng(7)
    train = blobs(rng)
    test = blobs(rng, n_per_class=100)
    ours, _ = svm_classify(svm_train(train, c_grid=[c]), test.features)
    classes, w, b = hinge_qp_ovr(train.features, train.labels, c)
    exact = classes[np.argmax(test.features @ w.T + b, axis=1)]
    assert abs(accuracy(ours, test.labels) - accuracy(exact, test.labels)) <= 2.0


def test_svm_is_deterministic(rng):
    data = blobs(rng)
    a, b = svm_train(data, seed=4), svm_train(data, seed=4)
    assert np.array_equal(a.weights, b.weights) and a.c_value == b.c_value


def test_svm_needs_two_classes(rng):
    with pytest.raises(InvalidInputError):
        svm_train(LabeledDataset(rng.standard_normal((5, 2)), np.zeros(5, int)))


@pytest.mark.parametrize("grid", [[], [0.0], [np.inf]])
def test_svm_rejects_bad_grid(rng, grid):
    with pytest.raises(InvalidInputError):
        svm_train(blobs(rng), c_grid=grid)


def test_zero_weight_model_picks_first_class():
    model = LinearModel(classes=np.array([2, 5]), weights=np.zeros((2, 3)), biases=np.zeros(2), c_value=1.0)
    pred, scores = svm_classify(model, np.ones((4, 3)))
    assert pred.tolist() == [2, 2, 2, 2]
    np.testing.assert_array_equal(scores, np.zeros((4, 2)))


def test_scores_are_affine(rng):
    data = blobs(rng)
    model = svm_train(data, c_grid=[1.0])
    test = rng.standard_normal((10, 4))
    _, scores = svm_classify(model, test)
    for k in range(model.classes.size):
        np.testing.assert_allclose(scores[:, k], test @ model.weights[k] + model.biases[k], atol=1e-12)


def test_c_grid_scales_with_similarity():
    x = np.array([[1.0, 0.0], [0.0, 2.0]])
    assert mean_similarity(x) == pytest.approx((1 + 4) / 4)
    assert default_c_grid(x) == pytest.approx([1.25 * f for f in (0.01, 0.1, 1, 10, 100)])


def test_svm_with_a_singleton_class_falls_back_to_fixed_c(rng):
    x = rng.standard_normal((7, 2))
    labels = np.array([0, 0, 0, 1, 1, 1, 2])
    with pytest.warns(UserWarning, match="skipping C search"):
        model = svm_train(LabeledDataset(x, labels))
    assert model.c_value == pytest.approx(default_c_grid(x)[2])


def test_stratification_error_names_the_class(rng):
    with pytest.raises(StratificationError, match="class 9"):
        stratified_two_fold(np.array([0, 0, 9]), rng)


def test_stratified_folds_are_balanced(rng):
    labels = np.repeat([0, 1, 2], [10, 7, 4])
    folds = stratified_two_fold(labels, rng)
    for cls in (0, 1, 2):
        counts = np.bincount(folds[labels == cls], minlength=2)
        assert abs(counts[0] - counts[1]) <= 1


def test_precomputed_kernel_on_linear_gram_classifies_blobs(rng):
    train = blobs(rng, sep=4.0)
    test = blobs(rng, sep=4.0)
    model = svm_train_precomputed(train.features @ train.features.T, train.labels)
    pred, _ = svm_classify_precomputed(model, test.features @ train.features.T)
    assert accuracy(pred, test.labels) >= 80.0


def test_precomputed_kernel_shape_checks(rng):
    with pytest.raises(InvalidInputError):
        svm_train_precomputed(np.eye(3), np.array([0, 1]))
    model = svm_train_precomputed(np.eye(4), np.array([0, 1, 0, 1]))
    with pytest.raises(InvalidInputError):
        svm_classify_precomputed(model, np.ones((2, 3)))


def test_average_precision_examples():
    assert average_precision([0.9, 0.8, 0.1], [True, True, False]) == 1.0
    assert average_precision([0.9, 0.8, 0.2, 0.1], [False, True, False, False]) == 0.5


def test_average_precision_matches_brute_force(rng):
    for _ in range(50):
        scores = rng.integers(0, 5, 20).astype(float)
        truth = rng.random(20) < 0.3
        truth[0] = True
        assert average_precision(scores, truth) == pytest.approx(
            average_precision_brute(list(scores), list(truth))
        )


def test_average_precision_ignores_monotone_transforms(rng):
    scores = rng.standard_normal(30)
    truth = rng.random(30) < 0.4
    truth[3] = True
    assert average_precision(scores, truth) == average_precision(np.exp(3 * scores) + 1, truth)


def test_map_skips_classes_without_positives():
    scores = np.array([[0.9, 0.1], [0.2, 0.8]])
    truth = np.array([[True, False], [False, False]])
    with pytest.warns(UserWarning, match="no positives"):
        assert mean_average_precision(scores, truth) == 1.0
    with pytest.warns(UserWarning), pytest.raises(InvalidInputError):
        mean_average_precision(scores, np.zeros((2, 2), bool))

"""Slow, independent reference implementations used only by the tests.

Each oracle recomputes a quantity from its definition with plain loops or
a different numerical route than the package uses.
"""

import math

import numpy as np


def zscore_loop(data):
    data = np.asarray(data, float)
    n, D = data.shape
    out = np.zeros_like(data)
    for j in range(D):
        col = data[:, j]
        mu = sum(col) / n
        sd = math.sqrt(sum((v - mu) ** 2 for v in col) / n)
        out[:, j] = 0.0 if sd <= 1e-12 else (col - mu) / sd
    return out


def covariance_outer(data):
    """Mean of centered outer products."""
    data = np.asarray(data, float)
    mu = data.mean(axis=0)
    acc = np.zeros((data.shape[1], data.shape[1]))
    for row in data:
        v = row - mu
        acc += np.outer(v, v)
    return acc / data.shape[0]


def pca_svd(data, d):
    """Top-``d`` principal axes from the SVD of the centered data, package sign rule applied."""
    data = np.asarray(data, float)
    centered = data - data.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    basis = vt[:d].T.copy()
    for k in range(d):
        if basis[np.argmax(np.abs(basis[:, k])), k] < 0:
            basis[:, k] *= -1
    return basis, s[:d] ** 2 / data.shape[0]


def frobenius_objective(xs, xt, m):
    return float(np.linalg.norm(xs @ m - xt) ** 2)


def nn_brute(train_x, train_y, test_x):
    out = []
    for t in test_x:
        best, best_i = math.inf, -1
        for i, x in enumerate(train_x):
            dist = sum((a - b) ** 2 for a, b in zip(t, x))
            if dist < best:
                best, best_i = dist, i
        out.append(train_y[best_i])
    return np.asarray(out)


def tdas_brute(a_matrix, source, target):
    ns, nt = source.shape[0], target.shape[0]
    sims = [[float(source[i] @ a_matrix @ target[j]) for j in range(nt)] for i in range(ns)]
    eps = sum(max(row) for row in sims) / ns
    total = 0
    for row in sims:
        total += sum(1 for v in row if v >= eps)
    return total / ns, eps


def average_precision_brute(scores, truth):
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    hits, precisions = 0, []
    for rank, i in enumerate(order, start=1):
        if truth[i]:
            hits += 1
            precisions.append(hits / rank)
    return sum(precisions) / len(precisions)


def stability_rhs(d, n_min, gamma, delta, b):
    """Right-hand side of the eigen-gap condition, evaluated term by term."""
    confidence = 1.0 + (math.log(2.0 / delta) / 2.0) ** 0.5
    return confidence * (16.0 * d * math.sqrt(d) * b) / (gamma * n_min ** 0.5)


def dmax_brute(source_eigs, target_eigs, n_s, n_t, gamma, delta, b):
    L = min(len(source_eigs), len(target_eigs))
    best = 0
    for d in range(1, L):
        ok = True
        for dd in range(1, d + 1):
            gap = min(source_eigs[dd - 1] - source_eigs[dd], target_eigs[dd - 1] - target_eigs[dd])
            if gap < stability_rhs(dd, min(n_s, n_t), gamma, delta, b):
                ok = False
                break
        if ok:
            best = d
    return max(best, 1)


def mle_brute(data):
    """Levina-Bickel fixed-radius estimate with explicit loops over rows."""
    data = np.asarray(data, float)
    n = data.shape[0]
    dist = np.sqrt(((data[:, None, :] - data[None, :, :]) ** 2).sum(-1))
    iu = np.triu_indices(n, 1)
    radius = dist[iu].mean()
    estimates = []
    for i in range(n):
        inside = [dist[i, j] for j in range(n) if j != i and 0 < dist[i, j] <= radius]
        s = sum(math.log(radius / v) for v in inside)
        if inside and s > 0:
            estimates.append(len(inside) / s)
    return sum(estimates) / len(estimates)


def gaussian_kl_direct(cov_s, cov_t):
    d = cov_s.shape[0]
    inv_t = np.linalg.inv(cov_t)
    return 0.5 * (np.trace(inv_t @ cov_s) - d - math.log(np.linalg.det(cov_s) / np.linalg.det(cov_t)))


def lmsa_objective_loops(coords, xs, xt, pairs, triplets, beta1, beta2, m):
    """Large-margin alignment objective evaluated pair by pair."""
    proj = coords @ m
    value = float(np.sum((xs @ m - xt) ** 2))
    for i, j in pairs:
        value += beta1 * float(np.linalg.norm(proj[i] - proj[j]))
    for i, j, k in triplets:
        dij = float(np.linalg.norm(proj[i] - proj[j]))
        dik = float(np.linalg.norm(proj[i] - proj[k]))
        value += beta2 * max(0.0, 1.0 + dij - dik)
    return value


def triplets_brute(features, labels, n_neighbors=3):
    """All unordered same-class pairs, and triplets whose ``j`` is a near same-class row of ``i``."""
    n = features.shape[0]
    pairs, triplets = set(), set()
    for i in range(n):
        for j in range(i + 1, n):
            if labels[i] == labels[j]:
                pairs.add((i, j))
    for i in range(n):
        same = [j for j in range(n) if j != i and labels[j] == labels[i]]
        same.sort(key=lambda j: (float(np.sum((features[i] - features[j]) ** 2)), j))
        for j in same[:n_neighbors]:
            for k in range(n):
                if labels[k] != labels[i]:
                    triplets.add((i, j, k))
    return pairs, triplets


def hinge_qp_ovr(x, labels, c):
    """Exact one-vs-rest soft-margin SVMs (bias regularized as a constant feature) via cvxpy."""
    import cvxpy as cp

    classes = np.unique(labels)
    xa = np.hstack([x, np.ones((x.shape[0], 1))])
    weights = []
    for cls in classes:
        y = np.where(labels == cls, 1.0, -1.0)
        w = cp.Variable(xa.shape[1])
        objective = 0.5 * cp.sum_squares(w) + c * cp.sum(cp.pos(1 - cp.multiply(y, xa @ w)))
        cp.Problem(cp.Minimize(objective)).solve()
        weights.append(np.asarray(w.value))
    weights = np.vstack(weights)
    return classes, weights[:, :-1], weights[:, -1]

"""Using source labels: ITML-transformed PCA subspaces and large-margin alignment."""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .alignment import AlignmentModel, align_subspaces
from .classifiers import LabeledDataset
from .errors import InvalidInputError, NumericError
from .linalg import Subspace, as_feature_matrix, pca

# -- ITML --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MetricMatrix:
    """Learned Mahalanobis matrix ``w`` and its lower Cholesky factor.

    ``w = cholesky @ cholesky.T``; rows are mapped to the metric space by
    ``x @ cholesky`` so that squared Euclidean distances there equal
    ``(x - y) w (x - y)'``.
    """

    w: np.ndarray
    cholesky: np.ndarray
    n_iter: int = 0
    converged: bool = True
    bounds: tuple = (None, None)
    constraints: tuple = field(default=(), repr=False)
    slack_targets: np.ndarray = field(default=None, repr=False)


def _constraint_pairs(labels, num_constraints, rng):
    """Random similar and dissimilar index pairs, at most ``num_constraints`` in total."""
    n = labels.shape[0]
    iu, ju = np.triu_indices(n, 1)
    same = labels[iu] == labels[ju]
    per_kind = num_constraints // 2
    picked = []
    for mask in (same, ~same):
        idx = np.flatnonzero(mask)
        if idx.shape[0] > per_kind:
            idx = np.sort(rng.choice(idx, size=per_kind, replace=False))
        picked.append((iu[idx], ju[idx]))
    return picked


def itml_fit(
    source,
    max_iter=1000,
    slack=1.0,
    num_constraints=None,
    bounds=None,
    seed=0,
    convergence_threshold=1e-3,
    callback=None,
):
    """Information-theoretic metric learning by cyclic Bregman projections.

    Each sweep visits every similarity constraint ``d_W(x_i, x_j) <= u`` and
    dissimilarity constraint ``d_W(x_i, x_j) >= l`` (squared Mahalanobis
    distances) and applies the rank-one LogDet projection with slack. The
    prior is the identity.

    Parameters
    ----------
    source : LabeledDataset
    max_iter : int
        Maximum number of sweeps. ``0`` returns the identity metric.
    slack : float
        Slack trade-off; larger values enforce the constraints harder.
    num_constraints : int, optional
        Total number of sampled pairs, half similar and half dissimilar.
        Defaults to ``40 * n_classes ** 2``.
    bounds : (float, float), optional
        ``(u, l)`` in squared-distance units. Defaults to the 5th and 95th
        percentiles of the squared pairwise distances.
    callback : callable, optional
        Called as ``callback(iteration, w)`` after each sweep.
    """
    if not isinstance(source, LabeledDataset):
        raise InvalidInputError("source must be a LabeledDataset")
    x = source.features
    labels = source.labels
    classes, counts = np.unique(labels, return_counts=True)
    if classes.shape[0] < 2:
        raise InvalidInputError("ITML needs at least two classes")
    if np.any(counts < 2):
        raise InvalidInputError("ITML needs at least two samples per class")
    if slack <= 0:
        raise InvalidInputError("slack must be positive")
    D = x.shape[1]
    if num_constraints is None:
        num_constraints = 40 * classes.shape[0] ** 2

    if bounds is None:
        sq = pdist(x, "sqeuclidean")
        u, l = np.percentile(sq, (5, 95))
    else:
        u, l = bounds
    u, l = max(float(u), 1e-9), max(float(l), 1e-9)

    rng = np.random.default_rng(seed)
    (a, b), (c, e) = _constraint_pairs(labels, num_constraints, rng)
    diffs = np.vstack([x[a] - x[b], x[c] - x[e]])
    keep = np.linalg.norm(diffs, axis=1) > 1e-9
    kinds = np.concatenate([np.ones(a.shape[0]), -np.ones(c.shape[0])])
    diffs, kinds = diffs[keep], kinds[keep]
    targets = np.where(kinds > 0, u, l)

    # Damping of the slack projection, as in the reference algorithm.
    step = slack / (slack + 1.0)
    w = np.eye(D)
    lam = np.zeros(kinds.shape[0])
    lam_old = lam.copy()
    converged = max_iter == 0
    it = 0
    for it in range(1, max_iter + 1):
        for i in range(kinds.shape[0]):
            v = diffs[i]
            wv = w @ v
            p = float(v @ wv)
            delta = kinds[i]
            if p < 1e-12:
                continue
            alpha = min(lam[i], step * delta * (1.0 / p - 1.0 / targets[i]))
            beta = delta * alpha / (1.0 - delta * alpha * p)
            targets[i] = 1.0 / (1.0 / targets[i] + delta * alpha / slack)
            lam[i] -= alpha
            w += beta * np.outer(wv, wv)
        if callback is not None:
            callback(it, w)
        normsum = np.linalg.norm(lam) + np.linalg.norm(lam_old)
        if normsum == 0 or np.abs(lam_old - lam).sum() / normsum < convergence_threshold:
            converged = True
            break
        lam_old = lam.copy()
    if not converged:
        warnings.warn(f"ITML did not converge in {max_iter} sweeps", stacklevel=2)

    w = 0.5 * (w + w.T)
    try:
        chol = np.linalg.cholesky(w)
    except np.linalg.LinAlgError as exc:
        raise NumericError("learned metric is not positive definite") from exc
    constraints = (a[keep[: a.shape[0]]], b[keep[: a.shape[0]]],
                   c[keep[a.shape[0]:]], e[keep[a.shape[0]:]])
    return MetricMatrix(
        w=w, cholesky=chol, n_iter=it if max_iter else 0, converged=converged,
        bounds=(u, l), constraints=constraints, slack_targets=targets,
    )


def itml_pca_subspace(source, d, **itml_options):
    """Source subspace from PCA on ITML-transformed rows ``S W_c``.

    Returns the subspace and the metric; the Cholesky factor must be
    applied to source rows again whenever they are projected.
    """
    metric = itml_fit(source, **itml_options)
    return pca(source.features @ metric.cholesky, d), metric


def fit_alignment_itml(source, target, d, source_stats=None, target_stats=None, **itml_options):
    """Align an ITML-PCA source subspace with a plain PCA target subspace."""
    target = as_feature_matrix(target, "target", min_rows=2)
    source_subspace, metric = itml_pca_subspace(source, d, **itml_options)
    return align_subspaces(
        source_subspace,
        pca(target, d),
        source_stats=source_stats,
        target_stats=target_stats,
        source_transform=metric.cholesky,
    )


# -- LMSA --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TripletSet:
    """Same-class pairs and (anchor, near same-class, different-class) triplets."""

    pairs: np.ndarray
    triplets: np.ndarray


def build_triplets(source, n_neighbors=3):
    """Enumerate the LMSA constraint sets for a labelled source.

    ``pairs`` holds every unordered same-class pair ``(i, j), i < j``.
    ``triplets`` holds every ``(i, j, k)`` where ``j`` is one of the
    ``n_neighbors`` Euclidean-nearest same-class samples of ``i`` (ties by
    index) and ``k`` is any sample of another class.
    """
    labels = source.labels
    n = labels.shape[0]
    iu, ju = np.triu_indices(n, 1)
    same = labels[iu] == labels[ju]
    pairs = np.column_stack([iu[same], ju[same]]).astype(np.int64)

    dist = cdist(source.features, source.features, "sqeuclidean")
    chunks = []
    singletons = []
    for i in range(n):
        mates = np.flatnonzero((labels == labels[i]) & (np.arange(n) != i))
        if mates.shape[0] == 0:
            singletons.append(labels[i])
            continue
        order = np.lexsort((mates, dist[i, mates]))
        near = mates[order[:n_neighbors]]
        others = np.flatnonzero(labels != labels[i])
        if others.shape[0] == 0:
            continue
        jj, kk = np.meshgrid(near, others, indexing="ij")
        chunks.append(np.column_stack([np.full(jj.size, i), jj.ravel(), kk.ravel()]))
    if singletons:
        warnings.warn(
            f"classes with a single sample contribute no pairs: {sorted(set(singletons))}",
            stacklevel=2,
        )
    triplets = np.vstack(chunks).astype(np.int64) if chunks else np.empty((0, 3), np.int64)
    return TripletSet(pairs=pairs, triplets=triplets)


#: Pair distances below this are treated as non-differentiable (zero gradient).
DIST_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class LMSAProblem:
    """Large-margin alignment objective for fixed bases and constraints.

    ``F(M) = ||Xs M - Xt||_F^2 + beta1 sum_pairs d_ij
    + beta2 sum_triplets max(0, 1 - (d_ik - d_ij))`` with
    ``d_ij = ||(y_i - y_j) Xs M||``.
    """

    coords: np.ndarray          # source rows in source-subspace coordinates, n x d_s
    source_basis: np.ndarray
    target_basis: np.ndarray
    constraints: TripletSet
    beta1: float
    beta2: float

    def _exact(self, proj, i, j):
        return np.linalg.norm(proj[i] - proj[j], axis=1)

    def terms(self, m):
        m = np.asarray(m, dtype=np.float64)
        proj = self.coords @ m
        fro = float(np.sum((self.source_basis @ m - self.target_basis) ** 2))
        p = self.constraints.pairs
        pair_term = float(self._exact(proj, p[:, 0], p[:, 1]).sum()) if p.size else 0.0
        t = self.constraints.triplets
        if t.size:
            dij = self._exact(proj, t[:, 0], t[:, 1])
            dik = self._exact(proj, t[:, 0], t[:, 2])
            hinge = float(np.maximum(0.0, 1.0 - (dik - dij)).sum())
        else:
            hinge = 0.0
        return fro, pair_term, hinge

    def objective(self, m):
        fro, pair_term, hinge = self.terms(m)
        return fro + self.beta1 * pair_term + self.beta2 * hinge

    def gradient(self, m):
        """A subgradient of :meth:`objective` at ``m``.

        Hinge terms exactly at the kink and pair distances below
        ``DIST_EPS`` contribute zero.
        """
        m = np.asarray(m, dtype=np.float64)
        n = self.coords.shape[0]
        proj = self.coords @ m
        grad = 2.0 * self.source_basis.T @ (self.source_basis @ m - self.target_basis)

        # Accumulate per-pair weights, then use sum_ij c_ij z_ij' z_ij M = U' L U M.
        weights = np.zeros((n, n))
        p = self.constraints.pairs
        if self.beta1 and p.size:
            np.add.at(weights, (p[:, 0], p[:, 1]), self.beta1)
        t = self.constraints.triplets
        if self.beta2 and t.size:
            dij = self._exact(proj, t[:, 0], t[:, 1])
            dik = self._exact(proj, t[:, 0], t[:, 2])
            active = 1.0 - (dik - dij) > 0.0
            ta = t[active]
            np.add.at(weights, (ta[:, 0], ta[:, 1]), self.beta2)
            np.add.at(weights, (ta[:, 0], ta[:, 2]), -self.beta2)
        rows, cols = np.nonzero(weights)
        if rows.size:
            dist = self._exact(proj, rows, cols)
            ok = dist >= DIST_EPS
            c = np.zeros((n, n))
            np.add.at(c, (rows[ok], cols[ok]), weights[rows[ok], cols[ok]] / dist[ok])
            c = c + c.T
            laplacian = np.diag(c.sum(axis=1)) - c
            grad += self.coords.T @ laplacian @ proj
        return grad


def lmsa_problem(source, target, d, beta1=0.01, beta2=0.01, constraints=None):
    """Assemble the LMSA objective from a labelled source and an unlabelled target."""
    if beta1 < 0 or beta2 < 0:
        raise InvalidInputError("beta1 and beta2 must be non-negative")
    target = as_feature_matrix(target, "target", min_rows=2)
    if constraints is None:
        constraints = build_triplets(source)
    if beta2 > 0 and constraints.triplets.shape[0] == 0:
        raise InvalidInputError("beta2 > 0 requires at least one triplet (two or more classes)")
    xs = pca(source.features, d)
    xt = pca(target, d)
    problem = LMSAProblem(
        coords=source.features @ xs.basis,
        source_basis=xs.basis,
        target_basis=xt.basis,
        constraints=constraints,
        beta1=float(beta1),
        beta2=float(beta2),
    )
    return problem, xs, xt


def lmsa_fit(
    source,
    target,
    d,
    beta1=0.01,
    beta2=0.01,
    steps=500,
    lr=1e-3,
    source_stats=None,
    target_stats=None,
):
    """Large-margin subspace alignment by full-batch subgradient descent.

    Starts from the closed-form ``M = Xs' Xt`` and keeps the iterate with
    the lowest objective.

    Returns
    -------
    model : AlignmentModel
    trace : ndarray, shape (steps + 1,)
        Objective value at every iterate, the initial one first.
    """
    problem, xs, xt = lmsa_problem(source, target, d, beta1, beta2)
    m = xs.basis.T @ xt.basis
    best_m, best_f = m.copy(), problem.objective(m)
    trace = [best_f]
    for _ in range(steps):
        m = m - lr * problem.gradient(m)
        f = problem.objective(m)
        if not np.isfinite(f):
            raise NumericError("LMSA objective diverged; lower the learning rate")
        trace.append(f)
        if f < best_f:
            best_m, best_f = m.copy(), f
    model = AlignmentModel(
        source_subspace=Subspace(xs.basis, xs.eigenvalues),
        target_subspace=Subspace(xt.basis, xt.eigenvalues),
        m_matrix=best_m,
        source_stats=source_stats,
        target_stats=target_stats,
    )
    return model, np.asarray(trace)

"""Seeded multi-trial evaluation on a labelled source and an unlabelled target.

Each trial samples ``train_per_class`` labelled source rows per class,
z-normalizes the sample and the full target separately, builds the
configured representation, classifies every target row and only then
hands the predictions to the scorer, which is the sole holder of the
target labels.
"""

import json
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .alignment import SimilarityMetric, fit_alignment, project_source, project_target
from .classifiers import LabeledDataset, accuracy, nn_classify, svm_classify, svm_train
from .datasets import load_dataset, load_features
from .dimensionality import (
    StabilityBoundParams,
    compute_dmax,
    fit_alignment_mle,
    mle_intrinsic_dim,
    sample_norm_bound,
    select_dim_cv,
)
from .divergence import DEFAULT_RIDGE, DivergenceReport, divergence_report
from .errors import InvalidInputError, StratificationError
from .linalg import as_feature_matrix, eigen_spectrum, pca, zscore
from .supervised import fit_alignment_itml, lmsa_fit

METHODS = ("na", "baseline-s", "baseline-t", "sa", "sa-mle", "sa-itml", "lmsa")
CLASSIFIERS = ("nn", "svm")
SCHEMA_VERSION = 1


def parse_dim_select(value):
    """Return ``("bound-cv", None)``, ``("mle", None)`` or ``("fixed", d)``."""
    if value in ("bound-cv", "mle"):
        return value, None
    if isinstance(value, str) and value.startswith("fixed:"):
        try:
            d = int(value[len("fixed:"):])
        except ValueError:
            d = 0
        if d >= 1:
            return "fixed", d
    raise InvalidInputError(
        f"dim_select must be 'bound-cv', 'mle' or 'fixed:<positive int>', got {value!r}"
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a run. ``divergence`` toggles the diagnostics on trial 0."""

    source_path: str | None = None
    target_path: str | None = None
    method: str = "sa"
    classifier: str = "nn"
    dim_select: str = "bound-cv"
    trials: int = 20
    train_per_class: int = 20
    seed: int = 0
    gamma: float = 1e5
    delta: float = 0.1
    beta1: float = 0.01
    beta2: float = 0.01
    ridge: float = DEFAULT_RIDGE
    divergence: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidInputError(f"method must be one of {', '.join(METHODS)}; got {self.method!r}")
        if self.classifier not in CLASSIFIERS:
            raise InvalidInputError(
                f"classifier must be one of {', '.join(CLASSIFIERS)}; got {self.classifier!r}"
            )
        parse_dim_select(self.dim_select)
        if int(self.trials) != self.trials or self.trials < 1:
            raise InvalidInputError(f"trials must be a positive integer, got {self.trials!r}")
        if int(self.train_per_class) != self.train_per_class or self.train_per_class < 1:
            raise InvalidInputError(
                f"train_per_class must be a positive integer, got {self.train_per_class!r}"
            )
        StabilityBoundParams(self.gamma, self.delta, 1.0)
        if self.beta1 < 0 or self.beta2 < 0:
            raise InvalidInputError("beta1 and beta2 must be non-negative")
        if not self.ridge >= 0:
            raise InvalidInputError("ridge must be non-negative")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, obj):
        return cls(**{k: obj[k] for k in cls.__dataclass_fields__ if k in obj})


@dataclass(frozen=True)
class TrialResult:
    trial: int
    seed: int
    accuracy: float
    d_s: int | None
    d_t: int | None
    wall_time_s: float = 0.0


@dataclass(frozen=True, eq=False)
class TrialReport:
    """Per-trial accuracies (percent) with their aggregate."""

    config: ExperimentConfig
    per_trial: tuple
    divergence: DivergenceReport | None = None
    tool_version: str = field(default=__version__)

    def __post_init__(self):
        trials = tuple(self.per_trial)
        if not trials:
            raise InvalidInputError("a report needs at least one trial")
        for t in trials:
            if not 0.0 <= t.accuracy <= 100.0:
                raise InvalidInputError(f"trial {t.trial} accuracy {t.accuracy} outside [0, 100]")
        object.__setattr__(self, "per_trial", trials)

    @property
    def accuracies(self):
        return np.array([t.accuracy for t in self.per_trial])

    @property
    def mean(self):
        return float(np.mean(self.accuracies))

    @property
    def std(self):
        return float(np.std(self.accuracies))

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "tool_version": self.tool_version,
            "method": self.config.method,
            "classifier": self.config.classifier,
            "per_trial": [asdict(t) for t in self.per_trial],
            "mean": self.mean,
            "std": self.std,
            "d_selected": [[t.d_s, t.d_t] for t in self.per_trial],
            "divergence": None if self.divergence is None else self.divergence.to_dict(),
            "config": self.config.to_dict(),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, obj):
        if obj.get("schema_version") != SCHEMA_VERSION:
            raise InvalidInputError(f"unsupported report schema_version {obj.get('schema_version')!r}")
        div = obj.get("divergence")
        return cls(
            config=ExperimentConfig.from_dict(obj["config"]),
            per_trial=tuple(TrialResult(**t) for t in obj["per_trial"]),
            divergence=None if div is None else DivergenceReport.from_dict(div),
            tool_version=obj["tool_version"],
        )


def sample_per_class(labels, per_class, rng):
    """Indices of ``per_class`` rows drawn without replacement from every class."""
    labels = np.asarray(labels)
    picks = []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        if members.shape[0] < per_class:
            raise StratificationError(
                f"class {cls} has {members.shape[0]} source samples; "
                f"{per_class} per class were requested"
            )
        picks.append(rng.choice(members, size=per_class, replace=False))
    return np.concatenate(picks)


def accuracy_scorer(labels):
    """Scorer holding the target labels; called once per trial with the predictions."""
    labels = np.asarray(labels)

    def score(predicted):
        return accuracy(predicted, labels)

    return score


# -- per-trial pipeline ---------------------------------------------------------


def select_dims(config, train, target, seed):
    """Subspace widths ``(d_s, d_t)`` for one trial; ``(None, None)`` for ``na``."""
    rule, fixed = parse_dim_select(config.dim_select)
    if config.method == "na":
        return None, None
    if config.method == "sa-mle" or rule == "mle":
        return mle_intrinsic_dim(train.features)[0], mle_intrinsic_dim(target)[0]
    if rule == "fixed":
        return fixed, fixed
    params = StabilityBoundParams(config.gamma, config.delta, sample_norm_bound(train.features, target))
    d_max = compute_dmax(
        eigen_spectrum(train.features), eigen_spectrum(target), len(train), target.shape[0], params
    )
    d_max = min(d_max, len(train) - 1, target.shape[0] - 1, target.shape[1])
    d = select_dim_cv(train, target, max(d_max, 1), seed=seed).d_star
    return d, d


def fit_model(config, train, target, d_s, d_t, seed):
    """Alignment model for the subspace methods (``sa``, ``sa-mle``, ``sa-itml``, ``lmsa``)."""
    method = config.method
    if method == "sa":
        return fit_alignment(train.features, target, d_s, d_t)
    if method == "sa-mle":
        return fit_alignment_mle(train.features, target)
    if method == "sa-itml":
        return fit_alignment_itml(train, target, min(d_s, d_t), seed=seed)
    if method == "lmsa":
        model, _ = lmsa_fit(train, target, min(d_s, d_t), beta1=config.beta1, beta2=config.beta2)
        return model
    raise InvalidInputError(f"method {method!r} does not produce an alignment model")


def build_representation(config, train, target, d_s, d_t, seed):
    """Similarity metric plus source and target representations for one method.

    ``train`` is the z-normalized labelled source sample and ``target``
    the z-normalized target features.

    Returns
    -------
    (metric, source_rep, target_rep, d_s, d_t)
    """
    method = config.method
    xs = train.features
    if method == "na":
        return SimilarityMetric.identity(xs.shape[1]), xs, target, None, None
    if method in ("baseline-s", "baseline-t"):
        basis = pca(xs, d_s).basis if method == "baseline-s" else pca(target, d_t).basis
        d = basis.shape[1]
        return SimilarityMetric.from_basis(basis), xs @ basis, target @ basis, d, d
    model = fit_model(config, train, target, d_s, d_t, seed)
    return (
        model.metric(),
        project_source(model, xs),
        project_target(model, target),
        model.d_s,
        model.d_t,
    )


def _classify(config, train_rep, labels, target_rep, seed):
    train = LabeledDataset(train_rep, labels)
    if config.classifier == "nn":
        return nn_classify(train, target_rep)
    pred, _ = svm_classify(svm_train(train, seed=seed), target_rep)
    return pred


def run_trial(config, source, target_raw, scorer, index):
    """One seeded trial; returns the result and (for trial 0) the divergence report."""
    seed = config.seed + index
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    picked = source.subset(sample_per_class(source.labels, config.train_per_class, rng))
    xs, _ = zscore(picked.features)
    xt, _ = zscore(target_raw)
    train = picked.with_features(xs)
    d_s, d_t = select_dims(config, train, xt, seed)
    metric, rs, rt, d_s, d_t = build_representation(config, train, xt, d_s, d_t, seed)
    predicted = _classify(config, rs, train.labels, rt, seed)
    acc = float(scorer(predicted))
    elapsed = time.perf_counter() - start
    report = None
    if config.divergence and index == 0:
        report = divergence_report(metric, xs, xt, seed=seed, ridge=config.ridge)
    return TrialResult(index, seed, acc, d_s, d_t, elapsed), report


def run_experiment(config, source=None, target=None, scorer=None):
    """Run ``config.trials`` seeded trials.

    Parameters
    ----------
    config : ExperimentConfig
    source : LabeledDataset, optional
        Loaded from ``config.source_path`` when omitted.
    target : LabeledDataset or feature matrix, optional
        Loaded from ``config.target_path`` when omitted. If labelled, the
        labels go straight into the scorer and nowhere else.
    scorer : callable, optional
        ``scorer(predicted_labels) -> accuracy``; required when ``target``
        carries no labels.
    """
    if source is None:
        if config.source_path is None:
            raise InvalidInputError("no source data or source_path given")
        source = load_dataset(config.source_path)
    if target is None:
        if config.target_path is None:
            raise InvalidInputError("no target data or target_path given")
        target = load_dataset(config.target_path) if scorer is None else load_features(config.target_path)
    if isinstance(target, LabeledDataset):
        if scorer is None:
            scorer = accuracy_scorer(target.labels)
        target = target.features
    if scorer is None:
        raise InvalidInputError("an unlabelled target needs a scorer")
    target = as_feature_matrix(target, "target", min_rows=2)
    if target.shape[1] != source.dim:
        raise InvalidInputError(
            f"source has {source.dim} features, target has {target.shape[1]}"
        )
    results, div = [], None
    for index in range(config.trials):
        result, report = run_trial(config, source, target, scorer, index)
        results.append(result)
        if report is not None:
            div = report
    return TrialReport(config=config, per_trial=tuple(results), divergence=div)


# -- reporting -------------------------------------------------------------------


def format_table(report):
    """Human-readable per-trial table with the aggregate line."""
    lines = [
        f"method={report.config.method} classifier={report.config.classifier} "
        f"dim_select={report.config.dim_select}",
        f"{'trial':>5}  {'seed':>6}  {'d_s':>4}  {'d_t':>4}  {'accuracy':>8}",
    ]
    for t in report.per_trial:
        d_s = "-" if t.d_s is None else str(t.d_s)
        d_t = "-" if t.d_t is None else str(t.d_t)
        lines.append(f"{t.trial:>5}  {t.seed:>6}  {d_s:>4}  {d_t:>4}  {t.accuracy:>8.2f}")
    lines.append(f"mean {report.mean:.2f} +/- {report.std:.2f} over {len(report.per_trial)} trial(s)")
    if report.divergence is not None:
        dv = report.divergence
        lines.append(
            f"divergence (trial 0): TDAS {dv.tdas:.3f}  H-delta-H {dv.hdh_accuracy:.1f}  "
            f"KL {dv.gaussian_kl:.4g}  MI {dv.mi_estimate:.4g}"
        )
    return "\n".join(lines)


def emit_report(report, path=None, stream=None):
    """Write the JSON report to ``path`` (if given) and the table to ``stream`` (stdout)."""
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
    stream = sys.stdout if stream is None else stream
    print(format_table(report), file=stream)

"""Reading and writing labelled feature files, and the synthetic shift generator."""

import csv
import math
import os

import numpy as np

from .classifiers import LabeledDataset
from .errors import InvalidInputError, ParseError

LABEL_COLUMN = "label"


def _delimiter_for(path, first_line):
    ext = os.path.splitext(str(path))[1].lower()
    if ext in (".tsv", ".tab"):
        return "\t"
    if ext == ".csv":
        return ","
    return "\t" if first_line.count("\t") > first_line.count(",") else ","


def _coerce_labels(raw):
    try:
        as_int = [int(v) for v in raw]
    except ValueError:
        return np.asarray(raw)
    return np.asarray(as_int, dtype=np.int64)


def load_dataset(path):
    """Read a headered CSV/TSV file with a ``label`` column.

    All other columns are numeric features kept in file order. Errors name
    the offending line (1-based, header is line 1).
    """
    features, labels = _read_table(path, require_labels=True)
    return LabeledDataset(features, labels)


def load_features(path):
    """Feature matrix of a headered CSV/TSV file; a ``label`` column, if any, is dropped."""
    features, _ = _read_table(path, require_labels=False)
    return features


def _read_table(path, require_labels):
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline()
        if not first.strip():
            raise ParseError("file is empty", path=path, line=1)
        delimiter = _delimiter_for(path, first)
        fh.seek(0)
        reader = csv.reader(fh, delimiter=delimiter)
        header = [h.strip() for h in next(reader)]
        if LABEL_COLUMN not in header and require_labels:
            raise ParseError(f"no {LABEL_COLUMN!r} column in header", path=path, line=1)
        if header.count(LABEL_COLUMN) > 1:
            raise ParseError(f"duplicate {LABEL_COLUMN!r} column", path=path, line=1)
        label_idx = header.index(LABEL_COLUMN) if LABEL_COLUMN in header else None
        feature_idx = [i for i in range(len(header)) if i != label_idx]
        if not feature_idx:
            raise ParseError("no feature columns", path=path, line=1)
        rows, labels = [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, found {len(row)}", path=path, line=line
                )
            values = []
            for i in feature_idx:
                cell = row[i].strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(
                        f"non-numeric value {cell!r} in column {header[i]!r}", path=path, line=line
                    ) from None
                if not math.isfinite(v):
                    raise ParseError(
                        f"non-finite value {cell!r} in column {header[i]!r}", path=path, line=line
                    )
                values.append(v)
            rows.append(values)
            if label_idx is not None:
                labels.append(row[label_idx].strip())
    if not rows:
        raise ParseError("no data rows", path=path)
    features = np.asarray(rows, dtype=np.float64)
    return features, (_coerce_labels(labels) if label_idx is not None else None)


def save_dataset(dataset, path, feature_names=None):
    """Write ``dataset`` in the format read by :func:`load_dataset`.

    Values are written with ``repr`` so that reading them back is exact.
    """
    D = dataset.dim
    if feature_names is None:
        feature_names = [f"f{i}" for i in range(D)]
    if len(feature_names) != D:
        raise InvalidInputError("feature_names length does not match the feature count")
    delimiter = "\t" if str(path).lower().endswith((".tsv", ".tab")) else ","
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow([LABEL_COLUMN, *feature_names])
        for label, row in zip(dataset.labels, dataset.features):
            writer.writerow([label, *(repr(float(v)) for v in row)])


def load_matrix_dataset(matrix_path, labels_path):
    """Read a whitespace-separated matrix plus a one-label-per-line file."""
    try:
        features = np.loadtxt(matrix_path, dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise ParseError(str(exc), path=matrix_path) from exc
    with open(labels_path, encoding="utf-8") as fh:
        labels = [line.strip() for line in fh if line.strip()]
    if len(labels) != features.shape[0]:
        raise ParseError(
            f"{len(labels)} labels for {features.shape[0]} matrix rows", path=labels_path
        )
    if not np.all(np.isfinite(features)):
        bad = int(np.argwhere(~np.isfinite(features))[0, 0]) + 1
        raise ParseError("non-finite value", path=matrix_path, line=bad)
    return LabeledDataset(features, _coerce_labels(labels))


def make_synthetic_shift(
    classes=4,
    n_per_class=50,
    dim=50,
    signal_dim=5,
    rotation_angle=30.0,
    seed=0,
    class_sep=2.0,
    noise_std=1.0,
):
    """Source and target Gaussian-mixture domains related by a subspace rotation.

    In latent coordinates the first ``signal_dim`` axes carry class means
    drawn from ``N(0, class_sep^2)`` plus unit within-class noise; the other
    axes carry ``N(0, noise_std^2)`` noise. The target is sampled from the
    same latent distribution and then each signal axis is rotated by
    ``rotation_angle`` degrees toward its own randomly chosen noise axis, so
    the target's discriminative subspace is tilted away from the source's.
    Both domains are finally embedded by one shared random orthogonal map.

    Returns
    -------
    (source, target) : (LabeledDataset, LabeledDataset)
    """
    if classes < 2:
        raise InvalidInputError("need at least two classes")
    if n_per_class < 1:
        raise InvalidInputError("n_per_class must be positive")
    if not 1 <= signal_dim <= dim:
        raise InvalidInputError("signal_dim must lie in [1, dim]")
    if rotation_angle != 0 and dim - signal_dim < signal_dim:
        raise InvalidInputError("rotation needs at least signal_dim noise axes (dim >= 2 * signal_dim)")
    if class_sep < 0 or noise_std < 0:
        raise InvalidInputError("class_sep and noise_std must be non-negative")

    rng = np.random.default_rng(seed)
    embed, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    means = rng.normal(0.0, class_sep, size=(classes, signal_dim))
    partners = signal_dim + rng.permutation(dim - signal_dim)[:signal_dim]

    def sample():
        labels = np.repeat(np.arange(classes), n_per_class)
        latent = np.empty((labels.size, dim))
        latent[:, :signal_dim] = means[labels] + rng.standard_normal((labels.size, signal_dim))
        latent[:, signal_dim:] = noise_std * rng.standard_normal((labels.size, dim - signal_dim))
        return latent, labels

    source_latent, source_labels = sample()
    target_latent, target_labels = sample()

    theta = math.radians(rotation_angle)
    c, s = math.cos(theta), math.sin(theta)
    rotated = target_latent.copy()
    for i, j in zip(range(signal_dim), partners):
        xi, xj = target_latent[:, i], target_latent[:, j]
        rotated[:, i] = c * xi - s * xj
        rotated[:, j] = s * xi + c * xj

    return (
        LabeledDataset(source_latent @ embed.T, source_labels),
        LabeledDataset(rotated @ embed.T, target_labels),
    )

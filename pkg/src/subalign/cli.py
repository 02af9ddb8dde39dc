"""Command-line interface.

Subcommands: ``adapt``, ``classify``, ``estimate-dim``, ``divergence``,
``run`` (one method), ``benchmark`` (several methods) and ``synth``. Exit codes: 0 success, 2 invalid input or
configuration, 3 numeric failure, 4 I/O failure.
"""

import argparse
import csv
import json
import sys
import warnings
from dataclasses import replace

import numpy as np

from . import __version__
from .alignment import load_model, project_source, project_target, save_model
from .classifiers import LabeledDataset, accuracy, nn_classify, svm_classify, svm_train
from .datasets import LABEL_COLUMN, load_dataset, load_features, make_synthetic_shift, save_dataset
from .dimensionality import (
    StabilityBoundParams,
    compute_dmax,
    mle_intrinsic_dim,
    sample_norm_bound,
    select_dim_cv,
)
from .divergence import DEFAULT_RIDGE, divergence_report
from .errors import InvalidInputError, NumericError, SubalignError
from .experiment import (
    CLASSIFIERS,
    METHODS,
    SCHEMA_VERSION,
    ExperimentConfig,
    build_representation,
    emit_report,
    fit_model,
    format_table,
    run_experiment,
    select_dims,
)
from .linalg import eigen_spectrum, zscore

ADAPT_METHODS = ("sa", "sa-mle", "sa-itml", "lmsa")


def _add_data_args(p):
    p.add_argument("--source", required=True, help="labelled source CSV/TSV")
    p.add_argument("--target", required=True, help="target CSV/TSV (labels optional)")


def _add_method_args(p, methods=None):
    if methods:
        p.add_argument("--method", choices=methods, default="sa")
    p.add_argument(
        "--dim-select", default="bound-cv", help="bound-cv, mle or fixed:<d> (default: bound-cv)"
    )
    p.add_argument("--gamma", type=float, default=1e5, help="stability-bound deviation gamma")
    p.add_argument("--delta", type=float, default=0.1, help="stability-bound confidence delta")
    p.add_argument("--beta1", type=float, default=0.01, help="LMSA pair weight")
    p.add_argument("--beta2", type=float, default=0.01, help="LMSA triplet weight")
    p.add_argument("--seed", type=int, default=0)


def _config(args, **overrides):
    fields = dict(
        method=getattr(args, "method", "sa"),
        dim_select=args.dim_select,
        gamma=args.gamma,
        delta=args.delta,
        beta1=args.beta1,
        beta2=args.beta2,
        seed=args.seed,
    )
    for name in ("classifier", "trials", "train_per_class", "ridge"):
        if hasattr(args, name):
            fields[name] = getattr(args, name)
    fields.update(overrides)
    return ExperimentConfig(**fields)


def _fit_full(config, source_raw, target_raw):
    """Fit a method on a whole labelled source and the whole target."""
    xs, s_stats = zscore(source_raw.features)
    xt, t_stats = zscore(target_raw)
    train = source_raw.with_features(xs)
    d_s, d_t = select_dims(config, train, xt, config.seed)
    return train, xt, (s_stats, t_stats), (d_s, d_t)


def cmd_adapt(args):
    config = _config(args)
    source = load_dataset(args.source)
    target = load_features(args.target)
    train, xt, (s_stats, t_stats), (d_s, d_t) = _fit_full(config, source, target)
    model = fit_model(config, train, xt, d_s, d_t, config.seed)
    model = replace(model, source_stats=s_stats, target_stats=t_stats)
    save_model(model, args.output)
    print(f"saved {config.method} model (d_s={model.d_s}, d_t={model.d_t}) to {args.output}")
    return 0


def cmd_classify(args):
    model = load_model(args.model)
    if model.source_stats is None or model.target_stats is None:
        raise InvalidInputError("model has no normalization statistics; refit it with 'adapt'")
    source = load_dataset(args.source)
    train = LabeledDataset(
        project_source(model, model.normalize_source(source.features)), source.labels
    )
    test = project_target(model, model.normalize_target(load_features(args.target)))
    if args.classifier == "nn":
        predicted = nn_classify(train, test)
    else:
        predicted, _ = svm_classify(svm_train(train, seed=args.seed), test)
    with open(args.output, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["row", LABEL_COLUMN])
        for i, label in enumerate(predicted):
            writer.writerow([i, label])
    print(f"wrote {len(predicted)} predictions to {args.output}")
    if args.score:
        truth = load_dataset(args.target).labels
        print(f"accuracy {accuracy(predicted.astype(str), truth.astype(str)):.2f}")
    return 0


def cmd_estimate_dim(args):
    source = load_dataset(args.source)
    xs, _ = zscore(source.features)
    xt, _ = zscore(load_features(args.target))
    train = source.with_features(xs)
    d_s, raw_s = mle_intrinsic_dim(xs)
    d_t, raw_t = mle_intrinsic_dim(xt)
    params = StabilityBoundParams(args.gamma, args.delta, sample_norm_bound(xs, xt))
    d_max = compute_dmax(eigen_spectrum(xs), eigen_spectrum(xt), xs.shape[0], xt.shape[0], params)
    d_max = min(d_max, xs.shape[0] - 1, xt.shape[0] - 1, xs.shape[1])
    selection = select_dim_cv(train, xt, d_max, seed=args.seed)
    result = {
        "mle": {"d_s": d_s, "d_s_raw": raw_s, "d_t": d_t, "d_t_raw": raw_t},
        "bound_cv": {
            "gamma": args.gamma,
            "delta": args.delta,
            "b_norm": params.b_norm,
            "d_max": selection.d_max,
            "d_star": selection.d_star,
            "cv_errors": selection.cv_errors.tolist(),
        },
    }
    _write_json(result, args.output)
    print(f"MLE: d_s={d_s} ({raw_s:.3f}), d_t={d_t} ({raw_t:.3f})")
    print(f"bound-cv: d_max={selection.d_max}, d_star={selection.d_star}")
    return 0


def cmd_divergence(args):
    config = _config(args, classifier="nn")
    source = load_dataset(args.source)
    train, xt, _, (d_s, d_t) = _fit_full(config, source, load_features(args.target))
    metric, _, _, d_s, d_t = build_representation(config, train, xt, d_s, d_t, config.seed)
    report = divergence_report(metric, train.features, xt, seed=config.seed, ridge=args.ridge)
    result = {"method": config.method, "d_s": d_s, "d_t": d_t, **report.to_dict()}
    _write_json(result, args.output)
    print(
        f"{config.method}: TDAS {report.tdas:.3f}  H-delta-H {report.hdh_accuracy:.1f}  "
        f"KL {report.gaussian_kl:.4g}  MI {report.mi_estimate:.4g}  (epsilon {report.epsilon_used:.4g})"
    )
    return 0


def cmd_benchmark(args):
    if args.synthetic:
        source, target = make_synthetic_shift(
            classes=args.classes,
            n_per_class=args.n_per_class,
            dim=args.dim,
            signal_dim=args.signal_dim,
            rotation_angle=args.rotation_angle,
            seed=args.seed,
        )
    else:
        if not (args.source and args.target):
            raise InvalidInputError("benchmark needs --source and --target, or --synthetic")
        source, target = load_dataset(args.source), load_dataset(args.target)
    reports = []
    for method in args.methods:
        for classifier in args.classifiers:
            config = _config(
                args,
                method=method,
                classifier=classifier,
                source_path=None if args.synthetic else args.source,
                target_path=None if args.synthetic else args.target,
                divergence=not args.no_divergence,
            )
            report = run_experiment(config, source, target)
            print(format_table(report))
            print()
            reports.append(report.to_dict())
    if args.output:
        _write_json({"schema_version": SCHEMA_VERSION, "reports": reports}, args.output)
    print(f"{'method':<12}{'classifier':<12}{'mean':>8}{'std':>8}")
    for r in reports:
        print(f"{r['method']:<12}{r['classifier']:<12}{r['mean']:>8.2f}{r['std']:>8.2f}")
    return 0


def cmd_run(args):
    config = _config(
        args, source_path=args.source, target_path=args.target, divergence=not args.no_divergence
    )
    report = run_experiment(config)
    emit_report(report, args.output)
    return 0


def cmd_synth(args):
    source, target = make_synthetic_shift(
        classes=args.classes,
        n_per_class=args.n_per_class,
        dim=args.dim,
        signal_dim=args.signal_dim,
        rotation_angle=args.rotation_angle,
        seed=args.seed,
        class_sep=args.class_sep,
        noise_std=args.noise_std,
    )
    save_dataset(source, args.source_out)
    save_dataset(target, args.target_out)
    print(f"wrote {len(source)} source rows to {args.source_out} and {len(target)} target rows to {args.target_out}")
    return 0


def _write_json(obj, path):
    if path is None:
        return
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _add_synth_args(p):
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--n-per-class", type=int, default=50)
    p.add_argument("--dim", type=int, default=50)
    p.add_argument("--signal-dim", type=int, default=5)
    p.add_argument("--rotation-angle", type=float, default=30.0, help="degrees")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="subalign", description="Unsupervised domain adaptation by subspace alignment."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("adapt", help="fit an alignment model and save it as JSON")
    _add_data_args(p)
    _add_method_args(p, ADAPT_METHODS)
    p.add_argument("--output", required=True, help="model JSON path")
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("classify", help="label target rows with a saved model")
    p.add_argument("--model", required=True)
    _add_data_args(p)
    p.add_argument("--classifier", choices=CLASSIFIERS, default="nn")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True, help="predictions CSV path")
    p.add_argument("--score", action="store_true", help="print accuracy against the target's label column")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("estimate-dim", help="run both subspace-width selectors")
    _add_data_args(p)
    p.add_argument("--gamma", type=float, default=1e5)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="optional JSON path")
    p.set_defaults(func=cmd_estimate_dim)

    p = sub.add_parser("divergence", help="TDAS, H-delta-H, Gaussian KL and MI for one representation")
    _add_data_args(p)
    _add_method_args(p, METHODS)
    p.add_argument("--ridge", type=float, default=DEFAULT_RIDGE)
    p.add_argument("--output", help="optional JSON path")
    p.set_defaults(func=cmd_divergence)

    p = sub.add_parser("run", help="seeded trials of one method and classifier")
    _add_data_args(p)
    _add_method_args(p, METHODS)
    p.add_argument("--classifier", choices=CLASSIFIERS, default="nn")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--train-per-class", type=int, default=20)
    p.add_argument("--ridge", type=float, default=DEFAULT_RIDGE)
    p.add_argument("--no-divergence", action="store_true", help="skip the trial-0 diagnostics")
    p.add_argument("--output", help="JSON report path")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("benchmark", help="full protocol over several methods and classifiers")
    p.add_argument("--source")
    p.add_argument("--target")
    p.add_argument("--synthetic", action="store_true", help="use the rotated-Gaussian generator")
    _add_synth_args(p)
    _add_method_args(p)
    p.add_argument("--methods", nargs="+", choices=METHODS, default=list(METHODS))
    p.add_argument("--classifiers", nargs="+", choices=CLASSIFIERS, default=["nn"])
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--train-per-class", type=int, default=20)
    p.add_argument("--ridge", type=float, default=DEFAULT_RIDGE)
    p.add_argument("--no-divergence", action="store_true")
    p.add_argument("--output", help="combined JSON report path")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("synth", help="write a rotated-Gaussian source/target pair")
    _add_synth_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--class-sep", type=float, default=2.0)
    p.add_argument("--noise-std", type=float, default=1.0)
    p.add_argument("--source-out", required=True)
    p.add_argument("--target-out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except NumericError as exc:
        print(f"subalign: numeric failure: {exc}", file=sys.stderr)
        return 3
    except SubalignError as exc:
        print(f"subalign: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"subalign: I/O error: {exc}", file=sys.stderr)
        return 4
    except np.linalg.LinAlgError as exc:
        print(f"subalign: numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

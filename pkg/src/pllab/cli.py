"""Command-line entry point: ``pllab <subcommand> ...``.

Every subcommand accepts ``--seed``, ``--out`` and ``--config FILE``. The
config file holds ``key=value`` lines (``#`` comments allowed) whose keys
are the long flag names with or without the leading dashes; flags given
on the command line override it. Output files are fully determined by
the effective options, which are recorded in each file's header.
"""

import argparse
import json
import sys


from . import _kernels
from .csvio import write_csv
from .data import (BlobSpec, FlipSpec, gen_gaussian_blobs, gen_partial_labels, load_dataset,
                   save_dataset)
from .errors import ContractError, FormatError, NumericFailure
from .experiments import (COMPLEXITY_COLUMNS, GAP_COLUMNS, SWEEP_COLUMNS, ComplexitySetup,
                          GapCurveSetup, SweepSetup, run_ambiguity_sweep, run_complexity_experiment,
                          run_cv_benchmark, run_gap_curve)
from .nn import ModelSpec, init_model, load_params, save_params
from .plot import emit_plot
from .theory import (CcBoundInputs, EprmInputs, cc_bound_rhs, cc_loss_bound, eprm_sample_complexity,
                     natarajan_proxy, rademacher_norm_proxy)
from .training import LOSS_KINDS, OPTIMIZERS, MetricsRecord, TrainConfig, train

NOT_RECORDED = ("out", "config", "func", "command", "workers", "save_params")


def int_list(text):
    return [int(t) for t in text.split(",") if t.strip()]


def float_list(text):
    return [float(t) for t in text.split(",") if t.strip()]


def boolean(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def read_config_file(path):
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ContractError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key.lstrip("-").replace("-", "_")] = value
    return values


def _add_common(p, out_help):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=False, help=out_help)
    p.add_argument("--config", help="key=value file with option defaults")


def _add_train_options(p, epochs=200):
    g = p.add_argument_group("training")
    g.add_argument("--hidden", type=int_list, default=[512, 256], help="comma-separated widths")
    g.add_argument("--elu-alpha", type=float, default=1.0)
    g.add_argument("--bn-epsilon", type=float, default=1e-5)
    g.add_argument("--bn-momentum", type=float, default=0.1)
    g.add_argument("--loss", choices=LOSS_KINDS, default="naive")
    g.add_argument("--optimizer", choices=OPTIMIZERS, default="yogi")
    g.add_argument("--lr", type=float, default=1e-3)
    g.add_argument("--beta1", type=float, default=0.9)
    g.add_argument("--beta2", type=float, default=0.999)
    g.add_argument("--yogi-eps", type=float, default=1e-3)
    g.add_argument("--bias-correction", type=boolean, default=True)
    g.add_argument("--batch-size", type=int, default=128)
    g.add_argument("--epochs", type=int, default=epochs)
    g.add_argument("--eval-every", type=int, default=5)


def _add_blob_options(p, sigma=0.5, n_per_class=500):
    g = p.add_argument_group("synthetic data")
    g.add_argument("--K", type=int, default=4)
    g.add_argument("--d", type=int, default=10)
    g.add_argument("--r", type=float, default=10.0)
    g.add_argument("--sigma", type=float, default=sigma)
    g.add_argument("--n-per-class", type=int, default=n_per_class)


def _add_flip_options(p, q=0.0):
    g = p.add_argument_group("candidate sets")
    g.add_argument("--flip", choices=("uniform-flip", "coupled-distractor"), default="uniform-flip")
    g.add_argument("--q", type=float, default=q)
    g.add_argument("--c", type=float, default=0.0)


def _train_config(a):
    return TrainConfig(hidden_dims=tuple(a.hidden), elu_alpha=a.elu_alpha, bn_epsilon=a.bn_epsilon,
                       bn_momentum=a.bn_momentum, loss=a.loss, optimizer=a.optimizer, lr=a.lr,
                       beta1=a.beta1, beta2=a.beta2, yogi_eps=a.yogi_eps,
                       bias_correction=a.bias_correction, batch_size=a.batch_size, epochs=a.epochs,
                       eval_every=a.eval_every, seed=a.seed)


def _blobs(a, n_per_class=None):
    return BlobSpec(K=a.K, d=a.d, r=a.r, sigma=a.sigma,
                    n_per_class=a.n_per_class if n_per_class is None else n_per_class)


def _recorded(a):
    out = {k: v for k, v in vars(a).items() if k not in NOT_RECORDED}
    out["command"] = a.command
    out["backend"] = _kernels.BACKEND
    return out


def _require_out(a):
    if not a.out:
        raise ContractError(f"{a.command}: --out is required")
    return a.out


def _require_data(a):
    if not a.data:
        raise ContractError(f"{a.command}: --data is required")
    return a.data


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# --------------------------------------------------------------------------
# subcommands

def cmd_gen(a):
    data = gen_partial_labels(gen_gaussian_blobs(_blobs(a), a.seed), FlipSpec(a.flip, a.q, a.c), a.seed)
    save_dataset(data, _require_out(a))
    print(f"wrote {data.n} examples (d={data.d}, K={data.K}, "
          f"mean |S|={data.mean_candidate_size():.3f}) to {a.out}")


def cmd_train(a):
    out = _require_out(a)
    train_set = load_dataset(_require_data(a))
    eval_set = load_dataset(a.test) if a.test else train_set
    params, records = train(_train_config(a), train_set, eval_set)
    write_csv(out, MetricsRecord.COLUMNS, [r.row() for r in records], _recorded(a))
    if a.save_params:
        save_params(params, a.save_params)
    last = records[-1]
    print(f"epoch {last.epoch}: train naive loss {last.train_naive_loss:.6g}, "
          f"test err {last.test_err:.4f}, gap {last.gap:.4f}")


def cmd_cv(a):
    out = _require_out(a)
    summary = run_cv_benchmark(_train_config(a), _require_data(a), k=a.k, repeats=a.repeats, workers=a.workers)
    write_csv(out, ("repeat", "fold", "accuracy"), summary["folds"], _recorded(a))
    print(f"accuracy {summary['mean']:.4f} +- {summary['std']:.4f} "
          f"over {len(summary['folds'])} folds")


def cmd_gap_curve(a):
    out = _require_out(a)
    setup = GapCurveSetup(blobs=_blobs(a, 0), flip=FlipSpec(a.flip, a.q, a.c), n_test=a.n_test,
                          repeats=a.repeats)
    rows = run_gap_curve(_train_config(a), a.sizes, setup, workers=a.workers)
    write_csv(out, GAP_COLUMNS, rows, _recorded(a))
    for row in rows:
        print(f"n={row['n']}: gap {row['gap_mean']:.4f} +- {row['gap_std']:.4f}, "
              f"err {row['err_mean']:.4f}")


def cmd_ambiguity_sweep(a):
    out = _require_out(a)
    setup = SweepSetup(blobs=_blobs(a), q=a.q, n_test=a.n_test, repeats=a.repeats)
    rows = run_ambiguity_sweep(_train_config(a), a.gammas, setup, workers=a.workers)
    write_csv(out, SWEEP_COLUMNS, rows, _recorded(a))
    for row in rows:
        print(f"gamma={row['gamma']:g}: err {row['err_mean']:.4f}, "
              f"pair confusion {row['pair_confusion_mean']:.4f}, "
              f"pair accuracy {row['pair_accuracy_mean']:.4f}")


def bounds_report(a):
    """Text report of both bounds for the configured network and sizes."""
    spec = ModelSpec(input_dim=a.d, output_dim=a.K, hidden_dims=tuple(a.hidden))
    if a.params:
        params = load_params(a.params)
        if params.spec.input_dim != a.d or params.spec.output_dim != a.K:
            raise ContractError("--params does not match --d/--K")
        spec = params.spec
        source = "loaded parameters"
    else:
        params = init_model(spec, a.seed)
        source = f"initialization (seed {a.seed})"
    if a.data:
        features = load_dataset(a.data).features
        feature_source = f"{len(features)} rows of {a.data}"
    else:
        blobs = BlobSpec(K=a.K, d=a.d, r=a.r, sigma=a.sigma, n_per_class=-(-a.n // a.K))
        features = gen_gaussian_blobs(blobs, a.seed).features[:a.n]
        feature_source = f"{len(features)} synthetic blob rows"
    P = params.num_parameters()
    d_H = natarajan_proxy(P)
    n0 = eprm_sample_complexity(EprmInputs(d_H=d_H, K=a.K, eps=a.eps, delta=a.delta, gamma=a.gamma))
    proxies = rademacher_norm_proxy(params, features)
    M = cc_loss_bound(a.K, a.prob_floor)
    rhs = cc_bound_rhs(CcBoundInputs(rho=a.rho, M=M, rademacher_proxies=proxies, delta=a.delta,
                                     n=len(features)))
    lines = [
        "# " + json.dumps(_recorded(a), sort_keys=True, separators=(",", ":")),
        f"network dims: {list(spec.dims)}",
        f"parameter count P: {P}",
        f"n (training size): {len(features)}",
        "",
        "[sample complexity for partial-risk minimization]",
        "d_H proxy (P*log2 P, not a true Natarajan dimension): " + format(d_H, ".17g"),
        f"K={a.K} eps={a.eps:g} delta={a.delta:g} gamma={a.gamma:g}",
        "n0: " + format(n0, ".17g"),
        f"n0 > n: {n0 > len(features)}",
        "",
        "[estimation error bound for the CC risk]",
        f"parameters from: {source}; features: {feature_source}",
        "rademacher proxy per class (norm product, crude upper-bound surrogate): "
        + format(float(proxies[0]), ".17g"),
        f"rho={a.rho:g} M=log((2^(K-1)-1)/{a.prob_floor:g})=" + format(M, ".17g"),
        "rhs: " + format(rhs, ".17g"),
        f"rhs > 1 (vacuous for 0-1 error): {rhs > 1}",
    ]
    return "\n".join(lines) + "\n", n0, rhs


def cmd_bounds(a):
    text, _, _ = bounds_report(a)
    if a.out:
        _write_text(a.out, text)
    sys.stdout.write(text)


def cmd_complexity(a):
    out = _require_out(a)
    setup = ComplexitySetup(blobs=_blobs(a), flip=FlipSpec(a.flip, a.q, a.c), n_test=a.n_test,
                            repeats=a.repeats, bits=a.bits, fit_threshold=a.fit_threshold,
                            check_every=a.check_every)
    rows, summary = run_complexity_experiment(_train_config(a), setup, workers=a.workers)
    write_csv(out, COMPLEXITY_COLUMNS, rows, _recorded(a))
    if a.summary_out:
        _write_text(a.summary_out, json.dumps(summary, sort_keys=True, indent=1) + "\n")
    print(json.dumps(summary, sort_keys=True))


def cmd_plot(a):
    emit_plot(a.csv, _require_out(a))
    print(f"wrote {a.out}")


# --------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="pllab", description="Partial-label learning lab.")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.commands = sub.choices

    p = sub.add_parser("gen", help="generate a synthetic PLLD dataset")
    _add_common(p, "dataset file to write")
    _add_blob_options(p)
    _add_flip_options(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train on a PLLD file and write the metrics trace")
    _add_common(p, "metrics CSV to write")
    p.add_argument("--data", help="training PLLD file (required)")
    p.add_argument("--test", help="labeled evaluation PLLD file (default: the training file)")
    p.add_argument("--save-params", help="also write the trained parameters here")
    _add_train_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("cv", help="repeated k-fold cross-validation accuracy")
    _add_common(p, "per-fold CSV to write")
    p.add_argument("--data", help="labeled PLLD file (required)")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--workers", type=int, default=1)
    _add_train_options(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("gap-curve", help="generalization gap versus training size")
    _add_common(p, "CSV to write")
    p.add_argument("--sizes", type=int_list, default=[250, 500, 1000, 2000, 4000, 8000])
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--n-test", type=int, default=2000)
    p.add_argument("--workers", type=int, default=1)
    _add_blob_options(p, sigma=4.0, n_per_class=0)
    _add_flip_options(p, q=0.3)
    _add_train_options(p)
    p.set_defaults(func=cmd_gap_curve)

    p = sub.add_parser("ambiguity-sweep", help="coupled-distractor sweep over gamma")
    _add_common(p, "CSV to write")
    p.add_argument("--gammas", type=float_list, default=[0.0, 0.25, 0.5, 0.75, 1.0])
    p.add_argument("--q", type=float, default=0.0, help="rate of non-distractor wrong labels")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--n-test", type=int, default=2000)
    p.add_argument("--workers", type=int, default=1)
    _add_blob_options(p)
    _add_train_options(p)
    p.set_defaults(func=cmd_ambiguity_sweep)

    p = sub.add_parser("bounds", help="evaluate both generalization bounds")
    _add_common(p, "also write the report to this file")
    p.add_argument("--K", type=int, default=4)
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--hidden", type=int_list, default=[512, 256])
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--prob-floor", type=float, default=1e-12)
    p.add_argument("--r", type=float, default=10.0)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--params", help="parameter file (default: a fresh initialization)")
    p.add_argument("--data", help="PLLD file supplying the features (default: synthetic blobs)")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("complexity", help="parameter complexity, structured vs randomized labels")
    _add_common(p, "per-run CSV to write")
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--bits", type=int, choices=(4, 8, 16), default=8)
    p.add_argument("--fit-threshold", type=float, default=0.05)
    p.add_argument("--check-every", type=int, default=5)
    p.add_argument("--n-test", type=int, default=1000)
    p.add_argument("--summary-out", help="also write the JSON summary here")
    p.add_argument("--workers", type=int, default=1)
    _add_blob_options(p, n_per_class=250)
    _add_flip_options(p, q=0.3)
    _add_train_options(p, epochs=1000)
    p.set_defaults(func=cmd_complexity)

    p = sub.add_parser("plot", help="SVG chart of a gap-curve or ambiguity-sweep CSV")
    _add_common(p, "SVG file to write")
    p.add_argument("csv")
    p.set_defaults(func=cmd_plot)
    return parser


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        values = read_config_file(args.config)
        sub = parser.commands[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(values) - known - {"config"})
        if unknown:
            parser.error(f"unknown keys in {args.config}: {', '.join(unknown)}")
        values.pop("config", None)
        sub.set_defaults(**values)
        args = parser.parse_args(argv)
    return args


def main(argv=None):
    args = parse_args(argv)
    try:
        args.func(args)
    except (ContractError, FormatError, NumericFailure, OSError) as exc:
        print(f"pllab {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

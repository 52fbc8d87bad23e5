"""Experiment drivers built on ``training.train``.

Each driver splits its work into independent units (a fold, a repeat at
one training size, a sweep point, a trial). A unit owns its model and
draws randomness only from streams keyed by (master seed, tag, unit
index), so results are identical whether units run serially or in a
process pool, and aggregation always follows unit order.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import losses
from .data import (COUPLED_DISTRACTOR, UNIFORM_FLIP, BlobSpec, FlipSpec, PLLDataset, distractor,
                   gen_gaussian_blobs, gen_partial_labels, kfold_split, load_dataset)
from .errors import ContractError
from .rng import derive_seed, stream
from .theory import lz_complexity
from .training import TrainConfig, infer_probs, train
from .nn import predict_from_logits


def _map(fn, jobs, workers):
    if workers is None or workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _mean_std(values):
    """Mean and sample standard deviation (0 for a single value)."""
    a = np.asarray(values, dtype=np.float64)
    if a.size == 0:
        return math.nan, math.nan
    return float(a.mean()), float(a.std(ddof=1)) if a.size > 1 else 0.0


def train_final(config: TrainConfig, train_set, eval_set):
    """Train and return ``(params, final MetricsRecord)``; metrics are only
    computed once, after the last epoch."""
    params, records = train(config.replace(eval_every=config.epochs), train_set, eval_set)
    return params, records[-1]


# --------------------------------------------------------------------------
# cross-validation

def _cv_unit(job):
    config, dataset, train_idx, test_idx = job
    _, rec = train_final(config, dataset.subset(train_idx), dataset.subset(test_idx))
    return 1.0 - rec.test_err


def run_cv_benchmark(config: TrainConfig, dataset, k=10, repeats=5, workers=1):
    """Repeated k-fold CV: train on the partial labels of k-1 folds, score
    accuracy on the held-out fold's true labels.

    ``dataset`` is a ``PLLDataset`` or a path to a PLLD file. Folds come from
    ``kfold_split(n, k, repeats, config.seed)``; every fold trains from the
    same initialization seed. Returns a dict with ``mean``, ``std`` (sample
    std over all repeat x fold runs) and ``folds``, a list of
    ``(repeat, fold, accuracy)``.
    """
    if not isinstance(dataset, PLLDataset):
        dataset = load_dataset(dataset)
    if dataset.true_labels is None:
        raise ContractError("cross-validation accuracy needs true labels (labeled=1)")
    splits = kfold_split(dataset.n, k, repeats, config.seed)
    accs = _map(_cv_unit, [(config, dataset, tr, te) for tr, te in splits], workers)
    folds = [(i // k, i % k, acc) for i, acc in enumerate(accs)]
    mean, std = _mean_std(accs)
    return {"mean": mean, "std": std, "folds": folds}


# --------------------------------------------------------------------------
# generalization gap versus training-set size

GAP_METRICS = ("err", "partial_risk", "gap", "cc_risk", "naive_loss")
GAP_COLUMNS = ("n",) + tuple(f"{m}_{s}" for m in GAP_METRICS for s in ("mean", "std"))


@dataclass(frozen=True)
class GapCurveSetup:
    """Synthetic source for the gap curve: a labeled pool from which a fixed
    test set (the first ``n_test`` rows) and training subsets are drawn.

    The default blobs overlap (sigma comparable to the spacing of the
    class means), so the test error does not collapse to zero and the gap
    has room to shrink.
    """

    blobs: BlobSpec = field(default_factory=lambda: BlobSpec(K=4, d=10, r=10.0, sigma=4.0, n_per_class=0))
    flip: FlipSpec = field(default_factory=lambda: FlipSpec(UNIFORM_FLIP, q=0.3))
    n_test: int = 2000
    repeats: int = 10


def gap_curve_pool(setup: GapCurveSetup, max_size: int, seed: int):
    K = setup.blobs.K
    per_class = -(-(max_size + setup.n_test) // K)
    spec = BlobSpec(K=K, d=setup.blobs.d, r=setup.blobs.r, sigma=setup.blobs.sigma,
                    n_per_class=per_class)
    data = gen_partial_labels(gen_gaussian_blobs(spec, seed), setup.flip, seed)
    test = data.subset(np.arange(setup.n_test))
    pool = data.subset(np.arange(setup.n_test, data.n))
    return pool, test


def _gap_unit(job):
    config, pool, test, n, r = job
    idx = np.sort(stream(config.seed, "subset", r, n).choice(pool.n, size=n, replace=False))
    cfg = config.replace(seed=derive_seed(config.seed, "repeat", r))
    train_set = pool.subset(idx)
    params, rec = train_final(cfg, train_set, test)
    _, test_probs = infer_probs(params, test.features)
    return {
        "err": rec.test_err,
        "partial_risk": rec.train_partial_risk,
        "gap": rec.gap,
        "cc_risk": losses.cc_risk(test_probs, test.candidate_masks, test.K),
        "naive_loss": rec.train_naive_loss,
    }


def run_gap_curve(config: TrainConfig, sizes, setup: GapCurveSetup = None, pool=None, test=None,
                  workers=1):
    """Final-epoch metrics versus training size, ``setup.repeats`` repeats each.

    For every size n and repeat r a training subset of n pool rows is drawn
    from the stream (seed, "subset", r, n); the initialization seed depends on
    r only. Per size the rows report mean and sample std of: test error
    against true labels, training partial 0-1 risk, their absolute
    difference (the gap), CC risk on the test set and training naive loss.

    ``pool``/``test`` default to ``gap_curve_pool(setup, max(sizes), seed)``.
    Returns a list of dicts keyed by ``GAP_COLUMNS``.
    """
    setup = setup or GapCurveSetup()
    sizes = [int(n) for n in sizes]
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ContractError("sizes must be strictly ascending")
    if sizes and sizes[0] < 2:
        raise ContractError("training sizes must be >= 2")
    if not sizes:
        return []
    if pool is None or test is None:
        pool, test = gap_curve_pool(setup, sizes[-1], config.seed)
    if test.true_labels is None:
        raise ContractError("the gap-curve test set needs true labels")
    if sizes[-1] > pool.n:
        raise ContractError(f"size {sizes[-1]} exceeds the pool of {pool.n} examples")
    jobs = [(config, pool, test, n, r) for n in sizes for r in range(setup.repeats)]
    results = _map(_gap_unit, jobs, workers)
    rows = []
    for i, n in enumerate(sizes):
        chunk = results[i * setup.repeats:(i + 1) * setup.repeats]
        row = {"n": n}
        for m in GAP_METRICS:
            row[f"{m}_mean"], row[f"{m}_std"] = _mean_std([c[m] for c in chunk])
        rows.append(row)
    return rows


# --------------------------------------------------------------------------
# ambiguity sweep with a coupled distractor

SWEEP_METRICS = ("err", "pair_confusion", "pair_accuracy")
SWEEP_COLUMNS = ("gamma",) + tuple(f"{m}_{s}" for m in SWEEP_METRICS for s in ("mean", "std"))


def pair_metrics(predictions, true_labels, K):
    """Within-pair confusion and pair accuracy for the distractor pairs.

    Pair accuracy: fraction of predictions in {y, d(y)}. Pair confusion:
    among those, the fraction that picked d(y). 0.5 means the model cannot
    tell a label from its distractor.
    """
    pred = np.asarray(predictions)
    y = np.asarray(true_labels)
    d = distractor(y, K)
    hit_d = pred == d
    in_pair = (pred == y) | hit_d
    n_pair = int(in_pair.sum())
    confusion = float(hit_d.sum() / n_pair) if n_pair else math.nan
    return confusion, float(in_pair.mean()) if len(pred) else math.nan


@dataclass(frozen=True)
class SweepSetup:
    blobs: BlobSpec = field(default_factory=lambda: BlobSpec(K=4, d=10, r=10.0, sigma=0.5, n_per_class=500))
    q: float = 0.0  # inclusion rate of the non-distractor wrong labels
    n_test: int = 2000
    repeats: int = 3


def _sweep_unit(job):
    config, setup, gamma, r = job
    seed = derive_seed(config.seed, "sweep", r)
    flip = FlipSpec(COUPLED_DISTRACTOR, q=setup.q, c=gamma)
    train_set = gen_partial_labels(gen_gaussian_blobs(setup.blobs, seed), flip, seed)
    test_blobs = BlobSpec(K=setup.blobs.K, d=setup.blobs.d, r=setup.blobs.r, sigma=setup.blobs.sigma,
                          n_per_class=-(-setup.n_test // setup.blobs.K))
    test_seed = derive_seed(config.seed, "sweep-test", r)
    test = gen_partial_labels(gen_gaussian_blobs(test_blobs, test_seed), flip, test_seed)
    params, rec = train_final(config.replace(seed=seed), train_set, test)
    logits, _ = infer_probs(params, test.features)
    confusion, pair_acc = pair_metrics(predict_from_logits(logits), test.true_labels, test.K)
    return {"err": rec.test_err, "pair_confusion": confusion, "pair_accuracy": pair_acc}


def run_ambiguity_sweep(config: TrainConfig, gammas, setup: SweepSetup = None, workers=1):
    """Test error and distractor-pair metrics versus gamma.

    Training and test data use the coupled-distractor flip with c = gamma.
    Gamma values are sorted (duplicates kept). Repeat r draws fresh
    training and test data and a fresh initialization, shared across gamma
    values. Returns a list of dicts keyed by ``SWEEP_COLUMNS``.
    """
    setup = setup or SweepSetup()
    gammas = sorted(float(g) for g in gammas)
    for g in gammas:
        if not 0.0 <= g <= 1.0:
            raise ContractError(f"gamma must lie in [0, 1], got {g}")
    jobs = [(config, setup, g, r) for g in gammas for r in range(setup.repeats)]
    results = _map(_sweep_unit, jobs, workers)
    rows = []
    for i, g in enumerate(gammas):
        chunk = results[i * setup.repeats:(i + 1) * setup.repeats]
        row = {"gamma": g}
        for m in SWEEP_METRICS:
            row[f"{m}_mean"], row[f"{m}_std"] = _mean_std([c[m] for c in chunk])
        rows.append(row)
    return rows


# --------------------------------------------------------------------------
# parameter complexity: consistent versus randomized labels

COMPLEXITY_COLUMNS = ("run_id", "condition", "seed", "epochs", "final_err", "final_train_loss",
                      "fitted", "lz_complexity")
CONDITIONS = ("structured", "randomized")


@dataclass(frozen=True)
class ComplexitySetup:
    blobs: BlobSpec = field(default_factory=lambda: BlobSpec(K=4, d=10, r=10.0, sigma=0.5, n_per_class=250))
    flip: FlipSpec = field(default_factory=lambda: FlipSpec(UNIFORM_FLIP, q=0.3))
    n_test: int = 1000
    repeats: int = 20
    bits: int = 8
    fit_threshold: float = 0.05  # training naive loss counted as "fitted"
    check_every: int = 5  # epochs between fit checks; config.epochs caps the run


def complexity_data(setup: ComplexitySetup, seed: int):
    """Structured and randomized training/test sets on shared features.

    The randomized condition replaces every true label by one drawn
    uniformly at random, independent of x, then applies the same flip, so
    candidate sets are unrelated to the features.
    """
    b = setup.blobs
    total = BlobSpec(K=b.K, d=b.d, r=b.r, sigma=b.sigma,
                     n_per_class=b.n_per_class + -(-setup.n_test // b.K))
    base = gen_gaussian_blobs(total, seed)
    n_train = b.n_per_class * b.K
    structured = gen_partial_labels(base, setup.flip, seed)
    labels = stream(seed, "relabel").integers(0, b.K, base.n)
    relabeled = PLLDataset(base.features, np.eye(b.K, dtype=bool)[labels], labels)
    randomized = gen_partial_labels(relabeled, setup.flip, derive_seed(seed, "relabel-flip"))
    out = {}
    for name, data in (("structured", structured), ("randomized", randomized)):
        out[name] = (data.subset(np.arange(n_train)), data.subset(np.arange(n_train, data.n)))
    return out


def _complexity_unit(job):
    config, setup, train_set, test_set, run_id, condition, seed = job
    cfg = config.replace(seed=seed, eval_every=setup.check_every)
    params, records = train(cfg, train_set, test_set, stop_loss=setup.fit_threshold)
    rec = records[-1]
    return {
        "run_id": run_id,
        "condition": condition,
        "seed": seed,
        "epochs": rec.epoch,
        "final_err": rec.test_err,
        "final_train_loss": rec.train_naive_loss,
        "fitted": int(rec.train_naive_loss <= setup.fit_threshold),
        "lz_complexity": lz_complexity(params, setup.bits),
    }


def run_complexity_experiment(config: TrainConfig, setup: ComplexitySetup = None, workers=1):
    """``setup.repeats`` runs per condition; returns ``(rows, summary)``.

    Runs are numbered structured first, then randomized; run i trains from
    seed (master seed, "trial", i). A run stops at the first check where
    its training naive loss is <= ``setup.fit_threshold``, or after
    ``config.epochs``. Every run is reported; ``fitted`` is 0 for runs
    that hit the epoch cap above the threshold.
    The summary holds per-condition medians of the complexity and a
    one-sided rank-sum test (structured < randomized).
    """
    from scipy.stats import mannwhitneyu

    setup = setup or ComplexitySetup()
    if setup.repeats < 0:
        raise ContractError("repeats must be >= 0")
    data = complexity_data(setup, config.seed)
    jobs = []
    for c, condition in enumerate(CONDITIONS):
        train_set, test_set = data[condition]
        for r in range(setup.repeats):
            run_id = c * setup.repeats + r
            jobs.append((config, setup, train_set, test_set, run_id, condition,
                         derive_seed(config.seed, "trial", run_id)))
    rows = _map(_complexity_unit, jobs, workers)
    summary = {"repeats": setup.repeats, "bits": setup.bits}
    values = {}
    for condition in CONDITIONS:
        values[condition] = [row["lz_complexity"] for row in rows if row["condition"] == condition]
        summary[f"median_{condition}"] = float(np.median(values[condition])) if values[condition] else math.nan
        summary[f"unfitted_{condition}"] = sum(1 for row in rows
                                               if row["condition"] == condition and not row["fitted"])
    if setup.repeats > 0:
        test = mannwhitneyu(values["structured"], values["randomized"], alternative="less")
        summary["rank_sum_u"] = float(test.statistic)
        summary["rank_sum_p"] = float(test.pvalue)
    else:
        summary["rank_sum_u"] = summary["rank_sum_p"] = math.nan
    return rows, summary

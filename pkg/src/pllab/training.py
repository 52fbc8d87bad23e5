"""Mini-batch training of the MLP on partially labeled data.

Defaults not fixed by the method itself (batch size 128, 200 epochs,
evaluation every 5 epochs, final-epoch model) are desk-scale choices and
are recorded in every output header through ``TrainConfig.as_dict``.
"""

from dataclasses import asdict, dataclass, fields

import numpy as np

from . import losses
from .errors import ContractError, NumericFailure, TrainingDiverged
from .nn import ModelSpec, Workspace, backward, forward, init_model, predict_from_logits
from .optim import make_optimizer, step
from .rng import stream

LOSS_KINDS = ("naive", "avg-log", "cross-entropy")
OPTIMIZERS = ("yogi", "sgd")
EVAL_CHUNK = 4096


@dataclass
class TrainConfig:
    hidden_dims: tuple = (512, 256)
    elu_alpha: float = 1.0
    bn_epsilon: float = 1e-5
    bn_momentum: float = 0.1
    loss: str = "naive"
    optimizer: str = "yogi"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    yogi_eps: float = 1e-3
    bias_correction: bool = True
    batch_size: int = 128
    epochs: int = 200
    eval_every: int = 5
    seed: int = 0

    def __post_init__(self):
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)
        if self.loss not in LOSS_KINDS:
            raise ContractError(f"loss must be one of {LOSS_KINDS}, got {self.loss!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ContractError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.batch_size < 2:
            raise ContractError("batch_size must be >= 2 (batch norm)")
        if self.epochs < 1 or self.eval_every < 1:
            raise ContractError("epochs and eval_every must be >= 1")

    def model_spec(self, input_dim, output_dim):
        return ModelSpec(input_dim=input_dim, output_dim=output_dim, hidden_dims=self.hidden_dims,
                         elu_alpha=self.elu_alpha, bn_epsilon=self.bn_epsilon,
                         bn_momentum=self.bn_momentum)

    def optimizer_hyper(self):
        if self.optimizer == "yogi":
            return dict(lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.yogi_eps,
                        bias_correction=self.bias_correction)
        return dict(lr=self.lr)

    def replace(self, **changes):
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return TrainConfig(**values)

    def as_dict(self):
        out = asdict(self)
        out["hidden_dims"] = list(self.hidden_dims)
        return out


@dataclass
class MetricsRecord:
    epoch: int
    train_naive_loss: float
    train_avg_log_loss: float
    train_cc_risk: float
    train_partial_risk: float
    test_err: float
    test_partial_risk: float
    gap: float

    COLUMNS = ("epoch", "train_naive_loss", "train_avg_log_loss", "train_cc_risk",
               "train_partial_risk", "test_err", "test_partial_risk", "gap")

    def row(self):
        return [getattr(self, c) for c in self.COLUMNS]


def minibatches(n, batch_size, rng):
    """Shuffled index batches covering all n rows. A trailing batch of a
    single row is merged into the previous one (batch norm needs >= 2)."""
    perm = rng.permutation(n)
    batches = [perm[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(batches) > 1 and len(batches[-1]) < 2:
        tail = batches.pop()
        batches[-1] = np.concatenate([batches[-1], tail])
    return batches


def infer_probs(params, features):
    """Inference-mode logits and probabilities, computed in chunks."""
    logits, probs = [], []
    for start in range(0, len(features), EVAL_CHUNK):
        lg, pr, _ = forward(params, features[start:start + EVAL_CHUNK], training=False)
        logits.append(lg)
        probs.append(pr)
    if not logits:
        K = params.spec.output_dim
        return np.empty((0, K)), np.empty((0, K))
    return np.concatenate(logits), np.concatenate(probs)


def evaluate(params, train_set, eval_set, epoch):
    logits, probs = infer_probs(params, train_set.features)
    naive, _ = losses.naive_loss(probs, train_set.candidate_masks)
    avg, _ = losses.avg_log_loss(probs, train_set.candidate_masks)
    cc = losses.cc_risk(probs, train_set.candidate_masks, train_set.K)
    train_partial = losses.partial_zero_one_risk(predict_from_logits(logits), train_set.candidate_masks)
    eval_logits, _ = infer_probs(params, eval_set.features)
    eval_pred = predict_from_logits(eval_logits)
    err = losses.classification_error(eval_pred, eval_set.true_labels)
    test_partial = losses.partial_zero_one_risk(eval_pred, eval_set.candidate_masks)
    return MetricsRecord(epoch=epoch, train_naive_loss=naive, train_avg_log_loss=avg,
                         train_cc_risk=cc, train_partial_risk=train_partial, test_err=err,
                         test_partial_risk=test_partial,
                         gap=losses.generalization_gap(err, train_partial))


def _loss_fn(kind):
    if kind == "naive":
        return lambda probs, batch_masks, batch_labels: losses.naive_loss(probs, batch_masks)
    if kind == "avg-log":
        return lambda probs, batch_masks, batch_labels: losses.avg_log_loss(probs, batch_masks)
    return lambda probs, batch_masks, batch_labels: losses.cross_entropy(probs, batch_labels)


def train(config: TrainConfig, train_set, eval_set, stop_loss=None):
    """Minimize the configured surrogate on ``train_set``.

    Returns ``(params, records)``. Metrics are taken in inference mode
    after every ``eval_every``-th epoch and after the last one. With
    ``stop_loss`` set, training ends at the first recorded epoch whose
    training naive loss is <= ``stop_loss``. The run is a deterministic
    function of ``config``, ``stop_loss`` and the data.
    """
    if train_set.n < 2:
        raise ContractError("training needs at least 2 examples")
    if train_set.K < 2:
        raise ContractError("training needs K >= 2")
    if eval_set.true_labels is None:
        raise ContractError("the evaluation set must carry true labels")
    if eval_set.d != train_set.d or eval_set.K != train_set.K:
        raise ContractError("train and evaluation sets disagree on d or K")
    if config.loss == "cross-entropy" and train_set.true_labels is None:
        raise ContractError("cross-entropy training needs true labels")

    params = init_model(config.model_spec(train_set.d, train_set.K), config.seed)
    opt = make_optimizer(config.optimizer, params, **config.optimizer_hyper())
    loss_fn = _loss_fn(config.loss)
    features = train_set.features
    masks = train_set.candidate_masks
    labels = train_set.true_labels
    records = []
    ws = Workspace()
    for epoch in range(1, config.epochs + 1):
        params.train()
        rng = stream(config.seed, "shuffle", epoch)
        for b, idx in enumerate(minibatches(train_set.n, config.batch_size, rng)):
            try:
                _, probs, cache = forward(params, features[idx], workspace=ws)
                _, dlogits = loss_fn(probs, masks[idx], None if labels is None else labels[idx])
                grads = backward(cache, dlogits)
                step(opt, params, grads)
            except NumericFailure as exc:
                raise TrainingDiverged(exc, epoch, b) from exc
        if epoch % config.eval_every == 0 or epoch == config.epochs:
            params.eval()
            records.append(evaluate(params, train_set, eval_set, epoch))
            if stop_loss is not None and records[-1].train_naive_loss <= stop_loss:
                break
    params.eval()
    return params, records

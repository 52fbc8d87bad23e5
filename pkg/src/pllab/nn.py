"""Fixed-family multilayer perceptron with batch normalization and ELU.

Architecture for ``hidden_dims = (h1, ..., hm)``::

    x -> [dense -> batchnorm -> ELU] * m -> dense -> logits -> softmax

Batch norm and ELU follow every hidden dense layer; the output layer
emits raw logits. All tensors are float64.

Weights are drawn from N(0, 1/fan_in) (LeCun normal), biases start at
zero, batch-norm scale at 1 and shift at 0, running mean at 0 and running
variance at 1.

Running statistics are updated in training mode as
``running = (1 - momentum) * running + momentum * batch_stat`` using the
biased (population) batch variance, so repeated steps on a fixed batch
drive the inference path to the training-mode output on that batch.

Parameter snapshots serialize to a flat little-endian binary layout::

    b"PLLP"                      magic
    uint32 version (=1)
    uint32 n_dims                number of entries in the dims list
    uint32 dims[n_dims]          input, hidden..., output
    float64 elu_alpha, bn_epsilon, bn_momentum
    uint8 training flag
    then, for each hidden layer l:   W_l (fan_in x fan_out, row-major), b_l,
                                     scale_l, shift_l, running_mean_l, running_var_l
    then the output layer:           W_out, b_out
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kernels
from .errors import ContractError, NumericFailure
from .rng import stream

_MAGIC = b"PLLP"
_VERSION = 1


@dataclass(frozen=True)
class ModelSpec:
    input_dim: int
    output_dim: int
    hidden_dims: tuple = (512, 256)
    elu_alpha: float = 1.0
    bn_epsilon: float = 1e-5
    bn_momentum: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if not self.hidden_dims:
            raise ContractError("hidden_dims must be non-empty")
        for dim in self.dims:
            if int(dim) < 1:
                raise ContractError(f"all layer dimensions must be >= 1, got {self.dims}")
        if not self.elu_alpha > 0:
            raise ContractError("elu_alpha must be positive")
        if not self.bn_epsilon > 0:
            raise ContractError("bn_epsilon must be positive")
        if not 0 < self.bn_momentum < 1:
            raise ContractError("bn_momentum must lie in (0, 1)")

    @property
    def dims(self):
        return (self.input_dim, *self.hidden_dims, self.output_dim)

    def parameter_count(self) -> int:
        """Trainable scalars: dense weights and biases plus batch-norm scale and shift."""
        dims = self.dims
        dense = sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))
        return dense + 2 * sum(self.hidden_dims)


@dataclass
class ModelParams:
    spec: ModelSpec
    weights: list
    biases: list
    bn_scale: list
    bn_shift: list
    running_mean: list
    running_var: list
    training: bool = True

    def trainable(self):
        """Trainable tensors in canonical order (W, b, scale, shift per hidden layer; W, b last)."""
        out = []
        for l in range(len(self.spec.hidden_dims)):
            out += [self.weights[l], self.biases[l], self.bn_scale[l], self.bn_shift[l]]
        out += [self.weights[-1], self.biases[-1]]
        return out

    def num_parameters(self) -> int:
        return sum(t.size for t in self.trainable())

    def train(self):
        self.training = True
        return self

    def eval(self):
        self.training = False
        return self

    def copy(self):
        return ModelParams(
            spec=self.spec,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            bn_scale=[g.copy() for g in self.bn_scale],
            bn_shift=[s.copy() for s in self.bn_shift],
            running_mean=[m.copy() for m in self.running_mean],
            running_var=[v.copy() for v in self.running_var],
            training=self.training,
        )


@dataclass
class Gradients:
    weights: list
    biases: list
    bn_scale: list
    bn_shift: list

    def tensors(self):
        """Same order as ``ModelParams.trainable``."""
        out = []
        for l in range(len(self.bn_scale)):
            out += [self.weights[l], self.biases[l], self.bn_scale[l], self.bn_shift[l]]
        out += [self.weights[-1], self.biases[-1]]
        return out


@dataclass
class Batch:
    features: np.ndarray
    candidate_masks: np.ndarray
    true_labels: np.ndarray = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.candidate_masks = np.asarray(self.candidate_masks, dtype=bool)
        if self.features.ndim != 2 or self.candidate_masks.ndim != 2:
            raise ContractError("features and candidate_masks must be 2-D")
        if self.features.shape[0] != self.candidate_masks.shape[0]:
            raise ContractError("features and candidate_masks disagree on batch size")
        if not self.candidate_masks.any(axis=1).all():
            raise ContractError("every candidate set must be non-empty")
        if self.true_labels is not None:
            self.true_labels = np.asarray(self.true_labels, dtype=np.int64)
            if self.true_labels.shape != (self.features.shape[0],):
                raise ContractError("true_labels must have one entry per row")
            rows = np.arange(len(self.true_labels))
            if not self.candidate_masks[rows, self.true_labels].all():
                raise ContractError("true label missing from its candidate set")


@dataclass
class ForwardCache:
    training: bool
    inputs: list = field(default_factory=list)  # input to each dense layer
    xhat: list = field(default_factory=list)  # normalized pre-activations (training only)
    inv_std: list = field(default_factory=list)
    act: list = field(default_factory=list)  # ELU outputs
    params: ModelParams = None
    workspace: object = None


def init_model(spec: ModelSpec, seed: int) -> ModelParams:
    rng = stream(seed, "init")
    dims = spec.dims
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in))
        biases.append(np.zeros(fan_out))
    hidden = spec.hidden_dims
    return ModelParams(
        spec=spec,
        weights=weights,
        biases=biases,
        bn_scale=[np.ones(h) for h in hidden],
        bn_shift=[np.zeros(h) for h in hidden],
        running_mean=[np.zeros(h) for h in hidden],
        running_var=[np.ones(h) for h in hidden],
        training=True,
    )


class Workspace:
    """Reusable buffers keyed by role and shape.

    Passing the same workspace to successive ``forward``/``backward`` calls
    avoids reallocating the large per-layer arrays on every step. Arrays in
    a cache or gradient built on a workspace are overwritten by the next
    call that uses it, so consume them first.
    """

    def __init__(self):
        self._arrays = {}

    def get(self, name, shape):
        key = (name, shape)
        arr = self._arrays.get(key)
        if arr is None:
            arr = self._arrays[key] = np.empty(shape)
        return arr


def _features_of(batch):
    return batch.features if isinstance(batch, Batch) else np.asarray(batch, dtype=np.float64)


def softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward(params: ModelParams, batch, *, training=None, update_running=True, workspace=None):
    """Run the network on a batch.

    Returns ``(logits, probs, cache)``. ``training`` overrides the mode
    stored in ``params``. In training mode batch statistics are used and,
    unless ``update_running`` is false, the running statistics in ``params``
    are updated in place.
    """
    spec = params.spec
    x = _features_of(batch)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ContractError(f"expected features of shape (B, {spec.input_dim}), got {x.shape}")
    training = params.training if training is None else training
    if training and x.shape[0] < 2:
        raise ContractError("training-mode forward needs a batch of at least 2 rows")

    ws = workspace if workspace is not None else Workspace()
    B = x.shape[0]
    alpha = spec.elu_alpha
    eps = spec.bn_epsilon
    mom = spec.bn_momentum
    cache = ForwardCache(training=training, params=params)
    h = np.ascontiguousarray(x)
    for l, width in enumerate(spec.hidden_dims):
        cache.inputs.append(h)
        z = np.matmul(h, params.weights[l], out=ws.get(("z", l), (B, width)))
        z += params.biases[l]
        h = ws.get(("h", l), (B, width))
        scratch = ws.get(("scratch", l), (B, width))
        if training:
            xhat = ws.get(("xhat", l), (B, width))
            mean = ws.get(("mean", l), (width,))
            var = ws.get(("var", l), (width,))
            inv_std = ws.get(("inv_std", l), (width,))
            ok = kernels.bn_elu_train(z, params.bn_scale[l], params.bn_shift[l], eps, alpha,
                                      h, xhat, mean, var, inv_std, scratch)
            if update_running:
                params.running_mean[l] *= 1.0 - mom
                params.running_mean[l] += mom * mean
                params.running_var[l] *= 1.0 - mom
                params.running_var[l] += mom * var
            cache.xhat.append(xhat)
            cache.inv_std.append(inv_std)
        else:
            ok = kernels.bn_elu_eval(z, params.bn_scale[l], params.bn_shift[l],
                                     params.running_mean[l], params.running_var[l], eps, alpha,
                                     h, scratch)
        if not ok:
            raise NumericFailure(f"non-finite values in hidden layer {l}", where=f"hidden layer {l}")
        cache.act.append(h)
    cache.inputs.append(h)
    logits = h @ params.weights[-1]
    logits += params.biases[-1]
    if not np.isfinite(logits).all():
        raise NumericFailure("non-finite values in output layer", where="output layer")
    cache.workspace = ws
    return logits, softmax(logits), cache


def backward(cache: ForwardCache, dloss_dlogits) -> Gradients:
    """Exact gradients of a scalar loss given its gradient w.r.t. the logits."""
    if not cache.training:
        raise ContractError("backward needs the cache of a training-mode forward")
    params = cache.params
    spec = params.spec
    ws = cache.workspace
    g = np.ascontiguousarray(dloss_dlogits, dtype=np.float64)
    B = cache.inputs[0].shape[0]
    if g.shape != (B, spec.output_dim):
        raise ContractError(f"dloss_dlogits has shape {g.shape}, expected {(B, spec.output_dim)}")

    dims = spec.dims
    n_hidden = len(spec.hidden_dims)
    dW = [ws.get(("dW", l), (dims[l], dims[l + 1])) for l in range(n_hidden + 1)]
    db = [ws.get(("db", l), (dims[l + 1],)) for l in range(n_hidden + 1)]
    dscale = [ws.get(("dscale", l), (dims[l + 1],)) for l in range(n_hidden)]
    dshift = [ws.get(("dshift", l), (dims[l + 1],)) for l in range(n_hidden)]

    np.matmul(cache.inputs[-1].T, g, out=dW[-1])
    np.sum(g, axis=0, out=db[-1])
    dh = np.matmul(g, params.weights[-1].T, out=ws.get(("dh", n_hidden - 1), (B, dims[-2])))
    alpha = spec.elu_alpha
    for l in reversed(range(n_hidden)):
        dz = ws.get(("dz", l), (B, dims[l + 1]))
        kernels.bn_elu_backward(dh, cache.act[l], cache.xhat[l], params.bn_scale[l],
                                cache.inv_std[l], alpha, dz, dscale[l], dshift[l])
        np.matmul(cache.inputs[l].T, dz, out=dW[l])
        np.sum(dz, axis=0, out=db[l])
        if l > 0:
            dh = np.matmul(dz, params.weights[l].T, out=ws.get(("dh", l - 1), (B, dims[l])))
    return Gradients(weights=dW, biases=db, bn_scale=dscale, bn_shift=dshift)


def predict_from_logits(logits):
    """Row-wise argmax; ties go to the lowest index."""
    return np.argmax(np.asarray(logits), axis=1)


def predict(params: ModelParams, features):
    """Predicted labels using the inference path (running statistics),
    whatever mode ``params`` is in."""
    logits, _, _ = forward(params, features, training=False)
    return predict_from_logits(logits)


def params_to_bytes(params: ModelParams) -> bytes:
    spec = params.spec
    dims = spec.dims
    parts = [
        _MAGIC,
        struct.pack("<II", _VERSION, len(dims)),
        struct.pack(f"<{len(dims)}I", *dims),
        struct.pack("<ddd", spec.elu_alpha, spec.bn_epsilon, spec.bn_momentum),
        struct.pack("<B", 1 if params.training else 0),
    ]
    for l in range(len(spec.hidden_dims)):
        for t in (params.weights[l], params.biases[l], params.bn_scale[l], params.bn_shift[l],
                  params.running_mean[l], params.running_var[l]):
            parts.append(np.ascontiguousarray(t, dtype="<f8").tobytes())
    parts.append(np.ascontiguousarray(params.weights[-1], dtype="<f8").tobytes())
    parts.append(np.ascontiguousarray(params.biases[-1], dtype="<f8").tobytes())
    return b"".join(parts)


def params_from_bytes(blob: bytes) -> ModelParams:
    try:
        return _params_from_bytes(blob)
    except struct.error as exc:
        raise ContractError(f"parameter snapshot is truncated ({exc})") from None


def _params_from_bytes(blob):
    if blob[:4] != _MAGIC:
        raise ContractError("not a parameter snapshot (bad magic)")
    version, n_dims = struct.unpack_from("<II", blob, 4)
    if version != _VERSION:
        raise ContractError(f"unsupported snapshot version {version}")
    offset = 12
    dims = struct.unpack_from(f"<{n_dims}I", blob, offset)
    offset += 4 * n_dims
    alpha, eps, mom = struct.unpack_from("<ddd", blob, offset)
    offset += 24
    (training,) = struct.unpack_from("<B", blob, offset)
    offset += 1
    spec = ModelSpec(input_dim=dims[0], output_dim=dims[-1], hidden_dims=dims[1:-1],
                     elu_alpha=alpha, bn_epsilon=eps, bn_momentum=mom)

    def take(shape):
        nonlocal offset
        count = int(np.prod(shape))
        if offset + 8 * count > len(blob):
            raise ContractError("parameter snapshot is truncated")
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).astype(np.float64)
        offset += 8 * count
        return arr.reshape(shape)

    params = ModelParams(spec=spec, weights=[], biases=[], bn_scale=[], bn_shift=[],
                         running_mean=[], running_var=[], training=bool(training))
    for fan_in, fan_out in zip(dims[:-2], dims[1:-1]):
        params.weights.append(take((fan_in, fan_out)))
        params.biases.append(take((fan_out,)))
        params.bn_scale.append(take((fan_out,)))
        params.bn_shift.append(take((fan_out,)))
        params.running_mean.append(take((fan_out,)))
        params.running_var.append(take((fan_out,)))
    params.weights.append(take((dims[-2], dims[-1])))
    params.biases.append(take((dims[-1],)))
    if offset != len(blob):
        raise ContractError("trailing bytes after parameter snapshot")
    return params


def save_params(params: ModelParams, path) -> None:
    with open(path, "wb") as fh:
        fh.write(params_to_bytes(params))


def load_params(path) -> ModelParams:
    with open(path, "rb") as fh:
        return params_from_bytes(fh.read())

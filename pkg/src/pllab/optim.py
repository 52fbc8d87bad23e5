"""Parameter update rules: Yogi and plain SGD.

Both update the trainable tensors of a ``ModelParams`` in place (the
training loop is the single owner) and return the updated objects.
Gradients are validated before anything is touched, so a rejected step
leaves the parameters and optimizer state unchanged.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kernels
from .errors import ContractError, NumericFailure


@dataclass
class YogiState:
    m: list
    v: list
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-3
    bias_correction: bool = True

    def copy(self):
        return YogiState(m=[a.copy() for a in self.m], v=[a.copy() for a in self.v], t=self.t,
                         lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps,
                         bias_correction=self.bias_correction)


def init_yogi(params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-3, bias_correction=True,
              v0=0.0) -> YogiState:
    if v0 < 0:
        raise ContractError("initial second moment must be non-negative")
    tensors = params.trainable()
    return YogiState(
        m=[np.zeros_like(p) for p in tensors],
        v=[np.full_like(p, v0) for p in tensors],
        lr=lr, beta1=beta1, beta2=beta2, eps=eps, bias_correction=bias_correction,
    )


def _grad_tensors(params, grads):
    tensors = grads.tensors() if hasattr(grads, "tensors") else list(grads)
    targets = params.trainable()
    if len(tensors) != len(targets):
        raise ContractError(f"expected {len(targets)} gradient tensors, got {len(tensors)}")
    for i, (p, g) in enumerate(zip(targets, tensors)):
        if np.shape(g) != p.shape:
            raise ContractError(f"gradient {i} has shape {np.shape(g)}, parameter has {p.shape}")
        if not kernels.all_finite(np.ascontiguousarray(g, dtype=np.float64).reshape(-1)):
            raise NumericFailure(f"non-finite gradient in tensor {i}", where=f"gradient {i}")
    return targets, tensors


def yogi_step(state: YogiState, params, grads):
    """One Yogi update.

    ``m <- b1 m + (1 - b1) g``;
    ``v <- v - (1 - b2) sign(v - g^2) g^2``;
    ``theta <- theta - lr m_hat / (sqrt(v_hat) + eps)``
    where the hats divide by ``1 - b^t`` when bias correction is on.
    """
    targets, tensors = _grad_tensors(params, grads)
    if len(state.m) != len(targets):
        raise ContractError("optimizer state does not match the parameters")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    if state.bias_correction:
        c1 = 1.0 - b1 ** state.t
        c2 = 1.0 - b2 ** state.t
    else:
        c1 = c2 = 1.0
    for p, g, m, v in zip(targets, tensors, state.m, state.v):
        kernels.yogi_update(p.reshape(-1), np.ascontiguousarray(g, dtype=np.float64).reshape(-1),
                            m.reshape(-1), v.reshape(-1), state.lr, b1, b2, c1, c2, state.eps)
    return state, params


def sgd_step(params, grads, lr: float):
    targets, tensors = _grad_tensors(params, grads)
    for p, g in zip(targets, tensors):
        p -= lr * g
    return params


@dataclass
class SGDState:
    """Stateless SGD wrapped to share the optimizer-step interface."""

    lr: float = 1e-2
    t: int = field(default=0)


def make_optimizer(kind: str, params, **hyper):
    if kind == "yogi":
        return init_yogi(params, **hyper)
    if kind == "sgd":
        return SGDState(lr=hyper.get("lr", 1e-2))
    raise ContractError(f"unknown optimizer {kind!r}")


def step(state, params, grads):
    if isinstance(state, YogiState):
        return yogi_step(state, params, grads)
    state.t += 1
    return state, sgd_step(params, grads, state.lr)

"""Bound calculators and a parameter-complexity proxy.

Everything here is a pure function of its inputs. The capacity proxies
(``natarajan_proxy``, ``rademacher_norm_proxy``) are crude stand-ins for
quantities that have no computable closed form for a deep network; they
are meant to show the order of magnitude of the bounds, not to be tight.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels
from .errors import AmbiguityConditionError, ContractError
from .losses import MAX_CLASSES_CC, PROB_FLOOR, cc_loss_upper_bound

LZ_BITS = (4, 8, 16)


@dataclass(frozen=True)
class EprmInputs:
    d_H: float  # Natarajan dimension, or a proxy for it
    K: int
    eps: float
    delta: float
    gamma: float

    def __post_init__(self):
        if not self.d_H >= 1:
            raise ContractError("d_H must be >= 1")
        if int(self.K) != self.K or self.K < 2:
            raise ContractError("K must be an integer >= 2")
        if not 0 < self.eps < 1:
            raise ContractError("eps must lie in (0, 1)")
        if not 0 < self.delta < 1:
            raise ContractError("delta must lie in (0, 1)")
        if not self.gamma >= 0:
            raise ContractError("gamma must be >= 0")
        if self.gamma >= 1:
            raise AmbiguityConditionError(
                f"small ambiguity degree condition violated: gamma={self.gamma} >= 1")


@dataclass(frozen=True)
class CcBoundInputs:
    rho: float  # Lipschitz constant of the loss
    M: float  # upper bound of the loss
    rademacher_proxies: tuple  # one entry per class
    delta: float
    n: int

    def __post_init__(self):
        proxies = np.asarray(self.rademacher_proxies, dtype=np.float64)
        object.__setattr__(self, "rademacher_proxies", tuple(proxies.tolist()))
        if proxies.ndim != 1 or proxies.size == 0:
            raise ContractError("rademacher_proxies must be a non-empty vector")
        if not (np.isfinite(proxies).all() and (proxies >= 0).all()):
            raise ContractError("rademacher proxies must be finite and >= 0")
        if not (self.rho >= 0 and math.isfinite(self.rho)):
            raise ContractError("rho must be finite and >= 0")
        if not (self.M >= 0 and math.isfinite(self.M)):
            raise ContractError("M must be finite and >= 0")
        if not 0 < self.delta < 1:
            raise ContractError("delta must lie in (0, 1)")
        if int(self.n) != self.n or self.n < 1:
            raise ContractError("n must be a positive integer")


def eta(gamma):
    """log(2 / (1 + gamma)); positive exactly when gamma < 1."""
    if gamma >= 1:
        raise AmbiguityConditionError(f"small ambiguity degree condition violated: gamma={gamma} >= 1")
    return math.log(2.0 / (1.0 + gamma))


def eprm_sample_complexity(inp: EprmInputs) -> float:
    """Sample size beyond which the empirical partial-risk minimizer is
    (eps, delta)-accurate:

        n0 = 4/(eta eps) * (d_H (log(4 d_H) + 2 log K + log(1/(eta eps))) + log(1/delta) + 1)
    """
    e = eta(inp.gamma)
    ee = e * inp.eps
    inner = inp.d_H * (math.log(4 * inp.d_H) + 2 * math.log(inp.K) + math.log(1 / ee))
    return 4 / ee * (inner + math.log(1 / inp.delta) + 1)


def cc_bound_rhs(inp: CcBoundInputs) -> float:
    """8 rho sum(R_n) + 2 M sqrt(log(2/delta) / (2n))."""
    return (8 * inp.rho * math.fsum(inp.rademacher_proxies)
            + 2 * inp.M * math.sqrt(math.log(2 / inp.delta) / (2 * inp.n)))


def natarajan_proxy(num_params: int) -> float:
    """P log2 P, the order of the VC/Natarajan dimension of threshold nets."""
    if num_params < 2:
        raise ContractError("parameter count must be >= 2")
    return num_params * math.log2(num_params)


def cc_loss_bound(K, prob_floor=PROB_FLOOR):
    """M for the CC loss with floored probabilities (valid for K <= 52)."""
    if K > MAX_CLASSES_CC:
        raise ContractError(f"K must be <= {MAX_CLASSES_CC}")
    return cc_loss_upper_bound(K, prob_floor)


def rademacher_norm_proxy(params, features):
    """Norm-product surrogate for the per-class Rademacher complexity.

    Each entry is prod_l ||W_l||_F * max_i ||x_i||_2 / sqrt(n) over the
    dense layers; batch norm and biases are ignored. The same value is
    returned for all K classes. It is a loose upper-bound style quantity,
    not an estimate.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ContractError("features must be a non-empty 2-D array")
    norm_prod = 1.0
    for w in params.weights:
        norm_prod *= float(np.linalg.norm(w))
    value = norm_prod * float(np.linalg.norm(x, axis=1).max()) / math.sqrt(x.shape[0])
    return np.full(params.spec.output_dim, value)


def quantize(tensor, bits):
    """Uniform quantization of one tensor to integer levels 0..2^bits-1
    over its own [min, max]. A constant tensor maps to all zeros."""
    a = np.asarray(tensor, dtype=np.float64).reshape(-1)
    levels = (1 << bits) - 1
    if a.size == 0:
        return np.zeros(0, dtype=np.uint16)
    lo, hi = a.min(), a.max()
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise ContractError("cannot quantize non-finite values")
    if hi == lo:
        return np.zeros(a.size, dtype=np.uint16)
    q = np.rint((a - lo) / (hi - lo) * levels)
    return np.clip(q, 0, levels).astype(np.uint16)


def symbols_to_bytes(symbols, bits):
    """Pack quantized levels: 4 bits as two per byte (high nibble first,
    zero padded), 8 bits as one byte, 16 bits little-endian."""
    s = np.asarray(symbols, dtype=np.uint16)
    if bits == 4:
        if s.size % 2:
            s = np.append(s, 0)
        return ((s[0::2] << 4) | s[1::2]).astype(np.uint8).tobytes()
    if bits == 8:
        return s.astype(np.uint8).tobytes()
    if bits == 16:
        return s.astype("<u2").tobytes()
    raise ContractError(f"bits must be one of {LZ_BITS}")


def params_to_symbol_bytes(params, bits=8):
    if bits not in LZ_BITS:
        raise ContractError(f"bits must be one of {LZ_BITS}")
    parts = [quantize(t, bits) for t in params.trainable()]
    return symbols_to_bytes(np.concatenate(parts), bits)


def lz_complexity(params, bits=8) -> int:
    """LZ76 phrase count of the quantized trainable parameters.

    Tensors are taken in ``ModelParams.trainable()`` order (per hidden
    layer W, b, scale, shift; then the output W, b), each quantized over
    its own range, concatenated and packed by ``symbols_to_bytes``.
    """
    return kernels.lz76_phrase_count(params_to_symbol_bytes(params, bits))

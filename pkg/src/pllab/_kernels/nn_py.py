"""NumPy reference versions of the fused layer and optimizer kernels.

Each function writes into caller-provided output arrays, mirroring the
compiled kernels in ``_nn_ext.pyx`` so either can be swapped in.
"""

import numpy as np


def _elu_inplace(y, alpha, scratch):
    # elu(y) = max(y, 0) + alpha * expm1(min(y, 0)); one side is exactly 0
    finite = bool(np.isfinite(y).all())
    np.minimum(y, 0.0, out=scratch)
    np.expm1(scratch, out=scratch)
    scratch *= alpha
    np.maximum(y, 0.0, out=y)
    y += scratch
    return finite


def bn_elu_train(z, scale, shift, eps, alpha, h_out, xhat_out, mean_out, var_out, inv_std_out,
                 scratch):
    """Batch-norm with batch statistics, then ELU. Returns False if ``h`` has NaN/Inf."""
    np.mean(z, axis=0, out=mean_out)
    np.subtract(z, mean_out, out=xhat_out)
    np.multiply(xhat_out, xhat_out, out=scratch)
    np.mean(scratch, axis=0, out=var_out)
    np.divide(1.0, np.sqrt(var_out + eps), out=inv_std_out)
    xhat_out *= inv_std_out
    np.multiply(xhat_out, scale, out=h_out)
    h_out += shift
    return _elu_inplace(h_out, alpha, scratch)


def bn_elu_eval(z, scale, shift, running_mean, running_var, eps, alpha, h_out, scratch):
    np.subtract(z, running_mean, out=h_out)
    h_out *= scale / np.sqrt(running_var + eps)
    h_out += shift
    return _elu_inplace(h_out, alpha, scratch)


def bn_elu_backward(dh, h, xhat, scale, inv_std, alpha, dz_out, dscale_out, dshift_out):
    """Gradient through ELU and training-mode batch norm.

    ELU'(y) is recovered from the output: 1 where h > 0, else h + alpha.
    """
    batch = dh.shape[0]
    dy = np.where(h > 0, dh, dh * (h + alpha))
    np.sum(dy, axis=0, out=dshift_out)
    np.sum(dy * xhat, axis=0, out=dscale_out)
    np.multiply(dy, batch, out=dz_out)
    dz_out -= dshift_out
    dz_out -= xhat * dscale_out
    dz_out *= scale * inv_std / batch


def all_finite(a):
    return bool(np.isfinite(a).all())


def yogi_update(p, g, m, v, lr, beta1, beta2, c1, c2, eps):
    """In-place Yogi step on flat float64 arrays; ``c1``/``c2`` are the
    bias-correction denominators (1 when disabled)."""
    g2 = g * g
    m *= beta1
    m += (1.0 - beta1) * g
    v -= (1.0 - beta2) * np.sign(v - g2) * g2
    p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)

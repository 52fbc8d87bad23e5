import numpy as np
import pytest

from pllab import _kernels as kernels
from pllab.errors import ContractError, NumericFailure
from pllab.nn import ModelSpec, init_model, params_to_bytes
from pllab.optim import SGDState, init_yogi, make_optimizer, sgd_step, step, yogi_step


class Scalar:
    """Minimal parameter container holding one tensor."""

    def __init__(self, value):
        self.t = np.array([value], dtype=np.float64)

    def trainable(self):
        return [self.t]


def tiny_params(seed=0):
    return init_model(ModelSpec(input_dim=3, output_dim=2, hidden_dims=(4,)), seed)


def test_single_step_hand_oracle():
    # g=0.5, m=v=0, defaults:
    #   m = 0.1*0.5 = 0.05, v = 0 - 0.001*sign(0 - 0.25)*0.25 = 0.00025
    #   m_hat = 0.05/0.1 = 0.5, v_hat = 0.00025/0.001 = 0.25, sqrt = 0.5
    #   theta = 1 - 0.001*0.5/(0.5 + 0.001) = 1 - 0.0005/0.501
    p = Scalar(1.0)
    state = init_yogi(p)
    yogi_step(state, p, [np.array([0.5])])
    assert abs(p.t[0] - (1 - 0.0005 / 0.501)) < 1e-12
    assert state.t == 1
    assert abs(state.m[0][0] - 0.05) < 1e-15
    assert abs(state.v[0][0] - 0.00025) < 1e-15


def test_single_step_without_bias_correction():
    # m = 0.05, v = 0.00025, theta = 1 - 0.001*0.05/(sqrt(0.00025) + 0.001)
    p = Scalar(1.0)
    state = init_yogi(p, bias_correction=False)
    yogi_step(state, p, [np.array([0.5])])
    assert abs(p.t[0] - (1 - 0.001 * 0.05 / (0.00025 ** 0.5 + 0.001))) < 1e-12


def test_two_steps_oracle():
    # second step with g=-0.2 from the state above
    m1, v1 = 0.05, 0.00025
    m2 = 0.9 * m1 + 0.1 * -0.2
    v2 = v1 - 0.001 * np.sign(v1 - 0.04) * 0.04
    theta1 = 1 - 0.0005 / 0.501
    theta2 = theta1 - 0.001 * (m2 / (1 - 0.9 ** 2)) / (np.sqrt(v2 / (1 - 0.999 ** 2)) + 1e-3)
    p = Scalar(1.0)
    state = init_yogi(p)
    yogi_step(state, p, [np.array([0.5])])
    yogi_step(state, p, [np.array([-0.2])])
    assert abs(p.t[0] - theta2) < 1e-12


def test_zero_gradient_leaves_params():
    params = tiny_params()
    before = params_to_bytes(params)
    state = init_yogi(params, v0=0.3)
    yogi_step(state, params, [np.zeros_like(t) for t in params.trainable()])
    assert params_to_bytes(params) == before


def test_v_fixed_point_when_v_equals_g_squared():
    p = Scalar(0.0)
    state = init_yogi(p, v0=0.09)
    yogi_step(state, p, [np.array([0.3])])
    assert state.v[0][0] == 0.09
    yogi_step(state, p, [np.array([-0.3])])
    assert state.v[0][0] == 0.09


def test_v_stays_non_negative():
    rng = np.random.default_rng(0)
    params = tiny_params()
    state = init_yogi(params)
    for _ in range(200):
        grads = [rng.standard_cauchy(t.shape) for t in params.trainable()]
        yogi_step(state, params, grads)
        assert all((v >= 0).all() for v in state.v)


def test_non_finite_gradient_leaves_everything_untouched():
    params = tiny_params()
    state = init_yogi(params)
    grads = [np.ones_like(t) for t in params.trainable()]
    yogi_step(state, params, grads)
    before, snap = params_to_bytes(params), state.copy()
    bad = [g.copy() for g in grads]
    bad[-1][0] = np.nan
    with pytest.raises(NumericFailure):
        yogi_step(state, params, bad)
    assert params_to_bytes(params) == before
    assert state.t == snap.t
    assert all(np.array_equal(a, b) for a, b in zip(state.m, snap.m))
    assert all(np.array_equal(a, b) for a, b in zip(state.v, snap.v))
    bad[-1][0] = np.inf
    with pytest.raises(NumericFailure):
        sgd_step(params, bad, 0.1)
    assert params_to_bytes(params) == before


def test_shape_mismatch_rejected():
    params = tiny_params()
    state = init_yogi(params)
    grads = [np.ones_like(t) for t in params.trainable()]
    with pytest.raises(ContractError):
        yogi_step(state, params, grads[:-1])
    grads[0] = np.ones((1, 1))
    with pytest.raises(ContractError):
        yogi_step(state, params, grads)


def test_negative_v0_rejected():
    with pytest.raises(ContractError):
        init_yogi(tiny_params(), v0=-1.0)


def test_sgd():
    params = tiny_params()
    before = params_to_bytes(params)
    grads = [np.full_like(t, 2.0) for t in params.trainable()]
    sgd_step(params, grads, 0.0)
    assert params_to_bytes(params) == before
    w0 = params.weights[0].copy()
    sgd_step(params, grads, 0.25)
    assert np.array_equal(params.weights[0], w0 - 0.5)


def test_make_optimizer_and_step_dispatch():
    params = tiny_params()
    grads = [np.ones_like(t) for t in params.trainable()]
    sgd = make_optimizer("sgd", params, lr=0.1)
    assert isinstance(sgd, SGDState)
    step(sgd, params, grads)
    assert sgd.t == 1
    yogi = make_optimizer("yogi", params, lr=1e-2)
    step(yogi, params, grads)
    assert yogi.t == 1 and yogi.lr == 1e-2
    with pytest.raises(ContractError):
        make_optimizer("adam", params)


def test_kernel_backends_agree():
    rng = np.random.default_rng(3)
    n = 1000
    p, g = rng.normal(size=n), rng.normal(size=n)
    m, v = rng.normal(size=n) * 0.1, rng.random(n) * 0.5
    out = []
    for impl in (kernels.nn_py, kernels):
        pp, mm, vv = p.copy(), m.copy(), v.copy()
        impl.yogi_update(pp, g, mm, vv, 1e-3, 0.9, 0.999, 1 - 0.9 ** 3, 1 - 0.999 ** 3, 1e-3)
        out.append((pp, mm, vv))
    for a, b in zip(*out):
        assert np.allclose(a, b, rtol=0, atol=1e-15)

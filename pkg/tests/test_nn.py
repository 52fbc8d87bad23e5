import numpy as np
import pytest

from pllab import _kernels as kernels
from pllab import losses
from pllab.errors import ContractError, NumericFailure
from pllab.nn import (Batch, ModelSpec, Workspace, backward, forward, init_model, load_params,
                      params_from_bytes, params_to_bytes, predict, predict_from_logits, save_params,
                      softmax)


def small_instance(seed, d=5, hidden=(4, 3), K=3, B=6):
    rng = np.random.default_rng(seed)
    spec = ModelSpec(input_dim=d, output_dim=K, hidden_dims=hidden)
    params = init_model(spec, seed)
    # move BN affine params off their defaults so their gradients are exercised
    for l in range(len(hidden)):
        params.bn_scale[l] += rng.normal(0, 0.3, hidden[l])
        params.bn_shift[l] += rng.normal(0, 0.3, hidden[l])
    x = rng.normal(size=(B, d))
    masks = rng.random((B, K)) < 0.5
    masks[np.arange(B), rng.integers(0, K, B)] = True
    return params, x, masks


def naive_objective(params, x, masks):
    _, probs, _ = forward(params, x, training=True, update_running=False)
    return losses.naive_loss(probs, masks)[0]


def max_rel_error(params, x, masks, h=1e-4):
    """Worst relative error of the analytic gradient against a fourth-order
    central difference. The 2-point stencil's rounding noise (~1e-11) is
    too coarse for entries near 1e-10, which batch norm produces at B=2."""
    _, probs, cache = forward(params, x, training=True, update_running=False)
    _, dlogits = losses.naive_loss(probs, masks)
    grads = backward(cache, dlogits).tensors()
    worst = 0.0
    for p, g in zip(params.trainable(), grads):
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            f = []
            for step in (2, 1, -1, -2):
                flat[i] = old + step * h
                f.append(naive_objective(params, x, masks))
            flat[i] = old
            fd = (-f[0] + 8 * f[1] - 8 * f[2] + f[3]) / (12 * h)
            worst = max(worst, abs(fd - gflat[i]) / max(abs(fd), abs(gflat[i]), 1e-7))
    return worst


def test_parameter_count_matches_shape_arithmetic():
    # dense: 10*512+512 + 512*256+256 + 256*4+4 = 137,988; bn scale/shift: 2*(512+256) = 1,536
    spec = ModelSpec(input_dim=10, output_dim=4)
    assert spec.parameter_count() == 137988 + 1536 == 139524
    assert init_model(spec, 0).num_parameters() == 139524


def test_init_is_deterministic_and_conventional():
    spec = ModelSpec(input_dim=6, output_dim=3, hidden_dims=(8, 5))
    a, b = init_model(spec, 7), init_model(spec, 7)
    assert params_to_bytes(a) == params_to_bytes(b)
    assert all((rv == 1).all() for rv in a.running_var)
    assert all((rm == 0).all() for rm in a.running_mean)
    assert all((s == 1).all() for s in a.bn_scale)
    assert all((b_ == 0).all() for b_ in a.biases)
    assert params_to_bytes(init_model(spec, 8)) != params_to_bytes(a)


def test_init_scale_is_fan_in():
    spec = ModelSpec(input_dim=400, output_dim=3, hidden_dims=(300,))
    w = init_model(spec, 1).weights[0]
    assert abs(w.var() - 1 / 400) < 0.05 / 400


@pytest.mark.parametrize("bad", [dict(input_dim=0, output_dim=3), dict(input_dim=3, output_dim=0),
                                 dict(input_dim=3, output_dim=2, hidden_dims=()),
                                 dict(input_dim=3, output_dim=2, hidden_dims=(4, 0))])
def test_spec_rejects_zero_dims(bad):
    with pytest.raises(ContractError):
        ModelSpec(**bad)


def test_softmax_rows_and_argmax():
    rng = np.random.default_rng(0)
    params, x, _ = small_instance(0, B=20)
    logits, probs, _ = forward(params, x * 50)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12, rtol=0)
    assert (probs > 0).all() and (probs < 1).all()
    assert (probs.argmax(axis=1) == logits.argmax(axis=1)).all()
    big = softmax(np.array([[1000.0, 0.0, -1000.0]]))
    assert np.isfinite(big).all() and abs(big.sum() - 1) < 1e-12
    z = rng.normal(size=(5, 4))
    assert np.allclose(softmax(z), np.exp(z) / np.exp(z).sum(axis=1, keepdims=True), atol=1e-15)


def test_identical_rows_normalize_to_shift():
    spec = ModelSpec(input_dim=3, output_dim=2, hidden_dims=(4,))
    params = init_model(spec, 0)
    params.bn_shift[0][:] = [0.5, -0.25, 0.0, 2.0]
    x = np.tile([[1.0, -2.0, 3.0]], (5, 1))
    _, _, cache = forward(params, x)
    expected = np.where(params.bn_shift[0] > 0, params.bn_shift[0], np.expm1(params.bn_shift[0]))
    assert np.allclose(cache.act[0], expected, atol=1e-12)


def test_forward_is_bit_deterministic():
    params, x, _ = small_instance(3)
    a = forward(params.copy(), x)[0]
    b = forward(params.copy(), x)[0]
    assert a.tobytes() == b.tobytes()
    params.eval()
    assert forward(params, x)[0].tobytes() == forward(params, x)[0].tobytes()


def test_inference_forward_does_not_touch_params():
    params, x, _ = small_instance(4)
    params.eval()
    before = params_to_bytes(params)
    forward(params, x)
    predict(params, x)
    assert params_to_bytes(params) == before


def test_training_forward_needs_two_rows():
    params, x, _ = small_instance(5)
    with pytest.raises(ContractError):
        forward(params, x[:1], training=True)
    forward(params, x[:1], training=False)


def test_forward_shape_checks():
    params, x, _ = small_instance(6)
    with pytest.raises(ContractError):
        forward(params, x[:, :-1])


def test_forward_reports_failing_layer():
    params, x, _ = small_instance(7)
    params.weights[1][0, 0] = np.nan
    with pytest.raises(NumericFailure) as info:
        forward(params, x)
    assert info.value.where == "hidden layer 1"
    params, x, _ = small_instance(7)
    params.weights[-1][0, 0] = np.inf
    with pytest.raises(NumericFailure) as info:
        forward(params, x)
    assert info.value.where == "output layer"


@pytest.mark.parametrize("seed", range(6))
def test_composed_gradient_matches_finite_differences(seed):
    params, x, masks = small_instance(seed)
    assert max_rel_error(params, x, masks) < 1e-4


def test_bn_elu_layer_gradient_in_isolation():
    rng = np.random.default_rng(11)
    B, H, alpha, eps = 7, 5, 1.3, 1e-5
    z = rng.normal(size=(B, H))
    scale, shift = rng.normal(1, 0.3, H), rng.normal(0, 0.5, H)
    w = rng.normal(size=(B, H))  # upstream gradient, objective = sum(w * h)

    def run(z, scale, shift):
        h, xh, sc = np.empty((B, H)), np.empty((B, H)), np.empty((B, H))
        mean, var, inv = np.empty(H), np.empty(H), np.empty(H)
        kernels.bn_elu_train(z, scale, shift, eps, alpha, h, xh, mean, var, inv, sc)
        return h, xh, inv

    h, xh, inv = run(z, scale, shift)
    dz, dscale, dshift = np.empty((B, H)), np.empty(H), np.empty(H)
    kernels.bn_elu_backward(w, h, xh, scale, inv, alpha, dz, dscale, dshift)
    for arr, grad in ((z, dz), (scale, dscale), (shift, dshift)):
        flat = arr.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + 1e-6
            up = (w * run(z, scale, shift)[0]).sum()
            flat[i] = old - 1e-6
            down = (w * run(z, scale, shift)[0]).sum()
            flat[i] = old
            fd = (up - down) / 2e-6
            assert abs(fd - grad.reshape(-1)[i]) <= 1e-6 * max(1.0, abs(fd))


def test_dense_layer_gradient_in_isolation():
    # output layer only: logits = h W + b, so dW = h^T g and db = sum(g)
    params, x, masks = small_instance(12)
    _, probs, cache = forward(params, x, training=True, update_running=False)
    g = np.random.default_rng(1).normal(size=probs.shape)
    grads = backward(cache, g)
    assert np.allclose(grads.weights[-1], cache.inputs[-1].T @ g, atol=1e-14)
    assert np.allclose(grads.biases[-1], g.sum(axis=0), atol=1e-14)


def test_backward_linearity():
    params, x, _ = small_instance(2)
    _, probs, cache = forward(params, x, training=True, update_running=False)
    g = np.random.default_rng(2).normal(size=probs.shape)
    zero = backward(cache, np.zeros_like(g)).tensors()
    assert all((t == 0).all() for t in zero)
    one = [t.copy() for t in backward(cache, g).tensors()]
    two = backward(cache, 2 * g).tensors()
    assert all(np.array_equal(2 * a, b) for a, b in zip(one, two))


def test_backward_contract_errors():
    params, x, _ = small_instance(3)
    _, probs, cache = forward(params, x, training=True)
    with pytest.raises(ContractError):
        backward(cache, np.zeros((probs.shape[0], probs.shape[1] + 1)))
    _, probs, cache = forward(params, x, training=False)
    with pytest.raises(ContractError):
        backward(cache, np.zeros_like(probs))


def test_workspace_gives_same_results():
    params, x, masks = small_instance(8, B=16)
    ws = Workspace()
    a_logits, _, a_cache = forward(params.copy(), x, workspace=ws)
    a = [t.copy() for t in backward(a_cache, np.ones_like(a_logits)).tensors()]
    b_logits, _, b_cache = forward(params.copy(), x)
    b = backward(b_cache, np.ones_like(b_logits)).tensors()
    assert np.array_equal(a_logits, b_logits)
    assert all(np.array_equal(u, v) for u, v in zip(a, b))


def test_running_statistics_converge_to_batch_statistics():
    spec = ModelSpec(input_dim=4, output_dim=2, hidden_dims=(6,), bn_momentum=0.1)
    params = init_model(spec, 0)
    x = np.random.default_rng(0).normal(2.0, 3.0, size=(32, 4))
    z = x @ params.weights[0] + params.biases[0]
    for _ in range(300):
        forward(params, x, training=True)
    assert np.allclose(params.running_mean[0], z.mean(axis=0), rtol=1e-9, atol=1e-9)
    assert np.allclose(params.running_var[0], z.var(axis=0), rtol=1e-9, atol=1e-9)
    # inference then reproduces the training-mode activations
    params.eval()
    _, _, inf = forward(params, x)
    _, _, trn = forward(params, x, training=True, update_running=False)
    assert np.allclose(inf.act[0], trn.act[0], atol=1e-6)


def test_running_update_rule_single_step():
    spec = ModelSpec(input_dim=3, output_dim=2, hidden_dims=(4,), bn_momentum=0.25)
    params = init_model(spec, 1)
    x = np.random.default_rng(1).normal(size=(5, 3))
    z = x @ params.weights[0]
    forward(params, x, training=True)
    assert np.allclose(params.running_mean[0], 0.25 * z.mean(axis=0), atol=1e-15)
    assert np.allclose(params.running_var[0], 0.75 + 0.25 * z.var(axis=0), atol=1e-15)


def test_predict_argmax_and_ties():
    assert predict_from_logits(np.array([[0.1, 2.0, -1.0]])).tolist() == [1]
    assert predict_from_logits(np.array([[1.0, 1.0, 0.0]])).tolist() == [0]
    rng = np.random.default_rng(0)
    logits = rng.normal(size=(50, 5))
    shifted = logits + rng.normal(size=(50, 1)) * 100
    assert (predict_from_logits(logits) == predict_from_logits(shifted)).all()


def test_batch_validation():
    with pytest.raises(ContractError):
        Batch(np.zeros((2, 3)), np.array([[True, False], [False, False]]))
    with pytest.raises(ContractError):
        Batch(np.zeros((2, 3)), np.array([[True, False], [False, True]]), np.array([1, 1]))
    b = Batch(np.zeros((2, 3)), np.array([[True, False], [False, True]]), np.array([0, 1]))
    assert b.features.dtype == np.float64


def test_serialization_round_trip(tmp_path):
    params, x, _ = small_instance(9)
    forward(params, x)  # non-trivial running statistics
    params.eval()
    blob = params_to_bytes(params)
    back = params_from_bytes(blob)
    assert params_to_bytes(back) == blob
    assert back.spec == params.spec and back.training is False
    path = tmp_path / "p.bin"
    save_params(params, path)
    assert path.read_bytes() == blob
    assert np.array_equal(forward(load_params(path), x)[0], forward(params, x)[0])


def test_serialization_layout_header():
    spec = ModelSpec(input_dim=2, output_dim=3, hidden_dims=(4,))
    blob = params_to_bytes(init_model(spec, 0))
    assert blob[:4] == b"PLLP"
    header = np.frombuffer(blob[4:4 + 4 * 5], dtype="<u4")
    assert header.tolist() == [1, 3, 2, 4, 3]
    # header + 3 doubles + 1 flag byte + (W,b,scale,shift,rm,rv) + (W_out, b_out)
    n_doubles = (2 * 4 + 4 * 5) + (4 * 3 + 3)
    assert len(blob) == 4 + 4 * 5 + 8 * 3 + 1 + 8 * n_doubles


def test_serialization_rejects_garbage():
    blob = params_to_bytes(init_model(ModelSpec(2, 2, (3,)), 0))
    for bad in (b"XXXX" + blob[4:], blob[:-1], blob[:10], blob + b"\0"):
        with pytest.raises(ContractError):
            params_from_bytes(bad)

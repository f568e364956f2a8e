import numpy as np
import pytest

from alertrl import nn


def flatten(params):
    return np.concatenate([a.ravel() for a in (*params.weights, *params.biases)])


def unflatten_like(theta, params):
    arrays = []
    i = 0
    for a in (*params.weights, *params.biases):
        arrays.append(theta[i : i + a.size].reshape(a.shape))
        i += a.size
    n = len(params.weights)
    return nn.MlpParams(tuple(arrays[:n]), tuple(arrays[n:]))


def numeric_gradient(params, inputs, targets, actions, eps=1e-6):
    """Central finite differences of the masked MSE loss (independent oracle)."""
    theta = flatten(params)
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        plus = theta.copy()
        plus[i] += eps
        minus = theta.copy()
        minus[i] -= eps
        _, lp = nn.mse_grad(unflatten_like(plus, params), inputs, targets, actions)
        _, lm = nn.mse_grad(unflatten_like(minus, params), inputs, targets, actions)
        grad[i] = (lp - lm) / (2 * eps)
    return grad


LAYERS = [5, 20, 10, 11]


def test_init_deterministic():
    a = nn.init_params(LAYERS, seed=7)
    b = nn.init_params(LAYERS, seed=7)
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)


def test_init_biases_zero_and_bounds():
    params = nn.init_params(LAYERS, seed=3)
    for b in params.biases:
        assert (b == 0).all()
    for w, fan_in, fan_out in zip(params.weights, LAYERS, LAYERS[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        assert np.abs(w).max() <= bound
    assert np.abs(params.weights[0]).max() <= np.sqrt(6.0 / (5 + 20))


def test_forward_zero_params_zero_output():
    params = nn.MlpParams(
        tuple(np.zeros((a, b)) for a, b in zip(LAYERS, LAYERS[1:])),
        tuple(np.zeros(b) for b in LAYERS[1:]),
    )
    q = nn.forward(params, np.full(5, 0.3))
    assert (q == 0).all() and q.shape == (11,)


def test_forward_hand_computed_two_neuron():
    # x=[0.5,0.2]; hidden relu([x1+0.1, x2-0.3]) = [0.6, 0]; out 2*0.6+0.05.
    params = nn.MlpParams(
        (np.eye(2), np.array([[2.0], [3.0]])),
        (np.array([0.1, -0.3]), np.array([0.05])),
    )
    q = nn.forward(params, np.array([0.5, 0.2]))
    assert q[0] == pytest.approx(1.25)


def test_forward_batch_consistency():
    params = nn.init_params(LAYERS, seed=5)
    rng = np.random.default_rng(0)
    batch = rng.random((7, 5))
    q_batch = nn.forward(params, batch)
    for i in range(7):
        assert np.allclose(q_batch[i], nn.forward(params, batch[i]))


def test_forward_is_pure():
    params = nn.init_params(LAYERS, seed=5)
    x = np.full(5, 0.4)
    assert np.array_equal(nn.forward(params, x), nn.forward(params, x))


def test_forward_shape_mismatch():
    params = nn.init_params(LAYERS, seed=5)
    with pytest.raises(ValueError, match="input width"):
        nn.forward(params, np.zeros(4))


def test_mse_grad_zero_when_target_equals_prediction():
    params = nn.init_params(LAYERS, seed=2)
    x = np.random.default_rng(1).random((4, 5))
    q = nn.forward(params, x)
    actions = np.array([0, 3, 7, 10])
    targets = q[np.arange(4), actions]
    grads, loss = nn.mse_grad(params, x, targets, actions)
    assert loss == 0.0
    for g in (*grads.weights, *grads.biases):
        assert np.allclose(g, 0.0)


def test_mse_grad_hand_derived_single_path():
    # 1 -> 1 -> 2 net: x=0.5, W1=2, b1=0.1 -> a1=1.1; W2=[1,-1], b2=[0.2,0].
    # q=[1.3,-1.1]; action 0, target 1.0 -> err 0.3, loss 0.09.
    params = nn.MlpParams(
        (np.array([[2.0]]), np.array([[1.0, -1.0]])),
        (np.array([0.1]), np.array([0.2, 0.0])),
    )
    grads, loss = nn.mse_grad(params, [[0.5]], [1.0], [0])
    assert loss == pytest.approx(0.09)
    assert grads.weights[1][0, 0] == pytest.approx(0.66)  # a1 * 2*err
    assert grads.weights[1][0, 1] == 0.0
    assert grads.biases[1][0] == pytest.approx(0.6)
    assert grads.biases[1][1] == 0.0
    assert grads.weights[0][0, 0] == pytest.approx(0.3)  # x * W2[0,0] * 2*err
    assert grads.biases[0][0] == pytest.approx(0.6)


def test_mse_grad_empty_batch():
    params = nn.init_params(LAYERS, seed=2)
    with pytest.raises(ValueError, match="empty batch"):
        nn.mse_grad(params, np.empty((0, 5)), [], [])


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(12)
    for trial in range(3):
        params = nn.init_params([5, 8, 6, 4], seed=100 + trial)
        x = rng.random((6, 5))
        targets = rng.normal(size=6)
        actions = rng.integers(0, 4, size=6)
        grads, _ = nn.mse_grad(params, x, targets, actions)
        analytic = flatten(grads)
        numeric = numeric_gradient(params, x, targets, actions)
        mask = np.abs(numeric) > 1e-8
        rel = np.abs(analytic[mask] - numeric[mask]) / np.abs(numeric[mask])
        assert rel.max() < 1e-4


def test_mask_blocks_unselected_output_units():
    params = nn.init_params([3, 4, 5], seed=8)
    grads, _ = nn.mse_grad(params, [[0.2, 0.5, 0.9]], [2.0], [1])
    out_w = grads.weights[-1]
    out_b = grads.biases[-1]
    unselected = [k for k in range(5) if k != 1]
    assert np.allclose(out_w[:, unselected], 0.0)
    assert np.allclose(out_b[unselected], 0.0)


def scalar_params(value):
    return nn.MlpParams((np.array([[value]]),), (np.array([0.0]),))


def test_adam_zero_gradient_no_change():
    params = nn.init_params(LAYERS, seed=1)
    grads = nn.MlpParams(
        tuple(np.zeros_like(w) for w in params.weights),
        tuple(np.zeros_like(b) for b in params.biases),
    )
    state = nn.adam_init(params)
    new_params, new_state = nn.adam_step(params, grads, state)
    assert new_state.t == 1
    for a, b in zip(new_params.weights, params.weights):
        assert np.array_equal(a, b)


def test_adam_first_step_scalar():
    # Bias-corrected Adam with g=1 at t=1 moves by lr / (1 + eps).
    params = scalar_params(1.0)
    grads = nn.MlpParams((np.array([[1.0]]),), (np.array([0.0]),))
    new_params, _ = nn.adam_step(params, grads, nn.adam_init(params, lr=1e-4))
    delta = 1.0 - new_params.weights[0][0, 0]
    assert delta == pytest.approx(1e-4 / (1 + 1e-8), abs=1e-6)


def test_adam_two_steps_match_hand_computation():
    # Spreadsheet-style reference computation of two bias-corrected steps.
    lr, b1, b2, eps = 1e-4, 0.9, 0.999, 1e-8
    g = 1.0
    p = 1.0
    m = v = 0.0
    expected = []
    for t in (1, 2):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        p = p - lr * m_hat / (np.sqrt(v_hat) + eps)
        expected.append(p)

    params = scalar_params(1.0)
    grads = nn.MlpParams((np.array([[g]]),), (np.array([0.0]),))
    state = nn.adam_init(params, lr=lr)
    for step in range(2):
        params, state = nn.adam_step(params, grads, state)
        assert params.weights[0][0, 0] == pytest.approx(expected[step], abs=1e-10)
    assert state.t == 2


def test_adam_rejects_non_finite_gradient():
    params = scalar_params(1.0)
    grads = nn.MlpParams((np.array([[np.nan]]),), (np.array([0.0]),))
    with pytest.raises(FloatingPointError):
        nn.adam_step(params, grads, nn.adam_init(params))


def test_loss_descends_under_adam():
    rng = np.random.default_rng(77)
    params = nn.init_params([5, 20, 10, 11], seed=77)
    x = rng.random((64, 5))
    targets = rng.normal(size=64)
    actions = rng.integers(0, 11, size=64)
    state = nn.adam_init(params, lr=1e-2)
    _, initial = nn.mse_grad(params, x, targets, actions)
    for _ in range(100):
        grads, loss = nn.mse_grad(params, x, targets, actions)
        params, state = nn.adam_step(params, grads, state)
    _, final = nn.mse_grad(params, x, targets, actions)
    assert final < initial * 0.5


def test_checkpoint_roundtrip(tmp_path):
    params = nn.init_params(LAYERS, seed=4)
    state = nn.adam_init(params, lr=3e-4)
    grads, _ = nn.mse_grad(
        params, np.random.default_rng(0).random((4, 5)), np.ones(4), [0, 1, 2, 3]
    )
    params, state = nn.adam_step(params, grads, state)
    path = tmp_path / "ckpt.npz"
    nn.save_checkpoint(path, params, adam_state=state, seed=4)
    loaded_params, loaded_state, seed = nn.load_checkpoint(path)
    assert seed == 4
    assert loaded_params.layer_sizes == params.layer_sizes
    for a, b in zip(loaded_params.weights, params.weights):
        assert np.array_equal(a, b)
    assert loaded_state.t == 1 and loaded_state.lr == 3e-4
    for a, b in zip(loaded_state.m_weights, state.m_weights):
        assert np.array_equal(a, b)


def test_checkpoint_without_optimizer(tmp_path):
    params = nn.init_params(LAYERS, seed=4)
    path = tmp_path / "ckpt.npz"
    nn.save_checkpoint(path, params)
    loaded, adam_state, seed = nn.load_checkpoint(path)
    assert adam_state is None and seed is None
    assert loaded.layer_sizes == params.layer_sizes

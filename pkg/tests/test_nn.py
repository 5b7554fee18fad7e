import numpy as np
import pytest

from sbvae import nn
from sbvae.numerics import finite_difference_gradient, make_rng


def test_mlp_config_skip_validation():
    cfg = nn.MlpConfig((4, 8, 8), (False, True))
    assert cfg.skip == (False, True)
    with pytest.raises(ValueError):
        nn.MlpConfig((4, 8, 6), (False, True))  # unequal widths under a skip
    with pytest.raises(ValueError):
        nn.MlpConfig((4, 8), (True, True))  # wrong flag count
    assert nn.MlpConfig((4, 8, 3)).skip == (False, False)


def test_init_statistics():
    rng = make_rng(0)
    layer = nn.init_linear(400, 300, rng)
    assert layer.W.shape == (400, 300)
    assert np.all(layer.b == 0.0)
    assert layer.W.std() == pytest.approx(np.sqrt(0.001), rel=0.05)


def test_linear_forward_shape_check():
    layer = nn.init_linear(3, 2, make_rng(1))
    with pytest.raises(ValueError):
        nn.linear_forward(layer, np.zeros((5, 4)))


def test_linear_backward_matches_finite_differences():
    rng = make_rng(2)
    layer = nn.init_linear(4, 3, rng)
    x = rng.standard_normal((6, 4))
    w = rng.standard_normal((6, 3))  # fixed cotangent

    def f(theta):
        W = theta[:12].reshape(4, 3)
        b = theta[12:]
        return float(np.sum((x @ W + b) * w))

    theta = np.concatenate([layer.W.ravel(), layer.b])
    fd = finite_difference_gradient(f, theta, h=1e-6)
    g, dx = nn.linear_backward(layer, x, w)
    assert np.allclose(np.concatenate([g.W.ravel(), g.b]), fd, atol=1e-7)
    fd_x = finite_difference_gradient(
        lambda t: float(np.sum((t.reshape(6, 4) @ layer.W + layer.b) * w)),
        x.ravel(),
        h=1e-6,
    )
    assert np.allclose(dx.ravel(), fd_x, atol=1e-7)


@pytest.mark.parametrize("skip", [(False, False), (False, True)])
def test_hidden_stack_backward_matches_finite_differences(skip):
    rng = make_rng(3)
    cfg = nn.MlpConfig((5, 7, 7), skip)
    layers = nn.init_hidden_stack(cfg, rng)
    # scale weights up so some ReLUs are active and some are not
    for layer in layers:
        layer.W *= 20.0
        layer.b[:] = rng.standard_normal(layer.b.shape) * 0.1
    x = rng.standard_normal((4, 5))
    w = rng.standard_normal((4, 7))

    def flat(ls):
        return np.concatenate([np.concatenate([l.W.ravel(), l.b]) for l in ls])

    def f(theta):
        offset = 0
        trial = []
        for layer in layers:
            n = layer.W.size
            W = theta[offset : offset + n].reshape(layer.W.shape)
            offset += n
            b = theta[offset : offset + layer.b.size]
            offset += layer.b.size
            trial.append(nn.LayerParams(W, b))
        _, h = nn.hidden_forward(trial, cfg, x)
        return float(np.sum(h * w))

    trace, h = nn.hidden_forward(layers, cfg, x)
    grads, dx = nn.hidden_backward(layers, cfg, trace, w)
    fd = finite_difference_gradient(f, flat(layers), h=1e-6)
    assert np.allclose(flat(grads), fd, atol=1e-6)
    fd_x = finite_difference_gradient(
        lambda t: float(
            np.sum(nn.hidden_forward(layers, cfg, t.reshape(4, 5))[1] * w)
        ),
        x.ravel(),
        h=1e-6,
    )
    assert np.allclose(dx.ravel(), fd_x, atol=1e-6)


def test_hidden_backward_rejects_stale_trace():
    cfg = nn.MlpConfig((3, 4))
    layers = nn.init_hidden_stack(cfg, make_rng(4))
    with pytest.raises(ValueError):
        nn.hidden_backward(layers, cfg, {"inputs": [], "pre": []}, np.zeros((1, 4)))


def test_bernoulli_log_likelihood_values():
    logits = np.zeros((2, 3))
    targets = np.array([[1.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
    ll = nn.bernoulli_log_likelihood(logits, targets)
    assert np.allclose(ll, 3 * np.log(0.5))
    # extreme logits stay finite
    assert np.isfinite(
        nn.bernoulli_log_likelihood(np.array([[1e4, -1e4]]), np.array([[1.0, 0.0]]))
    ).all()


def test_bernoulli_log_likelihood_validation():
    with pytest.raises(ValueError):
        nn.bernoulli_log_likelihood(np.zeros((1, 2)), np.zeros((1, 3)))
    with pytest.raises(ValueError):
        nn.bernoulli_log_likelihood(np.zeros((1, 2)), np.array([[0.5, 1.5]]))


def test_bernoulli_grad_matches_finite_differences():
    rng = make_rng(5)
    logits = rng.standard_normal((3, 4))
    targets = (rng.random((3, 4)) > 0.5).astype(float)
    grad = nn.bernoulli_log_likelihood_grad_logits(logits, targets)
    fd = finite_difference_gradient(
        lambda t: float(
            nn.bernoulli_log_likelihood(t.reshape(3, 4), targets).sum()
        ),
        logits.ravel(),
        h=1e-6,
    )
    assert np.allclose(grad.ravel(), fd, atol=1e-8)


def test_softmax_and_log_softmax_agree():
    rng = make_rng(6)
    logits = rng.standard_normal((5, 7)) * 50  # large scale, still stable
    p = nn.softmax(logits)
    assert np.allclose(p.sum(axis=1), 1.0)
    assert np.allclose(np.log(p + 1e-300), nn.log_softmax(logits), atol=1e-9)


def test_checkpoint_roundtrip(tmp_path):
    rng = make_rng(7)
    layers = [nn.init_linear(3, 4, rng), nn.init_linear(4, 2, rng)]
    layers[1].b[:] = [0.5, -0.25]
    path = tmp_path / "layers.bin"
    nn.write_layer_checkpoint(path, layers)
    back = nn.read_layer_checkpoint(path)
    assert len(back) == 2
    for orig, loaded in zip(layers, back):
        assert np.array_equal(orig.W, loaded.W)
        assert np.array_equal(orig.b, loaded.b)


def test_checkpoint_corruption_errors():
    rng = make_rng(8)
    blob = nn.serialize_layers([nn.init_linear(2, 2, rng)])
    with pytest.raises(ValueError, match="magic"):
        nn.parse_layer_checkpoint(b"XXXX" + blob[4:])
    with pytest.raises(ValueError, match="version"):
        nn.parse_layer_checkpoint(blob[:4] + b"\x09\x00\x00\x00" + blob[8:])
    with pytest.raises(ValueError, match="trailing"):
        nn.parse_layer_checkpoint(blob + b"\x00")

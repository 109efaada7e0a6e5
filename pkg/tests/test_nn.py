import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_batch, random_model
from dummyfl import nn
from dummyfl.errors import ConfigurationError, InputError
from dummyfl.nn import LabeledBatch, MlpArchitecture, ModelParams


def numeric_grad(model, batch, step=1e-5):
    grad = np.zeros_like(model.theta)
    for k in range(model.theta.size):
        e = np.zeros_like(model.theta)
        e[k] = step
        up = nn.loss(model.with_theta(model.theta + e), batch)
        down = nn.loss(model.with_theta(model.theta - e), batch)
        grad[k] = (up - down) / (2 * step)
    return grad


def max_rel_err(a, b, floor=1e-8):
    scale = np.maximum(np.abs(a), np.abs(b))
    rel = np.where(scale < floor, np.abs(a - b), np.abs(a - b) / np.maximum(scale, floor))
    return rel.max()


def test_param_count_and_layout():
    arch = MlpArchitecture(16, (64, 32), 4)
    assert arch.num_params == 16 * 64 + 64 + 64 * 32 + 32 + 32 * 4 + 4
    assert arch.projection_dim == 32
    theta = np.arange(arch.num_params, dtype=float)
    (w1, b1), _, _ = nn.unflatten(arch, theta)
    assert w1[0, 1] == 1.0 and w1[1, 0] == 64.0  # row-major (in, out)
    assert b1[0] == 16 * 64


@given(st.integers(0, 2**32 - 1))
def test_flatten_roundtrip_is_exact(seed):
    arch = MlpArchitecture(3, (5, 2), 4)
    theta = np.random.default_rng(seed).standard_normal(arch.num_params) * 1e3
    assert np.array_equal(nn.flatten(nn.unflatten(arch, theta)), theta)


def test_bad_architecture_rejected():
    with pytest.raises(ConfigurationError):
        MlpArchitecture(3, (), 2)
    with pytest.raises(ConfigurationError):
        MlpArchitecture(0, (2,), 2)
    with pytest.raises(ConfigurationError):
        ModelParams(MlpArchitecture(1, (1,), 1), np.zeros(3))


def test_zero_model_gives_zero_logits(small_arch, rng):
    model = ModelParams(small_arch, np.zeros(small_arch.num_params))
    logits, cache = nn.forward(model, rng.standard_normal((5, 3)))
    assert np.array_equal(logits, np.zeros((5, 3)))
    assert len(cache) == 4


def test_one_unit_net_hand_evaluation():
    arch = MlpArchitecture(1, (1,), 1)
    # layout: W1, b1, W2, b2
    model = ModelParams(arch, np.array([1.0, 0.0, 1.0, 0.0]))
    logits, _ = nn.forward(model, np.array([[2.0]]))
    assert logits[0, 0] == pytest.approx(0.9640275800758169, abs=1e-15)


def test_forward_rejects_wrong_width(small_arch, rng):
    model = random_model(small_arch, rng)
    with pytest.raises(ConfigurationError):
        nn.forward(model, np.zeros((2, 4)))
    with pytest.raises(ConfigurationError):
        nn.project(model, np.zeros((2, 4)))


def test_projection_shapes_and_zero_case(rng):
    arch = MlpArchitecture(5, (6, 8), 3)
    zero = ModelParams(arch, np.zeros(arch.num_params))
    assert np.array_equal(nn.project(zero, rng.standard_normal((4, 5))), np.tile(np.tanh(0.0), (4, 8)))
    assert nn.project(random_model(arch, rng), rng.standard_normal((4, 5))).shape == (4, 8)


@given(st.integers(0, 2**32 - 1))
def test_projection_then_last_layer_reproduces_logits(seed):
    rng = np.random.default_rng(seed)
    arch = MlpArchitecture(4, (7, 5), 3)
    model = random_model(arch, rng, scale=3.0)
    x = rng.standard_normal((6, 4))
    w, b = model.layers()[-1]
    logits, _ = nn.forward(model, x)
    np.testing.assert_allclose(nn.project(model, x) @ w + b, logits, rtol=0, atol=1e-12)


def test_cross_entropy_values():
    assert nn.cross_entropy(np.zeros((1, 4)), [2]) == pytest.approx(math.log(4), abs=1e-12)
    assert nn.cross_entropy(np.array([[10.0, -10.0]]), [0]) == pytest.approx(2.0611536203143807e-09, rel=1e-6)
    row = np.array([[0.3, -1.2, 2.0]])
    assert nn.cross_entropy(np.vstack([row, row]), [1, 1]) == pytest.approx(nn.cross_entropy(row, [1]), abs=1e-15)


def test_cross_entropy_survives_huge_logits():
    val = nn.cross_entropy(np.array([[1e300, -1e300, 0.0]]), [1])
    assert np.isfinite(val) and val > 0


def test_cross_entropy_label_checks():
    with pytest.raises(InputError):
        nn.cross_entropy(np.zeros((1, 3)), [3])
    with pytest.raises(InputError):
        nn.cross_entropy(np.zeros((1, 3)), [-1])
    with pytest.raises(ConfigurationError):
        nn.cross_entropy(np.zeros((2, 3)), [0])


@given(st.integers(0, 2**32 - 1))
def test_cross_entropy_nonnegative_and_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    logits = rng.standard_normal((7, 4)) * 5
    labels = rng.integers(0, 4, 7)
    perm = rng.permutation(7)
    val = nn.cross_entropy(logits, labels)
    assert val >= 0
    assert nn.cross_entropy(logits[perm], labels[perm]) == pytest.approx(val, rel=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_backward_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    arch = MlpArchitecture(4, (5, 3), 3)
    model = random_model(arch, rng)
    batch = random_batch(arch, 6, rng)
    assert max_rel_err(nn.backward(model, batch), numeric_grad(model, batch)) < 1e-4


def test_duplicated_batch_same_gradient(small_arch, rng):
    model = random_model(small_arch, rng)
    batch = random_batch(small_arch, 5, rng)
    doubled = LabeledBatch(np.vstack([batch.inputs, batch.inputs]), np.concatenate([batch.labels, batch.labels]))
    np.testing.assert_allclose(nn.backward(model, doubled), nn.backward(model, batch), rtol=1e-12, atol=1e-15)


def test_saturated_fit_has_vanishing_gradient():
    arch = MlpArchitecture(1, (1,), 2)
    # hidden unit ~ tanh(10) ~ 1, logit gap 40 in favour of class 0
    model = ModelParams(arch, np.array([10.0, 0.0, 20.0, -20.0, 0.0, 0.0]))
    grad = nn.backward(model, LabeledBatch(np.array([[1.0]]), np.array([0])))
    assert np.linalg.norm(grad) < 1e-6


def test_sgd_step():
    arch = MlpArchitecture(1, (1,), 1)
    model = ModelParams(arch, np.array([1.0, 2.0, 0.0, 0.0]))
    out = nn.sgd_step(model, np.array([1.0, -1.0, 0.0, 0.0]), 0.5)
    np.testing.assert_array_equal(out.theta[:2], [0.5, 2.5])
    assert np.array_equal(nn.sgd_step(model, np.ones(4), 0.0).theta, model.theta)
    g = np.array([0.25, -1.0, 3.0, 0.5])
    twice = nn.sgd_step(nn.sgd_step(model, g, 0.1), g, 0.1)
    np.testing.assert_allclose(twice.theta, nn.sgd_step(model, g, 0.2).theta, atol=1e-15)
    with pytest.raises(ConfigurationError):
        nn.sgd_step(model, np.ones(3), 0.1)


def test_init_respects_glorot_bounds(rng):
    arch = MlpArchitecture(16, (64, 32), 4)
    model = nn.init_params(arch, rng)
    for (w, b), (i, o) in zip(model.layers(), arch.layer_dims):
        limit = math.sqrt(6 / (i + o))
        assert np.abs(w).max() <= limit and np.abs(b).max() <= limit

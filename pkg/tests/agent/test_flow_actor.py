import numpy as np
import pytest

from src.agent.flow_actor import (
    TAU_HIGH,
    TAU_LOW,
    CfmSample,
    FlowActor,
    SamplingError,
    actor_grad_from_ratio,
    cfm_loss,
    cfm_losses,
    cfm_losses_and_grad,
    draw_cfm_samples,
    explore_steps,
    make_flow_actor,
    sample_latent,
    stack_draws,
    velocity,
)
from src.agent.buffer import Transition
from src.numkit.grad_check import grad_check
from src.numkit.mlp import Mlp, NonFiniteError
from src.numkit.rng import make_rng

D_STATE, D_LATENT = 3, 2


@pytest.fixture
def actor():
    return make_flow_actor(D_STATE, D_LATENT, (16,), make_rng(0, "init"))


@pytest.fixture
def batch():
    rng = make_rng(1)
    s = rng.normal(size=(6, D_STATE))
    x1 = rng.normal(size=(6, D_LATENT))
    draws = [draw_cfm_samples(rng, D_LATENT, 4) for _ in range(6)]
    return s, x1, draws


def zero_actor(**kwargs):
    sizes = (D_STATE + D_LATENT + 1, 8, D_LATENT)
    net = Mlp(sizes, "tanh", np.zeros((D_STATE + D_LATENT + 2) * 8 + 9 * D_LATENT))
    return FlowActor(net, D_STATE, D_LATENT, **kwargs)


def test_cfm_sample_is_read_only():
    c = CfmSample(np.zeros(2), 0.5)
    with pytest.raises(ValueError):
        c.x0[0] = 1.0


def test_cfm_sample_rejects_tau_out_of_range():
    with pytest.raises(ValueError):
        CfmSample(np.zeros(2), 1.5)


def test_draws_within_tau_bounds():
    draws = draw_cfm_samples(make_rng(0), 3, 500)
    taus = np.array([d.tau for d in draws])
    assert taus.min() >= TAU_LOW and taus.max() <= TAU_HIGH
    assert all(d.x0.shape == (3,) for d in draws)


def test_actor_validates_dimensions():
    net = Mlp((4, 2), "tanh", np.zeros(10))
    with pytest.raises(ValueError):
        FlowActor(net, D_STATE, D_LATENT)


@pytest.mark.parametrize(
    "kwargs", [{"n_sample_steps": 0}, {"explore_steps": -1}, {"eta": 0.0}, {"sigma_explore": -0.1}]
)
def test_actor_validates_sampling_parameters(kwargs):
    with pytest.raises(ValueError):
        zero_actor(**kwargs)


def test_scalar_loss_matches_batch_bitwise(actor, batch):
    s, x1, draws = batch
    x0, tau = stack_draws(draws)
    losses = cfm_losses(actor, s, x1, x0, tau)
    for i in range(len(draws)):
        assert cfm_loss(actor, s[i], x1[i], draws[i]) == losses[i]


def test_loss_nonnegative_and_zero_for_exact_field():
    # v = 0 partout: la perte vaut ||x1 - x0||² en moyenne sur les tirages
    actor = zero_actor()
    x1 = np.array([0.5, -0.5])
    draws = (CfmSample(np.array([0.5, -0.5]), 0.3), CfmSample(np.array([1.5, -0.5]), 0.7))
    assert cfm_loss(actor, np.zeros(D_STATE), x1, draws) == pytest.approx(0.5)


def test_loss_requires_draws(actor):
    with pytest.raises(ValueError):
        cfm_loss(actor, np.zeros(D_STATE), np.zeros(D_LATENT), ())


def test_loss_rejects_bad_dimensions(actor, batch):
    _, _, draws = batch
    with pytest.raises(ValueError):
        cfm_loss(actor, np.zeros(D_STATE + 1), np.zeros(D_LATENT), draws[0])


def test_weighted_gradient_matches_finite_differences(actor, batch):
    s, x1, draws = batch
    x0, tau = stack_draws(draws)
    w = make_rng(2).normal(size=6)

    def loss_fn(p):
        a = actor.with_params(p)
        losses, grad = cfm_losses_and_grad(a, s, x1, x0, tau, weights=w)
        return float(np.sum(w * losses)), grad

    assert grad_check(loss_fn, actor.params) < 1e-5


def test_actor_grad_from_ratio_uses_frozen_draws(actor, batch):
    s, x1, draws = batch
    items = [
        Transition(s[i], x1[i], np.zeros(2), 0.0, s[i], False, 0.0, draws[i], 1, i)
        for i in range(6)
    ]
    g = np.linspace(-1.0, 1.0, 6)
    x0, tau = stack_draws(draws)
    _, expected = cfm_losses_and_grad(actor, s, x1, x0, tau, weights=g)
    assert np.array_equal(actor_grad_from_ratio(actor, items, g), expected)


def test_actor_grad_from_ratio_checks_lengths(actor, batch):
    s, x1, draws = batch
    items = [Transition(s[0], x1[0], np.zeros(2), 0.0, s[0], False, 0.0, draws[0], 1, 0)]
    with pytest.raises(ValueError):
        actor_grad_from_ratio(actor, items, np.zeros(2))


def test_sample_shapes_and_reproducibility(actor):
    s = make_rng(3).normal(size=(5, D_STATE))
    x1, x0 = sample_latent(actor, s, make_rng(4))
    y1, y0 = sample_latent(actor, s, make_rng(4))
    assert x1.shape == (5, D_LATENT) and x0.shape == (5, D_LATENT)
    assert np.array_equal(x1, y1) and np.array_equal(x0, y0)
    single, _ = sample_latent(actor, s[0], make_rng(4))
    assert single.shape == (D_LATENT,)


def test_zero_field_returns_initial_noise():
    x1, x0 = sample_latent(zero_actor(), np.zeros((3, D_STATE)), make_rng(5))
    assert np.array_equal(x1, x0)


def test_sampling_non_finite_raises_with_step():
    actor = zero_actor()
    actor.net.params[:] = np.inf
    with pytest.raises(SamplingError) as info:
        sample_latent(actor, np.ones(D_STATE), make_rng(0))
    assert info.value.step == 0
    assert isinstance(info.value, NonFiniteError)


def test_exploration_without_noise_consumes_no_randomness():
    actor = zero_actor(sigma_explore=0.0, explore_steps=4)
    rng = make_rng(6)
    x = np.array([0.3, -0.2])
    out = explore_steps(actor, x, np.zeros(D_STATE), rng)
    assert np.array_equal(out, x)
    assert rng.random() == make_rng(6).random()


def test_exploration_noise_scale():
    actor = zero_actor(sigma_explore=0.1, explore_steps=4)
    x = np.zeros((4000, D_LATENT))
    out = explore_steps(actor, x, np.zeros((4000, D_STATE)), make_rng(7))
    # K pas de bruit indépendants: écart-type σ·√K
    assert np.std(out) == pytest.approx(0.2, rel=0.05)


def test_deterministic_mode_is_repeatable(actor):
    det = actor.deterministic()
    assert det.explore_steps == 0 and det.sigma_explore == 0.0
    s = np.ones((2, D_STATE))
    assert np.array_equal(det.act(s, make_rng(8)), det.draw_latents(s, make_rng(8)))


def test_copy_and_with_params_do_not_alias(actor):
    other = actor.copy()
    other.net.params[0] += 1.0
    assert actor.params[0] != other.params[0]
    moved = actor.with_params(actor.params + 1.0)
    assert np.array_equal(moved.params, actor.params + 1.0)
    assert moved.explore_steps == actor.explore_steps


def linear_actor(weights_on_x: np.ndarray, bias: np.ndarray, **kwargs):
    # réseau à une couche linéaire: v = A x + b
    in_dim = D_STATE + D_LATENT + 1
    w = np.zeros((D_LATENT, in_dim))
    w[:, D_STATE : D_STATE + D_LATENT] = weights_on_x
    net = Mlp((in_dim, D_LATENT), "identity", np.concatenate([w.reshape(-1), bias]))
    return FlowActor(net, D_STATE, D_LATENT, **kwargs)


@pytest.mark.parametrize("n_steps", [1, 3, 16])
def test_constant_field_shifts_noise(n_steps):
    c = np.array([0.4, -1.1])
    actor = linear_actor(np.zeros((D_LATENT, D_LATENT)), c, n_sample_steps=n_steps)
    x1, x0 = sample_latent(actor, np.ones(D_STATE), make_rng(9))
    assert np.allclose(x1, x0 + c, atol=1e-12)


def test_linear_field_matches_ode_solution():
    actor = linear_actor(-np.eye(D_LATENT), np.zeros(D_LATENT), n_sample_steps=128)
    x1, x0 = sample_latent(actor, np.zeros(D_STATE), make_rng(10))
    assert np.linalg.norm(x1 - x0 * np.exp(-1.0)) < 1e-2 * np.linalg.norm(x0)


def test_constant_field_exploration_telescopes():
    c = np.array([1.0, -2.0])
    actor = linear_actor(
        np.zeros((D_LATENT, D_LATENT)), c, explore_steps=3, eta=0.1, sigma_explore=0.0
    )
    x = np.array([0.2, 0.2])
    assert np.allclose(explore_steps(actor, x, np.zeros(D_STATE), make_rng(0)), x + 0.3 * c)


def test_loss_matches_independent_oracle(actor, batch):
    s, x1, draws = batch

    expected = np.mean(
        [
            np.sum((velocity(actor, (1 - d.tau) * d.x0 + d.tau * x1[0], d.tau, s[0]) - (x1[0] - d.x0)) ** 2)
            for d in draws[0]
        ]
    )
    assert cfm_loss(actor, s[0], x1[0], draws[0]) == pytest.approx(expected, rel=1e-12)


def test_cancelling_weights_give_zero_gradient(actor, batch):
    s, x1, draws = batch
    item = Transition(s[0], x1[0], np.zeros(2), 0.0, s[0], False, 0.0, draws[0], 1, 0)
    twin = Transition(s[0], x1[0], np.zeros(2), 0.0, s[0], False, 0.0, draws[0], 1, 1)
    grad = actor_grad_from_ratio(actor, [item, twin], np.array([1.0, -1.0]))
    assert np.allclose(grad, 0.0, atol=1e-12)
    assert np.array_equal(actor_grad_from_ratio(actor, [item], np.zeros(1)), np.zeros_like(actor.params))

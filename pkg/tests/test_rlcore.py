import numpy as np
import pytest

from durable_recourse.errors import ConfigurationError, ShapeError
from durable_recourse.rlcore import (Adam, GaussianPolicy, Mlp, ReplayBuffer, SacConfig,
                                     SacLearner, select_action)


def _zero(net):
    for p in net.params:
        p[...] = 0.0


def test_mlp_hand_values():
    net = Mlp([3, 4, 2], rng=0)
    _zero(net)
    assert np.array_equal(net(np.ones(3)), np.zeros((1, 2)))
    net = Mlp([1, 1, 1], rng=0)
    for p in net.params:
        p[...] = 1.0
    _, cache = net.forward(np.zeros(1))
    assert cache[1][0, 0] == pytest.approx(0.7615941560, abs=1e-10)
    assert net.n_params == 4
    assert Mlp([5, 7, 3]).n_params == 6 * 7 + 8 * 3


def test_mlp_deterministic_and_shape_checked():
    net = Mlp([4, 8, 2], rng=1)
    x = np.random.default_rng(0).random((5, 4))
    assert np.array_equal(net(x), net(x))
    with pytest.raises(ShapeError):
        net(np.zeros((2, 3)))


def _fd_check(f, params, grads, eps=1e-5):
    for p, g in zip(params, grads):
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p[i]
            p[i] = old + eps
            up = f()
            p[i] = old - eps
            down = f()
            p[i] = old
            num = (up - down) / (2 * eps)
            assert abs(num - g[i]) <= 1e-4 * max(1.0, abs(num)), (i, num, g[i])


def test_mlp_backward_matches_finite_differences():
    rng = np.random.default_rng(3)
    net = Mlp([3, 5, 4, 2], rng=4)
    x = rng.normal(size=(6, 3))
    up = rng.normal(size=(6, 2))
    _, cache = net.forward(x)
    grads, gin = net.backward(cache, up)
    _fd_check(lambda: float(np.sum(net(x) * up)), net.params, grads)
    # input gradient
    _fd_check(lambda: float(np.sum(net(x) * up)), [x], [gin])


def test_mlp_backward_linear_in_upstream():
    rng = np.random.default_rng(5)
    net = Mlp([3, 4, 2], rng=6)
    x = rng.normal(size=(4, 3))
    _, cache = net.forward(x)
    a, b = rng.normal(size=(4, 2)), rng.normal(size=(4, 2))
    ga, _ = net.backward(cache, a)
    gb, _ = net.backward(cache, b)
    gab, _ = net.backward(cache, a + b)
    for u, v, w in zip(ga, gb, gab):
        np.testing.assert_allclose(u + v, w, atol=1e-12)
    gz, _ = net.backward(cache, np.zeros((4, 2)))
    assert all(not g.any() for g in gz)


def test_policy_backward_matches_finite_differences():
    rng = np.random.default_rng(7)
    pol = GaussianPolicy(3, 2, hidden=(6,), low=[-1, 0], high=[1, 2], rng=8)
    obs = rng.normal(size=(5, 3))
    noise = rng.normal(size=(5, 2))
    gy, gl = rng.normal(size=(5, 2)), rng.normal(size=5)

    def f():
        s = pol.rsample(obs, noise)
        return float(np.sum(gy * s["y"]) + np.sum(gl * s["logp"]))

    grads = pol.backward(pol.rsample(obs, noise), gy, gl)
    _fd_check(f, pol.net.params, grads)


def test_log_prob_matches_quadrature():
    pol = GaussianPolicy(2, 1, hidden=(4,), low=-0.5, high=1.5, rng=2)
    obs = np.array([[0.3, -0.2]])
    a = np.linspace(-0.5, 1.5, 400_001)[1:-1]
    dens = np.exp(pol.log_prob(np.repeat(obs, a.size, axis=0), a[:, None]))
    mass = np.trapezoid(dens, a)
    assert mass == pytest.approx(1.0, abs=1e-3)
    # the sampling density of the normalized action agrees after the affine change
    rng = np.random.default_rng(0)
    act, logp_unit = pol.sample(obs, rng)
    assert logp_unit[0] - np.log(pol.scale[0]) == pytest.approx(pol.log_prob(obs, act)[0],
                                                               abs=1e-8)


def test_select_action_modes():
    pol = GaussianPolicy(3, 2, low=[-1, 0], high=[1, 0.5], rng=0)
    obs = np.ones(3)
    assert np.array_equal(select_action(pol, obs), select_action(pol, obs))
    rng = np.random.default_rng(1)
    acts, _ = select_action(pol, np.ones((100_000, 3)), "stochastic", rng)
    assert np.all(acts >= pol.low) and np.all(acts <= pol.high)
    with pytest.raises(ShapeError):
        select_action(pol, np.ones(4))


def test_buffer_keeps_most_recent():
    buf = ReplayBuffer(5, 1, 1, seed=0)
    for i in range(12):
        buf.add([i], [0], float(i), [i], False)
    assert len(buf) == 5
    assert sorted(buf.rewards.tolist()) == [7.0, 8.0, 9.0, 10.0, 11.0]
    assert buf.newest(3)["rewards"].tolist() == [9.0, 10.0, 11.0]
    batch = buf.sample(5)
    assert sorted(batch["rewards"].tolist()) == [7.0, 8.0, 9.0, 10.0, 11.0]


def test_adam_minimizes_quadratic():
    x = np.array([3.0, -2.0])
    opt = Adam([x], lr=0.05)
    for _ in range(2000):
        opt.step([2 * x])
    np.testing.assert_allclose(x, 0.0, atol=1e-2)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        SacConfig(gamma=1.5)
    with pytest.raises(ConfigurationError):
        SacConfig(temperature=-1.0)


def test_degenerate_targets_equal_reward():
    lr = SacLearner(2, 1, config=SacConfig(gamma=0.0, temperature=0.0, rng_seed=0))
    rng = np.random.default_rng(0)
    batch = {"obs": rng.random((8, 2)), "actions": rng.uniform(-1, 1, (8, 1)),
             "rewards": rng.normal(size=8), "next_obs": rng.random((8, 2)), "dones": np.zeros(8)}
    assert np.array_equal(lr.critic_targets(batch), batch["rewards"])


def _bandit(seed, updates=5000):
    cfg = SacConfig(gamma=0.0, warmup_steps=200, batch_size=64, actor_lr=1e-3, critic_lr=1e-3,
                    temperature=0.01, hidden=(32, 32), rng_seed=seed)
    lr = SacLearner(1, 1, config=cfg)
    obs = np.ones(1)
    while lr.updates < updates:
        a = lr.act(obs)
        lr.observe(obs, a, -float((a[0] - 0.3) ** 2), obs, True)
    return lr


def test_bandit_converges_to_optimum():
    lr = _bandit(0)
    assert lr.act(np.ones(1), deterministic=True)[0] == pytest.approx(0.3, abs=0.05)


def test_training_reproducible():
    a, b = _bandit(3, 300), _bandit(3, 300)
    for n in a.networks():
        assert np.array_equal(a.networks()[n].flat(), b.networks()[n].flat())

import json

import numpy as np
import pytest

import drlkit


def small_config(budget=1500):
    return {
        "agent": {"type": "ppo", "networks": {"policy": {"layers": [8]}, "value": {"layers": [8]}}},
        "trainer": {"type": "on_policy"},
        "environment": {"type": "cartpole"},
        "run": {"n_transitions": budget, "walltime": False},
    }


def test_finalize_applies_defaults():
    cfg = drlkit.finalize_config(small_config())
    assert cfg["agent"]["gamma"] == 0.99
    assert cfg["trainer"]["update_size"] == 4
    assert drlkit.config_hash(small_config()) == drlkit.config_hash(json.dumps(small_config()))


def test_schema_errors_raise():
    bad = small_config()
    bad["agent"]["type"] = "dqn"
    with pytest.raises(drlkit.SchemaError):
        drlkit.finalize_config(bad)


def test_train_is_deterministic_and_counts(tmp_path):
    a = drlkit.train(small_config(), seed=3, score_path=tmp_path / "a.dat")
    b = drlkit.train(small_config(), seed=3)
    assert a["transitions"] == 1500
    assert a["records"].shape[1] == 4
    np.testing.assert_array_equal(a["records"], b["records"])
    np.testing.assert_array_equal(drlkit.read_scores(tmp_path / "a.dat")[:, :3], a["records"][:, :3])
    curve = drlkit.average_files([tmp_path / "a.dat"], grid_points=50, window=1)
    assert curve.shape == (50, 8)
    np.testing.assert_allclose(curve[:, 6], curve[:, 5])


def test_gae_matches_direct_sum():
    rng = np.random.default_rng(0)
    r, v = rng.normal(size=6), rng.normal(size=7)
    g, lam = 0.9, 0.8
    delta = r + g * v[1:] - v[:-1]
    expected = [sum((g * lam) ** (k - t) * delta[k] for k in range(t, 6)) for t in range(6)]
    np.testing.assert_allclose(drlkit.gae(r.tolist(), v.tolist(), g, lam, False), expected, atol=1e-12)


def test_pca_on_rank_one_data():
    rng = np.random.default_rng(1)
    data = np.outer(rng.normal(size=200), [1.0, -2.0, 0.5]) + [3.0, 0.0, -1.0]
    model = drlkit.pca_fit(data, 1)
    assert model.k == 1
    assert model.explained_variance(1) == pytest.approx(1.0)
    assert drlkit.select_latent_dim(model, 0.99) == 1
    z = model.transform(data)
    assert z.shape == (200, 1)


def test_env_steps():
    env = drlkit.Env("pendulum", seed=2)
    obs = env.reset()
    assert obs.shape == (env.obs_dim,)
    assert not env.discrete
    obs, reward, terminal, truncated = env.step(np.zeros(1))
    assert reward <= 0.0
    chain = drlkit.Env("chain", {"extra": {"n_act": 4}})
    assert chain.obs_dim == 12
    lifted = drlkit.Env("pendulum", {"lift": {"dim": 16, "noise_dim": 4}})
    assert lifted.reset().shape == (20,)


def test_shipped_configs_validate():
    import pathlib

    configs = sorted((pathlib.Path(__file__).parents[2] / "configs").glob("*.json"))
    assert configs
    for path in configs:
        cfg = drlkit.finalize_config(json.loads(path.read_text()))
        assert cfg["run"]["n_runs"] == 3

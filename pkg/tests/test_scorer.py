import numpy as np
import pytest

from durable_recourse.errors import ConfigurationError, ShapeError
from durable_recourse.scorer import (DatasetSpec, FeatureMarginals, LabeledDataset, ScoreModel,
                                     generate_dataset, read_dataset_csv, score, sigmoid,
                                     train_score_model)


def test_dataset_shape_and_normalization(dataset):
    assert dataset.features.shape == (10_000, 10)
    assert set(np.unique(dataset.labels)) <= {0, 1}
    np.testing.assert_allclose(dataset.features.min(axis=0), 0.0, atol=1e-15)
    np.testing.assert_allclose(dataset.features.max(axis=0), 1.0, atol=1e-15)


def test_dataset_deterministic():
    a = generate_dataset(DatasetSpec(num_examples=200, rng_seed=42))
    b = generate_dataset(DatasetSpec(num_examples=200, rng_seed=42))
    assert np.array_equal(a.features, b.features) and np.array_equal(a.labels, b.labels)


def test_noiseless_equal_weights_label_rule():
    d = generate_dataset(DatasetSpec(num_examples=500, label_noise_sigma=0.0,
                                     weight_range=(1.0, 1.0), rng_seed=3))
    np.testing.assert_array_equal(d.labels, (d.features.mean(axis=1) > 0.5).astype(int))


@pytest.mark.parametrize("kw", [dict(num_examples=0), dict(num_features=0),
                                dict(label_noise_sigma=-1.0), dict(weight_range=(0.0, 1.0))])
def test_invalid_spec(kw):
    with pytest.raises(ConfigurationError):
        generate_dataset(DatasetSpec(**kw))


def test_score_hand_values():
    m = ScoreModel(np.zeros(3), 0.0)
    assert m.score(np.array([0.3, 0.9, 0.1])) == 0.5
    m = ScoreModel(np.array([1.0, 0.0, 0.0]), 0.0)
    assert score(m, np.array([1.0, 0.0, 0.0])) == pytest.approx(0.7310585786, abs=1e-10)
    with pytest.raises(ShapeError):
        m.score(np.zeros(4))


def test_sigmoid_stable_at_extremes():
    assert sigmoid(np.array([-800.0, 800.0])).tolist() == [0.0, 1.0]


def test_separable_toy_reaches_full_accuracy():
    x = np.array([[0.1, 0.1], [0.2, 0.0], [0.9, 0.8], [0.8, 1.0]])
    y = np.array([0, 0, 1, 1])
    marg = FeatureMarginals(np.zeros(2), np.ones(2), np.zeros(2), np.ones(2))
    m = train_score_model(LabeledDataset(x, y, np.ones(2), marg), epochs=500)
    assert ((m.score(x) > 0.5).astype(int) == y).all()


def test_zero_epochs_is_flat(dataset):
    m = train_score_model(dataset, epochs=0)
    np.testing.assert_allclose(m.score(dataset.features[:20]), 0.5)


def test_accuracy_matches_bayes_oracle(dataset, model):
    # Bayes accuracy of the generating rule, estimated by relabeling the same
    # features with fresh label noise.
    rng = np.random.default_rng(99)
    clean = dataset.features @ dataset.generating_weights
    bayes = []
    for _ in range(20):
        noisy = clean + rng.normal(0.0, 0.05, clean.size)
        bayes.append(np.mean((clean > 0.5) == (noisy > 0.5)))
    acc = model.training_meta["accuracy"]
    assert acc >= np.mean(bayes) - 0.01


def test_loss_non_increasing(model):
    losses = np.asarray(model.loss_history)
    blocks = losses[: len(losses) // 10 * 10].reshape(-1, 10).mean(axis=1)
    assert np.all(np.diff(blocks) <= 1e-12)


def test_logit_affine(model, rng):
    x = rng.random((20, 10))
    y = rng.random((20, 10))
    lam = rng.random((20, 1))
    lhs = model.logit(lam * x + (1 - lam) * y)
    rhs = lam[:, 0] * model.logit(x) + (1 - lam[:, 0]) * model.logit(y)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_model_roundtrip(model, tmp_path):
    p = tmp_path / "m.rarn"
    model.save(p)
    back = ScoreModel.load(p)
    assert np.array_equal(back.weights, model.weights) and back.bias == model.bias
    assert np.array_equal(back.marginals.means, model.marginals.means)


def test_csv_roundtrip(tmp_path):
    d = generate_dataset(DatasetSpec(num_examples=50, rng_seed=5))
    p = tmp_path / "d.csv"
    d.to_csv(p)
    x, y = read_dataset_csv(p)
    assert np.array_equal(x, d.features) and np.array_equal(y, d.labels)
    assert p.read_text().splitlines()[0] == ",".join([f"f{i}" for i in range(10)] + ["label"])

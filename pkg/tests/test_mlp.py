import io
import math

import numpy as np
import pytest

from poseguard.errors import ConfigError, DataError, ModelFormatError, TrainingError
from poseguard.mlp import (
    MlpConfig,
    MlpModel,
    dumps_mlp,
    fit_mlp_arrays,
    gradient_check,
    load_mlp,
    loss,
)


def small_config(**overrides) -> MlpConfig:
    base = dict(input_dim=4, hidden_dims=(3, 3), dropout_rate=0.0, epochs=3, batch_size=8, seed=0)
    base.update(overrides)
    return MlpConfig(**base)


def separable_set(n=200, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, 2))
    y = (X[:, 0] + X[:, 1] > 0).astype(int)
    X[y == 1] += 0.4
    X[y == 0] -= 0.4
    return X, y


class TestForward:
    def test_zeroed_output_layer_gives_uniform_probabilities(self):
        model = MlpModel(small_config())
        model.params["W3"][:] = 0.0
        model.params["b3"][:] = 0.0
        probs = model.forward(np.random.default_rng(1).normal(size=(6, 4)))
        assert probs == pytest.approx(np.full((6, 2), 0.5))

    def test_infer_mode_deterministic(self):
        model = MlpModel(small_config(dropout_rate=0.5))
        X = np.random.default_rng(2).normal(size=(5, 4))
        assert np.array_equal(model.forward(X), model.forward(X))

    def test_rows_sum_to_one(self):
        model = MlpModel(small_config())
        X = np.random.default_rng(3).normal(size=(20, 4))
        probs = model.forward(X)
        assert np.abs(probs.sum(axis=1) - 1.0).max() < 1e-9

    def test_train_mode_batch_of_one_rejected(self):
        model = MlpModel(small_config())
        with pytest.raises(DataError):
            model.forward(np.zeros((1, 4)), mode="train", dropout_rng=np.random.default_rng(0))

    def test_dimension_mismatch_rejected(self):
        model = MlpModel(small_config())
        with pytest.raises(DataError):
            model.forward(np.zeros((3, 7)))


class TestLoss:
    def test_perfect_predictions(self):
        assert loss(np.array([[0.0, 1.0], [1.0, 0.0]]), [1, 0]) == 0.0

    def test_uniform_predictions(self):
        assert loss(np.array([[0.5, 0.5]]), [0]) == pytest.approx(math.log(2.0))

    def test_point_one_prediction(self):
        assert loss(np.array([[0.9, 0.1]]), [1]) == pytest.approx(-math.log(0.1))

    def test_zero_probability_clamped(self):
        value = loss(np.array([[1.0, 0.0]]), [1])
        assert math.isfinite(value)
        assert value == pytest.approx(-math.log(1e-12))

    def test_length_mismatch_rejected(self):
        with pytest.raises(DataError):
            loss(np.array([[0.5, 0.5]]), [0, 1])


class TestGradientCheck:
    def test_fresh_small_model_below_1e4(self):
        rng = np.random.default_rng(5)
        model = MlpModel(small_config(seed=5))
        X = rng.normal(size=(6, 4))
        y = rng.integers(0, 2, size=6)
        assert gradient_check(model, X, y) < 1e-4

    def test_with_dropout_mask_frozen(self):
        rng = np.random.default_rng(6)
        model = MlpModel(small_config(dropout_rate=0.5, seed=6))
        X = rng.normal(size=(6, 4))
        y = rng.integers(0, 2, size=6)
        assert gradient_check(model, X, y, mask_seed=123) < 1e-4

    def test_zero_input_batch_stays_finite(self):
        model = MlpModel(small_config(seed=7))
        error = gradient_check(model, np.zeros((4, 4)), np.array([0, 1, 0, 1]))
        assert math.isfinite(error)

    def test_repeatable(self):
        rng = np.random.default_rng(8)
        model = MlpModel(small_config(seed=8))
        X = rng.normal(size=(5, 4))
        y = rng.integers(0, 2, size=5)
        assert gradient_check(model, X, y) == gradient_check(model, X, y)


class TestTraining:
    def test_separable_set_reaches_95_percent(self):
        X, y = separable_set()
        config = MlpConfig(input_dim=2, hidden_dims=(16, 8), dropout_rate=0.2, epochs=20, batch_size=20, seed=1)
        model, history = fit_mlp_arrays(X, y, X, y, config)
        assert history.train_accuracy[-1] >= 0.95

    def test_same_seed_bit_identical_history(self):
        X, y = separable_set(n=80, seed=2)
        config = MlpConfig(input_dim=2, hidden_dims=(8, 4), epochs=4, batch_size=16, seed=3)
        _, first = fit_mlp_arrays(X, y, X, y, config)
        _, second = fit_mlp_arrays(X, y, X, y, config)
        assert first.train_loss == second.train_loss
        assert first.train_accuracy == second.train_accuracy
        assert first.val_accuracy == second.val_accuracy

    def test_history_length_matches_epochs(self):
        X, y = separable_set(n=40, seed=4)
        config = MlpConfig(input_dim=2, hidden_dims=(4, 3), epochs=1, batch_size=10, seed=0)
        _, history = fit_mlp_arrays(X, y, np.zeros((0, 2)), np.zeros(0), config)
        assert len(history.train_loss) == 1
        assert len(history.train_accuracy) == 1

    def test_empty_training_set_rejected(self):
        with pytest.raises(TrainingError):
            fit_mlp_arrays(np.zeros((0, 2)), np.zeros(0, dtype=int), np.zeros((0, 2)), np.zeros(0), small_config())

    def test_single_class_rejected(self):
        X = np.random.default_rng(9).normal(size=(10, 2))
        with pytest.raises(TrainingError):
            fit_mlp_arrays(X, np.ones(10, dtype=int), X, np.ones(10, dtype=int), small_config())

    def test_loss_decreases_on_separable_set_for_most_seeds(self):
        X, y = separable_set(n=200, seed=10)
        improved = 0
        for seed in range(20):
            config = MlpConfig(input_dim=2, hidden_dims=(16, 8), dropout_rate=0.2, epochs=5, batch_size=20, seed=seed)
            _, history = fit_mlp_arrays(X, y, np.zeros((0, 2)), np.zeros(0), config)
            if history.train_loss[4] < history.train_loss[0]:
                improved += 1
        assert improved >= 19  # at least 95% of sampled seeds

    def test_model_returned_in_inference_mode(self):
        X, y = separable_set(n=40, seed=11)
        config = MlpConfig(input_dim=2, hidden_dims=(4, 3), epochs=1, batch_size=10, seed=0)
        model, _ = fit_mlp_arrays(X, y, X, y, config)
        assert model.training is False
        assert np.all(np.isfinite(model.running_mean))
        assert np.all(np.isfinite(model.running_var))


class TestBatchNormBehaviour:
    def test_inference_independent_of_batch_composition(self):
        X, y = separable_set(n=60, seed=12)
        config = MlpConfig(input_dim=2, hidden_dims=(8, 4), epochs=3, batch_size=12, seed=2)
        model, _ = fit_mlp_arrays(X, y, X, y, config)
        queries = np.random.default_rng(13).normal(size=(10, 2))
        batched = model.forward(queries)
        singles = np.vstack([model.forward(q[None, :]) for q in queries])
        assert np.abs(batched - singles).max() < 1e-9


class TestDropout:
    def test_inverted_dropout_unbiased_over_10000_masks(self):
        config = small_config(dropout_rate=0.5, seed=14)
        model = MlpModel(config)
        X = np.random.default_rng(15).normal(size=(8, 4)).repeat(1, axis=0)

        # infer-mode activation after the second dense layer
        p = model.params
        from poseguard.mlp import _sigmoid  # noqa: PLC2701 - white-box check

        a1 = _sigmoid(X @ p["W1"] + p["b1"])
        xhat = (a1 - model.running_mean) / np.sqrt(model.running_var + 1e-5)
        bn = p["bn_gamma"] * xhat + p["bn_beta"]
        a2 = _sigmoid(bn @ p["W2"] + p["b2"])

        rng = np.random.default_rng(16)
        total = np.zeros_like(a2)
        n_masks = 10_000
        for _ in range(n_masks):
            mask = (rng.random(a2.shape) >= 0.5) / 0.5
            total += a2 * mask
        mean_dropped = total / n_masks
        assert np.abs(mean_dropped - a2).max() / np.abs(a2).max() < 0.02


class TestPersistence:
    def test_round_trip_preserves_predictions(self):
        X, y = separable_set(n=60, seed=17)
        config = MlpConfig(input_dim=2, hidden_dims=(6, 4), epochs=2, batch_size=12, seed=4)
        model, _ = fit_mlp_arrays(X, y, X, y, config)
        restored = load_mlp(io.StringIO(dumps_mlp(model)))
        queries = np.random.default_rng(18).normal(size=(7, 2))
        assert np.array_equal(model.predict(queries), restored.predict(queries))
        assert dumps_mlp(restored) == dumps_mlp(model)

    def test_unknown_version_rejected(self):
        with pytest.raises(ModelFormatError):
            load_mlp(io.StringIO("poseguard-mlp 99\n"))

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            MlpConfig(hidden_dims=(4,))
        with pytest.raises(ConfigError):
            MlpConfig(dropout_rate=1.0)

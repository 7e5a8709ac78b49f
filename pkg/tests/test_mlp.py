from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geneselect_hub.core.dataset import (
    ExpressionDataset,
    FeatureMask,
    Label,
    apply_mask,
    scale_features,
)
from geneselect_hub.core.exceptions import (
    ConfigError,
    DimensionError,
    EmptyInputError,
    StateError,
)
from geneselect_hub.core.mlp import (
    MlpLayout,
    MlpModel,
    TrainConfig,
    backprop,
    decide,
    forward,
    init_model,
    mean_squared_error,
    model_from_dict,
    model_to_dict,
    one_hot,
    predict,
    predict_batch,
    sample_loss,
    TrainJob,
    sgd_step,
    train,
    train_many,
    widen_inputs,
)


def _zero_model(n_inputs: int, n_hidden: int) -> MlpModel:
    return MlpModel(
        layout=MlpLayout(n_inputs, n_hidden),
        hidden_weights=np.zeros((n_hidden, n_inputs)),
        hidden_biases=np.zeros(n_hidden),
        output_weights=np.zeros((2, n_hidden)),
        output_biases=np.zeros(2),
    )


def _random_model(rng: np.random.Generator, n_inputs: int, n_hidden: int) -> MlpModel:
    return MlpModel(
        layout=MlpLayout(n_inputs, n_hidden),
        hidden_weights=rng.normal(size=(n_hidden, n_inputs)),
        hidden_biases=rng.normal(size=n_hidden),
        output_weights=rng.normal(size=(2, n_hidden)),
        output_biases=rng.normal(size=2),
    )


def _toy_set() -> ExpressionDataset:
    """Восемь точек, классы разделяет знак первой координаты."""
    values = np.array(
        [[x1, x2] for x1 in (-1.0, -0.5, 0.5, 1.0) for x2 in (-1.0, 1.0)]
    )
    labels = tuple(Label.TUMOR if x1 < 0 else Label.NORMAL for x1, _ in values)
    return ExpressionDataset(values=values, labels=labels, scaled=True)


# --- init / forward ---

def test_init_is_deterministic_and_bounded():
    layout = MlpLayout(4, 5)
    a, b = init_model(layout, seed=3), init_model(layout, seed=3)
    for name, arr in a.parameters().items():
        assert np.array_equal(arr, b.parameters()[name])
    assert np.all(np.abs(a.hidden_weights) <= 0.5)
    assert np.all(np.abs(a.output_weights) <= 1.0 / math.sqrt(5))
    assert np.all(a.hidden_biases == 0.0) and np.all(a.output_biases == 0.0)
    assert not np.array_equal(a.hidden_weights, init_model(layout, seed=4).hidden_weights)


def test_layout_validation():
    with pytest.raises(ConfigError):
        MlpLayout(0, 3)
    with pytest.raises(ConfigError):
        MlpLayout(3, 0)
    with pytest.raises(ConfigError):
        MlpLayout(3, 3, n_outputs=3)


def test_zero_weights_give_half_outputs():
    _, outputs = forward(_zero_model(3, 2), [0.3, -0.7, 1.0])
    assert outputs.tolist() == [0.5, 0.5]


def test_zero_output_weights_ignore_hidden_layer():
    model = _zero_model(1, 1)
    model.hidden_biases[:] = 50.0
    _, outputs = forward(model, [0.4])
    assert outputs.tolist() == [0.5, 0.5]


def test_forward_matches_hand_computation():
    model = _random_model(np.random.default_rng(0), 3, 4)
    x = [0.2, -0.5, 0.9]

    def sig(z: float) -> float:
        return 1.0 / (1.0 + math.exp(-z))

    hidden = [
        sig(sum(model.hidden_weights[j, i] * x[i] for i in range(3)) + model.hidden_biases[j])
        for j in range(4)
    ]
    expected = [
        sig(sum(model.output_weights[k, j] * hidden[j] for j in range(4)) + model.output_biases[k])
        for k in range(2)
    ]
    h, o = forward(model, x)
    assert np.allclose(h, hidden, rtol=0, atol=1e-12)
    assert np.allclose(o, expected, rtol=0, atol=1e-12)


def test_forward_outputs_stay_open_interval_on_extreme_input():
    model = _random_model(np.random.default_rng(1), 2, 3)
    _, outputs = forward(model, [1e6, -1e6])
    assert np.all(outputs > 0.0) and np.all(outputs < 1.0)


def test_forward_input_errors():
    model = _zero_model(3, 2)
    with pytest.raises(DimensionError):
        forward(model, [1.0, 2.0])
    with pytest.raises(StateError):
        forward(model, [1.0, float("nan"), 0.0])


# --- backprop ---

def test_backprop_matches_finite_differences():
    rng = np.random.default_rng(42)
    h = 1e-5
    for _ in range(20):
        n_in, n_hid = int(rng.integers(1, 7)), int(rng.integers(1, 9))
        model = _random_model(rng, n_in, n_hid)
        x = rng.uniform(-1.0, 1.0, size=n_in)
        target = one_hot([Label.TUMOR if rng.random() < 0.5 else Label.NORMAL])[0]
        grads = backprop(model, x, target)

        for name, param in model.parameters().items():
            analytic = getattr(grads, name)
            for idx in np.ndindex(param.shape):
                saved = param[idx]
                param[idx] = saved + h
                up = sample_loss(model, x, target)
                param[idx] = saved - h
                down = sample_loss(model, x, target)
                param[idx] = saved
                numeric = (up - down) / (2 * h)
                a = analytic[idx]
                assert abs(a - numeric) <= max(1e-7, 1e-4 * max(abs(a), abs(numeric)))


def test_small_sgd_step_does_not_increase_loss():
    rng = np.random.default_rng(7)
    for _ in range(100):
        model = _random_model(rng, 3, 4)
        x = rng.uniform(-1.0, 1.0, size=3)
        target = one_hot([Label.NORMAL])[0]
        before = sample_loss(model, x, target)
        sgd_step(model, x, target, learning_rate=1e-4)
        assert sample_loss(model, x, target) <= before + 1e-12


# --- train ---

@pytest.mark.parametrize("seed", range(5))
def test_train_separates_toy_set(seed: int):
    data = _toy_set()
    model = init_model(MlpLayout(2, 3), seed=seed)
    trained, history = train(model, data, TrainConfig(learning_rate=0.5, max_epochs=60, seed=seed))
    assert predict_batch(trained, data.values) == list(data.labels)
    assert history[-1] < history[0]


def test_train_leaves_input_model_untouched():
    model = init_model(MlpLayout(2, 3), seed=0)
    before = model.hidden_weights.copy()
    train(model, _toy_set(), TrainConfig(max_epochs=5))
    assert np.array_equal(model.hidden_weights, before)


def test_train_history_length():
    model = init_model(MlpLayout(2, 3), seed=0)
    _, unreachable = train(model, _toy_set(), TrainConfig(max_epochs=60, error_goal=1e-12))
    assert len(unreachable) == 60
    _, loose = train(model, _toy_set(), TrainConfig(max_epochs=60, error_goal=10.0))
    assert len(loose) == 1


def test_train_is_bit_reproducible():
    model = init_model(MlpLayout(2, 4), seed=9)
    cfg = TrainConfig(learning_rate=0.3, max_epochs=20, seed=5)
    a, ha = train(model, _toy_set(), cfg)
    b, hb = train(model, _toy_set(), cfg)
    assert ha == hb
    for name, arr in a.parameters().items():
        assert np.array_equal(arr, b.parameters()[name])


def _random_scaled(rng: np.random.Generator, n_samples: int, n_genes: int) -> ExpressionDataset:
    labels = tuple(Label.TUMOR if i % 2 else Label.NORMAL for i in range(n_samples))
    values = rng.uniform(-1.0, 1.0, size=(n_samples, n_genes))
    return ExpressionDataset(values=values, labels=labels, scaled=True)


def test_train_many_equals_separate_training():
    rng = np.random.default_rng(11)
    cfg = TrainConfig(learning_rate=0.4, max_epochs=25, error_goal=0.05, seed=0)
    jobs = [
        TrainJob(init_model(MlpLayout(3, 4), seed=1), _random_scaled(rng, 9, 3), seed=5),
        TrainJob(init_model(MlpLayout(3, 4), seed=2), _random_scaled(rng, 5, 3), seed=6),
        TrainJob(init_model(MlpLayout(2, 3), seed=3), _toy_set(), seed=7),
        TrainJob(init_model(MlpLayout(3, 4), seed=4), _random_scaled(rng, 12, 3), seed=8),
    ]
    together = train_many(jobs, cfg)
    assert len(together) == len(jobs)
    for job, (model, history) in zip(jobs, together):
        alone, alone_history = train(job.model, job.data, TrainConfig(
            learning_rate=0.4, max_epochs=25, error_goal=0.05, seed=job.seed
        ))
        assert history == alone_history
        for name, arr in model.parameters().items():
            assert np.array_equal(arr, alone.parameters()[name])


def test_train_many_stops_each_network_on_its_own():
    # у второй сети MSE не опускается ниже 0.25, первая уже насыщена
    cfg = TrainConfig(max_epochs=15, error_goal=0.2)
    saturated = _zero_model(1, 2)
    saturated.output_biases[:] = [10.0, -10.0]
    easy = ExpressionDataset(values=np.array([[0.0]]), labels=(Label.TUMOR,), scaled=True)
    hard = ExpressionDataset(
        values=np.array([[0.0], [0.0]]), labels=(Label.TUMOR, Label.NORMAL), scaled=True
    )
    (_, h_easy), (_, h_hard) = train_many(
        [TrainJob(saturated, easy, 0), TrainJob(_zero_model(1, 2), hard, 0)], cfg
    )
    assert len(h_easy) == 1
    assert len(h_hard) == 15


def test_epoch_mse_averages_losses_seen_during_the_pass():
    # один образец, нулевая сеть: до первого шага потеря 0.5 * (0.25 + 0.25)
    data = ExpressionDataset(values=np.array([[0.3]]), labels=(Label.TUMOR,), scaled=True)
    _, history = train(_zero_model(1, 1), data, TrainConfig(max_epochs=1))
    assert history == [pytest.approx(0.25)]


def test_widen_inputs_keeps_outputs():
    rng = np.random.default_rng(6)
    model = _random_model(rng, 3, 4)
    wide = widen_inputs(model, 8)
    assert wide.layout == MlpLayout(8, 4)
    x = rng.uniform(-1.0, 1.0, size=3)
    padded = np.concatenate([x, rng.uniform(-1.0, 1.0, size=5)])
    assert np.array_equal(forward(model, x)[1], forward(wide, padded)[1])
    assert widen_inputs(model, 3).layout == model.layout
    with pytest.raises(DimensionError):
        widen_inputs(model, 2)


def test_train_input_errors():
    model = init_model(MlpLayout(2, 3), seed=0)
    raw = ExpressionDataset(values=np.array([[5.0, 1.0]]), labels=(Label.TUMOR,))
    with pytest.raises(StateError):
        train(model, raw, TrainConfig())
    empty = ExpressionDataset(values=np.empty((0, 2)), labels=(), scaled=True)
    with pytest.raises(EmptyInputError):
        train(model, empty, TrainConfig())
    scaled, _ = scale_features(ExpressionDataset(values=np.eye(3), labels=(Label.TUMOR,) * 3))
    with pytest.raises(DimensionError):
        train(model, scaled, TrainConfig())


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ConfigError):
        TrainConfig(max_epochs=0)


# --- решение и MSE ---

def test_decide_prefers_tumor_on_tie():
    assert decide([0.7, 0.3]) is Label.TUMOR
    assert decide([0.2, 0.9]) is Label.NORMAL
    assert decide([0.5, 0.5]) is Label.TUMOR
    assert predict(_zero_model(2, 2), [0.1, 0.1]) is Label.TUMOR


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_decide_is_invariant_under_monotone_transform(a, b):
    assert decide([a, b]) is decide([math.exp(3 * a), math.exp(3 * b)])


def test_mse_of_half_outputs():
    data = ExpressionDataset(values=np.array([[0.0, 0.0]]), labels=(Label.TUMOR,), scaled=True)
    assert mean_squared_error(_zero_model(2, 2), data) == pytest.approx(0.25)


def test_mse_near_zero_for_saturated_correct_outputs():
    model = _zero_model(1, 1)
    model.output_biases[:] = [1000.0, -1000.0]
    data = ExpressionDataset(values=np.array([[0.0]]), labels=(Label.TUMOR,), scaled=True)
    assert mean_squared_error(model, data) < 1e-25


def test_mse_matches_forward_recomputation():
    rng = np.random.default_rng(3)
    model = _random_model(rng, 3, 4)
    values = rng.uniform(-1.0, 1.0, size=(7, 3))
    labels = tuple(Label.TUMOR if i % 2 else Label.NORMAL for i in range(7))
    data = ExpressionDataset(values=values, labels=labels, scaled=True)
    targets = one_hot(labels)
    expected = sum(
        0.5 * sum((t - o) ** 2 for t, o in zip(targets[i], forward(model, values[i])[1]))
        for i in range(7)
    ) / 7
    assert mean_squared_error(model, data) == pytest.approx(expected, abs=1e-12)


def test_training_on_mask_equals_training_on_submatrix():
    rng = np.random.default_rng(4)
    labels = tuple(Label.TUMOR if i < 5 else Label.NORMAL for i in range(10))
    full = ExpressionDataset(values=rng.uniform(-1, 1, size=(10, 6)), labels=labels, scaled=True)
    by_hand = ExpressionDataset(values=full.values[:, [1, 4]], labels=labels, scaled=True)
    masked = apply_mask(full, FeatureMask.from_indices([1, 4], 6))
    cfg = TrainConfig(max_epochs=10, seed=2)
    model = init_model(MlpLayout(2, 3), seed=1)
    a, _ = train(model, masked, cfg)
    b, _ = train(model, by_hand, cfg)
    assert np.array_equal(a.output_weights, b.output_weights)


def test_model_json_roundtrip():
    model = init_model(MlpLayout(3, 2), seed=1)
    restored = model_from_dict(model_to_dict(model))
    assert restored.layout == model.layout
    for name, arr in model.parameters().items():
        assert np.array_equal(arr, restored.parameters()[name])
    with pytest.raises(ConfigError):
        model_from_dict({**model_to_dict(model), "schema": 99})

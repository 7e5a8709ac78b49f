"""Трёхслойный перцептрон (вход, скрытый, выход) с обратным распространением.

Сигмоида на скрытом и выходном слоях, MSE с one-hot целями, поштучный SGD.
Два выхода: первый - Tumor, второй - Normal.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from geneselect_hub.core.dataset import CLASS_ORDER, ExpressionDataset, Label
from geneselect_hub.core.exceptions import (
    ConfigError,
    DimensionError,
    EmptyInputError,
    StateError,
)

MODEL_SCHEMA = 1
N_OUTPUTS = 2
# за пределами |z| > 35 сигмоида в float64 уже упирается в 0/1
_Z_CLIP = 35.0


def sigmoid(z: np.ndarray | float) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -_Z_CLIP, _Z_CLIP)))


@dataclass(frozen=True)
class MlpLayout:
    n_inputs: int
    n_hidden: int
    n_outputs: int = N_OUTPUTS

    def __post_init__(self) -> None:
        if self.n_inputs < 1:
            raise ConfigError(f"нужно >= 1, получили {self.n_inputs}", "n_inputs")
        if self.n_hidden < 1:
            raise ConfigError(f"нужно >= 1, получили {self.n_hidden}", "n_hidden")
        if self.n_outputs != N_OUTPUTS:
            raise ConfigError(f"выходов всегда {N_OUTPUTS}, получили {self.n_outputs}", "n_outputs")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    max_epochs: int = 60
    error_goal: float = 0.01
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ConfigError(f"должен быть > 0, получили {self.learning_rate}", "mlp.learning_rate")
        if self.max_epochs < 1:
            raise ConfigError(f"нужно >= 1, получили {self.max_epochs}", "mlp.max_epochs")
        if not self.error_goal > 0:
            raise ConfigError(f"должна быть > 0, получили {self.error_goal}", "mlp.error_goal")


@dataclass
class MlpModel:
    """Веса и смещения. Меняются только внутри train/sgd_step."""

    layout: MlpLayout
    hidden_weights: np.ndarray  # (n_hidden, n_inputs)
    hidden_biases: np.ndarray  # (n_hidden,)
    output_weights: np.ndarray  # (2, n_hidden)
    output_biases: np.ndarray  # (2,)

    def __post_init__(self) -> None:
        lay = self.layout
        expected = {
            "hidden_weights": (lay.n_hidden, lay.n_inputs),
            "hidden_biases": (lay.n_hidden,),
            "output_weights": (lay.n_outputs, lay.n_hidden),
            "output_biases": (lay.n_outputs,),
        }
        for name, shape in expected.items():
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise DimensionError(int(np.prod(shape)), int(arr.size), name)
            setattr(self, name, arr.copy())

    def parameters(self) -> dict[str, np.ndarray]:
        return {
            "hidden_weights": self.hidden_weights,
            "hidden_biases": self.hidden_biases,
            "output_weights": self.output_weights,
            "output_biases": self.output_biases,
        }

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.parameters().values())


@dataclass(frozen=True)
class MlpGradients:
    hidden_weights: np.ndarray
    hidden_biases: np.ndarray
    output_weights: np.ndarray
    output_biases: np.ndarray


def init_model(layout: MlpLayout, seed: int) -> MlpModel:
    """Веса равномерно из [-1/sqrt(fan_in), 1/sqrt(fan_in)], смещения нули."""
    rng = np.random.default_rng(seed)
    bound_h = 1.0 / np.sqrt(layout.n_inputs)
    bound_o = 1.0 / np.sqrt(layout.n_hidden)
    return MlpModel(
        layout=layout,
        hidden_weights=rng.uniform(-bound_h, bound_h, size=(layout.n_hidden, layout.n_inputs)),
        hidden_biases=np.zeros(layout.n_hidden),
        output_weights=rng.uniform(-bound_o, bound_o, size=(layout.n_outputs, layout.n_hidden)),
        output_biases=np.zeros(layout.n_outputs),
    )


def _check_input(model: MlpModel, x: Sequence[float] | np.ndarray) -> np.ndarray:
    vec = np.asarray(x, dtype=np.float64).reshape(-1)
    if vec.shape[0] != model.layout.n_inputs:
        raise DimensionError(model.layout.n_inputs, vec.shape[0], "вход MLP")
    if not np.all(np.isfinite(vec)):
        raise StateError("во входном векторе есть NaN/inf")
    return vec


def forward(model: MlpModel, x: Sequence[float] | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Прямой проход: (активации скрытого слоя, два выхода в (0, 1))."""
    vec = _check_input(model, x)
    hidden = sigmoid(model.hidden_weights @ vec + model.hidden_biases)
    outputs = sigmoid(model.output_weights @ hidden + model.output_biases)
    return hidden, outputs


def forward_batch(model: MlpModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.layout.n_inputs:
        raise DimensionError(model.layout.n_inputs, X.shape[-1], "вход MLP")
    hidden = sigmoid(X @ model.hidden_weights.T + model.hidden_biases)
    outputs = sigmoid(hidden @ model.output_weights.T + model.output_biases)
    return hidden, outputs


def one_hot(labels: Sequence[Label]) -> np.ndarray:
    """Tumor -> (1, 0), Normal -> (0, 1)."""
    targets = np.zeros((len(labels), N_OUTPUTS))
    for i, lab in enumerate(labels):
        targets[i, CLASS_ORDER.index(Label(lab))] = 1.0
    return targets


def sample_loss(model: MlpModel, x: np.ndarray, target: np.ndarray) -> float:
    """E = 1/2 * sum_k (t_k - o_k)^2."""
    _, outputs = forward(model, x)
    return float(0.5 * np.sum((np.asarray(target) - outputs) ** 2))


def _gradients(
    W: np.ndarray, b: np.ndarray, V: np.ndarray, c: np.ndarray, x: np.ndarray, t: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    h = sigmoid(W @ x + b)
    o = sigmoid(V @ h + c)
    delta_o = (o - t) * o * (1.0 - o)
    delta_h = (V.T @ delta_o) * h * (1.0 - h)
    return np.outer(delta_h, x), delta_h, np.outer(delta_o, h), delta_o


def backprop(model: MlpModel, x: np.ndarray, target: np.ndarray) -> MlpGradients:
    """Аналитические градиенты E по всем параметрам для одного образца."""
    vec = _check_input(model, x)
    t = np.asarray(target, dtype=np.float64).reshape(-1)
    if t.shape[0] != N_OUTPUTS:
        raise DimensionError(N_OUTPUTS, t.shape[0], "цель")
    gW, gb, gV, gc = _gradients(
        model.hidden_weights, model.hidden_biases, model.output_weights, model.output_biases, vec, t
    )
    return MlpGradients(hidden_weights=gW, hidden_biases=gb, output_weights=gV, output_biases=gc)


def sgd_step(model: MlpModel, x: np.ndarray, target: np.ndarray, learning_rate: float) -> None:
    """Один шаг SGD на одном образце, модель меняется на месте."""
    grads = backprop(model, x, target)
    model.hidden_weights -= learning_rate * grads.hidden_weights
    model.hidden_biases -= learning_rate * grads.hidden_biases
    model.output_weights -= learning_rate * grads.output_weights
    model.output_biases -= learning_rate * grads.output_biases


def _check_training_data(model: MlpModel, data: ExpressionDataset) -> None:
    if data.n_samples == 0:
        raise EmptyInputError("Пустой набор для обучения")
    if not data.scaled:
        raise StateError("MLP учится только на отмасштабированных данных")
    if data.n_genes != model.layout.n_inputs:
        raise DimensionError(model.layout.n_inputs, data.n_genes, "число генов")


@dataclass(frozen=True)
class TrainJob:
    """Одна сеть для train_many: стартовые веса, свой набор, свой сид перемешивания."""

    model: MlpModel
    data: ExpressionDataset
    seed: int


def _sigmoid_inplace(z: np.ndarray) -> np.ndarray:
    np.clip(z, -_Z_CLIP, _Z_CLIP, out=z)
    np.negative(z, out=z)
    np.exp(z, out=z)
    z += 1.0
    np.reciprocal(z, out=z)
    return z


def _sgd_stack(
    params: list[np.ndarray],
    X: np.ndarray,
    T: np.ndarray,
    sizes: np.ndarray,
    rngs: list[np.random.Generator],
    cfg: TrainConfig,
) -> list[list[float]]:
    """Поштучный SGD сразу для m сетей одной раскладки, params меняются на месте.

    params = [W (m,h,d), b (m,h), V (m,2,h), c (m,2)], X (m,n,d), T (m,n,2),
    образцы сети i лежат в первых sizes[i] строках. Все операции поэлементные или
    суммы по строкам, поэтому результат сети не зависит от соседей по стеку.
    MSE эпохи - среднее потерь образцов, посчитанных в том же проходе до шага.
    """
    m_total, n_max, _ = X.shape
    histories: list[list[float]] = [[] for _ in range(m_total)]
    alive = np.arange(m_total)
    w, b, v, c = (p.copy() for p in params)

    for _ in range(cfg.max_epochs):
        m = alive.size
        n_alive = sizes[alive]
        order = np.zeros((m, n_max), dtype=np.intp)
        for r, i in enumerate(alive):
            order[r, : sizes[i]] = rngs[i].permutation(sizes[i])
        rows = np.arange(m)[:, None]
        xs = X[alive][rows, order]
        ts = T[alive][rows, order]
        real = (np.arange(n_max)[None, :] < n_alive[:, None]).astype(np.float64)
        rates = real * cfg.learning_rate

        h = np.empty(b.shape)
        o = np.empty(c.shape)
        err, d_o, sq = np.empty(c.shape), np.empty(c.shape), np.empty(c.shape)
        d_h, dh_tmp = np.empty(b.shape), np.empty(b.shape)
        buf_hd, buf_oh = np.empty(w.shape), np.empty(v.shape)
        loss, total = np.empty(m), np.zeros(m)

        for s in range(int(n_alive.max())):
            x = xs[:, s]
            np.multiply(w, x[:, None, :], out=buf_hd)
            np.sum(buf_hd, axis=2, out=h)
            h += b
            _sigmoid_inplace(h)
            np.multiply(v, h[:, None, :], out=buf_oh)
            np.sum(buf_oh, axis=2, out=o)
            o += c
            _sigmoid_inplace(o)

            np.subtract(o, ts[:, s], out=err)
            np.multiply(err, err, out=sq)
            np.add(sq[:, 0], sq[:, 1], out=loss)
            loss *= real[:, s]
            total += loss

            # delta_o = (o - t) o (1 - o), delta_h = V^T delta_o * h (1 - h)
            np.subtract(1.0, o, out=d_o)
            d_o *= o
            d_o *= err
            np.multiply(v[:, 0, :], d_o[:, 0:1], out=d_h)
            np.multiply(v[:, 1, :], d_o[:, 1:2], out=dh_tmp)
            d_h += dh_tmp
            np.subtract(1.0, h, out=dh_tmp)
            dh_tmp *= h
            d_h *= dh_tmp

            rate = rates[:, s : s + 1]
            d_h *= rate
            d_o *= rate
            np.multiply(d_h[:, :, None], x[:, None, :], out=buf_hd)
            w -= buf_hd
            b -= d_h
            np.multiply(d_o[:, :, None], h[:, None, :], out=buf_oh)
            v -= buf_oh
            c -= d_o

        mse = 0.5 * total / n_alive
        for r, i in enumerate(alive):
            histories[i].append(float(mse[r]))
        finished = mse <= cfg.error_goal
        if finished.any():
            done = alive[finished]
            for full, part in zip(params, (w, b, v, c)):
                full[done] = part[finished]
            keep = ~finished
            alive = alive[keep]
            w, b, v, c = w[keep], b[keep], v[keep], c[keep]
            if alive.size == 0:
                return histories

    for full, part in zip(params, (w, b, v, c)):
        full[alive] = part
    return histories


def train_many(
    jobs: Sequence[TrainJob], cfg: TrainConfig
) -> list[tuple[MlpModel, list[float]]]:
    """Обучает независимые сети пачкой. Сети с одинаковой раскладкой идут одним стеком.

    Каждая сеть получает ровно то, что дал бы train(job.model, job.data, cfg с seed=job.seed):
    свой порядок образцов и свою остановку по error_goal.
    """
    results: list[tuple[MlpModel, list[float]] | None] = [None] * len(jobs)
    groups: dict[MlpLayout, list[int]] = {}
    for idx, job in enumerate(jobs):
        _check_training_data(job.model, job.data)
        groups.setdefault(job.model.layout, []).append(idx)

    for layout, members in groups.items():
        sizes = np.array([jobs[i].data.n_samples for i in members], dtype=np.intp)
        n_max = int(sizes.max())
        X = np.zeros((len(members), n_max, layout.n_inputs))
        T = np.zeros((len(members), n_max, N_OUTPUTS))
        for r, i in enumerate(members):
            data = jobs[i].data
            X[r, : data.n_samples] = data.values
            T[r, : data.n_samples] = one_hot(data.require_labels())
        params = [
            np.stack([getattr(jobs[i].model, name) for i in members])
            for name in ("hidden_weights", "hidden_biases", "output_weights", "output_biases")
        ]
        rngs = [np.random.default_rng(jobs[i].seed) for i in members]
        histories = _sgd_stack(params, X, T, sizes, rngs, cfg)

        for r, i in enumerate(members):
            trained = MlpModel(layout, *(p[r].copy() for p in params))
            if not trained.is_finite():
                raise StateError("веса MLP разошлись (NaN/inf)")
            results[i] = (trained, histories[r])
    return [res for res in results if res is not None]


def train(
    model: MlpModel, data: ExpressionDataset, cfg: TrainConfig
) -> tuple[MlpModel, list[float]]:
    """Обучает копию модели. Стоп по max_epochs или когда MSE эпохи <= error_goal.

    Порядок образцов перемешивается каждую эпоху генератором из cfg.seed.
    """
    return train_many([TrainJob(model, data, cfg.seed)], cfg)[0]


def widen_inputs(model: MlpModel, width: int) -> MlpModel:
    """Та же сеть с нулевыми весами на дополнительных входах справа."""
    lay = model.layout
    if width < lay.n_inputs:
        raise DimensionError(lay.n_inputs, width, "ширина входа")
    hidden = np.zeros((lay.n_hidden, width))
    hidden[:, : lay.n_inputs] = model.hidden_weights
    return MlpModel(
        layout=MlpLayout(width, lay.n_hidden),
        hidden_weights=hidden,
        hidden_biases=model.hidden_biases,
        output_weights=model.output_weights,
        output_biases=model.output_biases,
    )


def decide(outputs: Sequence[float] | np.ndarray) -> Label:
    """argmax по двум выходам; точная ничья -> Tumor."""
    return Label.TUMOR if outputs[0] >= outputs[1] else Label.NORMAL


def predict(model: MlpModel, x: Sequence[float] | np.ndarray) -> Label:
    _, outputs = forward(model, x)
    return decide(outputs)


def predict_batch(model: MlpModel, X: np.ndarray) -> list[Label]:
    _, outputs = forward_batch(model, X)
    return [decide(row) for row in outputs]


def mean_squared_error(model: MlpModel, data: ExpressionDataset) -> float:
    """Среднее по образцам от 1/2 * sum_k (t_k - o_k)^2."""
    if data.n_samples == 0:
        raise EmptyInputError("Пустой набор данных")
    targets = one_hot(data.require_labels())
    _, outputs = forward_batch(model, data.values)
    return float(np.mean(0.5 * np.sum((targets - outputs) ** 2, axis=1)))


# --- сериализация ---

def model_to_dict(model: MlpModel) -> dict[str, Any]:
    """Версионированный json: раскладка + плоские массивы (row-major)."""
    lay = model.layout
    return {
        "schema": MODEL_SCHEMA,
        "layout": {"n_inputs": lay.n_inputs, "n_hidden": lay.n_hidden, "n_outputs": lay.n_outputs},
        **{name: [float(v) for v in arr.ravel(order="C")] for name, arr in model.parameters().items()},
    }


def model_from_dict(data: dict[str, Any]) -> MlpModel:
    if data.get("schema") != MODEL_SCHEMA:
        raise ConfigError(f"неизвестная версия схемы {data.get('schema')}", "schema")
    lay = MlpLayout(**data["layout"])
    shapes = {
        "hidden_weights": (lay.n_hidden, lay.n_inputs),
        "hidden_biases": (lay.n_hidden,),
        "output_weights": (lay.n_outputs, lay.n_hidden),
        "output_biases": (lay.n_outputs,),
    }
    params = {}
    for name, shape in shapes.items():
        flat = np.asarray(data[name], dtype=np.float64)
        if flat.size != int(np.prod(shape)):
            raise DimensionError(int(np.prod(shape)), int(flat.size), name)
        params[name] = flat.reshape(shape)
    return MlpModel(layout=lay, **params)

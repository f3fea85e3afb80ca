"""Two-hidden-layer MLP head with batch normalization and dropout.

Layer stack (fixed): dense -> sigmoid -> batchnorm -> dense -> sigmoid ->
dropout -> dense -> softmax over {normal, fight}. Hidden activations are
sigmoid; the 2-way softmax output pairs with the sparse categorical
cross-entropy loss. Gradients are analytic and checked against central
finite differences (gradient_check). Training uses Adam with mini-batches
and is bit-deterministic for a fixed seed.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import LabeledSample, samples_to_arrays
from .errors import ConfigError, DataError, ModelFormatError, PersistenceError, TrainingError

MODEL_MAGIC = "poseguard-mlp"
MODEL_VERSION = 1

_BN_EPS = 1e-5
_BN_MOMENTUM = 0.1
_LOSS_EPS = 1e-12

PARAM_NAMES = ("W1", "b1", "bn_gamma", "bn_beta", "W2", "b2", "W3", "b3")


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int = 34
    hidden_dims: tuple[int, int] = (64, 32)
    dropout_rate: float = 0.5
    learning_rate: float = 1e-3
    epochs: int = 20
    batch_size: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.input_dim < 1:
            raise ConfigError(f"input_dim must be positive, got {self.input_dim}")
        dims = tuple(self.hidden_dims)
        object.__setattr__(self, "hidden_dims", dims)
        # The stack is fixed at two hidden layers (dense-bn-dense).
        if len(dims) != 2 or any(d < 1 for d in dims):
            raise ConfigError(f"hidden_dims must be two positive sizes, got {dims}")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ConfigError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")


@dataclass
class TrainingHistory:
    train_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    ez = np.exp(shifted)
    return ez / ez.sum(axis=1, keepdims=True)


class MlpModel:
    """Parameter container plus forward/backward passes."""

    def __init__(self, config: MlpConfig, rng: np.random.Generator | None = None):
        self.config = config
        rng = rng or np.random.default_rng(config.seed)
        d, (h1, h2) = config.input_dim, config.hidden_dims

        def glorot(n_in: int, n_out: int) -> np.ndarray:
            limit = np.sqrt(6.0 / (n_in + n_out))
            return rng.uniform(-limit, limit, size=(n_in, n_out))

        self.params: dict[str, np.ndarray] = {
            "W1": glorot(d, h1),
            "b1": np.zeros(h1),
            "bn_gamma": np.ones(h1),
            "bn_beta": np.zeros(h1),
            "W2": glorot(h1, h2),
            "b2": np.zeros(h2),
            "W3": glorot(h2, 2),
            "b3": np.zeros(2),
        }
        self.running_mean = np.zeros(h1)
        self.running_var = np.ones(h1)
        self.training = True

    # -- forward ---------------------------------------------------------

    def forward(
        self,
        X: np.ndarray,
        mode: str = "infer",
        dropout_rng: np.random.Generator | None = None,
        update_running_stats: bool = True,
    ) -> np.ndarray:
        """Class probabilities, one (p_normal, p_fight) row per input row."""
        probs, _ = self._forward_cached(X, mode, dropout_rng, update_running_stats)
        return probs

    def _forward_cached(
        self,
        X: np.ndarray,
        mode: str,
        dropout_rng: np.random.Generator | None,
        update_running_stats: bool,
    ) -> tuple[np.ndarray, dict]:
        if mode not in ("train", "infer"):
            raise ConfigError(f"mode must be train or infer, got {mode!r}")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[0] == 0:
            raise DataError("forward pass needs a non-empty batch")
        if X.shape[1] != self.config.input_dim:
            raise DataError(f"input dimension {X.shape[1]} != model dimension {self.config.input_dim}")
        train = mode == "train"
        if train and X.shape[0] < 2:
            raise DataError("batch normalization needs batch size >= 2 in train mode")

        p = self.params
        z1 = X @ p["W1"] + p["b1"]
        a1 = _sigmoid(z1)

        if train:
            mu = a1.mean(axis=0)
            var = a1.var(axis=0)
            if update_running_stats:
                m = a1.shape[0]
                unbiased = var * m / (m - 1)
                self.running_mean = (1.0 - _BN_MOMENTUM) * self.running_mean + _BN_MOMENTUM * mu
                self.running_var = (1.0 - _BN_MOMENTUM) * self.running_var + _BN_MOMENTUM * unbiased
        else:
            mu = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + _BN_EPS)
        xhat = (a1 - mu) * inv_std
        bn = p["bn_gamma"] * xhat + p["bn_beta"]

        z2 = bn @ p["W2"] + p["b2"]
        a2 = _sigmoid(z2)

        rate = self.config.dropout_rate
        if train and rate > 0.0:
            if dropout_rng is None:
                raise ConfigError("train-mode forward with dropout needs a generator")
            # Inverted dropout: scale at train time so inference is a plain pass.
            mask = (dropout_rng.random(a2.shape) >= rate) / (1.0 - rate)
        else:
            mask = np.ones_like(a2)
        d2 = a2 * mask

        z3 = d2 @ p["W3"] + p["b3"]
        probs = _softmax(z3)
        cache = {
            "X": X,
            "a1": a1,
            "xhat": xhat,
            "inv_std": inv_std,
            "bn": bn,
            "a2": a2,
            "mask": mask,
            "d2": d2,
            "probs": probs,
            "train": train,
        }
        return probs, cache

    # -- loss and gradients ------------------------------------------------

    def backward(self, cache: dict, labels: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of the mean cross-entropy loss w.r.t. every parameter."""
        p = self.params
        probs = cache["probs"]
        m = probs.shape[0]
        onehot = np.zeros_like(probs)
        onehot[np.arange(m), labels] = 1.0

        dz3 = (probs - onehot) / m
        grads: dict[str, np.ndarray] = {}
        grads["W3"] = cache["d2"].T @ dz3
        grads["b3"] = dz3.sum(axis=0)

        dd2 = dz3 @ p["W3"].T
        da2 = dd2 * cache["mask"]
        dz2 = da2 * cache["a2"] * (1.0 - cache["a2"])
        grads["W2"] = cache["bn"].T @ dz2
        grads["b2"] = dz2.sum(axis=0)

        dbn = dz2 @ p["W2"].T
        xhat = cache["xhat"]
        grads["bn_gamma"] = (dbn * xhat).sum(axis=0)
        grads["bn_beta"] = dbn.sum(axis=0)

        if cache["train"]:
            dxhat = dbn * p["bn_gamma"]
            inv_std = cache["inv_std"]
            da1 = (
                inv_std
                / m
                * (m * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
            )
        else:
            da1 = dbn * p["bn_gamma"] * cache["inv_std"]
        dz1 = da1 * cache["a1"] * (1.0 - cache["a1"])
        grads["W1"] = cache["X"].T @ dz1
        grads["b1"] = dz1.sum(axis=0)
        return grads

    def predict(self, X: np.ndarray) -> np.ndarray:
        """0/1 labels (1 = fight) in inference mode."""
        return np.argmax(self.forward(X, mode="infer"), axis=1)

    def predict_proba(self, x: np.ndarray | Sequence[float]) -> float:
        """Fight probability for a single feature vector, inference mode."""
        probs = self.forward(np.asarray(x, dtype=np.float64), mode="infer")
        return float(probs[0, 1])


def loss(probabilities: np.ndarray, labels: Sequence[int]) -> float:
    """Mean negative log-probability of the true class, clamped at 1e-12."""
    probs = np.asarray(probabilities, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.shape[0] != labels.shape[0]:
        raise DataError(f"{probs.shape[0]} probability rows vs {labels.shape[0]} labels")
    picked = probs[np.arange(len(labels)), labels]
    return float(np.mean(-np.log(np.maximum(picked, _LOSS_EPS))))


def train_mlp(
    train_samples: Sequence[LabeledSample],
    val_samples: Sequence[LabeledSample],
    config: MlpConfig | None = None,
) -> tuple[MlpModel, TrainingHistory]:
    config = config or MlpConfig()
    X, y = samples_to_arrays(train_samples)
    Xv, yv = samples_to_arrays(val_samples)
    return fit_mlp_arrays(X, y, Xv, yv, config)


def fit_mlp_arrays(
    X: np.ndarray,
    y: np.ndarray,
    X_val: np.ndarray,
    y_val: np.ndarray,
    config: MlpConfig,
) -> tuple[MlpModel, TrainingHistory]:
    """Mini-batch Adam training on raw arrays; dimension is generic."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=int)
    if len(X) == 0:
        raise TrainingError("training set is empty")
    if len(set(y.tolist())) < 2:
        raise TrainingError("training needs both classes present")
    if not np.all(np.isfinite(X)):
        raise DataError("features contain non-finite values")
    if X.shape[1] != config.input_dim:
        config = MlpConfig(
            input_dim=X.shape[1],
            hidden_dims=config.hidden_dims,
            dropout_rate=config.dropout_rate,
            learning_rate=config.learning_rate,
            epochs=config.epochs,
            batch_size=config.batch_size,
            seed=config.seed,
        )

    rng = np.random.default_rng(config.seed)
    model = MlpModel(config, rng)
    adam_m = {k: np.zeros_like(v) for k, v in model.params.items()}
    adam_v = {k: np.zeros_like(v) for k, v in model.params.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    history = TrainingHistory()

    for _ in range(config.epochs):
        order = rng.permutation(len(X))
        epoch_losses: list[float] = []
        for start in range(0, len(order), config.batch_size):
            batch_idx = order[start : start + config.batch_size]
            if len(batch_idx) < 2:
                # batch norm cannot standardize a single sample; drop the tail
                continue
            xb, yb = X[batch_idx], y[batch_idx]
            probs, cache = model._forward_cached(xb, "train", rng, update_running_stats=True)
            epoch_losses.append(loss(probs, yb))
            grads = model.backward(cache, yb)
            step += 1
            for name in PARAM_NAMES:
                g = grads[name]
                adam_m[name] = beta1 * adam_m[name] + (1.0 - beta1) * g
                adam_v[name] = beta2 * adam_v[name] + (1.0 - beta2) * g * g
                m_hat = adam_m[name] / (1.0 - beta1**step)
                v_hat = adam_v[name] / (1.0 - beta2**step)
                model.params[name] -= config.learning_rate * m_hat / (np.sqrt(v_hat) + eps)

        history.train_loss.append(float(np.mean(epoch_losses)) if epoch_losses else float("nan"))
        history.train_accuracy.append(float(np.mean(model.predict(X) == y)))
        if len(X_val):
            history.val_accuracy.append(float(np.mean(model.predict(X_val) == np.asarray(y_val))))
        else:
            history.val_accuracy.append(float("nan"))

    model.training = False
    return model, history


def gradient_check(
    model: MlpModel,
    X: np.ndarray,
    labels: np.ndarray,
    step: float = 1e-5,
    mask_seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs batch norm in train mode on the given batch with a frozen dropout
    mask (the same seed is replayed for every evaluation).
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)

    def eval_loss() -> float:
        rng = np.random.default_rng(mask_seed)
        probs = model.forward(X, mode="train", dropout_rng=rng, update_running_stats=False)
        return loss(probs, labels)

    rng = np.random.default_rng(mask_seed)
    probs, cache = model._forward_cached(X, "train", rng, update_running_stats=False)
    analytic = model.backward(cache, labels)

    worst = 0.0
    for name in PARAM_NAMES:
        param = model.params[name]
        grad = analytic[name]
        flat = param.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            plus = eval_loss()
            flat[i] = original - step
            minus = eval_loss()
            flat[i] = original
            numeric = (plus - minus) / (2.0 * step)
            g = grad.reshape(-1)[i]
            denom = max(abs(g), abs(numeric), 1e-8)
            worst = max(worst, abs(g - numeric) / denom)
    return worst


def save_mlp(model: MlpModel, fp) -> None:
    try:
        cfg = model.config
        fp.write(f"{MODEL_MAGIC} {MODEL_VERSION}\n")
        fp.write(f"input_dim {cfg.input_dim}\n")
        fp.write(f"hidden {cfg.hidden_dims[0]} {cfg.hidden_dims[1]}\n")
        fp.write(f"dropout_rate {cfg.dropout_rate!r}\n")
        fp.write(f"learning_rate {cfg.learning_rate!r}\n")
        fp.write(f"epochs {cfg.epochs}\n")
        fp.write(f"batch_size {cfg.batch_size}\n")
        fp.write(f"seed {cfg.seed}\n")
        tensors = dict(model.params)
        tensors["running_mean"] = model.running_mean
        tensors["running_var"] = model.running_var
        for name, tensor in tensors.items():
            mat = tensor if tensor.ndim == 2 else tensor[None, :]
            fp.write(f"tensor {name} {mat.shape[0]} {mat.shape[1]}\n")
            for row in mat:
                fp.write(" ".join(repr(float(v)) for v in row) + "\n")
    except OSError as exc:
        raise PersistenceError(f"writing MLP model failed: {exc}") from exc


def load_mlp(fp) -> MlpModel:
    try:
        lines = [line.rstrip("\n") for line in fp]
    except OSError as exc:
        raise PersistenceError(f"reading MLP model failed: {exc}") from exc
    try:
        magic = lines[0].split()
        if magic[0] != MODEL_MAGIC:
            raise ModelFormatError(f"not an MLP model file (got {lines[0]!r})")
        if int(magic[1]) != MODEL_VERSION:
            raise ModelFormatError(f"unsupported MLP model version {magic[1]}")
        header: dict[str, str] = {}
        idx = 1
        while idx < len(lines) and not lines[idx].startswith("tensor "):
            key, _, value = lines[idx].partition(" ")
            header[key] = value
            idx += 1
        h1, h2 = (int(v) for v in header["hidden"].split())
        config = MlpConfig(
            input_dim=int(header["input_dim"]),
            hidden_dims=(h1, h2),
            dropout_rate=float(header["dropout_rate"]),
            learning_rate=float(header["learning_rate"]),
            epochs=int(header["epochs"]),
            batch_size=int(header["batch_size"]),
            seed=int(header["seed"]),
        )
        model = MlpModel(config)
        tensors: dict[str, np.ndarray] = {}
        while idx < len(lines) and lines[idx].startswith("tensor "):
            _, name, rows, cols = lines[idx].split()
            rows, cols = int(rows), int(cols)
            data = np.array(
                [[float(v) for v in lines[idx + 1 + r].split()] for r in range(rows)]
            )
            if data.shape != (rows, cols):
                raise ModelFormatError(f"tensor {name} shape mismatch")
            tensors[name] = data
            idx += 1 + rows
        for name in PARAM_NAMES:
            target = model.params[name]
            loaded = tensors[name]
            model.params[name] = loaded.reshape(target.shape)
        model.running_mean = tensors["running_mean"].reshape(-1)
        model.running_var = tensors["running_var"].reshape(-1)
        model.training = False
        return model
    except ModelFormatError:
        raise
    except (IndexError, KeyError, ValueError) as exc:
        raise ModelFormatError(f"malformed MLP model file: {exc}") from exc


def save_mlp_to_path(model: MlpModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        save_mlp(model, fp)


def load_mlp_from_path(path: str) -> MlpModel:
    with open(path, "r", encoding="utf-8") as fp:
        return load_mlp(fp)


def dumps_mlp(model: MlpModel) -> str:
    buf = io.StringIO()
    save_mlp(model, buf)
    return buf.getvalue()

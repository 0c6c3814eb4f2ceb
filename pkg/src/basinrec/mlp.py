"""Dense feedforward binary classifier trained on the cross-entropy loss.

Plain numpy throughout: forward inference, reverse-mode gradients, and a
mini-batch Adam/SGD loop, all deterministic in their seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .fileio import FORMAT_VERSIONS, read_json, write_json

HIDDEN_ACTIVATIONS = ("relu", "tanh", "logistic")


class TrainingDivergence(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass(frozen=True)
class NetworkArch:
    """Layer widths (input 3, output 1) plus activation choice.

    Inputs are divided by input_scale before the first affine layer; the
    default matches the half-width of the sampling domain so that features
    land in [-1, 1].
    """

    layer_sizes: tuple[int, ...] = (3, 64, 64, 32, 1)
    hidden_activation: str = "relu"
    input_scale: float = 50.0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 3:
            raise ValueError("need at least one hidden layer")
        if sizes[0] != 3 or sizes[-1] != 1:
            raise ValueError(f"layer sizes must start at 3 and end at 1, got {sizes}")
        if any(s < 1 for s in sizes):
            raise ValueError("layer sizes must be positive")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"unknown activation {self.hidden_activation!r}")
        if not self.input_scale > 0.0:
            raise ValueError("input_scale must be positive")


@dataclass
class NetworkParams:
    """Weights (fan_out x fan_in) and biases per layer."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    arch: NetworkArch


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    batch_size: int = 256
    epochs: int = 200
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    prob_clip: float = 1e-7

    def __post_init__(self):
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")
        if not 0.0 < self.prob_clip < 0.5:
            raise ValueError("prob_clip must lie in (0, 0.5)")


@dataclass
class TrainReport:
    loss_history: list[float] = field(default_factory=list)
    final_train_accuracy: float = 0.0
    final_test_accuracy: float = 0.0


def init_params(arch: NetworkArch, seed: int = 0) -> NetworkParams:
    """Seeded initialization: Glorot-uniform for tanh/logistic, He-normal
    for relu; biases start at zero."""
    rng = np.random.default_rng(int(seed))
    weights, biases = [], []
    for fan_in, fan_out in zip(arch.layer_sizes[:-1], arch.layer_sizes[1:]):
        if arch.hidden_activation == "relu":
            w = rng.normal(0.0, math.sqrt(2.0 / fan_in), (fan_out, fan_in))
        else:
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-limit, limit, (fan_out, fan_in))
        weights.append(w)
        biases.append(np.zeros(fan_out))
    return NetworkParams(weights, biases, arch)


def _logistic(z: np.ndarray) -> np.ndarray:
    # overflow-safe in both tails
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _hidden(act: str, z: np.ndarray) -> np.ndarray:
    if act == "relu":
        return np.maximum(z, 0.0)
    if act == "tanh":
        return np.tanh(z)
    return _logistic(z)


def _hidden_deriv(act: str, activated: np.ndarray) -> np.ndarray:
    # derivative expressed through the activation value; relu'(0) := 0
    if act == "relu":
        return (activated > 0.0).astype(float)
    if act == "tanh":
        return 1.0 - activated ** 2
    return activated * (1.0 - activated)


def _forward_cached(params: NetworkParams, X: np.ndarray):
    """All layer activations (input first), plus output probabilities."""
    acts = [np.asarray(X, dtype=float) / params.arch.input_scale]
    act = params.arch.hidden_activation
    a = acts[0]
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        a = _hidden(act, a @ w.T + b)
        acts.append(a)
    z = a @ params.weights[-1].T + params.biases[-1]
    return acts, _logistic(z)[:, 0]


def forward_batch(params: NetworkParams, X: np.ndarray) -> np.ndarray:
    """Class-1 probabilities for an (n, 3) batch of states."""
    X = np.asarray(X, dtype=float).reshape(-1, 3)
    _, p = _forward_cached(params, X)
    return p


def forward(params: NetworkParams, x) -> float:
    """P(label = 1 | x) for a single state."""
    return float(forward_batch(params, np.asarray(x, dtype=float).reshape(1, 3))[0])


def bce_loss(probs, labels, prob_clip: float = 1e-7) -> float:
    """Mean binary cross-entropy with probabilities clamped away from {0, 1}."""
    p = np.asarray(probs, dtype=float).reshape(-1)
    y = np.asarray(labels, dtype=float).reshape(-1)
    if p.size == 0:
        raise ValueError("bce_loss needs at least one sample")
    if p.size != y.size:
        raise ValueError(f"length mismatch: {p.size} probs vs {y.size} labels")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be 0 or 1")
    pc = np.clip(p, prob_clip, 1.0 - prob_clip)
    return float(-np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))


def _backward(params: NetworkParams, X, y, prob_clip: float):
    """One forward/backward pass; returns (grads_w, grads_b, batch loss)."""
    acts, p = _forward_cached(params, X)
    n = X.shape[0]
    act = params.arch.hidden_activation
    pc = np.clip(p, prob_clip, 1.0 - prob_clip)
    loss = float(-np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))

    delta = (p - y) / n
    delta[(p < prob_clip) | (p > 1.0 - prob_clip)] = 0.0
    delta = delta[:, None]

    grads_w = [np.empty(0)] * len(params.weights)
    grads_b = [np.empty(0)] * len(params.biases)
    for layer in range(len(params.weights) - 1, -1, -1):
        grads_w[layer] = delta.T @ acts[layer]
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ params.weights[layer]) * _hidden_deriv(act, acts[layer])
    return grads_w, grads_b, loss


def gradient(params: NetworkParams, X, labels, prob_clip: float = 1e-7):
    """Gradient of the batch bce_loss w.r.t. every weight and bias.

    Reverse-mode accumulation layer by layer; samples whose probability
    sits outside the clip interval contribute zero (the clamp is flat
    there), which keeps this the exact derivative of bce_loss.
    """
    X = np.asarray(X, dtype=float).reshape(-1, 3)
    y = np.asarray(labels, dtype=float).reshape(-1)
    if X.shape[0] == 0:
        raise ValueError("gradient needs a non-empty batch")
    grads_w, grads_b, _ = _backward(params, X, y, prob_clip)
    return grads_w, grads_b


def _as_xy(data):
    if hasattr(data, "ics"):
        return data.ics, data.labels
    X, y = data
    return np.asarray(X, dtype=float), np.asarray(y)


def train(train_data, test_data, arch: NetworkArch = NetworkArch(),
          cfg: TrainConfig = TrainConfig()):
    """Mini-batch training; returns (params, report).

    Deterministic in (data, arch, cfg): initialization and the per-epoch
    shuffles derive from cfg.seed alone.  Raises TrainingDivergence when an
    epoch's mean loss is not finite.
    """
    X_train, y_train = _as_xy(train_data)
    X_test, y_test = _as_xy(test_data)
    if len(X_train) == 0 or len(X_test) == 0:
        raise ValueError("train and test sets must be non-empty")

    params = init_params(arch, cfg.seed)
    flat = params.weights + params.biases
    m = [np.zeros_like(p) for p in flat]
    v = [np.zeros_like(p) for p in flat]
    n = len(X_train)
    step = 0
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), 1]))
    report = TrainReport()

    # divergence shows up as a non-finite epoch loss and is raised below;
    # the intermediate overflow warnings on that path are suppressed
    for epoch in range(cfg.epochs):
        perm = shuffle_rng.permutation(n)
        loss_sum = 0.0
        with np.errstate(over="ignore", invalid="ignore"):
            for lo in range(0, n, cfg.batch_size):
                idx = perm[lo:lo + cfg.batch_size]
                xb = X_train[idx]
                yb = y_train[idx].astype(float)
                grads_w, grads_b, batch_loss = _backward(params, xb, yb, cfg.prob_clip)
                loss_sum += batch_loss * len(idx)
                step += 1
                grads = grads_w + grads_b
                if cfg.optimizer == "sgd":
                    for p, g in zip(flat, grads):
                        p -= cfg.learning_rate * g
                else:
                    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
                    for i, (p, g) in enumerate(zip(flat, grads)):
                        m[i] = b1 * m[i] + (1.0 - b1) * g
                        v[i] = b2 * v[i] + (1.0 - b2) * g * g
                        m_hat = m[i] / (1.0 - b1 ** step)
                        v_hat = v[i] / (1.0 - b2 ** step)
                        p -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
        epoch_loss = loss_sum / n
        if not math.isfinite(epoch_loss):
            raise TrainingDivergence(f"non-finite training loss at epoch {epoch}")
        report.loss_history.append(epoch_loss)

    report.final_train_accuracy = accuracy(params, (X_train, y_train))
    report.final_test_accuracy = accuracy(params, (X_test, y_test))
    return params, report


def predict_class(params: NetworkParams, x, threshold: float = 0.5) -> int:
    """1 iff the predicted probability reaches the threshold (ties go to 1)."""
    return int(forward(params, x) >= threshold)


def predict_class_batch(params: NetworkParams, X, threshold: float = 0.5) -> np.ndarray:
    return (forward_batch(params, X) >= threshold).astype(np.int8)


def accuracy(params: NetworkParams, data) -> float:
    """Fraction of samples whose predicted class matches the label."""
    X, y = _as_xy(data)
    if len(X) == 0:
        raise ValueError("accuracy needs a non-empty dataset")
    pred = predict_class_batch(params, X)
    return float(np.mean(pred == np.asarray(y).astype(np.int8)))


def save_model(params: NetworkParams, path, train_config: TrainConfig | None = None,
               extra_provenance: dict | None = None) -> None:
    """Model JSON: arch, input scaling, row-major flattened layer arrays."""
    obj = {
        "format_version": FORMAT_VERSIONS["model"],
        "layer_sizes": list(params.arch.layer_sizes),
        "hidden_activation": params.arch.hidden_activation,
        "output_activation": "logistic",
        "input_scale": params.arch.input_scale,
        "weights": [w.ravel(order="C").tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }
    if train_config is not None:
        obj["train_config"] = asdict(train_config)
    if extra_provenance:
        obj["provenance"] = extra_provenance
    write_json(path, obj)


def load_model(path) -> NetworkParams:
    obj = read_json(path)
    if obj.get("format_version") != FORMAT_VERSIONS["model"]:
        raise ValueError(f"{path}: unsupported model format "
                         f"{obj.get('format_version')!r}")
    arch = NetworkArch(tuple(obj["layer_sizes"]), obj["hidden_activation"],
                       float(obj["input_scale"]))
    weights, biases = [], []
    for fan_in, fan_out, wflat, b in zip(arch.layer_sizes[:-1], arch.layer_sizes[1:],
                                         obj["weights"], obj["biases"]):
        w = np.asarray(wflat, dtype=float)
        if w.size != fan_in * fan_out or len(b) != fan_out:
            raise ValueError(f"{path}: layer shape mismatch with declared sizes")
        weights.append(w.reshape(fan_out, fan_in))
        biases.append(np.asarray(b, dtype=float))
    return NetworkParams(weights, biases, arch)

"""Differentiable zero-shot scorers with frozen class embeddings.

A scorer flattens the input image, pushes it through a small stack of
linear(+ReLU) layers to an embedding ``e``, L2-normalizes it, and scores
each class ``j`` as ``temperature * <e_hat, z_j>`` against a frozen,
unit-norm class-embedding matrix.  Training only ever updates the
encoder layers; the class side stays fixed, so the model behaves like a
zero-shot classifier whose prompt embeddings were computed once.

Gradients are exact reverse-mode derivatives of the cross-entropy loss
with respect to every input pixel, including the Jacobian of the L2
normalization, ``(I - e_hat e_hat^T) / ||e||``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np

from .tensor import SeededRng, Tensor, require_finite

if TYPE_CHECKING:
    from .data import Dataset

NORM_EPS = 1e-12
_ACTIVATIONS = ("relu", "identity")


@dataclass
class Layer:
    weights: Tensor  # (fan_out, fan_in)
    bias: Tensor  # (fan_out,)
    activation: str = "relu"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise ValueError("layer weights must be rank-2 and bias rank-1")
        if self.weights.shape[0] != self.bias.shape[0]:
            raise ValueError(
                f"layer fan-out mismatch: weights {self.weights.shape}, bias {self.bias.shape}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class ScorerModel:
    layers: list[Layer]
    class_embeddings: Tensor  # (num_classes, embed_dim), unit-norm rows
    temperature: float
    input_shape: tuple[int, int, int]
    class_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.class_embeddings = np.asarray(self.class_embeddings, dtype=np.float64)
        self.input_shape = tuple(int(s) for s in self.input_shape)
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.class_embeddings.ndim != 2:
            raise ValueError("class embeddings must be a (classes, dim) matrix")
        norms = np.linalg.norm(self.class_embeddings, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("class embedding rows must have unit L2 norm")
        n_in = int(np.prod(self.input_shape))
        for i, layer in enumerate(self.layers):
            if layer.weights.shape[1] != n_in:
                raise ValueError(
                    f"layer {i} expects fan-in {layer.weights.shape[1]}, chain provides {n_in}")
            n_in = layer.weights.shape[0]
        if n_in != self.class_embeddings.shape[1]:
            raise ValueError(
                f"encoder output dim {n_in} != class embedding dim {self.class_embeddings.shape[1]}")

    @property
    def num_classes(self) -> int:
        return self.class_embeddings.shape[0]

    def copy(self) -> "ScorerModel":
        return ScorerModel(
            layers=[Layer(l.weights.copy(), l.bias.copy(), l.activation) for l in self.layers],
            class_embeddings=self.class_embeddings.copy(),
            temperature=self.temperature,
            input_shape=self.input_shape,
            class_names=list(self.class_names),
        )


@dataclass
class LossGrad:
    loss: float
    grad: Tensor  # shaped like the model input
    logits: Tensor  # (num_classes,)


GradFn = Callable[[np.ndarray, int], LossGrad]


def _check_input(model: ScorerModel, image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.shape != model.input_shape:
        raise ValueError(f"input shape {image.shape} != model input {model.input_shape}")
    return require_finite(image, "input image")


def _encode_batch(model: ScorerModel, x: np.ndarray):
    """Forward pass over a (batch, n_in) matrix, keeping layer caches."""
    acts = [x]
    pres = []
    for layer in model.layers:
        z = acts[-1] @ layer.weights.T + layer.bias
        pres.append(z)
        acts.append(np.maximum(z, 0.0) if layer.activation == "relu" else z)
    e = acts[-1]
    norms = np.linalg.norm(e, axis=1)
    denom = np.maximum(norms, NORM_EPS)
    e_hat = e / denom[:, None]
    logits = model.temperature * (e_hat @ model.class_embeddings.T)
    return logits, (acts, pres, e, norms, denom, e_hat)


def softmax(logits: Tensor) -> Tensor:
    """Max-shift stabilized softmax."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=-1, keepdims=True)


def forward(model: ScorerModel, image: np.ndarray) -> Tensor:
    """Class logits for one image."""
    image = _check_input(model, image)
    logits, _ = _encode_batch(model, image.reshape(1, -1))
    return logits[0]


def loss_ce(logits: Tensor, k: int) -> float:
    """Cross-entropy -log softmax(logits)[k], stabilized against overflow."""
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= k < logits.shape[-1]:
        raise ValueError(f"label {k} out of range for {logits.shape[-1]} classes")
    z = logits - logits.max()
    return float(np.log(np.exp(z).sum()) - z[k])


def _backward_batch(model: ScorerModel, x: np.ndarray, labels: np.ndarray,
                    want_params: bool = False):
    """Losses, input gradients and (optionally) parameter gradients."""
    logits, (acts, pres, e, norms, denom, e_hat) = _encode_batch(model, x)
    probs = softmax(logits)
    batch = x.shape[0]
    rows = np.arange(batch)
    shifted = logits - logits.max(axis=1, keepdims=True)
    losses = np.log(np.exp(shifted).sum(axis=1)) - shifted[rows, labels]

    d_logits = probs.copy()
    d_logits[rows, labels] -= 1.0
    d_ehat = model.temperature * (d_logits @ model.class_embeddings)
    # Through the normalization: (I - e_hat e_hat^T)/||e|| above the
    # epsilon floor, plain 1/eps scaling below it.
    proj = (d_ehat * e_hat).sum(axis=1, keepdims=True)
    d_e = np.where((norms >= NORM_EPS)[:, None],
                   (d_ehat - e_hat * proj) / denom[:, None],
                   d_ehat / NORM_EPS)

    param_grads = [] if want_params else None
    grad = d_e
    for layer, z, a_prev in zip(reversed(model.layers), reversed(pres), reversed(acts[:-1])):
        if layer.activation == "relu":
            grad = grad * (z > 0.0)  # subgradient 0 exactly at the kink
        if want_params:
            param_grads.append((grad.T @ a_prev, grad.sum(axis=0)))
        grad = grad @ layer.weights
    if want_params:
        param_grads.reverse()
    return losses, grad, logits, param_grads


def backward(model: ScorerModel, image: np.ndarray, k: int) -> LossGrad:
    """Exact gradient of loss_ce(forward(image), k) w.r.t. every pixel."""
    image = _check_input(model, image)
    if not 0 <= k < model.num_classes:
        raise ValueError(f"label {k} out of range for {model.num_classes} classes")
    losses, grads, logits, _ = _backward_batch(model, image.reshape(1, -1), np.array([k]))
    return LossGrad(loss=float(losses[0]),
                    grad=grads[0].reshape(model.input_shape),
                    logits=logits[0])


def model_gradfn(model: ScorerModel) -> GradFn:
    """Wrap a scorer as the generic (image, label) -> LossGrad callable."""
    def fn(image: np.ndarray, label: int) -> LossGrad:
        return backward(model, image, label)
    return fn


@dataclass
class TrainConfig:
    lr: float = 0.05
    epochs: int = 30
    batch: int = 16
    seed: int = 0


def train(model: ScorerModel, dataset: "Dataset", cfg: TrainConfig) -> ScorerModel:
    """Plain SGD on the cross-entropy loss; class embeddings stay frozen.

    Deterministic for a given seed: batch order comes from the seeded
    permutation stream, summation order is fixed.
    """
    items = dataset.items
    if len(items) == 0:
        raise ValueError("cannot train on an empty dataset")
    for it in items:
        if not 0 <= it.label < model.num_classes:
            raise ValueError(f"label {it.label} out of range for {model.num_classes} classes")

    out = model.copy()
    x_all = np.stack([it.image.reshape(-1) for it in items])
    y_all = np.array([it.label for it in items])
    rng = SeededRng(cfg.seed)

    for _ in range(cfg.epochs):
        order = rng.permutation(len(items))
        for start in range(0, len(items), cfg.batch):
            idx = order[start:start + cfg.batch]
            _, _, _, pgrads = _backward_batch(out, x_all[idx], y_all[idx], want_params=True)
            scale = cfg.lr / len(idx)
            for layer, (dw, db) in zip(out.layers, pgrads):
                layer.weights -= scale * dw
                layer.bias -= scale * db
    return out


def mean_loss(model: ScorerModel, dataset: "Dataset") -> float:
    x_all = np.stack([it.image.reshape(-1) for it in dataset.items])
    y_all = np.array([it.label for it in dataset.items])
    losses, _, _, _ = _backward_batch(model, x_all, y_all)
    return float(losses.mean())


def gradient_check(model: ScorerModel, image: np.ndarray, k: int, h: float = 1e-5) -> dict:
    """Central-difference audit of the analytic input gradient.

    Relative error per pixel uses max(|analytic|, |numeric|, 1e-8) as
    denominator.  Pixels whose +/-h probes land on different sides of a
    ReLU kink are reported in ``kink_pixels`` and excluded from
    ``max_rel_err``.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    image = _check_input(model, image)
    analytic = backward(model, image, k).grad.reshape(-1)

    flat = image.reshape(-1)
    n = flat.size
    probes = np.repeat(flat[None, :], 2 * n, axis=0)
    rows = np.arange(n)
    probes[2 * rows, rows] += h
    probes[2 * rows + 1, rows] -= h

    logits, (acts, pres, *_rest) = _encode_batch(model, probes)
    shifted = logits - logits.max(axis=1, keepdims=True)
    losses = np.log(np.exp(shifted).sum(axis=1)) - shifted[:, k]
    numeric = (losses[2 * rows] - losses[2 * rows + 1]) / (2.0 * h)

    kink = np.zeros(n, dtype=bool)
    for layer, z in zip(model.layers, pres):
        if layer.activation == "relu":
            kink |= np.any((z[2 * rows] > 0.0) != (z[2 * rows + 1] > 0.0), axis=1)

    rel = np.abs(analytic - numeric) / np.maximum(
        np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    usable = ~kink
    if not usable.any():
        return {"max_rel_err": 0.0, "argmax_err_index": -1, "kink_pixels": rows.tolist()}
    masked = np.where(usable, rel, -1.0)
    worst = int(np.argmax(masked))
    return {
        "max_rel_err": float(rel[worst]),
        "argmax_err_index": worst,
        "kink_pixels": rows[kink].tolist(),
    }


def new_scorer(seed: int, input_shape: Sequence[int], hidden: Sequence[int],
               embed_dim: int, classes: int, temperature: float = 100.0,
               class_names: Sequence[str] | None = None) -> ScorerModel:
    """Seeded random scorer: He-scaled ReLU encoder, unit class embeddings."""
    rng = SeededRng(seed)
    input_shape = tuple(int(s) for s in input_shape)
    dims = [int(np.prod(input_shape))] + [int(d) for d in hidden] + [int(embed_dim)]
    layers = []
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        w = rng.normal([fan_out, fan_in]) * np.sqrt(2.0 / fan_in)
        act = "relu" if i < len(dims) - 2 else "identity"
        layers.append(Layer(weights=w, bias=np.zeros(fan_out), activation=act))
    z = rng.normal([classes, embed_dim])
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return ScorerModel(layers=layers, class_embeddings=z, temperature=temperature,
                       input_shape=input_shape,
                       class_names=list(class_names) if class_names else [])


def linear_softmax_gradfn(weights: Tensor, bias: Tensor | None = None) -> GradFn:
    """Analytic GradFn for plain ``softmax(W x + b)`` cross-entropy.

    Used as an oracle: the gradient has the closed form
    ``W^T (softmax - onehot)`` with no normalization stage in the way.
    """
    weights = np.asarray(weights, dtype=np.float64)
    bias = np.zeros(weights.shape[0]) if bias is None else np.asarray(bias, dtype=np.float64)

    def fn(image: np.ndarray, label: int) -> LossGrad:
        x = np.asarray(image, dtype=np.float64)
        logits = weights @ x.reshape(-1) + bias
        p = softmax(logits)
        if not 0 <= label < logits.size:
            raise ValueError(f"label {label} out of range")
        grad = (weights.T @ (p - np.eye(logits.size)[label])).reshape(x.shape)
        return LossGrad(loss=loss_ce(logits, label), grad=grad, logits=logits)

    return fn


def linear_model_weights(seed: int, classes: int, n_inputs: int) -> tuple[Tensor, Tensor]:
    """Deterministic small linear model shared with the mock provider."""
    rng = SeededRng(seed)
    w = rng.normal([classes, n_inputs]) * (1.0 / np.sqrt(n_inputs))
    b = rng.normal([classes]) * 0.1
    return w, b


CHECKPOINT_FORMAT = "igprobe-scorer"
CHECKPOINT_VERSION = 1


def save_model(model: ScorerModel, path: str | Path) -> None:
    """Write a JSON checkpoint (field layout documented in the README)."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "input_shape": list(model.input_shape),
        "temperature": model.temperature,
        "class_names": model.class_names,
        "class_embeddings": {
            "shape": list(model.class_embeddings.shape),
            "data": model.class_embeddings.reshape(-1).tolist(),
        },
        "layers": [
            {
                "weights": {"shape": list(l.weights.shape), "data": l.weights.reshape(-1).tolist()},
                "bias": {"shape": list(l.bias.shape), "data": l.bias.reshape(-1).tolist()},
                "activation": l.activation,
            }
            for l in model.layers
        ],
    }
    Path(path).write_text(json.dumps(doc))


def _unpack(obj: dict) -> Tensor:
    return np.array(obj["data"], dtype=np.float64).reshape(obj["shape"])


def load_model(path: str | Path) -> ScorerModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a scorer checkpoint: {path}")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    return ScorerModel(
        layers=[Layer(_unpack(l["weights"]), _unpack(l["bias"]), l["activation"])
                for l in doc["layers"]],
        class_embeddings=_unpack(doc["class_embeddings"]),
        temperature=float(doc["temperature"]),
        input_shape=tuple(doc["input_shape"]),
        class_names=list(doc.get("class_names", [])),
    )

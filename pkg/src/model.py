"""
Trainable classifiers over flat parameter vectors

Two hypothesis classes are provided: multinomial logistic regression and a
one-hidden-layer tanh MLP. Both expose their parameters as a single flat
vector so aggregation never needs to know the architecture.

Author: Edgar McOchieng
"""

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from scipy.special import logsumexp

from .errors import SimulationError

MODEL_KINDS = ("logistic", "mlp")


@dataclass(frozen=True)
class ModelLayout:
    """Architecture and the shape of every parameter block in the flat vector"""

    kind: str
    n_features: int
    n_classes: int
    hidden_width: int = 0

    @property
    def shapes(self) -> Tuple[Tuple[str, Tuple[int, ...]], ...]:
        if self.kind == "logistic":
            return (("W", (self.n_features, self.n_classes)), ("b", (self.n_classes,)))
        return (
            ("W1", (self.n_features, self.hidden_width)),
            ("b1", (self.hidden_width,)),
            ("W2", (self.hidden_width, self.n_classes)),
            ("b2", (self.n_classes,)),
        )

    @property
    def size(self) -> int:
        return sum(int(np.prod(shape)) for _, shape in self.shapes)

    def unpack(self, vector: np.ndarray) -> Dict[str, np.ndarray]:
        """Views of the parameter blocks inside `vector`"""
        blocks = {}
        offset = 0
        for name, shape in self.shapes:
            n = int(np.prod(shape))
            blocks[name] = vector[offset:offset + n].reshape(shape)
            offset += n
        return blocks

    def to_dict(self) -> Dict[str, object]:
        return {"kind": self.kind, "n_features": self.n_features,
                "n_classes": self.n_classes, "hidden_width": self.hidden_width}


class ModelWeights:
    """Flat, read-only parameter vector tied to a layout"""

    __slots__ = ("layout", "vector")

    def __init__(self, layout: ModelLayout, vector):
        vector = np.array(vector, dtype=np.float64, copy=True).reshape(-1)
        if vector.size != layout.size:
            raise SimulationError(f"Weight vector has {vector.size} entries, layout needs {layout.size}")
        vector.setflags(write=False)
        self.layout = layout
        self.vector = vector

    def with_vector(self, vector) -> "ModelWeights":
        return ModelWeights(self.layout, vector)

    def blocks(self) -> Dict[str, np.ndarray]:
        return self.layout.unpack(self.vector)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.vector)))

    def __len__(self) -> int:
        return self.vector.size

    def __repr__(self) -> str:
        return f"ModelWeights(kind={self.layout.kind}, size={self.vector.size})"


def build_layout(kind: str, n_features: int, n_classes: int, hidden_width: int = 64) -> ModelLayout:
    if kind not in MODEL_KINDS:
        raise SimulationError(f"Unknown model kind '{kind}' (known: {', '.join(MODEL_KINDS)})")
    return ModelLayout(kind=kind, n_features=n_features, n_classes=n_classes,
                       hidden_width=hidden_width if kind == "mlp" else 0)


def init_weights(layout: ModelLayout, rng: np.random.Generator) -> ModelWeights:
    """Zero biases; dense weights uniform in +-1/sqrt(fan_in)"""
    vector = np.zeros(layout.size)
    blocks = layout.unpack(vector)
    for name, shape in layout.shapes:
        if len(shape) == 2:
            bound = 1.0 / np.sqrt(shape[0])
            blocks[name][...] = rng.uniform(-bound, bound, size=shape)
    return ModelWeights(layout, vector)


def log_probabilities(weights: ModelWeights, features: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax of the logits"""
    logits, _ = _forward(weights.layout, weights.vector, features)
    return logits - logsumexp(logits, axis=1, keepdims=True)


def _forward(layout: ModelLayout, vector: np.ndarray, features: np.ndarray):
    p = layout.unpack(vector)
    if layout.kind == "logistic":
        return features @ p["W"] + p["b"], None
    hidden = np.tanh(features @ p["W1"] + p["b1"])
    return hidden @ p["W2"] + p["b2"], hidden


def loss_and_gradient(layout: ModelLayout, vector: np.ndarray, features: np.ndarray,
                      labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Mean cross-entropy over the batch and its exact gradient

    Returns:
        (loss, gradient) with the gradient as a flat vector in layout order
    """
    n = len(labels)
    logits, hidden = _forward(layout, vector, features)
    log_norm = logsumexp(logits, axis=1, keepdims=True)
    log_probs = logits - log_norm
    loss = float(-log_probs[np.arange(n), labels].mean())

    # d loss / d logits = softmax - onehot, averaged over the batch
    delta = np.exp(log_probs)
    delta[np.arange(n), labels] -= 1.0
    delta /= n

    gradient = np.zeros(layout.size)
    g = layout.unpack(gradient)
    if layout.kind == "logistic":
        g["W"][...] = features.T @ delta
        g["b"][...] = delta.sum(axis=0)
    else:
        p = layout.unpack(vector)
        g["W2"][...] = hidden.T @ delta
        g["b2"][...] = delta.sum(axis=0)
        back = (delta @ p["W2"].T) * (1.0 - hidden ** 2)
        g["W1"][...] = features.T @ back
        g["b1"][...] = back.sum(axis=0)
    return loss, gradient

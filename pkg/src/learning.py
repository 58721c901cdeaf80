"""
Local training and evaluation

Clients run mini-batch momentum SGD on the cross-entropy of their shard,
starting from the current global model. The BS evaluates the global model
on its validation set.

Author: Edgar McOchieng
"""

from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np

from config.logger import get_logger
from .datasets import Dataset, DatasetShard
from .errors import DivergenceError, SimulationError
from .model import ModelWeights, log_probabilities, loss_and_gradient

logger = get_logger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """Local optimizer settings"""

    learning_rate: float = 0.01
    momentum: float = 0.5
    local_epochs: int = 1
    batch_size: int = 32

    def validate(self) -> None:
        errors = []
        if not self.learning_rate >= 0:
            errors.append(f"learning_rate must be >= 0 (got {self.learning_rate})")
        if not 0 <= self.momentum < 1:
            errors.append(f"momentum must be in [0, 1) (got {self.momentum})")
        if self.local_epochs < 1:
            errors.append(f"local_epochs must be >= 1 (got {self.local_epochs})")
        if self.batch_size < 1:
            errors.append(f"batch_size must be >= 1 (got {self.batch_size})")
        if errors:
            raise SimulationError("Invalid train config:\n  - " + "\n  - ".join(errors))


Batch = Tuple[np.ndarray, np.ndarray]


def compute_gradient(weights: ModelWeights, batch: Batch) -> np.ndarray:
    """Exact gradient of the mean cross-entropy over a non-empty batch"""
    features, labels = batch
    if len(labels) == 0:
        raise SimulationError("Cannot compute a gradient on an empty batch")
    _, gradient = loss_and_gradient(weights.layout, weights.vector, features, labels)
    return gradient


def local_train(
    global_weights: ModelWeights,
    shard: DatasetShard,
    cfg: TrainConfig,
    rng: np.random.Generator,
    epoch_losses: Optional[List[float]] = None,
) -> ModelWeights:
    """
    Run E epochs of mini-batch momentum SGD from the global model

    Args:
        global_weights: Starting point psi^(0) = g_t
        shard: Client's local data
        cfg: Optimizer settings
        rng: Generator for the per-epoch shuffles
        epoch_losses: If given, receives the full-shard loss after every epoch

    Returns:
        The client's trained weights w_{n,t}

    Raises:
        DivergenceError: If the loss or the weights become non-finite
    """
    if len(shard) == 0:
        raise SimulationError(f"Client {shard.client} has an empty shard")
    layout = global_weights.layout
    psi = np.array(global_weights.vector, copy=True)
    velocity = np.zeros_like(psi)
    n = len(shard)
    batch_size = min(cfg.batch_size, n)

    for epoch in range(cfg.local_epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            loss, gradient = loss_and_gradient(layout, psi, shard.features[idx], shard.labels[idx])
            if not np.isfinite(loss):
                raise DivergenceError(f"Client {shard.client}: non-finite loss in epoch {epoch}")
            velocity = cfg.momentum * velocity + gradient
            psi -= cfg.learning_rate * velocity
        if not np.all(np.isfinite(psi)):
            raise DivergenceError(f"Client {shard.client}: non-finite weights after epoch {epoch}")
        if epoch_losses is not None:
            epoch_losses.append(loss_and_gradient(layout, psi, shard.features, shard.labels)[0])

    return ModelWeights(layout, psi)


def evaluate(weights: ModelWeights, data: Dataset) -> Tuple[float, float]:
    """
    Mean cross-entropy and top-1 accuracy

    Returns:
        (loss, accuracy)
    """
    if len(data) == 0:
        raise SimulationError("Cannot evaluate on an empty dataset")
    log_probs = log_probabilities(weights, data.features)
    rows = np.arange(len(data))
    loss = float(-log_probs[rows, data.labels].mean())
    accuracy = float(np.mean(np.argmax(log_probs, axis=1) == data.labels))
    return loss, accuracy


def shard_loss(weights: ModelWeights, shard: DatasetShard) -> float:
    """Local objective f_n at the given weights"""
    log_probs = log_probabilities(weights, shard.features)
    return float(-log_probs[np.arange(len(shard)), shard.labels].mean())


def global_objective(weights: ModelWeights, shards: Iterable[DatasetShard]) -> float:
    """Mean of the local objectives f_n over clients"""
    losses = [shard_loss(weights, s) for s in shards]
    if not losses:
        return float("nan")
    return float(np.mean(losses))

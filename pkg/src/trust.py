"""
Client trustworthiness model

Scores are Beta(alpha, beta) draws. Clients at or above rho are fully
trusted, clients at or below kappa are malicious, everyone in between is
risky and uploads manipulated weights.

Author: Edgar McOchieng
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Protocol, Sequence

import numpy as np

from config.logger import get_logger
from .errors import TrustConfigError
from .model import ModelWeights
from .rng import substream

logger = get_logger(__name__)


class TrustCategory(str, Enum):
    FULLY_TRUSTED = "FullyTrusted"
    RISKY = "Risky"
    MALICIOUS = "Malicious"


@dataclass(frozen=True)
class TrustConfig:
    """Beta shape parameters and category thresholds"""

    alpha: float = 3.0
    beta: float = 1.0
    rho: float = 0.9
    kappa: float = 0.3
    seed: int = 0

    def validate(self) -> None:
        errors = []
        if not self.alpha > 0:
            errors.append(f"alpha must be > 0 (got {self.alpha})")
        if not self.beta > 0:
            errors.append(f"beta must be > 0 (got {self.beta})")
        if not 0 < self.rho <= 1:
            errors.append(f"rho must be in (0, 1] (got {self.rho})")
        if not 0 <= self.kappa < 1:
            errors.append(f"kappa must be in [0, 1) (got {self.kappa})")
        if not self.kappa < self.rho:
            errors.append(f"kappa ({self.kappa}) must be below rho ({self.rho})")
        if errors:
            raise TrustConfigError("Invalid trust config:\n  - " + "\n  - ".join(errors))

    @property
    def mean(self) -> float:
        return beta_mean(self.alpha, self.beta)


@dataclass(frozen=True)
class TrustProfile:
    """Trust score and category of one client"""

    client: int
    score: float
    category: TrustCategory


@dataclass(frozen=True)
class TrustPartition:
    """Disjoint client sets by category"""

    fully_trusted: tuple
    risky: tuple
    malicious: tuple

    def eligible(self) -> tuple:
        """U_F and U_R together, in client order"""
        return tuple(sorted(self.fully_trusted + self.risky))

    def counts(self) -> Dict[str, int]:
        return {
            TrustCategory.FULLY_TRUSTED.value: len(self.fully_trusted),
            TrustCategory.RISKY.value: len(self.risky),
            TrustCategory.MALICIOUS.value: len(self.malicious),
        }


def beta_mean(alpha: float, beta: float) -> float:
    """Analytic mean alpha / (alpha + beta)"""
    return alpha / (alpha + beta)


def sample_scores(cfg: TrustConfig, n: int) -> np.ndarray:
    """
    Draw n independent Beta(alpha, beta) trust scores

    Raises:
        TrustConfigError: For invalid shapes or n < 1
    """
    cfg.validate()
    if n < 1:
        raise TrustConfigError(f"Need at least one client to score (got {n})")
    return substream(cfg.seed, "trust").beta(cfg.alpha, cfg.beta, size=n)


def category_of(score: float, rho: float, kappa: float) -> TrustCategory:
    if score >= rho:
        return TrustCategory.FULLY_TRUSTED
    if score <= kappa:
        return TrustCategory.MALICIOUS
    return TrustCategory.RISKY


def categorize(scores: Sequence[float], rho: float, kappa: float) -> TrustPartition:
    """
    Split clients (indexed by position in `scores`) into U_F, U_R and U_M

    Raises:
        TrustConfigError: If kappa >= rho
    """
    if not kappa < rho:
        raise TrustConfigError(f"kappa ({kappa}) must be below rho ({rho})")
    groups: Dict[TrustCategory, List[int]] = {c: [] for c in TrustCategory}
    for client, score in enumerate(scores):
        groups[category_of(float(score), rho, kappa)].append(client)
    return TrustPartition(
        fully_trusted=tuple(groups[TrustCategory.FULLY_TRUSTED]),
        risky=tuple(groups[TrustCategory.RISKY]),
        malicious=tuple(groups[TrustCategory.MALICIOUS]),
    )


def build_profiles(scores: Sequence[float], rho: float, kappa: float) -> List[TrustProfile]:
    return [TrustProfile(client=i, score=float(s), category=category_of(float(s), rho, kappa))
            for i, s in enumerate(scores)]


def partition_summary(profiles: Sequence[TrustProfile], bins: int = 10) -> Dict[str, object]:
    """Counts per category and a score histogram over [0, 1]"""
    scores = np.array([p.score for p in profiles], dtype=float)
    histogram, _ = np.histogram(scores, bins=bins, range=(0.0, 1.0))
    counts = {c.value: 0 for c in TrustCategory}
    for p in profiles:
        counts[p.category.value] += 1
    return {
        "n_clients": len(profiles),
        "counts": counts,
        "mean_score": float(scores.mean()) if len(scores) else float("nan"),
        "histogram": histogram.tolist(),
    }


# =============================================================================
# Attack models
# =============================================================================

class AttackModel(Protocol):
    """Transforms the weights a risky client reports"""

    name: str

    def apply(self, weights: ModelWeights, score: float) -> ModelWeights:
        ...


class ScalingAttack:
    """Reports w * (1 + (1 - score) / 10); the deviation shrinks as trust grows"""

    name = "scaling"

    def apply(self, weights: ModelWeights, score: float) -> ModelWeights:
        return manipulate_weights(weights, score)


class NoAttack:
    """Reports weights unchanged"""

    name = "none"

    def apply(self, weights: ModelWeights, score: float) -> ModelWeights:
        return weights


ATTACK_MODELS = {ScalingAttack.name: ScalingAttack, NoAttack.name: NoAttack}


def make_attack(name: str) -> AttackModel:
    try:
        return ATTACK_MODELS[name]()
    except KeyError:
        raise TrustConfigError(f"Unknown attack model '{name}' (known: {', '.join(ATTACK_MODELS)})")


def manipulate_weights(weights, score: float):
    """
    Elementwise w' = w * (1 + (1 - score) / 10)

    Accepts a ModelWeights (returning a new ModelWeights) or a plain array.

    Raises:
        TrustConfigError: If score is outside [0, 1]
    """
    if not 0.0 <= score <= 1.0:
        raise TrustConfigError(f"Trust score must be in [0, 1] (got {score})")
    factor = 1.0 + (1.0 - score) / 10.0
    if isinstance(weights, ModelWeights):
        return weights.with_vector(weights.vector * factor)
    return np.asarray(weights, dtype=float) * factor

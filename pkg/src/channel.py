"""
Uplink channel model

Per-round SINR realizations under Rayleigh fading and power-law path loss,
the analytic upload success probability of a client at distance r from the
test BS, and the reciprocal debias weights used by aggregation.

The interference Laplace transform is evaluated in the dimensionless
variable v = pi * lambda * r^2, where the exponent becomes

    I(s) = integral_0^inf (1 - exp(-v)) / (1 + c * v^(eta/2)) dv,
    c = 1 / (s * P * (pi * lambda)^(eta/2))

and L(s) = exp(-I(s)).

Author: Edgar McOchieng
"""

import math
import threading
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from config.logger import get_logger
from .errors import ChannelDomainError, QuadratureError, UnreachableClientError
from .geometry import NetworkTopology

logger = get_logger(__name__)

INTEGRAL_ABS_TOL = 1e-8
DEFAULT_S_FLOOR = 1e-12
PPP_TRUNCATION_TOL = 1e-3
PPP_MAX_EXTENT = 2e5
MC_CHUNK_DRAWS = 4_000_000

INTERFERENCE_MODELS = ("topology", "ppp")


def dbm_to_watts(dbm: float) -> float:
    """Convert a power in dBm to watts"""
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db: float) -> float:
    """Convert a ratio in dB to linear units"""
    return 10.0 ** (db / 10.0)


def linear_to_db(value: float) -> float:
    """Convert a linear ratio to dB; zero maps to -inf"""
    if value < 0:
        raise ChannelDomainError(f"Cannot express a negative ratio in dB (got {value})")
    if value == 0:
        return -math.inf
    return 10.0 * math.log10(value)


@dataclass(frozen=True)
class ChannelParams:
    """Physical-layer parameters in linear units"""

    tx_power: float             # watts
    noise_power: float          # watts
    path_loss_exponent: float
    bs_density: float           # BSs per square meter

    def __post_init__(self):
        errors = []
        if not self.tx_power > 0:
            errors.append(f"tx_power must be > 0 W (got {self.tx_power})")
        if not self.noise_power >= 0:
            errors.append(f"noise_power must be >= 0 W (got {self.noise_power})")
        if not self.path_loss_exponent > 2:
            errors.append(f"path_loss_exponent must be > 2 (got {self.path_loss_exponent})")
        if not self.bs_density >= 0:
            errors.append(f"bs_density must be >= 0 (got {self.bs_density})")
        if errors:
            raise ChannelDomainError("Invalid channel parameters:\n  - " + "\n  - ".join(errors))

    @classmethod
    def from_dbm(cls, tx_power_dbm: float, noise_dbm: Optional[float], path_loss_exponent: float,
                 bs_density_per_km2: float) -> "ChannelParams":
        """Build parameters from config units; noise_dbm=None means a noiseless receiver"""
        return cls(
            tx_power=dbm_to_watts(tx_power_dbm),
            noise_power=0.0 if noise_dbm is None else dbm_to_watts(noise_dbm),
            path_loss_exponent=path_loss_exponent,
            bs_density=bs_density_per_km2 / 1e6,
        )

    @property
    def half_exponent(self) -> float:
        return self.path_loss_exponent / 2.0


@dataclass(frozen=True)
class SinrRealization:
    """SINR draws for a set of users against one threshold"""

    users: np.ndarray
    sinr: np.ndarray
    success: np.ndarray
    zeta: float


# =============================================================================
# Laplace transform of the interference
# =============================================================================

def _integrand(v: float, c: float, a: float) -> float:
    return -math.expm1(-v) / (1.0 + c * v ** a)


@lru_cache(maxsize=65_536)
def _interference_exponent(c: float, a: float) -> float:
    """Adaptive Gauss-Kronrod quadrature of I over panels split at the knee"""
    knee = c ** (-1.0 / a)
    edges = sorted({0.0, 1.0, 10.0, knee, 10.0 * knee, 1e3 * knee})
    total = 0.0
    abserr = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            for lo, hi in zip(edges[:-1], edges[1:]):
                value, err = integrate.quad(_integrand, lo, hi, args=(c, a),
                                            epsabs=1e-11, epsrel=1e-11, limit=200)
                total += value
                abserr += err
            value, err = integrate.quad(_integrand, edges[-1], np.inf, args=(c, a),
                                        epsabs=1e-11, epsrel=1e-11, limit=200)
            total += value
            abserr += err
        except integrate.IntegrationWarning as e:
            raise QuadratureError(f"Interference integral did not converge (c={c:.6g}, eta={2 * a:g}): {e}")

    if abserr > max(INTEGRAL_ABS_TOL, 1e-10 * total):
        raise QuadratureError(
            f"Interference integral error {abserr:.3g} exceeds tolerance (c={c:.6g}, eta={2 * a:g})"
        )
    return total


def _laplace_scale(s: float, params: ChannelParams) -> float:
    """The constant c of the dimensionless integrand"""
    return 1.0 / (s * params.tx_power * (math.pi * params.bs_density) ** params.half_exponent)


def interference_exponent(s: float, params: ChannelParams) -> float:
    """-log L(s); zero when s = 0 or there are no base stations"""
    if s < 0:
        raise ChannelDomainError(f"Laplace argument must be >= 0 (got {s})")
    if s == 0 or params.bs_density == 0:
        return 0.0
    c = _laplace_scale(s, params)
    if math.isinf(c):
        return 0.0
    return _interference_exponent(c, params.half_exponent)


def laplace_interference(s: float, params: ChannelParams) -> float:
    """
    Laplace transform of the uplink aggregate interference

    Args:
        s: Non-negative transform argument
        params: Channel parameters

    Returns:
        L(s) in (0, 1]

    Raises:
        ChannelDomainError: If s < 0
        QuadratureError: If the integral misses its tolerance
    """
    return math.exp(-interference_exponent(s, params))


# =============================================================================
# Success probability and debiasing
# =============================================================================

def _check_link(zeta: float, r: float) -> None:
    if not r > 0:
        raise ChannelDomainError(f"Link distance must be > 0 m (got {r})")
    if not zeta >= 0:
        raise ChannelDomainError(f"SINR threshold must be >= 0 (got {zeta})")


def _noise_exponent(zeta: float, r: float, params: ChannelParams) -> float:
    return zeta * params.noise_power * r ** params.path_loss_exponent / params.tx_power


def success_probability(zeta: float, r: float, params: ChannelParams) -> float:
    """
    Probability that an upload from distance r decodes at threshold zeta

    S = exp(-zeta N0 r^eta / P) * L(zeta r^eta / P)

    Raises:
        ChannelDomainError: If r <= 0 or zeta < 0
    """
    _check_link(zeta, r)
    if zeta == 0:
        return 1.0
    s = zeta * r ** params.path_loss_exponent / params.tx_power
    return math.exp(-_noise_exponent(zeta, r, params) - interference_exponent(s, params))


def conditional_success_probability(zeta: float, r: float, interferer_distances: Iterable[float],
                                    params: ChannelParams) -> float:
    """
    Success probability given fixed interferer positions

    With Rayleigh fading on every link,
    P(SINR > zeta | d) = exp(-zeta N0 r^eta / P) * prod_i 1 / (1 + zeta (r / d_i)^eta).
    """
    _check_link(zeta, r)
    if zeta == 0:
        return 1.0
    d = np.asarray(list(interferer_distances), dtype=float)
    log_terms = np.log1p(zeta * (r / d) ** params.path_loss_exponent).sum() if len(d) else 0.0
    return math.exp(-_noise_exponent(zeta, r, params) - float(log_terms))


def debias_weight(zeta: float, r: float, params: ChannelParams, floor: float = DEFAULT_S_FLOOR) -> float:
    """
    Reciprocal success probability 1/S used to amplify a client's update

    Raises:
        UnreachableClientError: If S falls below `floor`
    """
    return weight_from_probability(success_probability(zeta, r, params), floor)


def weight_from_probability(probability: float, floor: float = DEFAULT_S_FLOOR) -> float:
    if probability < floor:
        raise UnreachableClientError(
            f"Success probability {probability:.3g} is below the floor {floor:.3g}; client unreachable"
        )
    return 1.0 / probability


class SuccessProbabilityCache:
    """
    Memoized success probabilities keyed by (threshold, client)

    Safe to share between the threads of one round.
    """

    def __init__(self, params: ChannelParams, floor: float = DEFAULT_S_FLOOR):
        self.params = params
        self.floor = floor
        self._values: Dict[Tuple, float] = {}
        self._lock = threading.Lock()
        self.stats = {"hits": 0, "misses": 0}

    def _lookup(self, key: Tuple, compute) -> float:
        with self._lock:
            if key in self._values:
                self.stats["hits"] += 1
                return self._values[key]
        value = compute()
        with self._lock:
            self._values[key] = value
            self.stats["misses"] += 1
        return value

    def probability(self, zeta: float, r: float) -> float:
        return self._lookup(("analytic", zeta, r), lambda: success_probability(zeta, r, self.params))

    def conditional_probability(self, zeta: float, client: int, r: float, interferers: Sequence[float]) -> float:
        return self._lookup(
            ("conditional", zeta, client),
            lambda: conditional_success_probability(zeta, r, interferers, self.params),
        )

    def weight(self, probability: float) -> float:
        return weight_from_probability(probability, self.floor)

    def __len__(self) -> int:
        return len(self._values)


# =============================================================================
# Interference sampling and SINR draws
# =============================================================================

def ppp_extent(zeta: float, r: float, params: ChannelParams, tol: float = PPP_TRUNCATION_TOL) -> float:
    """
    Truncation of the interferer field in v = pi lambda d^2 units

    The omitted far field beyond V contributes at most V^(1-a) / (c (a-1))
    to the interference exponent; V is the smallest value for which that
    bound shifts the success probability by less than `tol`.
    """
    _check_link(zeta, r)
    if zeta == 0 or params.bs_density == 0:
        return 0.0
    a = params.half_exponent
    s = zeta * r ** params.path_loss_exponent / params.tx_power
    c = _laplace_scale(s, params)
    log_s = -_noise_exponent(zeta, r, params) - interference_exponent(s, params)
    tail_max = float(np.logaddexp(0.0, math.log(tol) - log_s))
    extent = (c * (a - 1.0) * tail_max) ** (-1.0 / (a - 1.0))
    if extent > PPP_MAX_EXTENT:
        logger.debug(f"Capping interferer field extent {extent:.3g} at {PPP_MAX_EXTENT:.3g}")
        extent = PPP_MAX_EXTENT
    return max(extent, 1.0)


def sample_ppp_interference(extent: float, params: ChannelParams, rng: np.random.Generator,
                            size: int) -> np.ndarray:
    """
    Aggregate interference at the test BS for `size` independent fields

    Interferers form a point process of intensity lambda (1 - exp(-pi lambda d^2)),
    each with an independent unit-mean exponential fading gain.
    """
    if extent <= 0 or params.bs_density == 0:
        return np.zeros(size)
    counts = rng.poisson(extent, size=size)
    total = int(counts.sum())
    v = rng.uniform(0.0, extent, size=total)
    kept = rng.random(total) < -np.expm1(-v)
    gains = rng.exponential(1.0, size=total)
    with np.errstate(divide="ignore"):
        path_gain = (v / (math.pi * params.bs_density)) ** (-params.half_exponent)
    contributions = np.where(kept, params.tx_power * gains * path_gain, 0.0)
    owners = np.repeat(np.arange(size), counts)
    return np.bincount(owners, weights=contributions, minlength=size)


def _sinr(signal: np.ndarray, noise: float, interference: np.ndarray) -> np.ndarray:
    denominator = noise + interference
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr = np.where(denominator > 0, signal / np.where(denominator > 0, denominator, 1.0), np.inf)
    return sinr


def draw_sinr(
    topology: NetworkTopology,
    params: ChannelParams,
    rng: np.random.Generator,
    zeta: float = 0.0,
    users: Optional[Sequence[int]] = None,
    interference: str = "topology",
) -> SinrRealization:
    """
    Draw one SINR realization per test-cell user

    Args:
        topology: Network layout; users are measured against the test BS
        params: Channel parameters
        rng: Generator supplying every fading gain (and interferer field in ppp mode)
        zeta: Linear decode threshold; success iff SINR > zeta
        users: User indices to draw for (defaults to the whole test cell)
        interference: "topology" sums same-RB users of the layout,
                      "ppp" draws a fresh interferer field per user

    Returns:
        SinrRealization for the requested users
    """
    if interference not in INTERFERENCE_MODELS:
        raise ChannelDomainError(f"Unknown interference model: {interference}")
    users = topology.test_cell_users() if users is None else np.asarray(users, dtype=np.int64)
    distances = topology.distances[users]
    eta = params.path_loss_exponent

    gains = np.asarray(rng.exponential(1.0, size=len(users)), dtype=float)
    signal = params.tx_power * gains * distances ** (-eta)

    interference_power = np.zeros(len(users))
    for i, user in enumerate(users):
        if interference == "topology":
            d = topology.interferer_distances(int(topology.rb_assignment[user]))
            if len(d):
                g = np.asarray(rng.exponential(1.0, size=len(d)), dtype=float)
                interference_power[i] = float(np.sum(params.tx_power * g * d ** (-eta)))
        else:
            extent = ppp_extent(zeta, float(distances[i]), params)
            interference_power[i] = sample_ppp_interference(extent, params, rng, 1)[0]

    sinr = _sinr(signal, params.noise_power, interference_power)
    return SinrRealization(users=users, sinr=sinr, success=sinr > zeta, zeta=zeta)


def sample_success(zeta: float, r: float, params: ChannelParams, rng: np.random.Generator,
                   size: int, tol: float = PPP_TRUNCATION_TOL) -> np.ndarray:
    """
    Independent decode outcomes for a client at distance r, averaging over the PPP

    Each outcome redraws the interferer field and all fading gains.
    """
    _check_link(zeta, r)
    extent = ppp_extent(zeta, r, params, tol)
    chunk = max(1, int(MC_CHUNK_DRAWS // max(extent, 1.0)))
    outcomes = []
    for start in range(0, size, chunk):
        m = min(chunk, size - start)
        interference = sample_ppp_interference(extent, params, rng, m)
        signal = params.tx_power * rng.exponential(1.0, size=m) * r ** (-params.path_loss_exponent)
        outcomes.append(_sinr(signal, params.noise_power, interference) > zeta)
    return np.concatenate(outcomes) if outcomes else np.zeros(0, dtype=bool)


def monte_carlo_success_probability(zeta: float, r: float, params: ChannelParams,
                                    n_samples: int, rng: np.random.Generator) -> float:
    """Empirical P(SINR > zeta) over n_samples independent interferer fields"""
    return float(np.mean(sample_success(zeta, r, params, rng, n_samples)))

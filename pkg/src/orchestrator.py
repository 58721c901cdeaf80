"""
Round orchestration

Runs the dynamic-threshold federated training loop: every round the
eligible clients train locally from the global model, risky clients report
manipulated weights, uploads are decoded against the round's SINR
threshold, and the BS folds the decoded updates into the global model with
1/S debiasing. In the risk-aware case the BS watches its validation
accuracy and permanently drops risky clients once accuracy falls below
every value in the trust window.

Author: Edgar McOchieng
"""

import contextvars
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Deque, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from config.logger import get_logger, run_context
from config.settings import Config
from .channel import (
    ChannelParams,
    SuccessProbabilityCache,
    db_to_linear,
    draw_sinr,
)
from .datasets import Dataset, DatasetShard, load_dataset, partition as partition_dataset
from .errors import AggregationError, SimulationError, UnreachableClientError
from .experiment import ExperimentConfig
from .geometry import NetworkTopology, generate_topology
from .learning import evaluate, global_objective, local_train
from .model import ModelLayout, ModelWeights, build_layout, init_weights
from .rng import substream
from .trust import (
    AttackModel,
    TrustPartition,
    TrustProfile,
    build_profiles,
    categorize,
    make_attack,
    partition_summary,
    sample_scores,
)

logger = get_logger(__name__)


class ExperimentCase(str, Enum):
    RISK_AWARE = "A_RiskAware"
    RISK_AGNOSTIC = "B_RiskAgnostic"
    CONSERVATIVE = "C_Conservative"

    @property
    def letter(self) -> str:
        return self.value[0]

    @classmethod
    def parse(cls, label: str) -> "ExperimentCase":
        """Accept 'A', 'a', 'A_RiskAware' and so on"""
        for case in cls:
            if label.upper() == case.letter or label == case.value:
                return case
        raise SimulationError(f"Unknown case '{label}' (known: A, B, C)")


class Mode(str, Enum):
    RISK_AGNOSTIC = "RiskAgnostic"
    TRUSTED_ONLY = "TrustedOnly"


# =============================================================================
# Threshold schedule
# =============================================================================

@dataclass(frozen=True)
class SinrSchedule:
    """Per-round decode thresholds, stored in dB with linear views"""

    thresholds_db: Tuple[float, ...]

    def __post_init__(self):
        if any(b > a for a, b in zip(self.thresholds_db, self.thresholds_db[1:])):
            raise SimulationError("SINR thresholds must be non-increasing over rounds")

    @property
    def rounds(self) -> int:
        return len(self.thresholds_db)

    @property
    def thresholds(self) -> Tuple[float, ...]:
        return tuple(db_to_linear(z) for z in self.thresholds_db)

    def zeta(self, t: int) -> float:
        return db_to_linear(self.thresholds_db[t])


def make_schedule(start_db: float, end_db: float, step_db: float, rounds: int) -> SinrSchedule:
    """
    Ramp from start_db down to end_db by step_db per round, then hold end_db

    Raises:
        SimulationError: If rounds < 1, start_db < end_db or step_db <= 0
    """
    if rounds < 1:
        raise SimulationError(f"A schedule needs at least one round (got {rounds})")
    if start_db < end_db:
        raise SimulationError(f"start_db ({start_db}) must be >= end_db ({end_db})")
    if not step_db > 0:
        raise SimulationError(f"step_db must be > 0 (got {step_db})")
    return SinrSchedule(tuple(max(start_db - t * step_db, end_db) for t in range(rounds)))


# =============================================================================
# Aggregation
# =============================================================================

@dataclass(frozen=True)
class Upload:
    """One participant's report for a round"""

    client: int
    weights: ModelWeights
    success: bool
    debias_weight: Optional[float]
    n_samples: int = 1


AGGREGATION_NORMALIZERS = ("participants", "received")


def aggregate(
    global_weights: ModelWeights,
    uploads: Sequence[Upload],
    participant_count: int,
    normalize: str = "participants",
    weight_by_data_size: bool = False,
) -> ModelWeights:
    """
    Debiased global update

        g' = g + (1/U') * sum_n 1{success_n} / S_n * (w_n - g)

    Failed uploads and uploads without a debias weight contribute nothing.

    Args:
        global_weights: Current global model g_t
        uploads: Reports of the participants, one per client
        participant_count: U', the number of clients that attempted an upload
        normalize: "participants" divides by U', "received" by the number of decoded uploads
        weight_by_data_size: Scale each term by U' * D_n / sum(D) over the participants

    Raises:
        AggregationError: If U' is zero or smaller than the number of uploads
    """
    if participant_count < 1:
        raise AggregationError("Cannot aggregate a round without participants")
    if len(uploads) > participant_count:
        raise AggregationError(f"{len(uploads)} uploads for {participant_count} participants")
    if normalize not in AGGREGATION_NORMALIZERS:
        raise AggregationError(f"Unknown normalization '{normalize}'")

    received = sorted((u for u in uploads if u.success and u.debias_weight is not None),
                      key=lambda u: u.client)
    if not received:
        return global_weights

    total_samples = sum(u.n_samples for u in uploads)
    g = global_weights.vector
    delta = np.zeros_like(g)
    for upload in received:
        coefficient = upload.debias_weight
        if weight_by_data_size:
            coefficient *= participant_count * upload.n_samples / total_samples
        delta += coefficient * (upload.weights.vector - g)

    denominator = participant_count if normalize == "participants" else len(received)
    updated = global_weights.with_vector(g + delta / denominator)
    if not updated.is_finite():
        raise AggregationError("Aggregated global model is not finite")
    return updated


# =============================================================================
# Trust window
# =============================================================================

@dataclass
class TrustWindowState:
    """The mu most recent validation accuracies and whether the switch happened"""

    window: int
    history: Deque[float] = field(default_factory=deque)
    transitioned: bool = False

    def __post_init__(self):
        if self.window < 1:
            raise SimulationError(f"Trust window must be >= 1 (got {self.window})")
        self.history = deque(self.history, maxlen=self.window)

    def record(self, accuracy: float) -> None:
        self.history.append(float(accuracy))

    def mark_transitioned(self) -> None:
        self.transitioned = True


def trust_window_check(state: TrustWindowState, new_accuracy: float) -> bool:
    """True iff new_accuracy is strictly below each of the last mu accuracies"""
    if len(state.history) < state.window:
        return False
    return all(new_accuracy < previous for previous in state.history)


# =============================================================================
# Records and state
# =============================================================================

@dataclass(frozen=True)
class RoundRecord:
    """Outcome of one communication round"""

    t: int
    zeta_db: float
    mode: str
    participants: Tuple[int, ...]
    successes: Tuple[int, ...]
    weights: Tuple[Optional[float], ...]
    probabilities: Tuple[float, ...]
    loss: float
    accuracy: float
    global_objective: Optional[float] = None

    def __post_init__(self):
        if not set(self.successes) <= set(self.participants):
            raise SimulationError(f"Round {self.t}: successes are not a subset of participants")
        if len(self.weights) != len(self.participants) or len(self.probabilities) != len(self.participants):
            raise SimulationError(f"Round {self.t}: one weight and probability per participant required")
        if any(w is not None and w < 1.0 for w in self.weights):
            raise SimulationError(f"Round {self.t}: debias weights must be >= 1")

    @property
    def n_participants(self) -> int:
        return len(self.participants)

    @property
    def n_success(self) -> int:
        return len(self.successes)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t": self.t,
            "zeta_db": self.zeta_db,
            "mode": self.mode,
            "participants": list(self.participants),
            "successes": list(self.successes),
            "weights": list(self.weights),
            "probabilities": list(self.probabilities),
            "loss": self.loss,
            "accuracy": self.accuracy,
            "global_objective": self.global_objective,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RoundRecord":
        return cls(
            t=int(data["t"]),
            zeta_db=float(data["zeta_db"]),
            mode=str(data["mode"]),
            participants=tuple(int(c) for c in data["participants"]),
            successes=tuple(int(c) for c in data["successes"]),
            weights=tuple(None if w is None else float(w) for w in data["weights"]),
            probabilities=tuple(float(p) for p in data["probabilities"]),
            loss=float(data["loss"]),
            accuracy=float(data["accuracy"]),
            global_objective=None if data.get("global_objective") is None else float(data["global_objective"]),
        )


@dataclass(frozen=True, eq=False)
class ExperimentWorld:
    """Everything the three cases share: layout, trust, data, schedule, initial model"""

    config: ExperimentConfig
    topology: NetworkTopology
    params: ChannelParams
    client_users: np.ndarray
    profiles: Tuple[TrustProfile, ...]
    trust: TrustPartition
    shards: Dict[int, DatasetShard]
    validation: Dataset
    layout: ModelLayout
    initial_weights: ModelWeights
    schedule: SinrSchedule
    cache: SuccessProbabilityCache

    @property
    def n_clients(self) -> int:
        return len(self.client_users)

    def distance(self, client: int) -> float:
        return float(self.topology.distances[self.client_users[client]])

    def interferers(self, client: int) -> np.ndarray:
        user = self.client_users[client]
        return self.topology.interferer_distances(int(self.topology.rb_assignment[user]))


@dataclass
class ExperimentState:
    """Mutable per-case state carried from round to round"""

    world: ExperimentWorld
    case: ExperimentCase
    weights: ModelWeights
    window: TrustWindowState
    attack: AttackModel
    mode: Mode = Mode.RISK_AGNOSTIC
    transition_round: Optional[int] = None
    stats: Dict[str, Any] = field(default_factory=lambda: {
        "rounds": 0,
        "uploads": 0,
        "decoded": 0,
        "dropped_unreachable": 0,
        "start_time": None,
        "end_time": None,
    })

    def eligible(self) -> Tuple[int, ...]:
        """Participant set for the next round; malicious clients are never eligible"""
        if self.case is ExperimentCase.CONSERVATIVE or self.mode is Mode.TRUSTED_ONLY:
            return tuple(sorted(self.world.trust.fully_trusted))
        return self.world.trust.eligible()


def resolve_dataset_source(source: str) -> str:
    """'mnist' maps to Config.DATA_DIR; anything else is passed through"""
    return Config.DATA_DIR if source == "mnist" else source


def prepare_experiment(config: ExperimentConfig) -> ExperimentWorld:
    """
    Build the shared world of an experiment

    Args:
        config: Validated experiment config

    Returns:
        ExperimentWorld with topology, trust profiles, client shards,
        validation set, schedule and the initial global model
    """
    config.validate()
    topology = generate_topology(config.geometry_config())
    params = config.channel_params()
    client_users = topology.test_cell_users()
    n_clients = len(client_users)

    trust_cfg = config.trust_config()
    scores = sample_scores(trust_cfg, n_clients)
    profiles = tuple(build_profiles(scores, config.rho, config.kappa))
    trust = categorize(scores, config.rho, config.kappa)

    train, validation = load_dataset(
        resolve_dataset_source(config.dataset),
        seed=config.seed,
        validation_fraction=config.validation_fraction,
        synthetic=config.synthetic_options() if config.dataset == "synthetic" else None,
    )
    shards = partition_dataset(train, range(n_clients), mode=config.partition, seed=config.seed,
                               alpha_dir=config.dirichlet_alpha)

    layout = build_layout(config.model, train.n_features, train.n_classes, config.hidden_width)
    initial = init_weights(layout, substream(config.seed, "init"))
    schedule = make_schedule(config.zeta_start_db, config.zeta_end_db, config.zeta_step_db, config.rounds)

    world = ExperimentWorld(
        config=config,
        topology=topology,
        params=params,
        client_users=client_users,
        profiles=profiles,
        trust=trust,
        shards=shards,
        validation=validation,
        layout=layout,
        initial_weights=initial,
        schedule=schedule,
        cache=SuccessProbabilityCache(params, config.s_floor),
    )
    _log_world(world)
    return world


def _log_world(world: ExperimentWorld) -> None:
    summary = partition_summary(world.profiles)
    interferers = sum(len(world.interferers(c)) for c in range(world.n_clients))
    logger.info("=" * 80)
    logger.info("EXPERIMENT SETUP")
    logger.info("=" * 80)
    logger.info(f"Config hash: {world.config.hash()}  seed: {world.config.seed}")
    logger.info(f"Base stations: {world.topology.n_bs}  users: {world.topology.n_users}  "
                f"test-cell clients: {world.n_clients}  same-RB interferers: {interferers}")
    logger.info(f"Trust categories: {summary['counts']}  mean score: {summary['mean_score']:.4f}")
    logger.info(f"Trust histogram (10 bins over [0, 1]): {summary['histogram']}")
    logger.info(f"Shard sizes: {[len(world.shards[c]) for c in range(world.n_clients)]}")
    logger.info(f"Validation examples: {len(world.validation)}  model: {world.layout.kind} "
                f"({world.layout.size} parameters)")
    logger.info(f"Schedule: {world.schedule.thresholds_db[0]} dB -> {world.schedule.thresholds_db[-1]} dB "
                f"over {world.schedule.rounds} rounds")
    logger.info("=" * 80)


def init_state(world: ExperimentWorld, case: ExperimentCase) -> ExperimentState:
    return ExperimentState(
        world=world,
        case=case,
        weights=world.initial_weights,
        window=TrustWindowState(world.config.trust_window),
        attack=make_attack(world.config.attack),
    )


# =============================================================================
# Rounds
# =============================================================================

def _client_update(state: ExperimentState, t: int, zeta: float, client: int) -> Tuple[ModelWeights, bool]:
    """Local training, manipulation if risky, and the uplink decode for one client"""
    world = state.world
    config = world.config
    trained = local_train(state.weights, world.shards[client], config.train_config(),
                          substream(config.seed, "train", t, client))
    if client in world.trust.risky:
        trained = state.attack.apply(trained, world.profiles[client].score)
    realization = draw_sinr(world.topology, world.params, substream(config.seed, "fading", t, client),
                            zeta=zeta, users=[int(world.client_users[client])],
                            interference=config.interference)
    return trained, bool(realization.success[0])


def _success_probability(world: ExperimentWorld, zeta: float, client: int) -> float:
    if world.config.debias == "conditional":
        return world.cache.conditional_probability(zeta, int(world.client_users[client]),
                                                   world.distance(client), world.interferers(client))
    return world.cache.probability(zeta, world.distance(client))


def _map_clients(fn, clients: Sequence[int], workers: int) -> List:
    if workers <= 1 or len(clients) <= 1:
        return [fn(c) for c in clients]
    # worker threads do not inherit contextvars
    context = contextvars.copy_context()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: context.copy().run(fn, c), clients))


def run_round(state: ExperimentState, t: int, workers: Optional[int] = None) -> Tuple[ExperimentState, RoundRecord]:
    """
    Execute communication round t

    Results do not depend on `workers`: every client draws from its own
    substreams and uploads are combined in client order.

    Returns:
        (state, record) with state updated in place

    Raises:
        DivergenceError: Propagated from local training
        AggregationError: If the participant set is empty
        UnreachableClientError: If a decoded upload cannot be debiased and unreachable = "error"
    """
    world = state.world
    config = world.config
    workers = config.workers if workers is None else workers
    zeta_db = world.schedule.thresholds_db[t]
    zeta = world.schedule.zeta(t)
    mode = state.mode

    participants = state.eligible()
    if not participants:
        raise AggregationError(f"Round {t}: no eligible participants ({state.case.value}, {mode.value})")

    results = _map_clients(lambda c: _client_update(state, t, zeta, c), participants, workers)
    probabilities = [_success_probability(world, zeta, c) for c in participants]

    uploads = []
    weights: List[Optional[float]] = []
    for client, (trained, success), probability in zip(participants, results, probabilities):
        try:
            weight = world.cache.weight(probability)
        except UnreachableClientError:
            weight = None
            if success:
                if config.unreachable == "error":
                    raise UnreachableClientError(
                        f"Round {t}: client {client} decoded with S={probability:.3g} below s_floor"
                    )
                state.stats["dropped_unreachable"] += 1
                logger.warning(f"Round {t}: dropping decoded upload of client {client} "
                               f"(S={probability:.3g} below s_floor)")
        weights.append(weight)
        uploads.append(Upload(client=client, weights=trained, success=success, debias_weight=weight,
                              n_samples=len(world.shards[client])))
        logger.debug(f"Round {t}: client {client} r={world.distance(client):.1f} m "
                     f"S={probability:.4f} success={success}")

    state.weights = aggregate(state.weights, uploads, len(participants), normalize=config.normalize,
                              weight_by_data_size=config.weight_by_data_size)
    loss, accuracy = evaluate(state.weights, world.validation)
    objective = None
    if config.track_global_objective:
        objective = global_objective(state.weights, [world.shards[c] for c in range(world.n_clients)])

    if state.case is ExperimentCase.RISK_AWARE and not state.window.transitioned:
        if trust_window_check(state.window, accuracy):
            state.window.mark_transitioned()
            state.mode = Mode.TRUSTED_ONLY
            state.transition_round = t
            logger.warning(f"Round {t}: accuracy {accuracy:.4f} fell below the last {state.window.window} "
                           f"rounds; continuing with fully trusted clients only")
    state.window.record(accuracy)

    successes = tuple(u.client for u in uploads if u.success)
    state.stats["rounds"] += 1
    state.stats["uploads"] += len(uploads)
    state.stats["decoded"] += len(successes)

    record = RoundRecord(
        t=t,
        zeta_db=float(zeta_db),
        mode=mode.value,
        participants=tuple(participants),
        successes=successes,
        weights=tuple(weights),
        probabilities=tuple(float(p) for p in probabilities),
        loss=loss,
        accuracy=accuracy,
        global_objective=objective,
    )
    logger.info(f"[{state.case.letter}] t={t} zeta={zeta_db:.2f} dB mode={mode.value} "
                f"participants={record.n_participants} success={record.n_success} "
                f"loss={loss:.4f} acc={accuracy:.4f}")
    return state, record


def run_experiment(
    config: ExperimentConfig,
    case: ExperimentCase,
    world: Optional[ExperimentWorld] = None,
    show_progress: Optional[bool] = None,
    workers: Optional[int] = None,
) -> List[RoundRecord]:
    """
    Run all rounds of one case

    Args:
        config: Validated experiment config
        case: Which participation policy to run
        world: Shared world from prepare_experiment (built from config if omitted)
        show_progress: Show a tqdm bar (defaults to Config.SHOW_PROGRESS)
        workers: Intra-round parallelism (defaults to config.workers)

    Returns:
        One RoundRecord per round, in order

    Raises:
        SimulationError: If world was prepared from a different config
    """
    if world is None:
        world = prepare_experiment(config)
    elif world.config != config:
        raise SimulationError(
            f"World was prepared from config {world.config.hash()} but the run asked for {config.hash()}"
        )
    state = init_state(world, case)
    show_progress = Config.SHOW_PROGRESS if show_progress is None else show_progress
    state.stats["start_time"] = datetime.now()

    rounds = range(world.schedule.rounds)
    iterator = tqdm(rounds, desc=f"Case {case.letter}", unit="round") if show_progress else rounds
    records = []
    with run_context(case.value, world.config.hash()):
        for t in iterator:
            _, record = run_round(state, t, workers=workers)
            records.append(record)

        state.stats["end_time"] = datetime.now()
        _print_summary(state, records)
    return records


def _print_summary(state: ExperimentState, records: Sequence[RoundRecord]) -> None:
    duration = (state.stats["end_time"] - state.stats["start_time"]).total_seconds()
    final = records[-1]
    logger.info("=" * 80)
    logger.info(f"RUN SUMMARY: {state.case.value}")
    logger.info("=" * 80)
    logger.info(f"Rounds: {state.stats['rounds']}")
    logger.info(f"Uploads decoded: {state.stats['decoded']} / {state.stats['uploads']}")
    if state.stats["dropped_unreachable"]:
        logger.info(f"Dropped unreachable uploads: {state.stats['dropped_unreachable']}")
    logger.info(f"Transition round: {state.transition_round if state.transition_round is not None else 'none'}")
    logger.info(f"Final loss: {final.loss:.4f}  final accuracy: {final.accuracy:.4f}")
    logger.info(f"Success probability cache: {state.world.cache.stats}")
    logger.info(f"Duration: {duration:.2f} seconds")
    logger.info("=" * 80)

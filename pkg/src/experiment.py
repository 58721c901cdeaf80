"""
Experiment configuration

An experiment is described by one flat JSON object. Every key is
documented in DEFAULTS / FIELD_DOCS below (and in docs/CONFIG.md); unknown
keys are rejected with suggestions so that typos never silently fall back
to defaults.

Author: Edgar McOchieng
"""

import difflib
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional

from config.settings import ConfigValidationError
from .channel import INTERFERENCE_MODELS, ChannelParams
from .datasets import PARTITION_MODES
from .errors import SimulationError
from .geometry import GeometryConfig
from .learning import TrainConfig
from .model import MODEL_KINDS
from .trust import ATTACK_MODELS, TrustConfig

DEBIAS_MODES = ("analytic", "conditional")
NORMALIZE_MODES = ("participants", "received")
UNREACHABLE_POLICIES = ("drop", "error")

REQUIRED_KEYS = ("trust_window",)


def _opt(default, doc: str, choices: Optional[tuple] = None):
    return field(default=default, metadata={"doc": doc, "choices": choices})


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment parameters"""

    # Run
    seed: int = _opt(0, "Root seed; every random substream derives from it")
    rounds: int = _opt(150, "Number of communication rounds T")
    trust_window: int = _opt(5, "Trust window mu (required in config files)")
    workers: int = _opt(1, "Parallel lanes for client training and channel draws within a round")
    output_dir: str = _opt("runs", "Directory for run logs")
    track_global_objective: bool = _opt(True, "Record the mean client objective every round")

    # Geometry
    lambda_per_km2: float = _opt(50.0, "Base-station density in BSs per square kilometre")
    area_side_m: float = _opt(10_000.0, "Side of the square simulation area in meters")
    n_users_per_test_cell: int = _opt(30, "Clients placed in the test cell")
    n_rb: int = _opt(30, "Resource blocks per base station")
    rb_activity: float = _opt(1.0, "Probability an interfering cell occupies a given RB")

    # Channel
    tx_power_dbm: float = _opt(10.0, "Uplink transmit power in dBm")
    noise_dbm: float = _opt(-100.0, "Receiver noise power in dBm")
    path_loss_exponent: float = _opt(4.0, "Path-loss exponent eta (> 2)")
    interference: str = _opt("topology", "Interference source for round draws", INTERFERENCE_MODELS)
    debias: str = _opt("analytic", "Success probability used for debiasing", DEBIAS_MODES)
    s_floor: float = _opt(1e-12, "Smallest success probability that can be debiased")
    unreachable: str = _opt("drop", "What to do with a decoded upload whose S is below s_floor",
                            UNREACHABLE_POLICIES)

    # Trust
    trust_alpha: float = _opt(3.0, "Beta shape alpha of the trust score")
    trust_beta: float = _opt(1.0, "Beta shape beta of the trust score")
    rho: float = _opt(0.9, "Fully-trusted threshold (score >= rho)")
    kappa: float = _opt(0.3, "Malicious threshold (score <= kappa)")
    attack: str = _opt("scaling", "Weight manipulation applied by risky clients", tuple(ATTACK_MODELS))

    # Training
    model: str = _opt("logistic", "Hypothesis class", MODEL_KINDS)
    hidden_width: int = _opt(64, "Hidden units of the MLP")
    learning_rate: float = _opt(0.01, "Local SGD step size gamma")
    momentum: float = _opt(0.5, "Local SGD momentum")
    local_epochs: int = _opt(1, "Local epochs E per round")
    batch_size: int = _opt(32, "Local mini-batch size")

    # Schedule
    zeta_start_db: float = _opt(10.0, "First-round SINR threshold in dB")
    zeta_end_db: float = _opt(0.0, "Final SINR threshold in dB")
    zeta_step_db: float = _opt(0.25, "Per-round threshold decrement in dB")

    # Aggregation
    normalize: str = _opt("participants", "Divide the update by all participants or by decoded uploads",
                          NORMALIZE_MODES)
    weight_by_data_size: bool = _opt(False, "Scale each client term by its share of the participants' data")

    # Data
    dataset: str = _opt("synthetic", "'synthetic', 'mnist' (IDX files under DATA_DIR) or a directory holding MNIST IDX files")
    validation_fraction: float = _opt(0.1, "Share of the data held out as the BS validation set")
    partition: str = _opt("iid", "Client data split", PARTITION_MODES)
    dirichlet_alpha: float = _opt(0.5, "Concentration of the Dirichlet split")
    synthetic_samples: int = _opt(6000, "Examples in the synthetic dataset")
    synthetic_features: int = _opt(20, "Feature dimension of the synthetic dataset")
    synthetic_classes: int = _opt(10, "Classes in the synthetic dataset")
    synthetic_cluster_std: float = _opt(1.5, "Within-class standard deviation of the synthetic blobs")
    synthetic_class_sep: float = _opt(1.0, "Spread of the synthetic class centres")

    # ------------------------------------------------------------------
    # Module configs
    # ------------------------------------------------------------------

    def geometry_config(self) -> GeometryConfig:
        return GeometryConfig(
            bs_density=self.lambda_per_km2 / 1e6,
            area_side=self.area_side_m,
            n_users_per_test_cell=self.n_users_per_test_cell,
            n_rb=self.n_rb,
            seed=self.seed,
            rb_activity=self.rb_activity,
        )

    def channel_params(self) -> ChannelParams:
        return ChannelParams.from_dbm(self.tx_power_dbm, self.noise_dbm, self.path_loss_exponent,
                                      self.lambda_per_km2)

    def trust_config(self) -> TrustConfig:
        return TrustConfig(alpha=self.trust_alpha, beta=self.trust_beta, rho=self.rho,
                           kappa=self.kappa, seed=self.seed)

    def train_config(self) -> TrainConfig:
        return TrainConfig(learning_rate=self.learning_rate, momentum=self.momentum,
                           local_epochs=self.local_epochs, batch_size=self.batch_size)

    def synthetic_options(self) -> Dict[str, Any]:
        return {
            "n": self.synthetic_samples,
            "n_features": self.synthetic_features,
            "n_classes": self.synthetic_classes,
            "cluster_std": self.synthetic_cluster_std,
            "class_sep": self.synthetic_class_sep,
        }

    # ------------------------------------------------------------------
    # Serialization
    # ------------------------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], require: tuple = ()) -> "ExperimentConfig":
        """Build and validate a config from a flat mapping"""
        if not isinstance(data, dict):
            raise ConfigValidationError("Configuration must be a JSON object of key/value pairs")
        errors = _check_keys(data, require) + _check_types(data)
        if errors:
            raise ConfigValidationError("Configuration validation failed:\n  - " + "\n  - ".join(errors))
        config = cls(**{k: (float(v) if _kind(k) is float else v) for k, v in data.items()})
        config.validate()
        return config

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """Copy with some keys replaced (None values are ignored), revalidated"""
        updated = replace(self, **{k: v for k, v in overrides.items() if v is not None})
        updated.validate()
        return updated

    def hash(self) -> str:
        """Short digest of the canonical JSON form"""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]

    # ------------------------------------------------------------------
    # Validation
    # ------------------------------------------------------------------

    def validate(self) -> bool:
        """
        Check every module invariant

        Raises:
            ConfigValidationError: Listing every problem with its key
        """
        errors: List[str] = []

        for f in fields(self):
            choices = f.metadata.get("choices")
            if choices and getattr(self, f.name) not in choices:
                errors.append(f"{f.name}: '{getattr(self, f.name)}' is not one of {', '.join(choices)}")

        if self.rounds < 1:
            errors.append(f"rounds: must be >= 1 (got {self.rounds})")
        if self.trust_window < 1:
            errors.append(f"trust_window: must be >= 1 (got {self.trust_window})")
        if self.workers < 1:
            errors.append(f"workers: must be >= 1 (got {self.workers})")
        if self.seed < 0 or self.seed >= 2 ** 64:
            errors.append(f"seed: must be an unsigned 64-bit integer (got {self.seed})")

        if not self.lambda_per_km2 > 0:
            errors.append(f"lambda_per_km2: must be > 0 (got {self.lambda_per_km2})")
        if not self.area_side_m > 0:
            errors.append(f"area_side_m: must be > 0 (got {self.area_side_m})")
        if self.n_rb < 1:
            errors.append(f"n_rb: must be >= 1 (got {self.n_rb})")
        if self.n_users_per_test_cell < 1:
            errors.append(f"n_users_per_test_cell: must be >= 1 (got {self.n_users_per_test_cell})")
        if self.n_users_per_test_cell > self.n_rb:
            errors.append(
                f"n_users_per_test_cell ({self.n_users_per_test_cell}) must not exceed n_rb ({self.n_rb})"
            )
        if not 0 <= self.rb_activity <= 1:
            errors.append(f"rb_activity: must be in [0, 1] (got {self.rb_activity})")

        if not self.path_loss_exponent > 2:
            errors.append(f"path_loss_exponent: must be > 2 (got {self.path_loss_exponent})")
        if not 0 < self.s_floor < 1:
            errors.append(f"s_floor: must be in (0, 1) (got {self.s_floor})")

        if not self.trust_alpha > 0:
            errors.append(f"trust_alpha: must be > 0 (got {self.trust_alpha})")
        if not self.trust_beta > 0:
            errors.append(f"trust_beta: must be > 0 (got {self.trust_beta})")
        if not 0 < self.rho <= 1:
            errors.append(f"rho: must be in (0, 1] (got {self.rho})")
        if not 0 <= self.kappa < 1:
            errors.append(f"kappa: must be in [0, 1) (got {self.kappa})")
        if not self.kappa < self.rho:
            errors.append(f"kappa ({self.kappa}) must be below rho ({self.rho})")

        if self.hidden_width < 1:
            errors.append(f"hidden_width: must be >= 1 (got {self.hidden_width})")
        if not self.learning_rate >= 0:
            errors.append(f"learning_rate: must be >= 0 (got {self.learning_rate})")
        if not 0 <= self.momentum < 1:
            errors.append(f"momentum: must be in [0, 1) (got {self.momentum})")
        if self.local_epochs < 1:
            errors.append(f"local_epochs: must be >= 1 (got {self.local_epochs})")
        if self.batch_size < 1:
            errors.append(f"batch_size: must be >= 1 (got {self.batch_size})")

        if not self.zeta_start_db >= self.zeta_end_db:
            errors.append(
                f"zeta_start_db ({self.zeta_start_db}) must be >= zeta_end_db ({self.zeta_end_db})"
            )
        if not self.zeta_step_db > 0:
            errors.append(f"zeta_step_db: must be > 0 (got {self.zeta_step_db})")

        if not 0 < self.validation_fraction < 1:
            errors.append(f"validation_fraction: must be in (0, 1) (got {self.validation_fraction})")
        if not self.dirichlet_alpha > 0:
            errors.append(f"dirichlet_alpha: must be > 0 (got {self.dirichlet_alpha})")
        if self.synthetic_samples < 1:
            errors.append(f"synthetic_samples: must be >= 1 (got {self.synthetic_samples})")
        if self.synthetic_features < 1:
            errors.append(f"synthetic_features: must be >= 1 (got {self.synthetic_features})")
        if self.synthetic_classes < 2:
            errors.append(f"synthetic_classes: must be >= 2 (got {self.synthetic_classes})")
        if not self.synthetic_cluster_std > 0:
            errors.append(f"synthetic_cluster_std: must be > 0 (got {self.synthetic_cluster_std})")

        if errors:
            raise ConfigValidationError("Configuration validation failed:\n  - " + "\n  - ".join(errors))
        return True


FIELD_NAMES = tuple(f.name for f in fields(ExperimentConfig))
DEFAULTS: Dict[str, Any] = {f.name: f.default for f in fields(ExperimentConfig)}
FIELD_DOCS: Dict[str, str] = {f.name: f.metadata["doc"] for f in fields(ExperimentConfig)}
FIELD_CHOICES: Dict[str, Optional[tuple]] = {f.name: f.metadata.get("choices") for f in fields(ExperimentConfig)}


def _kind(name: str) -> type:
    return type(DEFAULTS[name])


def suggest_keys(unknown: str) -> List[str]:
    """Known keys resembling an unknown one"""
    close = difflib.get_close_matches(unknown, FIELD_NAMES, n=3, cutoff=0.5)
    prefix = [k for k in FIELD_NAMES if len(unknown) >= 3 and k.startswith(unknown[:3])]
    return list(dict.fromkeys(close + prefix))


def _check_keys(data: Dict[str, Any], require: tuple) -> List[str]:
    errors = []
    for key in data:
        if key not in DEFAULTS:
            hints = suggest_keys(key)
            hint = f" (did you mean: {', '.join(hints)}?)" if hints else ""
            errors.append(f"unknown key '{key}'{hint}")
    for key in require:
        if key not in data:
            errors.append(f"missing required key '{key}'")
    return errors


def _check_types(data: Dict[str, Any]) -> List[str]:
    errors = []
    for key, value in data.items():
        if key not in DEFAULTS:
            continue
        expected = _kind(key)
        if expected is bool:
            ok = isinstance(value, bool)
        elif expected is int:
            ok = isinstance(value, int) and not isinstance(value, bool)
        elif expected is float:
            ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        else:
            ok = isinstance(value, expected)
        if not ok:
            errors.append(f"{key}: expected {expected.__name__}, got {type(value).__name__} ({value!r})")
    return errors


def parse_config(path) -> ExperimentConfig:
    """
    Load an experiment config from a flat JSON file

    Args:
        path: Path to a UTF-8 JSON document

    Returns:
        Validated ExperimentConfig with defaults filled in

    Raises:
        ConfigValidationError: Unknown or missing keys, type mismatches, invariant violations
    """
    path = Path(path)
    if not path.exists():
        raise ConfigValidationError(f"Config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigValidationError(f"Config file {path} is not valid JSON: {e}")
    return ExperimentConfig.from_dict(data, require=REQUIRED_KEYS)


def dump_config(config: ExperimentConfig, path) -> Path:
    """Write a config as pretty JSON"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        path.write_text(json.dumps(config.to_dict(), indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise SimulationError(f"Could not write config to {path}: {e}")
    return path

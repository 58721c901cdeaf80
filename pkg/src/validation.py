"""
Validation tooling

Two audits back the simulator's claims:
    - validate_channel compares the analytic success probability with a
      Monte Carlo estimate over a (threshold, distance) grid
    - summarize_cases reduces the logs of the three cases to the quantities
      used to judge them: final losses, time to reach the conservative
      case's final loss, and whether the risk-aware switch fired

Author: Edgar McOchieng
"""

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

from tqdm import tqdm

from config.logger import get_logger
from .channel import ChannelParams, linear_to_db, monte_carlo_success_probability, success_probability
from .errors import RunLogError, SimulationError
from .orchestrator import ExperimentCase, Mode
from .rng import substream
from .run_log import read_compare_csv

logger = get_logger(__name__)

DEFAULT_ZETAS = (0.0, 1.0, 3.0, 10.0, 31.6)
DEFAULT_DISTANCES = (50.0, 100.0, 200.0, 400.0, 800.0)
DEFAULT_SAMPLES = 100_000
DEFAULT_TOLERANCE = 0.01

AUDIT_COLUMNS = ("zeta_db", "r", "S_analytic", "S_montecarlo", "abs_err", "noise_limited", "within_tolerance")


# =============================================================================
# Channel audit
# =============================================================================

@dataclass(frozen=True)
class ChannelAuditCell:
    """One (threshold, distance) cell; zeta is linear, the CSV carries dB"""

    zeta: float
    r: float
    s_analytic: float
    s_montecarlo: float
    noise_limited: float
    abs_err: float
    within_tolerance: bool

    @property
    def zeta_db(self) -> float:
        return linear_to_db(self.zeta)

    def row(self) -> List[Any]:
        """Values in AUDIT_COLUMNS order"""
        return [self.zeta_db, self.r, self.s_analytic, self.s_montecarlo, self.abs_err,
                self.noise_limited, self.within_tolerance]


@dataclass(frozen=True)
class ChannelAudit:
    cells: tuple
    tolerance: float
    n_samples: int

    @property
    def max_error(self) -> float:
        return max((c.abs_err for c in self.cells), default=0.0)

    @property
    def passed(self) -> bool:
        return all(c.within_tolerance for c in self.cells)


def noise_limited_probability(zeta: float, r: float, params: ChannelParams) -> float:
    """exp(-zeta N0 r^eta / P): the success probability without interference"""
    return math.exp(-zeta * params.noise_power * r ** params.path_loss_exponent / params.tx_power)


def validate_channel(
    params: ChannelParams,
    zetas: Sequence[float] = DEFAULT_ZETAS,
    distances: Sequence[float] = DEFAULT_DISTANCES,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    tolerance: float = DEFAULT_TOLERANCE,
    fault_scale: float = 1.0,
    show_progress: bool = False,
) -> ChannelAudit:
    """
    Analytic versus Monte Carlo success probability on a grid

    Args:
        params: Channel parameters
        zetas: Linear thresholds
        distances: Link distances in meters
        n_samples: Monte Carlo draws per cell
        seed: Root seed of the audit
        tolerance: Largest accepted |analytic - empirical|
        fault_scale: Multiplies the analytic column; anything but 1.0 is a
                     self-test of the audit and should make it fail

    Raises:
        QuadratureError: Propagated from the analytic side
    """
    if n_samples < 1:
        raise SimulationError(f"Need at least one Monte Carlo sample per cell (got {n_samples})")
    if fault_scale != 1.0:
        logger.warning(f"Fault injection active: analytic probabilities scaled by {fault_scale}")

    grid = [(z, r) for z in zetas for r in distances]
    iterator = tqdm(grid, desc="Channel audit", unit="cell") if show_progress else grid
    cells = []
    for index, (zeta, r) in enumerate(iterator):
        analytic = success_probability(zeta, r, params) * fault_scale
        empirical = monte_carlo_success_probability(zeta, r, params, n_samples,
                                                    substream(seed, "channel-audit", index))
        error = abs(analytic - empirical)
        cells.append(ChannelAuditCell(
            zeta=float(zeta),
            r=float(r),
            s_analytic=analytic,
            s_montecarlo=empirical,
            noise_limited=noise_limited_probability(zeta, r, params),
            abs_err=error,
            within_tolerance=error <= tolerance,
        ))
        logger.debug(f"zeta={zeta} r={r}: analytic={analytic:.5f} empirical={empirical:.5f}")

    audit = ChannelAudit(cells=tuple(cells), tolerance=tolerance, n_samples=n_samples)
    log = logger.info if audit.passed else logger.error
    log(f"Channel audit: {len(cells)} cells, max |analytic - empirical| = {audit.max_error:.5f} "
        f"(tolerance {tolerance})")
    return audit


def write_channel_audit(audit: ChannelAudit, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(AUDIT_COLUMNS)
            for cell in audit.cells:
                writer.writerow(cell.row())
    except OSError as e:
        raise RunLogError(f"Cannot write {path}: {e}")
    return path


# =============================================================================
# Case comparison
# =============================================================================

@dataclass(frozen=True)
class RoundPoint:
    """The per-round fields a comparison needs"""

    t: int
    mode: str
    loss: float
    accuracy: float


@dataclass(frozen=True)
class CaseComparison:
    final_loss: Dict[str, float]
    final_accuracy: Dict[str, float]
    target_loss: Optional[float]
    rounds_to_target: Dict[str, Optional[int]]
    switch_round: Optional[int]
    risk_aware_beats_conservative: Optional[bool]
    risk_aware_beats_agnostic: Optional[bool]
    risk_aware_faster: Optional[bool]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def rounds_to_reach(points: Sequence, target: float) -> Optional[int]:
    """Number of rounds until the loss first drops to `target` or below"""
    for point in points:
        if point.loss <= target:
            return point.t + 1
    return None


def switch_round(points: Sequence) -> Optional[int]:
    """First round run with fully trusted clients only"""
    for point in points:
        if point.mode == Mode.TRUSTED_ONLY.value:
            return point.t
    return None


def summarize_cases(records_by_case: Mapping[ExperimentCase, Sequence]) -> CaseComparison:
    """
    Compare the logs of up to three cases

    Records only need t, mode, loss and accuracy, so RoundRecords and
    RoundPoints both work. Comparisons involving a missing case are None.
    """
    records_by_case = {case: list(points) for case, points in records_by_case.items() if points}
    final_loss = {case.value: points[-1].loss for case, points in records_by_case.items()}
    final_accuracy = {case.value: points[-1].accuracy for case, points in records_by_case.items()}

    a = records_by_case.get(ExperimentCase.RISK_AWARE)
    b = records_by_case.get(ExperimentCase.RISK_AGNOSTIC)
    c = records_by_case.get(ExperimentCase.CONSERVATIVE)

    target = c[-1].loss if c else None
    rounds_to_target = {}
    if target is not None:
        rounds_to_target = {case.value: rounds_to_reach(points, target) for case, points in records_by_case.items()}

    faster = None
    if a and c:
        a_rounds = rounds_to_target[ExperimentCase.RISK_AWARE.value]
        faster = a_rounds is not None and a_rounds < rounds_to_target[ExperimentCase.CONSERVATIVE.value]

    return CaseComparison(
        final_loss=final_loss,
        final_accuracy=final_accuracy,
        target_loss=target,
        rounds_to_target=rounds_to_target,
        switch_round=switch_round(a) if a else None,
        risk_aware_beats_conservative=(a[-1].loss <= c[-1].loss) if a and c else None,
        risk_aware_beats_agnostic=(a[-1].loss <= b[-1].loss) if a and b else None,
        risk_aware_faster=faster,
    )


def points_from_compare_csv(path) -> Dict[ExperimentCase, List[RoundPoint]]:
    """Load a compare CSV into RoundPoints per case"""
    points = {}
    for label, rows in read_compare_csv(path).items():
        try:
            points[ExperimentCase.parse(label)] = [
                RoundPoint(t=int(row["t"]), mode=row["mode"], loss=float(row["loss"]),
                           accuracy=float(row["accuracy"]))
                for row in rows
            ]
        except (ValueError, SimulationError) as e:
            raise RunLogError(f"Malformed row for case {label} in {path}: {e}")
    return points

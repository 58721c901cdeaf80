"""
Run-log persistence

A run directory holds:
    rounds.csv     one row per round (RUN_LOG_COLUMNS)
    rounds.jsonl   header line with the resolved config, then one full record per line
    config.json    resolved experiment config
    topology.json  network layout the run used

Author: Edgar McOchieng
"""

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

from config.logger import get_logger
from .errors import RunLogError
from .experiment import ExperimentConfig, dump_config
from .geometry import NetworkTopology, save_topology
from .orchestrator import ExperimentCase, RoundRecord

logger = get_logger(__name__)

RUN_LOG_SCHEMA_VERSION = 1
RUN_LOG_COLUMNS = ("t", "zeta_db", "mode", "n_participants", "n_success", "loss", "accuracy")
COMPARE_COLUMNS = ("case",) + RUN_LOG_COLUMNS

CSV_NAME = "rounds.csv"
JSONL_NAME = "rounds.jsonl"
CONFIG_NAME = "config.json"
TOPOLOGY_NAME = "topology.json"
COMPARE_NAME = "compare.csv"


@dataclass(frozen=True)
class RunLogPaths:
    csv: Path
    jsonl: Path
    config: Optional[Path] = None
    topology: Optional[Path] = None


def _row(record: RoundRecord) -> List[Any]:
    return [record.t, record.zeta_db, record.mode, record.n_participants, record.n_success,
            record.loss, record.accuracy]


def write_run_log(
    records: Sequence[RoundRecord],
    out_dir,
    config: Optional[ExperimentConfig] = None,
    case: Optional[ExperimentCase] = None,
    topology: Optional[NetworkTopology] = None,
) -> RunLogPaths:
    """
    Write the CSV and JSONL logs of one run, plus config and topology echoes

    Args:
        records: Round records in order
        out_dir: Directory to write into (created if missing)
        config: Resolved config to embed and echo
        case: Case label stored in the JSONL header
        topology: Layout to save next to the logs

    Returns:
        RunLogPaths of everything written

    Raises:
        RunLogError: On any I/O failure, naming the path
    """
    out_dir = Path(out_dir)
    csv_path = out_dir / CSV_NAME
    jsonl_path = out_dir / JSONL_NAME
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise RunLogError(f"Cannot create run directory {out_dir}: {e}")

    try:
        with open(csv_path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(RUN_LOG_COLUMNS)
            for record in records:
                writer.writerow(_row(record))
    except OSError as e:
        raise RunLogError(f"Cannot write {csv_path}: {e}")

    header = {
        "type": "header",
        "schema_version": RUN_LOG_SCHEMA_VERSION,
        "case": case.value if case is not None else None,
        "config_hash": config.hash() if config is not None else None,
        "config": config.to_dict() if config is not None else None,
    }
    try:
        with open(jsonl_path, "w", encoding="utf-8") as f:
            f.write(json.dumps(header, sort_keys=True) + "\n")
            for record in records:
                f.write(json.dumps({"type": "round", **record.to_dict()}, sort_keys=True) + "\n")
    except OSError as e:
        raise RunLogError(f"Cannot write {jsonl_path}: {e}")

    config_path = topology_path = None
    try:
        if config is not None:
            config_path = dump_config(config, out_dir / CONFIG_NAME)
        if topology is not None:
            topology_path = save_topology(topology, out_dir / TOPOLOGY_NAME)
    except Exception as e:
        raise RunLogError(f"Cannot write config/topology echo in {out_dir}: {e}")

    logger.info(f"Wrote {len(records)} round records to {out_dir}")
    return RunLogPaths(csv=csv_path, jsonl=jsonl_path, config=config_path, topology=topology_path)


def _read_lines(path: Path) -> List[Dict[str, Any]]:
    if not path.exists():
        raise RunLogError(f"Run log not found: {path}")
    entries = []
    try:
        with open(path, "r", encoding="utf-8") as f:
            for number, line in enumerate(f, start=1):
                if line.strip():
                    entries.append(json.loads(line))
    except json.JSONDecodeError as e:
        raise RunLogError(f"{path}:{number}: invalid JSON ({e})")
    except OSError as e:
        raise RunLogError(f"Cannot read {path}: {e}")
    return entries


def read_run_header(path) -> Dict[str, Any]:
    """Header line of a JSONL run log"""
    path = Path(path)
    entries = _read_lines(path)
    if not entries or entries[0].get("type") != "header":
        raise RunLogError(f"{path} does not start with a run-log header")
    return entries[0]


def read_run_log(path) -> List[RoundRecord]:
    """
    Reconstruct RoundRecords from a JSONL run log (file or run directory)

    Raises:
        RunLogError: Missing file, bad JSON or malformed records
    """
    path = Path(path)
    if path.is_dir():
        path = path / JSONL_NAME
    records = []
    for entry in _read_lines(path):
        kind = entry.pop("type", "round")
        if kind == "header":
            continue
        try:
            records.append(RoundRecord.from_dict(entry))
        except (KeyError, TypeError, ValueError) as e:
            raise RunLogError(f"Malformed round record in {path}: {e}")
    return records


def write_compare_csv(records_by_case: Mapping[ExperimentCase, Sequence[RoundRecord]], path) -> Path:
    """Merged per-round table of several cases, one block per case in A, B, C order"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(COMPARE_COLUMNS)
            for case in sorted(records_by_case, key=lambda c: c.value):
                for record in records_by_case[case]:
                    writer.writerow([case.value] + _row(record))
    except OSError as e:
        raise RunLogError(f"Cannot write {path}: {e}")
    return path


def read_compare_csv(path) -> Dict[str, List[Dict[str, str]]]:
    """Rows of a compare CSV grouped by case label"""
    path = Path(path)
    if not path.exists():
        raise RunLogError(f"Compare CSV not found: {path}")
    grouped: Dict[str, List[Dict[str, str]]] = {}
    try:
        with open(path, "r", newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            if tuple(reader.fieldnames or ()) != COMPARE_COLUMNS:
                raise RunLogError(f"{path} has columns {reader.fieldnames}, expected {list(COMPARE_COLUMNS)}")
            for row in reader:
                grouped.setdefault(row["case"], []).append(row)
    except OSError as e:
        raise RunLogError(f"Cannot read {path}: {e}")
    return grouped

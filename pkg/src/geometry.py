"""
Cellular network layout

Base stations are dropped as a homogeneous Poisson point process over a
square area, users associate to their nearest base station, and every user
holds one resource block (RB). Users in one cell never share an RB; users on
the same RB in different cells interfere with each other.

Coordinates are translated so the test base station (the one closest to
the centre of the area) sits at the origin.

Author: Edgar McOchieng
"""

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree, Voronoi

from config.logger import get_logger
from .errors import TopologyError
from .rng import substream

logger = get_logger(__name__)

MAX_EMPTY_DRAWS = 100
MAX_CELL_FILL_ATTEMPTS = 1000
TOPOLOGY_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class GeometryConfig:
    """Parameters of the network layout"""

    bs_density: float                  # BSs per square meter
    area_side: float = 10_000.0        # meters
    n_users_per_test_cell: int = 30
    n_rb: int = 30
    seed: int = 0
    rb_activity: float = 1.0           # probability an interfering RB slot is occupied

    def validate(self) -> None:
        """
        Check the layout invariants

        Raises:
            TopologyError: If any parameter is out of range
        """
        errors = []
        if not self.bs_density > 0:
            errors.append(f"bs_density must be > 0 (got {self.bs_density})")
        if not self.area_side > 0:
            errors.append(f"area_side must be > 0 (got {self.area_side})")
        if self.n_rb < 1:
            errors.append(f"n_rb must be >= 1 (got {self.n_rb})")
        if self.n_users_per_test_cell < 1:
            errors.append(f"n_users_per_test_cell must be >= 1 (got {self.n_users_per_test_cell})")
        if self.n_users_per_test_cell > self.n_rb:
            errors.append(
                f"n_users_per_test_cell ({self.n_users_per_test_cell}) must not exceed n_rb ({self.n_rb})"
            )
        if not 0.0 <= self.rb_activity <= 1.0:
            errors.append(f"rb_activity must be in [0, 1] (got {self.rb_activity})")
        if errors:
            raise TopologyError("Invalid geometry config:\n  - " + "\n  - ".join(errors))


def associate(points: np.ndarray, bs_positions: np.ndarray, tree: Optional[cKDTree] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Associate each point with its nearest base station

    Ties go to the lowest BS index.

    Args:
        points: (n, 2) array of positions in meters
        bs_positions: (m, 2) array of BS positions
        tree: Prebuilt KD-tree over bs_positions, reused across calls

    Returns:
        (association, distances): BS index and distance per point
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    bs_positions = np.asarray(bs_positions, dtype=float).reshape(-1, 2)
    n_bs = len(bs_positions)
    if n_bs == 0:
        raise TopologyError("Cannot associate users without base stations")
    if len(points) == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)

    if n_bs == 1:
        return np.zeros(len(points), dtype=np.int64), np.linalg.norm(points - bs_positions[0], axis=1)

    tree = tree if tree is not None else cKDTree(bs_positions)
    k = min(4, n_bs)
    dist, idx = tree.query(points, k=k)

    # Among equally-near candidates keep the smallest index
    nearest = dist[:, :1]
    candidates = np.where(dist == nearest, idx, n_bs)
    association = candidates.min(axis=1).astype(np.int64)
    return association, dist[:, 0].copy()


def _frozen(array: np.ndarray, dtype) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class NetworkTopology:
    """
    Immutable network layout centred on the test base station

    Users 0..n_test-1 are the test-cell users (the federated clients); the
    remaining users are interferers in other cells.
    """

    bs_positions: np.ndarray
    user_positions: np.ndarray
    association: np.ndarray
    distances: np.ndarray
    rb_assignment: np.ndarray
    area_side: float
    bs_density: float
    n_rb: int
    test_bs: int = 0
    area_bounds: Tuple[float, float, float, float] = field(default=(0.0, 0.0, 0.0, 0.0))

    def __post_init__(self):
        object.__setattr__(self, "bs_positions", _frozen(self.bs_positions, float).reshape(-1, 2))
        object.__setattr__(self, "user_positions", _frozen(self.user_positions, float).reshape(-1, 2))
        object.__setattr__(self, "association", _frozen(self.association, np.int64))
        object.__setattr__(self, "distances", _frozen(self.distances, float))
        object.__setattr__(self, "rb_assignment", _frozen(self.rb_assignment, np.int64))
        object.__setattr__(self, "area_bounds", tuple(float(v) for v in self.area_bounds))

    @classmethod
    def from_points(
        cls,
        bs_positions,
        user_positions,
        rb_assignment,
        n_rb: int,
        area_side: float = 0.0,
        bs_density: float = 0.0,
        test_bs: Optional[int] = None,
    ) -> "NetworkTopology":
        """
        Build a topology from explicit positions

        The test BS defaults to the one nearest the origin. Association and
        distances are computed here.
        """
        bs_positions = np.asarray(bs_positions, dtype=float).reshape(-1, 2)
        user_positions = np.asarray(user_positions, dtype=float).reshape(-1, 2)
        if test_bs is None:
            test_bs = int(np.argmin(np.linalg.norm(bs_positions, axis=1)))
        association, distances = associate(user_positions, bs_positions)
        half = area_side / 2.0
        return cls(
            bs_positions=bs_positions,
            user_positions=user_positions,
            association=association,
            distances=distances,
            rb_assignment=np.asarray(rb_assignment, dtype=np.int64),
            area_side=float(area_side),
            bs_density=float(bs_density),
            n_rb=int(n_rb),
            test_bs=int(test_bs),
            area_bounds=(-half, half, -half, half),
        )

    @property
    def n_bs(self) -> int:
        return len(self.bs_positions)

    @property
    def n_users(self) -> int:
        return len(self.user_positions)

    def test_cell_users(self) -> np.ndarray:
        """Indices of users served by the test BS"""
        return np.flatnonzero(self.association == self.test_bs)

    def cell_user_counts(self) -> np.ndarray:
        """Number of users per BS"""
        return np.bincount(self.association, minlength=self.n_bs)

    @cached_property
    def _interferers_by_rb(self) -> Dict[int, np.ndarray]:
        origin = self.bs_positions[self.test_bs]
        outside = self.association != self.test_bs
        table = {}
        for rb in range(self.n_rb):
            mask = outside & (self.rb_assignment == rb)
            distances = np.linalg.norm(self.user_positions[mask] - origin, axis=1)
            distances.setflags(write=False)
            table[rb] = distances
        return table

    def interferer_distances(self, rb: int) -> np.ndarray:
        """Distances from every other-cell user on `rb` to the test BS"""
        if not 0 <= rb < self.n_rb:
            raise TopologyError(f"RB index {rb} outside [0, {self.n_rb})")
        return self._interferers_by_rb[int(rb)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": TOPOLOGY_SCHEMA_VERSION,
            "area_side": self.area_side,
            "area_bounds": list(self.area_bounds),
            "bs_density": self.bs_density,
            "n_rb": self.n_rb,
            "test_bs": self.test_bs,
            "bs_positions": self.bs_positions.tolist(),
            "user_positions": self.user_positions.tolist(),
            "association": self.association.tolist(),
            "distances": self.distances.tolist(),
            "rb_assignment": self.rb_assignment.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NetworkTopology":
        if data.get("schema_version") != TOPOLOGY_SCHEMA_VERSION:
            raise TopologyError(f"Unsupported topology schema version: {data.get('schema_version')}")
        return cls(
            bs_positions=np.asarray(data["bs_positions"], dtype=float),
            user_positions=np.asarray(data["user_positions"], dtype=float),
            association=np.asarray(data["association"], dtype=np.int64),
            distances=np.asarray(data["distances"], dtype=float),
            rb_assignment=np.asarray(data["rb_assignment"], dtype=np.int64),
            area_side=data["area_side"],
            bs_density=data["bs_density"],
            n_rb=data["n_rb"],
            test_bs=data["test_bs"],
            area_bounds=tuple(data["area_bounds"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "NetworkTopology":
        return cls.from_dict(json.loads(text))


def save_topology(topology: NetworkTopology, path) -> Path:
    """Write a topology as JSON"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(topology.to_json(), encoding="utf-8")
    return path


def load_topology(path) -> NetworkTopology:
    """Read a topology written by save_topology"""
    return NetworkTopology.from_json(Path(path).read_text(encoding="utf-8"))


def _cell_boxes(bs_positions: np.ndarray, half: float) -> np.ndarray:
    """
    Bounding box (xmin, xmax, ymin, ymax) of every Voronoi cell clipped to the area

    Mirroring the sites across the four edges closes every original cell
    exactly at the area boundary.
    """
    n_bs = len(bs_positions)
    full = np.tile([-half, half, -half, half], (n_bs, 1)).astype(float)
    if n_bs < 2:
        return full

    x, y = bs_positions[:, 0], bs_positions[:, 1]
    mirrored = np.vstack([
        bs_positions,
        np.column_stack([-2 * half - x, y]),
        np.column_stack([2 * half - x, y]),
        np.column_stack([x, -2 * half - y]),
        np.column_stack([x, 2 * half - y]),
    ])
    try:
        vor = Voronoi(mirrored)
    except RuntimeError as e:  # QhullError
        logger.debug(f"Voronoi failed, sampling cells over the whole area: {e}")
        return full

    boxes = full.copy()
    for b in range(n_bs):
        region = vor.regions[vor.point_region[b]]
        if not region or -1 in region:
            continue
        vertices = vor.vertices[region]
        lo = np.maximum(vertices.min(axis=0), -half)
        hi = np.minimum(vertices.max(axis=0), half)
        boxes[b] = (lo[0], hi[0], lo[1], hi[1])
    return boxes


def _sample_in_cell(
    cell: int,
    count: int,
    box: np.ndarray,
    bs_positions: np.ndarray,
    tree: cKDTree,
    rng: np.random.Generator,
) -> np.ndarray:
    """Uniform points inside one cell by rejection from its bounding box"""
    if count == 0:
        return np.zeros((0, 2))
    accepted = []
    have = 0
    batch = max(4 * count, 16)
    for _ in range(MAX_CELL_FILL_ATTEMPTS):
        pts = np.column_stack([
            rng.uniform(box[0], box[1], size=batch),
            rng.uniform(box[2], box[3], size=batch),
        ])
        association, _ = associate(pts, bs_positions, tree)
        inside = pts[association == cell]
        if len(inside):
            accepted.append(inside[: count - have])
            have += len(accepted[-1])
        if have >= count:
            return np.vstack(accepted)
        batch = min(batch * 2, 65_536)
    raise TopologyError(f"Could not place {count} users in cell {cell}")


def generate_topology(cfg: GeometryConfig) -> NetworkTopology:
    """
    Generate a PPP cellular layout with users and RB assignments

    The BS count is Poisson(lambda * area); empty draws are redrawn up to
    100 times. The test cell receives exactly n_users_per_test_cell users on
    distinct RBs; every other cell receives one user per active RB.

    Args:
        cfg: Geometry configuration

    Returns:
        NetworkTopology fully determined by cfg.seed

    Raises:
        TopologyError: If cfg is invalid or every draw is empty
    """
    cfg.validate()
    rng = substream(cfg.seed, "topology")
    half = cfg.area_side / 2.0
    mean_count = cfg.bs_density * cfg.area_side ** 2

    n_bs = 0
    for _ in range(MAX_EMPTY_DRAWS):
        n_bs = int(rng.poisson(mean_count))
        if n_bs > 0:
            break
    else:
        raise TopologyError(
            f"PPP produced no base stations in {MAX_EMPTY_DRAWS} draws (mean count {mean_count:.3g})"
        )

    bs_positions = rng.uniform(-half, half, size=(n_bs, 2))
    test_bs = int(np.argmin(np.linalg.norm(bs_positions, axis=1)))
    tree = cKDTree(bs_positions) if n_bs > 1 else None
    boxes = _cell_boxes(bs_positions, half)

    positions: List[np.ndarray] = []
    rbs: List[np.ndarray] = []

    test_points = _sample_in_cell(test_bs, cfg.n_users_per_test_cell, boxes[test_bs], bs_positions, tree, rng)
    positions.append(test_points)
    rbs.append(rng.permutation(cfg.n_rb)[: cfg.n_users_per_test_cell])

    for cell in range(n_bs):
        if cell == test_bs:
            continue
        active = np.flatnonzero(rng.random(cfg.n_rb) < cfg.rb_activity)
        if len(active) == 0:
            continue
        positions.append(_sample_in_cell(cell, len(active), boxes[cell], bs_positions, tree, rng))
        rbs.append(active)

    user_positions = np.vstack(positions)
    rb_assignment = np.concatenate(rbs)
    association, _ = associate(user_positions, bs_positions, tree)

    # Translate so the test BS is the origin
    shift = bs_positions[test_bs].copy()
    bs_positions = bs_positions - shift
    user_positions = user_positions - shift
    distances = np.linalg.norm(user_positions - bs_positions[association], axis=1)

    topology = NetworkTopology(
        bs_positions=bs_positions,
        user_positions=user_positions,
        association=association,
        distances=distances,
        rb_assignment=rb_assignment,
        area_side=cfg.area_side,
        bs_density=cfg.bs_density,
        n_rb=cfg.n_rb,
        test_bs=test_bs,
        area_bounds=(-half - shift[0], half - shift[0], -half - shift[1], half - shift[1]),
    )
    logger.debug(
        f"Topology: {n_bs} BSs, {topology.n_users} users "
        f"({cfg.n_users_per_test_cell} in test cell {test_bs}), seed={cfg.seed}"
    )
    return topology

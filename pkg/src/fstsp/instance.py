"""Problem data for truck-and-drone routing.

An instance lives on node indices 0..c+1: node 0 is the start depot,
nodes 1..c are customers, node c+1 duplicates the depot as the final
node.  Truck and drone travel times are explicit (c+2)x(c+2) matrices in
minutes, so instances are self-contained and tests are bit-exact; the
builders derive them from coordinates (Manhattan for the truck,
Euclidean for the drone).

A sortie <i, j, k> is one drone flight: launch from truck node i, serve
customer j, rejoin the truck at node k.  ``feasible_sorties`` enumerates
the candidate set allowed by the drone's endurance.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Generator defaults, km/min (0.67 km/min is roughly 40 km/h).  Only the
# random generator and the CSV importer use these; explicit matrices are
# never derived from defaults behind the caller's back.
DEFAULT_TRUCK_SPEED = 0.67
DEFAULT_DRONE_SPEED = 0.67
DEFAULT_SIGMA_LAUNCH = 1.0
DEFAULT_SIGMA_RECOVER = 1.0
DEFAULT_ENDURANCE = 20.0


class InstanceFormatError(ValueError):
    """Raised when an instance file fails to parse or violates invariants."""


@dataclass(frozen=True)
class NodePoint:
    """A node position in meters; id is the node's index in 0..c+1."""

    id: int
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InstanceFormatError(f"node {self.id}: coordinates must be finite")


@dataclass(frozen=True, order=True)
class SortieTriple:
    """One drone flight: launch node i, customer j, rendezvous node k."""

    i: int
    j: int
    k: int

    def __post_init__(self) -> None:
        if self.i == self.j or self.j == self.k or self.i == self.k:
            raise ValueError(f"sortie nodes must be pairwise distinct, got {(self.i, self.j, self.k)}")
        if min(self.i, self.j, self.k) < 0:
            raise ValueError(f"sortie nodes must be non-negative, got {(self.i, self.j, self.k)}")


@dataclass(eq=False)
class Instance:
    """A complete problem instance with explicit travel-time matrices.

    Values are immutable after construction (matrices are marked
    read-only), so instances can be shared freely across workers.
    """

    name: str
    customer_count: int
    nodes: list[NodePoint]
    drone_eligible: frozenset[int]
    tau_truck: np.ndarray
    tau_drone: np.ndarray
    sigma_launch: float
    sigma_recover: float
    endurance: float

    def __post_init__(self) -> None:
        self.drone_eligible = frozenset(self.drone_eligible)
        self.tau_truck = np.array(self.tau_truck, dtype=float)
        self.tau_drone = np.array(self.tau_drone, dtype=float)
        self.tau_truck.setflags(write=False)
        self.tau_drone.setflags(write=False)
        self.validate()

    # -- derived index sets ------------------------------------------------

    @property
    def c(self) -> int:
        return self.customer_count

    @property
    def end_depot(self) -> int:
        return self.customer_count + 1

    @property
    def customers(self) -> range:
        """C = {1, ..., c}."""
        return range(1, self.customer_count + 1)

    @property
    def start_nodes(self) -> range:
        """N0 = {0, ..., c}: admissible arc tails / launch nodes."""
        return range(0, self.customer_count + 1)

    @property
    def end_nodes(self) -> range:
        """N+ = {1, ..., c+1}: admissible arc heads / rendezvous nodes."""
        return range(1, self.customer_count + 2)

    def arcs(self) -> list[tuple[int, int]]:
        """All arcs (i, j) with i in N0, j in N+, i != j."""
        return [(i, j) for i in self.start_nodes for j in self.end_nodes if i != j]

    # -- validation ----------------------------------------------------------

    def validate(self) -> None:
        """Check structural invariants; raise InstanceFormatError naming the field."""
        c = self.customer_count
        if c < 0:
            raise InstanceFormatError("customer_count must be >= 0")
        n = c + 2
        if len(self.nodes) != n:
            raise InstanceFormatError(f"nodes: expected {n} entries (c+2), got {len(self.nodes)}")
        for idx, node in enumerate(self.nodes):
            if node.id != idx:
                raise InstanceFormatError(f"nodes[{idx}]: id {node.id} must equal its index")
        for label, mat in (("tau_truck", self.tau_truck), ("tau_drone", self.tau_drone)):
            if mat.shape != (n, n):
                raise InstanceFormatError(f"{label}: expected shape {(n, n)}, got {mat.shape}")
            if not np.all(np.isfinite(mat)):
                raise InstanceFormatError(f"{label}: entries must be finite")
            if np.any(mat < 0):
                raise InstanceFormatError(f"{label}: entries must be >= 0")
            if np.any(np.diagonal(mat) != 0):
                raise InstanceFormatError(f"{label}: diagonal must be 0")
            # The two depot nodes are the same physical point.
            if mat[0, c + 1] != 0 or mat[c + 1, 0] != 0:
                raise InstanceFormatError(f"{label}: depot pair entries [0][c+1] and [c+1][0] must be 0")
        bad = [j for j in self.drone_eligible if not (1 <= j <= c)]
        if bad:
            raise InstanceFormatError(f"drone_eligible: {sorted(bad)} outside customer range 1..{c}")
        if self.sigma_launch < 0 or self.sigma_recover < 0:
            raise InstanceFormatError("handling times must be >= 0")
        if self.endurance < 0:
            raise InstanceFormatError("endurance must be >= 0")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.name == other.name
            and self.customer_count == other.customer_count
            and self.nodes == other.nodes
            and self.drone_eligible == other.drone_eligible
            and np.array_equal(self.tau_truck, other.tau_truck)
            and np.array_equal(self.tau_drone, other.tau_drone)
            and self.sigma_launch == other.sigma_launch
            and self.sigma_recover == other.sigma_recover
            and self.endurance == other.endurance
        )

    def __repr__(self) -> str:
        return (
            f"Instance({self.name!r}, c={self.customer_count}, "
            f"|C'|={len(self.drone_eligible)}, E={self.endurance})"
        )


def build_from_coordinates(
    nodes: list[NodePoint],
    truck_speed: float,
    drone_speed: float,
    sigma_launch: float,
    sigma_recover: float,
    endurance: float,
    drone_eligible: set[int] | frozenset[int],
    name: str = "unnamed",
) -> Instance:
    """Build an instance from node positions and vehicle speeds.

    ``nodes`` is the full list of c+2 points: index 0 is the start depot,
    index c+1 the end depot (same physical location).  Truck times use the
    Manhattan distance, drone times the Euclidean distance; coordinates
    are meters, speeds km/min, times come out in minutes.  The depot pair
    entries are forced to 0 and both matrices are symmetric.
    """
    if truck_speed <= 0 or drone_speed <= 0:
        raise ValueError("speeds must be positive")
    c = len(nodes) - 2
    if c < 1:
        raise ValueError("empty customer set")
    ids = [p.id for p in nodes]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate node ids")
    n = c + 2
    xs = np.array([p.x for p in nodes])
    ys = np.array([p.y for p in nodes])
    dx = xs[:, None] - xs[None, :]
    dy = ys[:, None] - ys[None, :]
    manhattan_km = (np.abs(dx) + np.abs(dy)) / 1000.0
    euclid_km = np.sqrt(dx * dx + dy * dy) / 1000.0
    tau_truck = manhattan_km / truck_speed
    tau_drone = euclid_km / drone_speed
    for mat in (tau_truck, tau_drone):
        mat[0, n - 1] = 0.0
        mat[n - 1, 0] = 0.0
    return Instance(
        name=name,
        customer_count=c,
        nodes=list(nodes),
        drone_eligible=frozenset(drone_eligible),
        tau_truck=tau_truck,
        tau_drone=tau_drone,
        sigma_launch=sigma_launch,
        sigma_recover=sigma_recover,
        endurance=endurance,
    )


def feasible_sorties(inst: Instance) -> set[SortieTriple]:
    """Enumerate the candidate sortie set F.

    <i, j, k> is in F when i in N0, j in C', k in N+, the three nodes are
    pairwise distinct, and the flight plus recovery fits the endurance:
    tau_drone[i][j] + tau_drone[j][k] + sigma_recover <= E.  The j -> k
    leg uses the direction of travel, which matters only for asymmetric
    drone matrices.
    """
    out: set[SortieTriple] = set()
    tau = inst.tau_drone
    budget = inst.endurance - inst.sigma_recover
    for j in sorted(inst.drone_eligible):
        for i in inst.start_nodes:
            if i == j:
                continue
            leg_in = tau[i, j]
            if leg_in > budget:
                continue
            for k in inst.end_nodes:
                if k == j or k == i:
                    continue
                if leg_in + tau[j, k] <= budget:
                    out.add(SortieTriple(i, j, k))
    return out


def generate_random(
    c: int,
    area_km2: float = 13.0,
    eligible_ratio: float = 0.85,
    seed: int = 0,
    truck_speed: float = DEFAULT_TRUCK_SPEED,
    drone_speed: float = DEFAULT_DRONE_SPEED,
    sigma_launch: float = DEFAULT_SIGMA_LAUNCH,
    sigma_recover: float = DEFAULT_SIGMA_RECOVER,
    endurance: float = DEFAULT_ENDURANCE,
    name: str | None = None,
) -> Instance:
    """Generate a random instance: c customers uniform over a square.

    The square has the given area; the depot sits at the centroid of the
    sampled customers.  |C'| = round(eligible_ratio * c) customers are
    drone-eligible, chosen uniformly.  Fully deterministic per seed.
    """
    if c < 1:
        raise ValueError("need at least one customer")
    if not 0.0 <= eligible_ratio <= 1.0:
        raise ValueError("eligible_ratio must be in [0, 1]")
    rng = np.random.default_rng(seed)
    side_m = math.sqrt(area_km2) * 1000.0
    pts = rng.uniform(0.0, side_m, size=(c, 2))
    depot = pts.mean(axis=0)
    n_eligible = int(round(eligible_ratio * c))
    eligible = frozenset(int(j) for j in rng.choice(np.arange(1, c + 1), size=n_eligible, replace=False))
    nodes = [NodePoint(0, float(depot[0]), float(depot[1]))]
    nodes += [NodePoint(i + 1, float(pts[i, 0]), float(pts[i, 1])) for i in range(c)]
    nodes.append(NodePoint(c + 1, float(depot[0]), float(depot[1])))
    return build_from_coordinates(
        nodes,
        truck_speed=truck_speed,
        drone_speed=drone_speed,
        sigma_launch=sigma_launch,
        sigma_recover=sigma_recover,
        endurance=endurance,
        drone_eligible=eligible,
        name=name or f"rand-c{c}-seed{seed}",
    )


# -- canonical file format ---------------------------------------------------
#
# A single JSON document.  Matrices are row-major (c+2)^2 arrays; floats
# keep full repr precision, so times retain at least three decimals and
# save -> load -> save is byte-identical.

def instance_to_dict(inst: Instance) -> dict:
    return {
        "name": inst.name,
        "c": inst.customer_count,
        "nodes": [[p.id, p.x, p.y] for p in inst.nodes],
        "drone_eligible": sorted(inst.drone_eligible),
        "tau_truck": inst.tau_truck.tolist(),
        "tau_drone": inst.tau_drone.tolist(),
        "sigma_launch": inst.sigma_launch,
        "sigma_recover": inst.sigma_recover,
        "endurance": inst.endurance,
    }


def instance_from_dict(data: dict) -> Instance:
    try:
        nodes = [NodePoint(int(i), float(x), float(y)) for i, x, y in data["nodes"]]
        return Instance(
            name=str(data["name"]),
            customer_count=int(data["c"]),
            nodes=nodes,
            drone_eligible=frozenset(int(j) for j in data["drone_eligible"]),
            tau_truck=data["tau_truck"],
            tau_drone=data["tau_drone"],
            sigma_launch=float(data["sigma_launch"]),
            sigma_recover=float(data["sigma_recover"]),
            endurance=float(data["endurance"]),
        )
    except KeyError as exc:
        raise InstanceFormatError(f"missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InstanceFormatError):
            raise
        raise InstanceFormatError(str(exc)) from exc


def save_instance(inst: Instance, path: str | Path) -> None:
    text = json.dumps(instance_to_dict(inst), indent=1)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_instance(path: str | Path) -> Instance:
    """Load and validate a canonical instance file.

    Raises InstanceFormatError with a line diagnostic on malformed JSON
    and a field diagnostic on invariant violations.
    """
    raw = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise InstanceFormatError(f"{path}: top level must be an object")
    try:
        return instance_from_dict(data)
    except InstanceFormatError as exc:
        raise InstanceFormatError(f"{path}: {exc}") from exc


def import_coordinates_csv(
    path: str | Path,
    truck_speed: float = DEFAULT_TRUCK_SPEED,
    drone_speed: float = DEFAULT_DRONE_SPEED,
    sigma_launch: float = DEFAULT_SIGMA_LAUNCH,
    sigma_recover: float = DEFAULT_SIGMA_RECOVER,
    endurance: float = DEFAULT_ENDURANCE,
    eligible: set[int] | None = None,
    name: str | None = None,
) -> Instance:
    """Map an external coordinate CSV into the canonical form.

    Expected columns: id, x_m, y_m, and optionally drone_eligible (0/1).
    Row id 0 is the depot; it is duplicated as the end node.  When no
    eligibility column or set is given, every customer is eligible.
    """
    rows: dict[int, tuple[float, float, int | None]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "id" not in reader.fieldnames:
            raise InstanceFormatError(f"{path}: expected a header with id,x_m,y_m")
        has_flag = "drone_eligible" in reader.fieldnames
        for lineno, row in enumerate(reader, start=2):
            try:
                node_id = int(row["id"])
                x = float(row["x_m"])
                y = float(row["y_m"])
                flag = int(row["drone_eligible"]) if has_flag else None
            except (KeyError, TypeError, ValueError) as exc:
                raise InstanceFormatError(f"{path}: line {lineno}: {exc}") from exc
            if node_id in rows:
                raise InstanceFormatError(f"{path}: line {lineno}: duplicate id {node_id}")
            rows[node_id] = (x, y, flag)
    if 0 not in rows:
        raise InstanceFormatError(f"{path}: no depot row (id 0)")
    c = len(rows) - 1
    if set(rows) != set(range(c + 1)):
        raise InstanceFormatError(f"{path}: ids must be 0..{c} without gaps")
    nodes = [NodePoint(0, rows[0][0], rows[0][1])]
    nodes += [NodePoint(j, rows[j][0], rows[j][1]) for j in range(1, c + 1)]
    nodes.append(NodePoint(c + 1, rows[0][0], rows[0][1]))
    if eligible is None:
        if any(rows[j][2] is not None for j in range(1, c + 1)):
            eligible = {j for j in range(1, c + 1) if rows[j][2]}
        else:
            eligible = set(range(1, c + 1))
    return build_from_coordinates(
        nodes,
        truck_speed=truck_speed,
        drone_speed=drone_speed,
        sigma_launch=sigma_launch,
        sigma_recover=sigma_recover,
        endurance=endurance,
        drone_eligible=frozenset(eligible),
        name=name or Path(path).stem,
    )

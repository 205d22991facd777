"""Symbolic MILP of the truck-and-drone plan and its LP-text export.

The model uses arc binaries x_i_j, sortie binaries y_i_j_k, carriage
binaries z_i, and continuous node times t_i and truck waits w_i.  Node
times carry pure travel and waiting only; launch and recovery handling
is charged in the objective, once per sortie for recovery and once per
non-depot launch for preparation.  The endurance constraint adds those
handling constants per sortie so that the model's airborne budget equals
the evaluator's t[k] - t[i] + sigma_recover measurement exactly; with
that, the optimum of the exported model matches the branch-and-bound
solver and every feasible plan induces a satisfying assignment.

The export is plain CPLEX-style LP text with deterministic ordering, so
identical models produce identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from fstsp.instance import Instance, SortieTriple, feasible_sorties
from fstsp.solution import Solution

INTEGRALITY_TOL = 1e-6


@dataclass(frozen=True)
class Constraint:
    name: str
    family: str
    coeffs: dict[str, float]
    sense: str  # "<=", ">=", "="
    rhs: float


@dataclass
class MilpModel:
    instance: Instance
    arcs: list[tuple[int, int]]
    sorties: list[SortieTriple]
    big_m: float
    objective: dict[str, float]
    constraints: list[Constraint]
    binaries: list[str]
    continuous: list[str]

    @property
    def families(self) -> dict[str, list[Constraint]]:
        grouped: dict[str, list[Constraint]] = {}
        for con in self.constraints:
            grouped.setdefault(con.family, []).append(con)
        return grouped

    def variable_names(self) -> list[str]:
        return self.binaries + self.continuous


def _x(i: int, j: int) -> str:
    return f"x_{i}_{j}"


def _y(s: SortieTriple) -> str:
    return f"y_{s.i}_{s.j}_{s.k}"


def _z(i: int) -> str:
    return f"z_{i}"


def _t(i: int) -> str:
    return f"t_{i}"


def _w(i: int) -> str:
    return f"w_{i}"


def compute_big_m(inst: Instance) -> float:
    """Per-model big-M: nearest-neighbour all-truck tour plus handling plus E.

    Large enough to deactivate timing constraints for any solution in
    the optimum's range; deliberately small to keep the LP relaxation
    useful.
    """
    tau = inst.tau_truck
    tour = 0.0
    here = 0
    remaining = set(inst.customers)
    while remaining:
        nxt = min(remaining, key=lambda v: (tau[here, v], v))
        tour += tau[here, nxt]
        here = nxt
        remaining.discard(nxt)
    tour += tau[here, inst.end_depot]
    handling = inst.customer_count * (inst.sigma_launch + inst.sigma_recover)
    return tour + handling + inst.endurance


def build_model(inst: Instance, big_m: float | None = None) -> MilpModel:
    """Assemble the thirteen constraint families over A and F.

    Families: per-customer service in/out, depot degree, truck flow
    conservation, truck timing, drone timing, wait definition, sortie
    endurance, drone carriage, launch linking, carriage propagation,
    route start time, and rendezvous visitation (the last closes a gap
    in the carriage constraints: a sortie may only rejoin the truck at a
    truck-visited node).
    """
    M = compute_big_m(inst) if big_m is None else big_m
    arcs = inst.arcs()
    sorties = sorted(feasible_sorties(inst))
    c = inst.customer_count
    end = inst.end_depot

    by_customer: dict[int, list[SortieTriple]] = {}
    by_launch: dict[int, list[SortieTriple]] = {}
    by_rendezvous: dict[int, list[SortieTriple]] = {}
    by_launch_rdv: dict[tuple[int, int], list[SortieTriple]] = {}
    for s in sorties:
        by_customer.setdefault(s.j, []).append(s)
        by_launch.setdefault(s.i, []).append(s)
        by_rendezvous.setdefault(s.k, []).append(s)
        by_launch_rdv.setdefault((s.i, s.k), []).append(s)

    objective: dict[str, float] = {}
    for i, j in arcs:
        objective[_x(i, j)] = float(inst.tau_truck[i, j])
    for s in sorties:
        handling = inst.sigma_recover + (inst.sigma_launch if s.i != 0 else 0.0)
        objective[_y(s)] = handling
    for i in inst.end_nodes:
        objective[_w(i)] = 1.0

    cons: list[Constraint] = []

    for j in inst.customers:
        coeffs = {_x(i, j): 1.0 for i in inst.start_nodes if i != j}
        for s in by_customer.get(j, ()):
            coeffs[_y(s)] = 1.0
        cons.append(Constraint(f"serve_in_{j}", "serve_in", coeffs, "=", 1.0))

    for j in inst.customers:
        coeffs = {_x(j, i): 1.0 for i in inst.end_nodes if i != j}
        for s in by_customer.get(j, ()):
            coeffs[_y(s)] = 1.0
        cons.append(Constraint(f"serve_out_{j}", "serve_out", coeffs, "=", 1.0))

    cons.append(Constraint("depot_out", "depot_degree",
                           {_x(0, j): 1.0 for j in inst.end_nodes}, "=", 1.0))
    cons.append(Constraint("depot_in", "depot_degree",
                           {_x(i, end): 1.0 for i in inst.start_nodes}, "=", 1.0))

    for j in inst.customers:
        coeffs = {_x(i, j): 1.0 for i in inst.start_nodes if i != j}
        for i in inst.end_nodes:
            if i != j:
                coeffs[_x(j, i)] = coeffs.get(_x(j, i), 0.0) - 1.0
        cons.append(Constraint(f"flow_{j}", "flow", coeffs, "=", 0.0))

    # t_j >= t_i + tau_ij - M (1 - x_ij)
    for i, j in arcs:
        cons.append(Constraint(
            f"truck_time_{i}_{j}", "truck_time",
            {_t(j): 1.0, _t(i): -1.0, _x(i, j): -M},
            ">=", float(inst.tau_truck[i, j]) - M,
        ))

    # t_k >= t_i + flight - M (1 - y) per sortie
    for s in sorties:
        fly = float(inst.tau_drone[s.i, s.j] + inst.tau_drone[s.j, s.k])
        cons.append(Constraint(
            f"drone_time_{s.i}_{s.j}_{s.k}", "drone_time",
            {_t(s.k): 1.0, _t(s.i): -1.0, _y(s): -M},
            ">=", fly - M,
        ))

    # w_j >= t_j - t_i - tau_ij - M (1 - x_ij)
    for i, j in arcs:
        cons.append(Constraint(
            f"wait_time_{i}_{j}", "wait_time",
            {_w(j): 1.0, _t(j): -1.0, _t(i): 1.0, _x(i, j): -M},
            ">=", -float(inst.tau_truck[i, j]) - M,
        ))

    # t_k - t_i + (handling) sum(y) <= E + M (1 - sum(y)); the handling
    # constant makes the airborne budget identical to the evaluator's.
    for (i, k), group in sorted(by_launch_rdv.items()):
        handling = 2.0 * inst.sigma_recover + (inst.sigma_launch if i != 0 else 0.0)
        coeffs = {_t(k): 1.0, _t(i): -1.0}
        for s in group:
            coeffs[_y(s)] = handling + M
        cons.append(Constraint(
            f"endurance_{i}_{k}", "endurance", coeffs, "<=", inst.endurance + M,
        ))

    # z_i <= sum of x entering i
    for i in inst.end_nodes:
        coeffs = {_z(i): 1.0}
        for h in inst.start_nodes:
            if h != i:
                coeffs[_x(h, i)] = -1.0
        cons.append(Constraint(f"drone_carriage_{i}", "drone_carriage", coeffs, "<=", 0.0))

    # launches at i require the drone aboard: sum(y launched at i) <= z_i
    for i in inst.start_nodes:
        coeffs = {_z(i): -1.0}
        for s in by_launch.get(i, ()):
            coeffs[_y(s)] = 1.0
        cons.append(Constraint(f"launch_link_{i}", "launch_link", coeffs, "<=", 0.0))

    # carriage propagation along used arcs:
    # z_j <= z_i - (launches at i) + (rendezvous at j) + (1 - x_ij)
    for i, j in arcs:
        coeffs = {_z(j): 1.0, _z(i): -1.0, _x(i, j): 1.0}
        for s in by_launch.get(i, ()):
            coeffs[_y(s)] = coeffs.get(_y(s), 0.0) + 1.0
        for s in by_rendezvous.get(j, ()):
            coeffs[_y(s)] = coeffs.get(_y(s), 0.0) - 1.0
        cons.append(Constraint(f"carriage_flow_{i}_{j}", "carriage_flow", coeffs, "<=", 1.0))

    cons.append(Constraint("start_time", "start_time", {_t(0): 1.0}, "=", 0.0))

    # a sortie's rendezvous must be a truck-visited node
    for k in inst.end_nodes:
        group = by_rendezvous.get(k)
        if not group:
            continue
        coeffs: dict[str, float] = {}
        for s in group:
            coeffs[_y(s)] = 1.0
        for h in inst.start_nodes:
            if h != k:
                coeffs[_x(h, k)] = -1.0
        cons.append(Constraint(f"rendezvous_visit_{k}", "rendezvous_visit", coeffs, "<=", 0.0))

    binaries = [_x(i, j) for i, j in arcs]
    binaries += [_y(s) for s in sorties]
    binaries += [_z(i) for i in range(c + 2)]
    continuous = [_t(i) for i in range(c + 2)] + [_w(i) for i in range(c + 2)]
    return MilpModel(
        instance=inst,
        arcs=arcs,
        sorties=sorties,
        big_m=M,
        objective=objective,
        constraints=cons,
        binaries=binaries,
        continuous=continuous,
    )


# -- LP text -------------------------------------------------------------------


def _num(v: float) -> str:
    if v == 0:
        return "0"  # never print -0
    return f"{v:.12g}"


def _expr(coeffs: dict[str, float], order: dict[str, int]) -> str:
    parts = []
    for name in sorted(coeffs, key=order.__getitem__):
        coef = coeffs[name]
        if coef == 0:
            continue
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        term = name if mag == 1 else f"{_num(mag)} {name}"
        parts.append(f"{sign} {term}")
    if not parts:
        return "0"
    head = parts[0]
    head = head[2:] if head.startswith("+ ") else "- " + head[2:]
    return " ".join([head] + parts[1:])


def export_lp(model: MilpModel) -> str:
    """Emit the model as CPLEX-style LP text with byte-stable ordering."""
    order = {name: idx for idx, name in enumerate(model.variable_names())}
    lines = [f"\\ FSTSP model for instance {model.instance.name}", "Minimize"]
    lines.append(f" obj: {_expr(model.objective, order)}")
    lines.append("Subject To")
    sense_txt = {"<=": "<=", ">=": ">=", "=": "="}
    for con in model.constraints:
        lines.append(f" {con.name}: {_expr(con.coeffs, order)} {sense_txt[con.sense]} {_num(con.rhs)}")
    lines.append("Bounds")
    for name in model.continuous:
        lines.append(f" {name} >= 0")
    lines.append("Binaries")
    for name in model.binaries:
        lines.append(f" {name}")
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp(model: MilpModel, path: str | Path) -> None:
    Path(path).write_text(export_lp(model), encoding="utf-8")


# -- assignments ----------------------------------------------------------------


def parse_assignment(text: str) -> dict[str, float]:
    """Parse 'name value' pairs, one per line; blank lines are skipped."""
    out: dict[str, float] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ValueError(f"line {lineno}: expected 'name value', got {line!r}")
        out[fields[0]] = float(fields[1])
    return out


def _binary(assignment: dict[str, float], name: str) -> int:
    value = assignment.get(name, 0.0)
    if abs(value) <= INTEGRALITY_TOL:
        return 0
    if abs(value - 1.0) <= INTEGRALITY_TOL:
        return 1
    raise ValueError(f"non-integral binary {name} = {value}")


def decode(model: MilpModel, assignment: dict[str, float]) -> Solution:
    """Rebuild a Solution from a solved assignment.

    Follows the x arcs from node 0 and collects active y sorties.
    Unknown assignment names are ignored; missing names count as zero.
    """
    inst = model.instance
    succ: dict[int, int] = {}
    active_arcs = 0
    for i, j in model.arcs:
        if _binary(assignment, _x(i, j)):
            if i in succ:
                raise ValueError(f"broken x-chain: node {i} has two outgoing arcs")
            succ[i] = j
            active_arcs += 1
    route = [0]
    seen = {0}
    while route[-1] != inst.end_depot:
        here = route[-1]
        if here not in succ:
            raise ValueError(f"broken x-chain: no arc leaves node {here}")
        nxt = succ[here]
        if nxt in seen:
            raise ValueError(f"broken x-chain: node {nxt} revisited")
        route.append(nxt)
        seen.add(nxt)
    if len(route) - 1 != active_arcs:
        raise ValueError("broken x-chain: arcs form more than one component")
    known = {_y(s) for s in model.sorties}
    for name in assignment:
        if name.startswith("y_") and name not in known and _binary(assignment, name):
            raise ValueError(f"active sortie variable {name} outside the feasible set")
    sorties = [s for s in model.sorties if _binary(assignment, _y(s))]
    return Solution(route, sorted(sorties))


def encode(model: MilpModel, sol: Solution) -> dict[str, float]:
    """Induce the assignment a feasible Solution defines.

    Node times are the handling-free clock (travel and waits only), the
    form the timing constraints expect; handling appears through the y
    objective terms instead.  Unvisited drone customers get the drone's
    arrival instant as their node time.
    """
    inst = model.instance
    route = sol.truck_route
    pos = {v: p for p, v in enumerate(route)}
    launch_at = {s.i: s for s in sol.sorties}

    t: dict[int, float] = {0: 0.0}
    w: dict[int, float] = {v: 0.0 for v in range(inst.customer_count + 2)}
    clock = 0.0
    active = None
    drone_depart = 0.0
    for a, b in zip(route, route[1:]):
        if a in launch_at:
            active = launch_at[a]
            drone_depart = clock
            t[active.j] = clock + float(inst.tau_drone[active.i, active.j])
        arrival = clock + float(inst.tau_truck[a, b])
        if active is not None and b == active.k:
            ready = drone_depart + float(
                inst.tau_drone[active.i, active.j] + inst.tau_drone[active.j, b]
            )
            t[b] = max(arrival, ready)
            w[b] = max(0.0, ready - arrival)
            active = None
        else:
            t[b] = arrival
        clock = t[b]

    inside: set[int] = set()
    for s in sol.sorties:
        for p in range(pos[s.i] + 1, pos[s.k]):
            inside.add(route[p])

    assignment: dict[str, float] = {}
    used = set(zip(route, route[1:]))
    for i, j in model.arcs:
        assignment[_x(i, j)] = 1.0 if (i, j) in used else 0.0
    chosen = set(sol.sorties)
    for s in model.sorties:
        assignment[_y(s)] = 1.0 if s in chosen else 0.0
    for v in range(inst.customer_count + 2):
        if v in pos:
            assignment[_z(v)] = 0.0 if v in inside else 1.0
        else:
            assignment[_z(v)] = 0.0
        assignment[_t(v)] = t.get(v, 0.0)
        assignment[_w(v)] = w[v]
    return assignment


def objective_value(model: MilpModel, assignment: dict[str, float]) -> float:
    return sum(coef * assignment.get(name, 0.0) for name, coef in model.objective.items())


def violated_constraints(
    model: MilpModel, assignment: dict[str, float], tol: float = 1e-7
) -> list[str]:
    """Names of constraints the assignment breaks; empty means it satisfies all."""
    bad = []
    for con in model.constraints:
        lhs = sum(coef * assignment.get(name, 0.0) for name, coef in con.coeffs.items())
        ok = (
            lhs <= con.rhs + tol
            if con.sense == "<="
            else lhs >= con.rhs - tol
            if con.sense == ">="
            else abs(lhs - con.rhs) <= tol
        )
        if not ok:
            bad.append(con.name)
    return bad

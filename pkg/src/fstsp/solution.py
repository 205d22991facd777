"""Plans and their synchronized timelines.

A Solution is a truck route 0 -> ... -> c+1 plus a list of sorties.
``evaluate`` runs the forward simulation that synchronizes the two
vehicles and yields per-node times t, truck waits w, and the completion
time; ``check_feasibility`` reports every broken rule as data.

Timing conventions (these make the completion time decompose exactly
into truck travel + handling + waits):

* launch preparation is charged before the truck leaves the launch node
  and delays both vehicles; it is skipped for depot launches;
* recovery is charged at the rendezvous after whichever vehicle arrives
  later, and delays the truck's onward departure;
* a drone that arrives early hovers, which is absorbed into the node
  time rather than the wait variable;
* at a node that is both a rendezvous and the next launch, recovery
  completes before the next launch preparation starts (one driver does
  both);
* the endurance charged to a sortie is t[k] - t[i] + sigma_recover on
  the evaluated timeline, so hover time and handling count against the
  battery.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from fstsp.instance import Instance, SortieTriple, feasible_sorties

#: slack for floating-point noise in endurance comparisons
ENDURANCE_TOL = 1e-9


@dataclass
class Solution:
    truck_route: list[int]
    sorties: list[SortieTriple] = field(default_factory=list)

    def sorted_sorties(self) -> list[SortieTriple]:
        return sorted(self.sorties)


@dataclass(frozen=True)
class Violation:
    """One broken feasibility rule; violations are data, not errors."""

    rule: str
    nodes: tuple[int, ...]
    detail: str

    def __str__(self) -> str:
        return f"{self.rule} at {self.nodes}: {self.detail}"


@dataclass
class Timeline:
    """Per-node synchronization times and waits for one evaluated plan."""

    t: dict[int, float]
    w: dict[int, float]
    completion: float
    sortie_usage: dict[SortieTriple, float]
    sortie_excess: dict[SortieTriple, float]
    endurance_ok: bool


def _structural_errors(inst: Instance, sol: Solution) -> list[Violation]:
    """Rules that must hold before the timeline simulation makes sense."""
    out: list[Violation] = []
    route = sol.truck_route
    c = inst.customer_count
    end = inst.end_depot
    if not route or route[0] != 0 or route[-1] != end:
        out.append(Violation("route endpoints", tuple(route[:1] + route[-1:]),
                             f"truck route must start at 0 and end at {end}"))
        return out
    if len(set(route)) != len(route):
        dupes = sorted({v for v in route if route.count(v) > 1})
        out.append(Violation("route repeat", tuple(dupes), "truck visits a node twice"))
        return out
    if any(not 0 <= v <= end for v in route):
        out.append(Violation("route endpoints", tuple(route), "node index out of range"))
        return out
    pos = {v: p for p, v in enumerate(route)}
    launches: dict[int, SortieTriple] = {}
    rendezvous: dict[int, SortieTriple] = {}
    for s in sol.sorties:
        if not (1 <= s.j <= c):
            out.append(Violation("sortie customer", (s.i, s.j, s.k), "customer index out of range"))
            continue
        if s.j in pos:
            out.append(Violation("customer served twice", (s.j,),
                                 f"customer {s.j} is on the truck route and in sortie {(s.i, s.j, s.k)}"))
            continue
        if s.i not in pos or s.k not in pos:
            out.append(Violation("sortie endpoint missing", (s.i, s.j, s.k),
                                 "launch and rendezvous must be truck-visited nodes"))
            continue
        if pos[s.i] >= pos[s.k]:
            out.append(Violation("sortie endpoint order", (s.i, s.j, s.k),
                                 "launch must precede rendezvous on the truck route"))
            continue
        if s.i in launches:
            out.append(Violation("drone already airborne", (s.i,),
                                 f"two sorties launch at node {s.i}"))
            continue
        if s.k in rendezvous:
            out.append(Violation("drone already airborne", (s.k,),
                                 f"two sorties rendezvous at node {s.k}"))
            continue
        launches[s.i] = s
        rendezvous[s.k] = s
    intervals = sorted((pos[s.i], pos[s.k], s) for s in launches.values())
    for (a0, a1, sa), (b0, b1, sb) in zip(intervals, intervals[1:]):
        if b0 < a1:  # endpoint sharing (b0 == a1) is allowed
            out.append(Violation("drone already airborne",
                                 (sa.i, sa.k, sb.i, sb.k),
                                 "sortie intervals overlap on the truck route"))
    return out


def evaluate(inst: Instance, sol: Solution) -> Timeline:
    """Simulate the plan and return its timeline.

    The solution must be structurally sound (see ``_structural_errors``);
    endurance may still be violated, which is reported through the
    timeline's excess fields rather than an exception so that penalized
    search can keep working with the value.  Coverage of all customers
    is deliberately not required here: partial plans evaluate fine.
    """
    errors = _structural_errors(inst, sol)
    if errors:
        raise ValueError("structurally infeasible solution: " + "; ".join(map(str, errors)))
    route = sol.truck_route
    launch_at = {s.i: s for s in sol.sorties}
    t: dict[int, float] = {0: 0.0}
    w: dict[int, float] = {0: 0.0}
    usage: dict[SortieTriple, float] = {}
    clock = 0.0
    active: SortieTriple | None = None
    drone_depart = 0.0
    for a, b in zip(route, route[1:]):
        if a in launch_at:
            active = launch_at[a]
            if a != 0:
                clock += inst.sigma_launch  # driver preps while parked
            drone_depart = clock
        arrival = clock + inst.tau_truck[a, b]
        if active is not None and b == active.k:
            ready = drone_depart + inst.tau_drone[active.i, active.j] + inst.tau_drone[active.j, b]
            t[b] = max(arrival, ready) + inst.sigma_recover
            w[b] = max(0.0, ready - arrival)
            usage[active] = t[b] - t[active.i] + inst.sigma_recover
            active = None
        else:
            t[b] = arrival
            w[b] = 0.0
        clock = t[b]
    excess = {s: max(0.0, u - inst.endurance) for s, u in usage.items()}
    return Timeline(
        t=t,
        w=w,
        completion=t[route[-1]],
        sortie_usage=usage,
        sortie_excess=excess,
        endurance_ok=all(u <= inst.endurance + ENDURANCE_TOL for u in usage.values()),
    )


def check_feasibility(inst: Instance, sol: Solution) -> list[Violation]:
    """Return every broken rule; an empty list means the plan is feasible.

    Checks, in order: structural solution invariants, exactly-once
    coverage of all customers, membership of each sortie in the
    endurance-filtered candidate set, and the timeline endurance check
    t[k] - t[i] + sigma_recover <= E per sortie.
    """
    out = _structural_errors(inst, sol)
    on_route = set(sol.truck_route)
    by_drone: dict[int, int] = {}
    for s in sol.sorties:
        by_drone[s.j] = by_drone.get(s.j, 0) + 1
    for j, count in sorted(by_drone.items()):
        if count > 1:
            out.append(Violation("customer served twice", (j,), f"{count} sorties serve customer {j}"))
    for j in inst.customers:
        if j not in on_route and j not in by_drone:
            out.append(Violation("customer unserved", (j,), "no vehicle serves this customer"))
    candidates = feasible_sorties(inst)
    for s in sol.sorties:
        if s not in candidates:
            out.append(Violation("sortie ineligible", (s.i, s.j, s.k),
                                 "not in the endurance-feasible sortie set"))
    if not out:
        timeline = evaluate(inst, sol)
        for s, u in sorted(timeline.sortie_usage.items()):
            if u > inst.endurance + ENDURANCE_TOL:
                out.append(Violation("endurance exceeded", (s.i, s.j, s.k),
                                     f"airborne budget {u:.6f} min exceeds E={inst.endurance}"))
    return out


def objective(inst: Instance, sol: Solution) -> float:
    """Completion time of the plan in minutes (t at the end depot)."""
    return evaluate(inst, sol).completion


def timeline_table(inst: Instance, sol: Solution, timeline: Timeline) -> list[dict]:
    """Per-node rows (node, t, w, role) for report output."""
    launch_at = {s.i for s in sol.sorties}
    rendezvous_at = {s.k for s in sol.sorties}
    drone_served = {s.j for s in sol.sorties}
    rows = []
    for node in sol.truck_route:
        roles = []
        if node in (0, inst.end_depot):
            roles.append("depot")
        if node in launch_at:
            roles.append("launch")
        if node in rendezvous_at:
            roles.append("rendezvous")
        rows.append({
            "node": node,
            "t_min": timeline.t[node],
            "w_min": timeline.w[node],
            "role": "+".join(roles) if roles else "truck",
        })
    for j in sorted(drone_served):
        rows.append({"node": j, "t_min": "", "w_min": "", "role": "drone"})
    return rows


def solution_to_dict(sol: Solution) -> dict:
    return {
        "truck_route": list(sol.truck_route),
        "sorties": [[s.i, s.j, s.k] for s in sol.sorties],
    }


def solution_from_dict(data: dict) -> Solution:
    return Solution(
        truck_route=[int(v) for v in data["truck_route"]],
        sorties=[SortieTriple(int(i), int(j), int(k)) for i, j, k in data["sorties"]],
    )


def save_solution(sol: Solution, path: str | Path) -> None:
    Path(path).write_text(json.dumps(solution_to_dict(sol), indent=1) + "\n", encoding="utf-8")


def load_solution(path: str | Path) -> Solution:
    return solution_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

"""Exact optimization at desk scale.

``brute_force`` enumerates every plan on tiny instances and is the
ground-truth oracle for everything else.  ``solve_exact`` is a
depth-first branch-and-bound over truck-route prefixes with sortie
launches interleaved; it certifies optima up to roughly a dozen
customers without any external solver.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from fstsp.instance import Instance, SortieTriple, feasible_sorties
from fstsp.solution import ENDURANCE_TOL, Solution, evaluate

BRUTE_FORCE_LIMIT = 7

#: tie window for argmin selection; mathematically equal plans (route
#: reversals, symmetric layouts) sum to floats a few ulp apart depending
#: on leg order, and ties must resolve to the same plan everywhere
VALUE_TIE_TOL = 1e-9

OPTIMAL = "optimal"
TIME_LIMIT = "time_limit"


def brute_force(inst: Instance) -> tuple[Solution, float]:
    """Enumerate all plans and return the best one with its completion time.

    Guarded to c <= 7.  Ties break toward the lexicographically smallest
    truck route, then the smallest sorted sortie list, so results are
    stable across runs.
    """
    c = inst.customer_count
    if c > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute_force is guarded to c <= {BRUTE_FORCE_LIMIT}, got c={c}")
    candidates = feasible_sorties(inst)
    eligible = sorted(inst.drone_eligible)
    best_value = float("inf")
    best_key: tuple[tuple[int, ...], tuple[SortieTriple, ...]] | None = None
    best_sol: Solution | None = None

    def consider(route: list[int], sorties: list[SortieTriple]) -> None:
        nonlocal best_value, best_key, best_sol
        sol = Solution(list(route), sorted(sorties))
        timeline = evaluate(inst, sol)
        if not timeline.endurance_ok:
            return
        key = (tuple(route), tuple(sol.sorties))
        if timeline.completion < best_value - VALUE_TIE_TOL:
            best_value, best_key, best_sol = timeline.completion, key, sol
        elif timeline.completion <= best_value + VALUE_TIE_TOL and key < best_key:
            best_value = min(best_value, timeline.completion)
            best_key, best_sol = key, sol

    for r in range(len(eligible) + 1):
        for drone_set in itertools.combinations(eligible, r):
            truck_customers = sorted(set(inst.customers) - set(drone_set))
            for perm in itertools.permutations(truck_customers):
                route = [0, *perm, inst.end_depot]
                pos = {v: p for p, v in enumerate(route)}
                _assign(inst, candidates, route, pos, list(drone_set), 0, [], consider)
    assert best_sol is not None, "the all-truck tour is always feasible"
    return best_sol, evaluate(inst, best_sol).completion


def _assign(inst, candidates, route, pos, drone_set, idx, chosen, consider) -> None:
    """Recursively place (launch, rendezvous) pairs for each drone customer."""
    if idx == len(drone_set):
        consider(route, chosen)
        return
    j = drone_set[idx]
    taken = [(pos[s.i], pos[s.k]) for s in chosen]
    for p in range(len(route) - 1):
        for q in range(p + 1, len(route)):
            i, k = route[p], route[q]
            if i == j or k == j:
                continue
            s = SortieTriple(i, j, k)
            if s not in candidates:
                continue
            if any(p < b1 and a0 < q for a0, b1 in taken):  # shared endpoints are fine
                continue
            chosen.append(s)
            _assign(inst, candidates, route, pos, drone_set, idx + 1, chosen, consider)
            chosen.pop()


# -- branch and bound ---------------------------------------------------------


@dataclass
class _OpenSortie:
    launch: int
    customer: int
    rendezvous: int
    launch_t: float       # timeline t at the launch node
    drone_depart: float   # launch_t plus prep when launched away from the depot


@dataclass
class _Search:
    inst: Instance
    by_launch: dict[int, list[SortieTriple]]
    closure: list[list[float]]     # metric closure of tau_truck, for admissible bounds
    tau_truck: list[list[float]]
    tau_drone: list[list[float]]
    deadline: float
    best_value: float = float("inf")
    best_key: tuple | None = None  # (route, sorties) for deterministic tie-breaks
    best: Solution | None = None
    nodes: int = 0
    timed_out: bool = False
    mst_cache: dict[frozenset, float] = field(default_factory=dict)

    def offer(self, value: float, sol: Solution) -> None:
        """Adopt a leaf if it improves the incumbent, breaking ties toward
        the lexicographically smallest (route, sorties)."""
        key = (tuple(sol.truck_route), tuple(sol.sorties))
        if value < self.best_value - VALUE_TIE_TOL:
            self.best_value, self.best_key, self.best = value, key, sol
        elif value <= self.best_value + VALUE_TIE_TOL and (
            self.best_key is None or key < self.best_key
        ):
            self.best_value = min(self.best_value, value)
            self.best_key, self.best = key, sol

    def mst(self, nodes: frozenset) -> float:
        """Minimum spanning tree weight over the metric closure; cached."""
        if len(nodes) <= 1:
            return 0.0
        cached = self.mst_cache.get(nodes)
        if cached is not None:
            return cached
        order = sorted(nodes)
        row = self.closure[order[0]]
        dist = {v: row[v] for v in order[1:]}
        total = 0.0
        while dist:
            v = min(dist, key=lambda u: (dist[u], u))
            total += dist.pop(v)
            row = self.closure[v]
            for u in dist:
                d = row[u]
                if d < dist[u]:
                    dist[u] = d
        self.mst_cache[nodes] = total
        return total


def _metric_closure(tau: np.ndarray) -> np.ndarray:
    closure = tau.copy()
    n = closure.shape[0]
    for m in range(n):
        closure = np.minimum(closure, closure[:, m : m + 1] + closure[m : m + 1, :])
    return closure


def solve_exact(inst: Instance, time_limit: float = 600.0) -> tuple[Solution, float, str]:
    """Branch-and-bound certification of the optimum.

    Returns (solution, completion minutes, status).  Status "optimal"
    means the search tree was exhausted; "time_limit" returns the best
    incumbent found.  The incumbent starts from a nearest-neighbour
    all-truck tour, so a feasible solution exists from the first instant.
    """
    candidates = feasible_sorties(inst)
    by_launch: dict[int, list[SortieTriple]] = {}
    for s in sorted(candidates):
        by_launch.setdefault(s.i, []).append(s)
    search = _Search(
        inst=inst,
        by_launch=by_launch,
        closure=_metric_closure(inst.tau_truck).tolist(),
        tau_truck=inst.tau_truck.tolist(),
        tau_drone=inst.tau_drone.tolist(),
        deadline=time.monotonic() + time_limit,
    )
    seed = _warm_start(inst, candidates)
    search.offer(evaluate(inst, seed).completion, seed)
    remaining = frozenset(inst.customers)
    _branch(search, [0], remaining, [], None, 0.0, 0.0)
    status = TIME_LIMIT if search.timed_out else OPTIMAL
    assert search.best is not None
    return search.best, evaluate(inst, search.best).completion, status


def _nearest_neighbour_tour(inst: Instance) -> Solution:
    tau = inst.tau_truck
    route = [0]
    remaining = set(inst.customers)
    while remaining:
        here = route[-1]
        route.append(min(remaining, key=lambda v: (tau[here, v], v)))
        remaining.discard(route[-1])
    route.append(inst.end_depot)
    return Solution(route)


def _warm_start(inst: Instance, candidates: set[SortieTriple]) -> Solution:
    """Cheap incumbent: 2-opt over the nearest-neighbour tour, then greedy
    single-sortie insertions while they pay off.  Only used to seed the
    search; optimality never depends on its quality."""
    route = _nearest_neighbour_tour(inst).truck_route
    tau = inst.tau_truck
    improved = True
    while improved:
        improved = False
        for a in range(1, len(route) - 2):
            for b in range(a + 1, len(route) - 1):
                delta = (
                    tau[route[a - 1], route[b]] + tau[route[a], route[b + 1]]
                    - tau[route[a - 1], route[a]] - tau[route[b], route[b + 1]]
                )
                if delta < -1e-12:
                    route[a:b + 1] = reversed(route[a:b + 1])
                    improved = True
    best = Solution(list(route))
    best_value = evaluate(inst, best).completion
    improved = True
    while improved:
        improved = False
        on_route = best.truck_route
        pos = {v: p for p, v in enumerate(on_route)}
        taken = [(pos[s.i], pos[s.k]) for s in best.sorties]
        flown = {s.j for s in best.sorties}
        for j in sorted(inst.drone_eligible - flown):
            if j not in pos or any(s.i == j or s.k == j for s in best.sorties):
                continue
            shorter = [v for v in on_route if v != j]
            spos = {v: p for p, v in enumerate(shorter)}
            staken = [(spos[s.i], spos[s.k]) for s in best.sorties]
            for s in sorted(candidates):
                if s.j != j or s.i not in spos or s.k not in spos:
                    continue
                qi, qk = spos[s.i], spos[s.k]
                if qi >= qk or any(qi < b and a < qk for a, b in staken):
                    continue
                trial = Solution(shorter, sorted(best.sorties + [s]))
                timeline = evaluate(inst, trial)
                if timeline.endurance_ok and timeline.completion < best_value - 1e-12:
                    best, best_value = trial, timeline.completion
                    improved = True
                    break
            if improved:
                break
    return best


def _branch(
    search: _Search,
    route: list[int],
    remaining: frozenset,
    sorties: list[SortieTriple],
    open_sortie: _OpenSortie | None,
    clock: float,
    depart_ready: float,
) -> None:
    """Depth-first extension of the truck prefix.

    ``clock`` is the timeline t at the current route end; ``depart_ready``
    additionally includes launch preparation when a sortie was just
    opened here.  Sorties are opened at their launch node with the
    rendezvous declared up front, so the timeline stays incremental.
    """
    inst = search.inst
    search.nodes += 1
    if search.timed_out or (search.nodes & 0xFF) == 0 and time.monotonic() > search.deadline:
        search.timed_out = True
        return

    here = route[-1]
    end = inst.end_depot
    tau_t = search.tau_truck
    tau_d = search.tau_drone
    sigma_r = inst.sigma_recover

    mandatory = remaining - inst.drone_eligible
    if open_sortie is not None and open_sortie.rendezvous != end:
        mandatory = mandatory | {open_sortie.rendezvous}
    bound = depart_ready + search.mst(frozenset(mandatory) | {here, end})
    if open_sortie is not None:
        bound += sigma_r  # the recovery stop is still ahead
        drone_bound = (
            open_sortie.drone_depart
            + tau_d[open_sortie.launch][open_sortie.customer]
            + tau_d[open_sortie.customer][open_sortie.rendezvous]
            + sigma_r
            + search.closure[open_sortie.rendezvous][end]
        )
        if drone_bound > bound:
            bound = drone_bound
    if bound > search.best_value + VALUE_TIE_TOL:
        return

    def arrive(nxt: int) -> tuple[float, bool]:
        """Timeline t at nxt plus the endurance verdict when nxt closes the sortie."""
        arrival = depart_ready + tau_t[here][nxt]
        if open_sortie is not None and nxt == open_sortie.rendezvous:
            ready = open_sortie.drone_depart + (
                tau_d[open_sortie.launch][open_sortie.customer]
                + tau_d[open_sortie.customer][nxt]
            )
            t_next = (arrival if arrival >= ready else ready) + sigma_r
            usage = t_next - open_sortie.launch_t + sigma_r
            return t_next, usage <= inst.endurance + ENDURANCE_TOL
        return arrival, True

    if not remaining:
        if open_sortie is None or open_sortie.rendezvous == end:
            t_end, ok = arrive(end)
            if ok and t_end <= search.best_value + VALUE_TIE_TOL:
                search.offer(t_end, Solution(
                    route + [end],
                    sorted(sorties + ([_close(open_sortie)] if open_sortie else [])),
                ))
        # fall through: a sortie may still be opened below even when
        # no customers remain (launch here, rendezvous at the end depot)

    # Truck extensions, nearest first (and closing the open sortie at its
    # rendezvous); child order only affects how soon good incumbents appear.
    for nxt in sorted(remaining, key=lambda v: (tau_t[here][v], v)):
        if open_sortie is not None and nxt == open_sortie.rendezvous:
            t_next, ok = arrive(nxt)
            if ok:
                _branch(
                    search,
                    route + [nxt],
                    remaining - {nxt},
                    sorties + [_close(open_sortie)],
                    None,
                    t_next,
                    t_next,
                )
        else:
            t_next, _ = arrive(nxt)
            _branch(search, route + [nxt], remaining - {nxt}, sorties, open_sortie, t_next, t_next)

    # Open a new sortie launched from the current end.
    if open_sortie is None:
        prep = inst.sigma_launch if here != 0 else 0.0
        for s in search.by_launch.get(here, ()):
            if s.j not in remaining:
                continue
            if s.k != end and (s.k not in remaining or s.k == s.j):
                continue
            opened = _OpenSortie(s.i, s.j, s.k, launch_t=clock, drone_depart=clock + prep)
            _branch(search, route, remaining - {s.j}, sorties, opened, clock, clock + prep)


def _close(open_sortie: _OpenSortie) -> SortieTriple:
    return SortieTriple(open_sortie.launch, open_sortie.customer, open_sortie.rendezvous)

"""Hybrid genetic algorithm for the truck-and-drone plan (HGenFS).

An individual is the delivery sequence plus a bit per position choosing
the vehicle (1 = drone), with a (launch, rendezvous) pair attached to
each drone-flagged position.  Route repair assigns those pairs; the
fitness is the plan's completion time plus a heavy penalty per minute of
endurance excess, so the search may pass through infeasible individuals
without ever returning one.

The generational loop keeps an elite, fills most of the population by
crossover (SWAP exchanges whole vectors between parents, DX2 is an
ordered crossover that carries the vehicle bit along with each
customer), tops up with random individuals, and then runs a two-phase
local search on everyone: random position swaps, each followed by a
burst of vehicle-bit flips that roll back when they hurt.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field

import numpy as np

from fstsp.instance import Instance, SortieTriple, feasible_sorties
from fstsp.solution import Solution, evaluate

TARGET_TOL = 1e-9

#: Table of local-search presets: crossover kind, swap iterations, flip iterations.
PRESETS = {
    "case1": ("DX2", 10, 10),
    "case2": ("DX2", 1, 20),
    "case3": ("DX2", 20, 1),
    "case4": ("SWAP", 10, 10),
    "case5": ("SWAP", 1, 20),
    "case6": ("SWAP", 20, 1),
}


@dataclass
class GaParams:
    pop_size: int = 50
    n_elite: int = 2
    n_crossover: int = 40
    mutation_rate: float = 0.2
    n_swap_search: int = 10
    n_drone_search: int = 10
    crossover_kind: str = "DX2"
    route_selection: str = "random"
    penalty_weight: float = 1000.0
    time_limit: float = 30.0
    target_cost: float | None = None
    seed: int = 0
    max_generations: int | None = None

    def __post_init__(self) -> None:
        if self.pop_size < 1:
            raise ValueError("pop_size must be >= 1")
        if min(self.n_elite, self.n_crossover, self.n_swap_search, self.n_drone_search) < 0:
            raise ValueError("counts must be >= 0")
        if self.n_elite + self.n_crossover > self.pop_size:
            raise ValueError("n_elite + n_crossover must not exceed pop_size")
        if self.crossover_kind not in ("SWAP", "DX2"):
            raise ValueError(f"unknown crossover kind {self.crossover_kind!r}")
        if self.route_selection not in ("random", "best"):
            raise ValueError(f"unknown route selection {self.route_selection!r}")


def preset(name: str, **overrides) -> GaParams:
    """Parameter preset case1..case6 (crossover kind and search depths)."""
    try:
        kind, n_swap, n_drone = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}") from None
    return GaParams(crossover_kind=kind, n_swap_search=n_swap, n_drone_search=n_drone, **overrides)


@dataclass
class Chromosome:
    """Delivery order, vehicle bits, and per-drone-position endpoints."""

    order: list[int]
    means: list[int]
    endpoints: dict[int, tuple[int, int]] = field(default_factory=dict)
    cost: float | None = None

    def clone(self) -> "Chromosome":
        return Chromosome(list(self.order), list(self.means), dict(self.endpoints), self.cost)


@dataclass(frozen=True)
class HistoryEntry:
    restart: int
    generation: int
    elapsed_s: float
    best_cost: float


def decode_chromosome(inst: Instance, ch: Chromosome) -> Solution:
    """Chromosome to plan: unflagged customers ride the truck in order."""
    truck = [0] + [v for v, bit in zip(ch.order, ch.means) if bit == 0] + [inst.end_depot]
    on_truck = set(truck)
    sorties = []
    for p, (v, bit) in enumerate(zip(ch.order, ch.means)):
        if bit == 0:
            continue
        if p not in ch.endpoints:
            raise ValueError(f"drone position {p} has no endpoint pair; run create_route first")
        i, k = ch.endpoints[p]
        if i not in on_truck or k not in on_truck:
            raise ValueError(f"endpoint pair {(i, k)} references a node not served by truck")
        sorties.append(SortieTriple(i, v, k))
    return Solution(truck, sorties)


def eval_chromosome(inst: Instance, ch: Chromosome, penalty_weight: float = 1000.0) -> float:
    """Penalized cost: completion plus weight per minute of endurance excess."""
    timeline = evaluate(inst, decode_chromosome(inst, ch))
    cost = timeline.completion + penalty_weight * sum(timeline.sortie_excess.values())
    ch.cost = cost
    return cost


def select_parent(costs: list[float], rng: np.random.Generator) -> int:
    """Stochastic-acceptance roulette with fitness 1/cost.

    Draw a uniform index and accept it with probability
    fitness/fitness_max; repeat until accepted.  Expected O(1) per
    selection and proportional to fitness in distribution.
    """
    if not costs:
        raise ValueError("empty population")
    n = len(costs)
    min_cost = max(min(costs), 1e-12)
    while True:
        idx = int(rng.integers(n))
        if rng.random() < min_cost / max(costs[idx], 1e-12):
            return idx


def crossover_swap(p1: Chromosome, p2: Chromosome) -> tuple[Chromosome, Chromosome]:
    """Each child takes the delivery order of one parent and the bits of the other."""
    c1 = Chromosome(list(p1.order), list(p2.means))
    c2 = Chromosome(list(p2.order), list(p1.means))
    return c1, c2


def crossover_dx2(
    p1: Chromosome, p2: Chromosome, rng: np.random.Generator
) -> tuple[Chromosome, Chromosome]:
    """Ordered crossover carrying the vehicle bit with each customer.

    Two cut positions delimit a segment kept from one parent; remaining
    positions fill left to right with the other parent's missing
    customers, in that parent's order, each keeping that parent's bit.
    """
    c = len(p1.order)
    if c < 2:
        return p1.clone(), p2.clone()
    a, b = sorted(int(v) for v in rng.choice(c, size=2, replace=False))

    def child(keep: Chromosome, fill: Chromosome) -> Chromosome:
        order = [0] * c
        means = [0] * c
        kept = set()
        for p in range(a, b + 1):
            order[p] = keep.order[p]
            means[p] = keep.means[p]
            kept.add(keep.order[p])
        pairs = [(v, bit) for v, bit in zip(fill.order, fill.means) if v not in kept]
        slots = [p for p in range(c) if not a <= p <= b]
        for p, (v, bit) in zip(slots, pairs):
            order[p] = v
            means[p] = bit
        return Chromosome(order, means)

    return child(p1, p2), child(p2, p1)


def mutate(ch: Chromosome, rng: np.random.Generator) -> Chromosome:
    """Either swap two order positions or flip one vehicle bit, evenly.

    The bit vector stays positional during a swap, so the swap may move
    a drone delivery onto a different customer; endpoints are dropped
    and must be repaired before evaluation.
    """
    out = Chromosome(list(ch.order), list(ch.means))
    c = len(out.order)
    if c >= 2 and rng.random() < 0.5:
        p, q = (int(v) for v in rng.choice(c, size=2, replace=False))
        out.order[p], out.order[q] = out.order[q], out.order[p]
    else:
        p = int(rng.integers(c))
        out.means[p] = 1 - out.means[p]
    return out


class _Repairer:
    """Per-instance machinery shared by repair and local search.

    Precomputes the endurance-filtered (launch, rendezvous) pairs per
    customer and keeps plain-list travel matrices, because candidate
    scoring is the hot loop of the whole algorithm.
    """

    def __init__(self, inst: Instance, candidates: set[SortieTriple] | None = None):
        self.inst = inst
        cand = sorted(candidates) if candidates is not None else sorted(feasible_sorties(inst))
        self.pairs_by_customer: dict[int, list[tuple[int, int]]] = {}
        for s in cand:
            self.pairs_by_customer.setdefault(s.j, []).append((s.i, s.k))
        self.tau_truck = inst.tau_truck.tolist()
        self.tau_drone = inst.tau_drone.tolist()

    def plan_cost(self, truck: list[int], sorties: list[tuple[int, int, int]],
                  penalty_weight: float) -> float:
        """Penalized completion of a structurally valid partial plan.

        Same arithmetic as the public evaluator, without validation or
        per-node bookkeeping; kept in lockstep by a parity test.
        """
        inst = self.inst
        tau_t, tau_d = self.tau_truck, self.tau_drone
        launch = {s[0]: s for s in sorties}
        clock = 0.0
        penalty = 0.0
        active = None
        depart = 0.0
        launch_t = 0.0
        a = truck[0]
        for b in truck[1:]:
            if a in launch:
                active = launch[a]
                launch_t = clock
                if a != 0:
                    clock += inst.sigma_launch
                depart = clock
            arrival = clock + tau_t[a][b]
            if active is not None and b == active[2]:
                ready = depart + tau_d[active[0]][active[1]] + tau_d[active[1]][b]
                clock = max(arrival, ready) + inst.sigma_recover
                usage = clock - launch_t + inst.sigma_recover
                penalty += max(0.0, usage - inst.endurance)
                active = None
            else:
                clock = arrival
            a = b
        return clock + penalty_weight * penalty


def create_route(
    inst: Instance,
    ch: Chromosome,
    mode: str,
    rng: np.random.Generator,
    candidates: set[SortieTriple] | None = None,
    penalty_weight: float = 1000.0,
    repairer: _Repairer | None = None,
) -> Chromosome:
    """Repair: assign a (launch, rendezvous) pair to every drone position.

    Drone-flagged positions are processed in sequence order.  Candidate
    pairs come from truck-served nodes and the depots, must precede the
    rendezvous on the truck path, respect the endurance candidate set,
    and must not overlap an earlier sortie's stretch of the route
    (sharing an endpoint is fine).  mode="random" picks uniformly,
    mode="best" picks the pair with the cheapest evaluated partial plan.
    A position with no candidates, or an ineligible customer, falls back
    to the truck; repair therefore always succeeds.
    """
    rep = repairer if repairer is not None else _Repairer(inst, candidates)
    ch.endpoints = {}
    ch.cost = None
    end = inst.end_depot
    flagged = [p for p, bit in enumerate(ch.means) if bit == 1]
    truck = [0] + [v for v, bit in zip(ch.order, ch.means) if bit == 0] + [end]
    for p in flagged:
        j = ch.order[p]
        static_pairs = rep.pairs_by_customer.get(j)
        if static_pairs is None:  # not drone-eligible
            ch.means[p] = 0
            truck = [0] + [v for v, bit in zip(ch.order, ch.means) if bit == 0] + [end]
            continue
        pos = {v: q for q, v in enumerate(truck)}
        taken = [(pos[i], pos[k]) for (i, k) in ch.endpoints.values()]
        pairs = []
        for i, k in static_pairs:
            qi = pos.get(i)
            qk = pos.get(k)
            if qi is None or qk is None or qi >= qk:
                continue
            if any(qi < b and a < qk for a, b in taken):
                continue
            pairs.append((i, k))
        if not pairs:
            ch.means[p] = 0
            truck = [0] + [v for v, bit in zip(ch.order, ch.means) if bit == 0] + [end]
            continue
        if mode == "random" or len(pairs) == 1:
            i, k = pairs[int(rng.integers(len(pairs)))]
        else:
            assigned = [(ep_i, ch.order[q], ep_k) for q, (ep_i, ep_k) in ch.endpoints.items()]
            i, k = min(
                pairs,
                key=lambda pair: rep.plan_cost(
                    truck, assigned + [(pair[0], j, pair[1])], penalty_weight
                ),
            )
        ch.endpoints[p] = (i, k)
    return ch


def local_search(
    inst: Instance,
    ch: Chromosome,
    params: GaParams,
    rng: np.random.Generator,
    candidates: set[SortieTriple] | None = None,
    repairer: _Repairer | None = None,
) -> Chromosome:
    """Two-phase improvement pass over one individual, in place.

    n_swap_search times: swap two random order positions, repair, and
    evaluate; the swap is kept no matter what.  After each swap,
    n_drone_search times: flip one random vehicle bit, repair with
    best-pair selection, evaluate, and roll back when the cost got
    strictly worse.  Only the flip phase is guaranteed non-worsening.
    """
    rep = repairer if repairer is not None else _Repairer(inst, candidates)
    if ch.cost is None:
        eval_chromosome(inst, ch, params.penalty_weight)
    c = len(ch.order)
    for _ in range(params.n_swap_search):
        if c >= 2:
            p, q = (int(v) for v in rng.choice(c, size=2, replace=False))
            ch.order[p], ch.order[q] = ch.order[q], ch.order[p]
            create_route(inst, ch, params.route_selection, rng,
                         penalty_weight=params.penalty_weight, repairer=rep)
            eval_chromosome(inst, ch, params.penalty_weight)
        for _ in range(params.n_drone_search):
            backup = ch.clone()
            p = int(rng.integers(c))
            ch.means[p] = 1 - ch.means[p]
            create_route(inst, ch, "best", rng,
                         penalty_weight=params.penalty_weight, repairer=rep)
            eval_chromosome(inst, ch, params.penalty_weight)
            if ch.cost > backup.cost:
                ch.order = backup.order
                ch.means = backup.means
                ch.endpoints = backup.endpoints
                ch.cost = backup.cost
    return ch


# -- generational loop ----------------------------------------------------------


def _random_chromosome(inst: Instance, rng: np.random.Generator) -> Chromosome:
    order = [int(v) for v in rng.permutation(np.arange(1, inst.customer_count + 1))]
    means = [int(v) for v in rng.integers(0, 2, inst.customer_count)]
    return Chromosome(order, means)


def _all_truck_chromosome(inst: Instance) -> Chromosome:
    return Chromosome(list(inst.customers), [0] * inst.customer_count)


@dataclass
class _RestartResult:
    restart: int
    best_cost: float
    best_solution: Solution
    history: list[HistoryEntry]
    generations: int
    evaluations: int


def _is_feasible_cost(inst: Instance, ch: Chromosome) -> bool:
    timeline = evaluate(inst, decode_chromosome(inst, ch))
    return timeline.endurance_ok


def _run_restart(
    inst: Instance, params: GaParams, restart: int, seed_seq: np.random.SeedSequence
) -> _RestartResult:
    rng = np.random.default_rng(seed_seq)
    start = time.perf_counter()
    deadline = start + params.time_limit
    repairer = _Repairer(inst)
    history: list[HistoryEntry] = []
    evaluations = 0

    def build(ch: Chromosome) -> Chromosome:
        nonlocal evaluations
        create_route(inst, ch, params.route_selection, rng,
                     penalty_weight=params.penalty_weight, repairer=repairer)
        eval_chromosome(inst, ch, params.penalty_weight)
        evaluations += 1
        return ch

    population = [build(_all_truck_chromosome(inst))]
    population += [build(_random_chromosome(inst, rng)) for _ in range(params.pop_size - 1)]

    best: Chromosome | None = None

    def note_best(generation: int) -> None:
        nonlocal best
        for ind in population:
            if (best is None or ind.cost < best.cost) and _is_feasible_cost(inst, ind):
                best = ind.clone()
                history.append(HistoryEntry(restart, generation,
                                            time.perf_counter() - start, best.cost))

    def target_met() -> bool:
        return (
            params.target_cost is not None
            and best is not None
            and best.cost <= params.target_cost + TARGET_TOL
        )

    note_best(0)
    generation = 0
    while not target_met() and time.perf_counter() < deadline:
        if params.max_generations is not None and generation >= params.max_generations:
            break
        generation += 1
        population.sort(key=lambda ind: (ind.cost, tuple(ind.order), tuple(ind.means)))
        new_pop = [population[p].clone() for p in range(min(params.n_elite, len(population)))]
        costs = [ind.cost for ind in population]
        while len(new_pop) < params.n_elite + params.n_crossover:
            p1 = population[select_parent(costs, rng)]
            p2 = population[select_parent(costs, rng)]
            if params.crossover_kind == "SWAP":
                children = crossover_swap(p1, p2)
            else:
                children = crossover_dx2(p1, p2, rng)
            for child in children:
                if len(new_pop) >= params.n_elite + params.n_crossover:
                    break
                if rng.random() < params.mutation_rate:
                    child = mutate(child, rng)
                new_pop.append(build(child))
        while len(new_pop) < params.pop_size:
            new_pop.append(build(_random_chromosome(inst, rng)))
        population = new_pop
        for idx, ind in enumerate(population):
            if time.perf_counter() >= deadline:
                break
            searched = local_search(inst, ind.clone(), params, rng, repairer=repairer)
            if searched.cost < ind.cost:
                population[idx] = searched
        note_best(generation)

    assert best is not None, "the all-truck seed guarantees a feasible individual"
    return _RestartResult(
        restart=restart,
        best_cost=best.cost,
        best_solution=decode_chromosome(inst, best),
        history=history,
        generations=generation,
        evaluations=evaluations,
    )


def run(
    inst: Instance,
    params: GaParams,
    restarts: int = 10,
    workers: int = 1,
    stop_at_target: bool = True,
) -> tuple[Solution, float, list[HistoryEntry]]:
    """Run the algorithm with independent restarts and return the best plan.

    Restart r draws its generator from the r-th spawn of the seed
    sequence, so results are reproducible per (seed, restart) and do not
    depend on scheduling.  With ``workers`` > 1, restarts run in
    parallel processes.  When ``stop_at_target`` is set and a target
    cost is given, restarts stop being launched once one of them has
    reached the target.  The returned history holds every best-cost
    improvement of every executed restart; wall-clock fields vary from
    run to run, the cost trajectory per restart does not.
    """
    if restarts < 1:
        raise ValueError("need at least one restart")
    seeds = np.random.SeedSequence(params.seed).spawn(restarts)
    results: list[_RestartResult] = []

    def hit(res: _RestartResult) -> bool:
        return (
            stop_at_target
            and params.target_cost is not None
            and res.best_cost <= params.target_cost + TARGET_TOL
        )

    if workers <= 1:
        for r in range(restarts):
            results.append(_run_restart(inst, params, r, seeds[r]))
            if hit(results[-1]):
                break
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_restart, inst, params, r, seeds[r]) for r in range(restarts)]
            for fut in as_completed(futures):
                results.append(fut.result())
                if hit(results[-1]):
                    for other in futures:
                        other.cancel()
                    break
    results.sort(key=lambda res: (res.best_cost, res.restart))
    top = results[0]
    history = [entry for res in sorted(results, key=lambda r: r.restart) for entry in res.history]
    return top.best_solution, top.best_cost, history

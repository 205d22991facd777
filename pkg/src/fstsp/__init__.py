"""Truck-and-drone routing toolkit for the Flying Sidekick TSP.

One truck and one drone cooperate to serve every customer exactly once;
the objective is the completion time of the synchronized plan.  The
package provides instance handling, plan evaluation, an LP-format MILP
exporter, an exact branch-and-bound solver for desk-scale instances, and
the HGenFS hybrid genetic algorithm.
"""

from fstsp.instance import (
    Instance,
    InstanceFormatError,
    NodePoint,
    SortieTriple,
    build_from_coordinates,
    feasible_sorties,
    generate_random,
    load_instance,
    save_instance,
)
from fstsp.solution import (
    Solution,
    Timeline,
    Violation,
    check_feasibility,
    evaluate,
    load_solution,
    objective,
    save_solution,
)
from fstsp.milp import MilpModel, build_model, compute_big_m, decode, encode, export_lp
from fstsp.exact import brute_force, solve_exact
from fstsp.hgenfs import Chromosome, GaParams, preset, run

__version__ = "0.1.0"

__all__ = [
    "Instance",
    "InstanceFormatError",
    "NodePoint",
    "SortieTriple",
    "build_from_coordinates",
    "feasible_sorties",
    "generate_random",
    "load_instance",
    "save_instance",
    "Solution",
    "Timeline",
    "Violation",
    "check_feasibility",
    "evaluate",
    "objective",
    "load_solution",
    "save_solution",
    "MilpModel",
    "build_model",
    "compute_big_m",
    "decode",
    "encode",
    "export_lp",
    "brute_force",
    "solve_exact",
    "Chromosome",
    "GaParams",
    "preset",
    "run",
    "__version__",
]

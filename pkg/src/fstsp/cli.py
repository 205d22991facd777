"""Command-line front end and benchmark harness.

Subcommands: gen, solve, eval, export-lp, bench, import-csv.  Reports
are CSV with a stable header; the bench path additionally renders
figures to files next to the CSV unless --no-figures is given.

Exit codes: 0 feasible result, 2 infeasible or unreadable input, 3 time
limit without a feasible result, 4 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from fstsp import exact, hgenfs, milp
from fstsp.instance import (
    DEFAULT_DRONE_SPEED,
    DEFAULT_ENDURANCE,
    DEFAULT_SIGMA_LAUNCH,
    DEFAULT_SIGMA_RECOVER,
    DEFAULT_TRUCK_SPEED,
    Instance,
    InstanceFormatError,
    generate_random,
    import_coordinates_csv,
    load_instance,
    save_instance,
)
from fstsp.solution import (
    check_feasibility,
    evaluate,
    load_solution,
    save_solution,
    timeline_table,
)

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_NO_RESULT = 3
EXIT_USAGE = 4

REPORT_HEADER = ["instance", "method", "preset", "objective_min", "wall_time_s", "status", "seed"]
BENCH_HEADER = ["instance", "preset", "repeat", "seed", "target_min",
                "best_cost_min", "time_to_target_s", "hit"]
HISTORY_HEADER = ["restart", "generation", "elapsed_s", "best_cost"]


@dataclass
class RunReport:
    instance: str
    method: str
    preset: str
    objective: float | None
    wall_time_s: float
    status: str
    seed: int

    def row(self) -> list:
        obj = "" if self.objective is None else f"{self.objective:.6f}"
        return [self.instance, self.method, self.preset, obj,
                f"{self.wall_time_s:.3f}", self.status, self.seed]


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_instance_or_exit(path: str) -> Instance:
    try:
        return load_instance(path)
    except (OSError, InstanceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_INFEASIBLE) from exc


def _write_report(path: str | Path, reports: list[RunReport]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_HEADER)
        for report in reports:
            writer.writerow(report.row())


def _write_history(path: str | Path, history: list[hgenfs.HistoryEntry]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_HEADER)
        for entry in history:
            writer.writerow([entry.restart, entry.generation,
                             f"{entry.elapsed_s:.4f}", f"{entry.best_cost:.6f}"])


def _load_targets(path: str | None) -> dict[str, float]:
    if path is None:
        return {}
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return {str(k): float(v) for k, v in data.items()}


# -- subcommands ----------------------------------------------------------------


def cmd_gen(args: argparse.Namespace) -> int:
    inst = generate_random(
        c=args.customers,
        area_km2=args.area_km2,
        eligible_ratio=args.ratio,
        seed=args.seed,
        truck_speed=args.truck_speed,
        drone_speed=args.drone_speed,
        sigma_launch=args.sigma_launch,
        sigma_recover=args.sigma_recover,
        endurance=args.endurance,
        name=args.name,
    )
    save_instance(inst, args.out)
    print(f"wrote {args.out}: {inst!r}")
    return EXIT_OK


def cmd_import_csv(args: argparse.Namespace) -> int:
    try:
        inst = import_coordinates_csv(
            args.coords,
            truck_speed=args.truck_speed,
            drone_speed=args.drone_speed,
            sigma_launch=args.sigma_launch,
            sigma_recover=args.sigma_recover,
            endurance=args.endurance,
            name=args.name,
        )
    except (OSError, InstanceFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    save_instance(inst, args.out)
    print(f"wrote {args.out}: {inst!r}")
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    inst = _load_instance_or_exit(args.instance)
    targets = _load_targets(args.targets)
    target = args.target if args.target is not None else targets.get(inst.name)
    started = time.perf_counter()
    history: list[hgenfs.HistoryEntry] = []
    if args.method == "exact":
        time_limit = args.time_limit if args.time_limit is not None else 600.0
        sol, objective_min, status = exact.solve_exact(inst, time_limit=time_limit)
    else:
        time_limit = args.time_limit if args.time_limit is not None else 30.0
        params = hgenfs.preset(
            args.preset, time_limit=time_limit, target_cost=target, seed=args.seed,
        )
        sol, objective_min, history = hgenfs.run(
            inst, params, restarts=args.restarts, workers=args.workers,
        )
        hit = target is not None and objective_min <= target + hgenfs.TARGET_TOL
        status = "target" if hit else "feasible"
    wall = time.perf_counter() - started
    report = RunReport(inst.name, args.method, args.preset if args.method == "hgenfs" else "",
                       objective_min, wall, status, args.seed)
    out = Path(args.out) if args.out else Path(args.instance).with_suffix(".sol.json")
    save_solution(sol, out)
    if args.report:
        _write_report(args.report, [report])
    if args.history and history:
        _write_history(args.history, history)
    if args.plot:
        from fstsp import plotting

        plotting.plot_route(inst, sol, args.plot, title=f"{inst.name}: {objective_min:.3f} min")
    print(",".join(str(v) for v in report.row()))
    print(f"solution written to {out}")
    violations = check_feasibility(inst, sol)
    if violations:
        for violation in violations:
            print(f"violation: {violation}", file=sys.stderr)
        return EXIT_NO_RESULT
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    inst = _load_instance_or_exit(args.instance)
    try:
        sol = load_solution(args.solution)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: cannot read solution: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    violations = check_feasibility(inst, sol)
    if violations:
        for violation in violations:
            print(f"violation: {violation}")
        return EXIT_INFEASIBLE
    timeline = evaluate(inst, sol)
    rows = timeline_table(inst, sol, timeline)
    writer = csv.writer(open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout)
    writer.writerow(["node", "t_min", "w_min", "role"])
    for row in rows:
        writer.writerow([row["node"], row["t_min"], row["w_min"], row["role"]])
    print(f"objective_min,{timeline.completion:.6f}")
    return EXIT_OK


def cmd_export_lp(args: argparse.Namespace) -> int:
    inst = _load_instance_or_exit(args.instance)
    model = milp.build_model(inst)
    milp.write_lp(model, args.out)
    print(
        f"wrote {args.out}: {len(model.binaries)} binaries, "
        f"{len(model.continuous)} continuous, {len(model.constraints)} constraints, "
        f"big_m={model.big_m:.6f}"
    )
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    instance_paths = sorted(Path(args.instances).glob("*.json"))
    instance_paths = [p for p in instance_paths if not p.name.endswith(".sol.json")]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    presets = [name.strip() for name in args.presets.split(",") if name.strip()]
    for name in presets:
        if name not in hgenfs.PRESETS:
            print(f"error: unknown preset {name}", file=sys.stderr)
            return EXIT_USAGE

    instances = [_load_instance_or_exit(str(p)) for p in instance_paths]
    targets = _load_targets(args.targets)
    missing = [inst for inst in instances if inst.name not in targets]
    if missing:
        print(f"computing targets for {len(missing)} instance(s) with the exact solver")
        for inst in missing:
            _, optimum, status = exact.solve_exact(inst, time_limit=args.exact_time_limit)
            targets[inst.name] = optimum
            print(f"  {inst.name}: {optimum:.6f} ({status})")
        (out_dir / "targets.json").write_text(
            json.dumps(targets, indent=1, sort_keys=True) + "\n", encoding="utf-8"
        )

    rows = []
    histories: dict[tuple[str, str, int], list[hgenfs.HistoryEntry]] = {}
    base_seq = np.random.SeedSequence(args.seed)
    cell_seeds = base_seq.spawn(len(instances) * len(presets) * args.repeats)
    cell = 0
    for inst in instances:
        for preset_name in presets:
            for repeat in range(args.repeats):
                seed = int(cell_seeds[cell].generate_state(1)[0])
                cell += 1
                target = targets[inst.name]
                params = hgenfs.preset(
                    preset_name, time_limit=args.time_limit, target_cost=target, seed=seed,
                )
                _, best_cost, history = hgenfs.run(inst, params, restarts=1)
                hit_time = None
                for entry in history:
                    if entry.best_cost <= target + hgenfs.TARGET_TOL:
                        hit_time = entry.elapsed_s
                        break
                hit = hit_time is not None
                rows.append([
                    inst.name, preset_name, repeat, seed, f"{target:.6f}",
                    f"{best_cost:.6f}",
                    f"{hit_time if hit else args.time_limit:.4f}", int(hit),
                ])
                histories[(inst.name, preset_name, repeat)] = history

    results_path = out_dir / "bench.csv"
    with open(results_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(BENCH_HEADER)
        writer.writerows(rows)

    averages: dict[str, float] = {}
    summary_path = out_dir / "summary.csv"
    with open(summary_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["preset", "runs", "hits", "avg_time_to_target_s"])
        for preset_name in presets:
            cells = [row for row in rows if row[1] == preset_name]
            times = [float(row[6]) for row in cells]
            hits = sum(int(row[7]) for row in cells)
            avg = sum(times) / len(times) if times else float("nan")
            averages[preset_name] = avg
            writer.writerow([preset_name, len(cells), hits, f"{avg:.4f}"])
            print(f"{preset_name}: {hits}/{len(cells)} hits, avg time to target {avg:.2f} s")

    if not args.no_figures:
        from fstsp import plotting

        fig_dir = out_dir / "figures"
        fig_dir.mkdir(exist_ok=True)
        plotting.plot_bench_summary(presets, averages,
                                    fig_dir / "summary_time_to_target.png", args.time_limit)
        for (inst_name, preset_name, repeat), history in histories.items():
            if repeat == 0 and history:
                plotting.plot_history(history,
                                      fig_dir / f"{inst_name}_{preset_name}_history.png",
                                      title=f"{inst_name} / {preset_name}")
    print(f"wrote {results_path} and {summary_path}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def _add_instance_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--truck-speed", type=float, default=DEFAULT_TRUCK_SPEED,
                   help="truck speed, km/min")
    p.add_argument("--drone-speed", type=float, default=DEFAULT_DRONE_SPEED,
                   help="drone speed, km/min")
    p.add_argument("--sigma-launch", type=float, default=DEFAULT_SIGMA_LAUNCH,
                   help="launch preparation, minutes")
    p.add_argument("--sigma-recover", type=float, default=DEFAULT_SIGMA_RECOVER,
                   help="recovery handling, minutes")
    p.add_argument("--endurance", type=float, default=DEFAULT_ENDURANCE,
                   help="drone endurance, minutes")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fstsp", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random instance")
    p.add_argument("--customers", "-c", type=int, default=10)
    p.add_argument("--area-km2", type=float, default=13.0)
    p.add_argument("--ratio", type=float, default=0.85, help="drone-eligible fraction")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default=None)
    p.add_argument("--out", required=True)
    _add_instance_params(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("import-csv", help="import a coordinate CSV as a canonical instance")
    p.add_argument("--coords", required=True, help="CSV with id,x_m,y_m[,drone_eligible]")
    p.add_argument("--name", default=None)
    p.add_argument("--out", required=True)
    _add_instance_params(p)
    p.set_defaults(func=cmd_import_csv)

    p = sub.add_parser("solve", help="solve an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--method", choices=["exact", "hgenfs"], default="exact")
    p.add_argument("--preset", default="case2", choices=sorted(hgenfs.PRESETS))
    p.add_argument("--time-limit", type=float, default=None,
                   help="seconds; defaults to 600 for exact, 30 for hgenfs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--target", type=float, default=None, help="stop when this cost is reached")
    p.add_argument("--targets", default=None, help="JSON sidecar of per-instance targets")
    p.add_argument("--out", default=None, help="solution file (default: <instance>.sol.json)")
    p.add_argument("--report", default=None, help="write a one-row report CSV here")
    p.add_argument("--history", default=None, help="write best-cost history CSV here")
    p.add_argument("--plot", default=None, help="render the route figure to this file")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", help="evaluate a solution file against an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--out", default=None, help="timeline CSV (default: stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-lp", help="export the MILP as LP text")
    p.add_argument("--instance", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_lp)

    p = sub.add_parser("bench", help="run the benchmark harness over an instance directory")
    p.add_argument("--instances", required=True, help="directory of instance JSON files")
    p.add_argument("--presets", default="case1,case2,case3,case4,case5,case6")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--time-limit", type=float, default=30.0)
    p.add_argument("--exact-time-limit", type=float, default=600.0)
    p.add_argument("--targets", default=None, help="JSON sidecar of per-instance optima")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="bench_out")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Command line: ``gen`` instances, ``solve`` one instance, ``bench`` a grid.

Exit codes: 0 success, 1 usage, 2 input (unreadable or malformed files), 3 numeric abort.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .baselines import brute_force_maxcut, local_search_1flip
from .graph import (Graph, GraphFormatError, build_maxcut_qubo, cut_size, generate_random_graph,
                    parse_edge_list, read_graph)
from .grl import GrlConfig, train_grl
from .mcts import MctsConfig, train_mcts_gnn
from .pignn import PignnConfig, train_pignn
from .result import NumericalError, SolveResult

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

SOLVERS = ("pignn", "grl", "mcts", "local_search", "oracle")
LEARNED = {"pignn": PignnConfig, "grl": GrlConfig, "mcts": MctsConfig}
REPORT_COLUMNS = ("nodes", "edges", "instance", "solver", "best", "seconds", "epochs",
                  "stop_reason", "assignment", "error")

# CLI flag -> config field, per solver; a flag the solver has no use for is a usage error
FLAG_FIELDS = {
    "pignn": {"max_epochs": "max_epochs", "patience": "patience", "lr": "lr", "beta": "beta",
              "stop_mode": "stop_mode", "tol": "tol"},
    "grl": {"max_epochs": "max_epochs", "patience": "patience", "lr": "lr", "beta": "beta"},
    "mcts": {"max_epochs": "max_iterations", "patience": "patience", "lr": "lr",
             "alpha": "alpha", "beta": "beta"},
    "local_search": {},
    "oracle": {},
}


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _coerce(cls, key: str, value):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    if key not in fields:
        raise UsageError(f"{cls.__name__} has no setting {key!r}")
    if not isinstance(value, str):
        return value
    default = fields[key].default
    try:
        if isinstance(default, bool):
            return {"true": True, "false": False, "1": True, "0": False}[value.strip().lower()]
        if isinstance(default, int) or default is None:
            return int(value)
        if isinstance(default, float):
            return float(value)
    except (KeyError, ValueError) as exc:
        raise UsageError(f"bad value for {key}: {value!r}") from exc
    return value.strip()


def build_config(solver: str, overrides: dict, seed: int):
    cls = LEARNED[solver]
    kw = {k: _coerce(cls, k, v) for k, v in overrides.items()}
    kw["seed"] = seed
    return cls(**kw)


def run_solver(solver: str, g: Graph, overrides: dict | None = None, seed: int = 0) -> SolveResult:
    """Dispatch one run. Raises UsageError for bad settings, NumericalError on aborts."""
    overrides = dict(overrides or {})
    if solver not in SOLVERS:
        raise UsageError(f"unknown solver {solver!r}; choose from {', '.join(SOLVERS)}")
    t0 = time.perf_counter()
    if solver == "oracle":
        if overrides:
            raise UsageError("oracle takes no settings")
        if g.n > 24:
            raise UsageError("oracle is limited to n <= 24")
        r = brute_force_maxcut(g)
        return SolveResult("oracle", r.assignment, r.value, 0, "exhaustive",
                           seconds=time.perf_counter() - t0, extras={"optimal_count": r.count})
    if solver == "local_search":
        if overrides:
            raise UsageError("local_search takes no settings")
        x = local_search_1flip(g, seed)
        return SolveResult("local_search", x, cut_size(g, x), 0, "local_optimum",
                           seconds=time.perf_counter() - t0)
    try:
        cfg = build_config(solver, overrides, seed).resolved(g.n)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    q = build_maxcut_qubo(g)
    if solver == "pignn":
        return train_pignn(g, cfg, q)
    if solver == "grl":
        return train_grl(g, cfg, q)
    return train_mcts_gnn(g, cfg, q)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_outputs(result: SolveResult, out: Path, config: dict | None = None) -> None:
    """result.json and trace.csv are reproducible; wall-clock goes to timing.csv."""
    out.mkdir(parents=True, exist_ok=True)
    summary = result.summary()
    if config is not None:
        summary["config"] = config
    (out / "result.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    with open(out / "trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(result.trace_columns)
        w.writerows([_fmt(v) for v in row] for row in result.trace)
    with open(out / "timing.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("row", "millis"))
        w.writerows((i, f"{ms:.3f}") for i, ms in enumerate(result.trace_millis, start=1))
        w.writerow(("total_seconds", f"{result.seconds:.6f}"))


def _load_graph(path: str) -> Graph:
    try:
        if path == "-":
            return parse_edge_list(sys.stdin.read())
        return read_graph(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except GraphFormatError as exc:
        raise InputError(f"{path}: {exc}") from exc


# ---- subcommands ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    try:
        g = generate_random_graph(args.n, args.m, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    text = g.to_edge_list()
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            raise InputError(f"cannot write {args.out}: {exc}") from exc
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _flag_overrides(args) -> dict:
    fields = FLAG_FIELDS[args.solver]
    out = {}
    for flag in ("max_epochs", "patience", "lr", "alpha", "beta", "stop_mode", "tol"):
        value = getattr(args, flag)
        if value is None:
            continue
        if flag not in fields:
            raise UsageError(f"--{flag.replace('_', '-')} does not apply to {args.solver}")
        out[fields[flag]] = value
    return out


def cmd_solve(args) -> int:
    g = _load_graph(args.instance)
    overrides = _flag_overrides(args)
    result = run_solver(args.solver, g, overrides, args.seed)
    config = {"seed": args.seed, **overrides}
    try:
        write_outputs(result, Path(args.out), config)
    except OSError as exc:
        raise InputError(f"cannot write to {args.out}: {exc}") from exc
    print(f"best {result.best_value}")
    print(f"seconds {result.seconds:.3f}")
    return EXIT_OK


@dataclasses.dataclass
class ExperimentConfig:
    instances: list  # (n, m, seed) triples or edge-list paths
    solvers: list
    overrides: dict
    out: Path
    seed: int = 0

    def validate(self):
        if not self.instances:
            raise ValueError("no instances listed")
        if not self.solvers:
            raise ValueError("no solvers listed")
        unknown = [s for s in self.solvers if s not in SOLVERS]
        if unknown:
            raise ValueError(f"unknown solvers: {', '.join(unknown)}")
        for s, kv in self.overrides.items():
            if s not in LEARNED and kv:
                raise ValueError(f"[{s}] takes no settings")
            for k in kv:
                _coerce(LEARNED[s], k, kv[k])


def _parse_instance(token: str, base: Path):
    parts = token.split(":")
    if len(parts) == 3 and all(p.strip().lstrip("-").isdigit() for p in parts):
        return tuple(int(p) for p in parts)
    path = Path(token)
    return str(path if path.is_absolute() else base / path)


def load_experiment(path: str, out: str | None = None) -> ExperimentConfig:
    """INI layout: ``[experiment]`` with instances, solvers, seed, out; one section per solver."""
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except configparser.Error as exc:
        raise InputError(f"{path}: {exc}") from exc
    if "experiment" not in cp:
        raise InputError(f"{path}: missing [experiment] section")
    ex = cp["experiment"]
    base = Path(path).parent
    try:
        cfg = ExperimentConfig(
            instances=[_parse_instance(t, base) for t in ex.get("instances", "").replace(",", " ").split()],
            solvers=ex.get("solvers", "").replace(",", " ").split(),
            overrides={s: dict(cp[s]) for s in cp.sections() if s != "experiment"},
            out=Path(out or ex.get("out", "bench_out")),
            seed=ex.getint("seed", 0),
        )
        cfg.validate()
    except (ValueError, UsageError) as exc:
        raise InputError(f"{path}: {exc}") from exc
    return cfg


def _instance_graph(inst) -> tuple[Graph, str]:
    if isinstance(inst, tuple):
        n, m, s = inst
        return generate_random_graph(n, m, s), f"{n}x{m}_s{s}"
    return read_graph(inst), Path(inst).stem


def _run_cell(inst, solver: str, overrides: dict, seed: int, out: Path) -> dict:
    row = dict.fromkeys(REPORT_COLUMNS, "")
    row["solver"] = solver
    try:
        g, label = _instance_graph(inst)
        row.update(nodes=g.n, edges=g.m, instance=label)
        result = run_solver(solver, g, overrides, seed)
        write_outputs(result, out / "cells" / label / solver, {"seed": seed, **overrides})
        row.update(best=int(result.best_value), seconds=f"{result.seconds:.3f}", epochs=result.epochs,
                   stop_reason=result.stop_reason,
                   assignment="".join(str(int(b)) for b in result.best_assignment))
    except (NumericalError, UsageError, ValueError, OSError, GraphFormatError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def improvement(value, reference):
    """Percent change versus PI-GNN: 100 (solver - pignn) / pignn."""
    if value in ("", None) or reference in ("", None) or reference == 0:
        return None
    return 100.0 * (value - reference) / reference


def format_table(rows: list[dict], solvers: list[str]) -> str:
    by_inst: dict[str, dict] = {}
    order = []
    for r in rows:
        key = r["instance"] or "?"
        if key not in by_inst:
            by_inst[key] = {"nodes": r["nodes"], "edges": r["edges"]}
            order.append(key)
        by_inst[key][r["solver"]] = r
    head = ["instance", "nodes", "edges"] + solvers
    others = [s for s in solvers if s != "pignn"] if "pignn" in solvers else []
    head += [f"{s} vs pignn (%)" for s in others]
    head += [f"{s} (s)" for s in solvers]
    lines = [head]
    for key in order:
        cells = by_inst[key]
        line = [key, str(cells["nodes"]), str(cells["edges"])]
        for s in solvers:
            r = cells.get(s, {})
            line.append("ERR" if r.get("error") else str(r.get("best", "")))
        ref = cells.get("pignn", {}).get("best", "")
        for s in others:
            imp = improvement(cells.get(s, {}).get("best", ""), ref)
            line.append("n/a" if imp is None else f"{imp:.2f}")
        for s in solvers:
            line.append(str(cells.get(s, {}).get("seconds", "")))
        lines.append(line)
    widths = [max(len(line[c]) for line in lines) for c in range(len(head))]
    return "\n".join("  ".join(v.rjust(w) for v, w in zip(line, widths)) for line in lines) + "\n"


def run_bench(cfg: ExperimentConfig, jobs: int = 1) -> list[dict]:
    cells = [(inst, s) for inst in cfg.instances for s in cfg.solvers]
    args = [(inst, s, cfg.overrides.get(s, {}), cfg.seed, cfg.out) for inst, s in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell, *zip(*args)))
    else:
        rows = [_run_cell(*a) for a in args]
    cfg.out.mkdir(parents=True, exist_ok=True)
    with open(cfg.out / "report.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, REPORT_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    (cfg.out / "report.txt").write_text(format_table(rows, cfg.solvers))
    return rows


def cmd_bench(args) -> int:
    cfg = load_experiment(args.config, args.out)
    if args.seed is not None:
        cfg.seed = args.seed
    try:
        rows = run_bench(cfg, args.jobs)
    except OSError as exc:
        raise InputError(f"cannot write report: {exc}") from exc
    sys.stdout.write((cfg.out / "report.txt").read_text())
    failed = [r for r in rows if r["error"]]
    for r in failed:
        print(f"cell {r['instance']}/{r['solver']} failed: {r['error']}", file=sys.stderr)
    return EXIT_OK


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _finite_float(text):
    v = float(text)
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError("must be finite")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qubolab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a seeded random graph in edge-list format")
    g.add_argument("n", type=int)
    g.add_argument("m", type=int)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="output file (default: stdout)")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="run one solver on an edge-list file ('-' for stdin)")
    s.add_argument("instance")
    s.add_argument("--solver", choices=SOLVERS, default="pignn")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="solve_out", help="directory for result.json and trace.csv")
    s.add_argument("--max-epochs", type=_positive_int,
                   help="epoch cap (MCTS: iteration cap)")
    s.add_argument("--patience", type=_positive_int,
                   help="patience (MCTS: outer patience on the best reward)")
    s.add_argument("--lr", type=_finite_float)
    s.add_argument("--alpha", type=_finite_float, help="UCB exploration constant (mcts)")
    s.add_argument("--beta", type=_finite_float, help="projection threshold")
    s.add_argument("--stop-mode", choices=("strict", "fuzzy"), help="early stopping rule (pignn)")
    s.add_argument("--tol", type=_finite_float, help="strict-mode tolerance (pignn)")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run an instance x solver grid from an INI config")
    b.add_argument("config")
    b.add_argument("--out", help="report directory (overrides the config)")
    b.add_argument("--seed", type=int, help="solver seed (overrides the config)")
    b.add_argument("--jobs", type=_positive_int, default=1, help="concurrent grid cells")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"qubolab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"qubolab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"qubolab: numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

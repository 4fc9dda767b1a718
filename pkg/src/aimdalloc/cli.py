"""Command-line entry point.

    aimdalloc scenario --seed 7 -o s.json
    aimdalloc run      -c s.json -o out/
    aimdalloc oracle   -c s.json -o out/
    aimdalloc compare  -c s.json -o out/
    aimdalloc validate -c s.json

Exit status: 0 on success, 2 for configuration problems, 3 for runtime or
solver failures. Errors are printed to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .cost_model import check_membership
from .exceptions import AimdAllocError, ConfigError, DimensionError
from .metrics import build_report
from .oracle import solve_centralized
from .scenario import atomic_write, generate_paper_scenario, load_config, save_config
from .simulator import SIGNAL_MODES, Simulator

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("aimdalloc")


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--steps", type=int, help="override the horizon")
    p.add_argument("--signal-mode", choices=SIGNAL_MODES)
    p.add_argument("--snapshot-stride", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aimdalloc", description="Distributed stochastic AIMD multi-resource allocation")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    # lets -v follow the subcommand too without clobbering a leading -v
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scenario", parents=[common], help="write the 60-camera scenario config")
    p.add_argument("-o", "--out", required=True, type=Path)
    _add_overrides(p)

    for name, help_ in (("run", "simulate and write trace.csv and snapshots.csv"),
                        ("oracle", "solve the centralized problem and write oracle.csv"),
                        ("compare", "simulate, solve and write metrics")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("-c", "--config", required=True, type=Path)
        p.add_argument("-o", "--out", required=True, type=Path, help="output directory")
        _add_overrides(p)

    p = sub.add_parser("validate", parents=[common], help="sampled membership check of every agent cost")
    p.add_argument("-c", "--config", required=True, type=Path)
    p.add_argument("-o", "--out", type=Path, help="write the JSON report here instead of stdout")
    p.add_argument("--grid", type=int, default=20, help="grid points per axis (default 20)")
    p.add_argument("--box-upper", type=lambda s: [float(v) for v in s.split(",")],
                   help="comma-separated box corner; defaults to the capacities")
    _add_overrides(p)
    return parser


def _load(args):
    spec = load_config(args.config)
    return spec.with_overrides(seed=args.seed, steps=args.steps, signal_mode=args.signal_mode,
                               snapshot_stride=args.snapshot_stride)


def _write_all(out_dir: Path, files: dict[str, str]) -> None:
    for name, text in files.items():
        atomic_write(out_dir / name, text)


def cmd_scenario(args) -> int:
    spec = generate_paper_scenario(args.seed if args.seed is not None else 42)
    spec = spec.with_overrides(steps=args.steps, signal_mode=args.signal_mode, snapshot_stride=args.snapshot_stride)
    save_config(spec, args.out)
    log.info("wrote %s", args.out)
    return EXIT_OK


def _simulate(spec):
    sim = Simulator(spec.sim)
    trace = sim.run(spec.checkpoint_stride)
    log.info("simulated %d steps, events %s, clamps %d", spec.sim.horizon,
             trace.event_counts.tolist(), trace.clamp_count)
    return trace


def cmd_run(args) -> int:
    spec = _load(args)
    trace = _simulate(spec)
    _write_all(args.out, {"trace.csv": trace.to_csv(), "snapshots.csv": trace.snapshots_to_csv()})
    return EXIT_OK


def _solve(spec, costs):
    sol = solve_centralized(costs, spec.sim.capacities, spec.oracle_tol, spec.oracle_max_iter)
    log.info("oracle: %d iterations, converged=%s", sol.iterations, sol.converged)
    return sol


def cmd_oracle(args) -> int:
    spec = _load(args)
    sol = _solve(spec, spec.sim.build_costs())
    _write_all(args.out, {"oracle.csv": sol.to_csv(), "oracle_summary.json": sol.summary_json()})
    return EXIT_OK


def cmd_compare(args) -> int:
    spec = _load(args)
    trace = _simulate(spec)
    sol = _solve(spec, trace.costs)
    report = build_report(trace, sol.x_star)
    _write_all(args.out, {
        "trace.csv": trace.to_csv(),
        "snapshots.csv": trace.snapshots_to_csv(),
        "oracle.csv": sol.to_csv(),
        "oracle_summary.json": sol.summary_json(),
        "metrics.csv": report.to_csv(),
        "metrics.json": report.to_json(),
    })
    return EXIT_OK


def cmd_validate(args) -> int:
    spec = _load(args)
    cfg = spec.sim
    box = np.asarray(args.box_upper if args.box_upper else cfg.capacities, dtype=float)
    if box.size != cfg.m:
        raise DimensionError(cfg.m, box.size, "--box-upper")
    agents = []
    for i, f in enumerate(cfg.build_costs()):
        rep = check_membership(f, cfg.params.delta, box, args.grid)
        agents.append({"agent": i, "tag": f.tag, **rep.to_dict()})
    report = {
        "box_upper": box.tolist(),
        "delta": cfg.params.delta.tolist(),
        "grid_points_per_axis": args.grid,
        "all_hold": all(a["holds"] for a in agents),
        "agents": agents,
    }
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"scenario": cmd_scenario, "run": cmd_run, "oracle": cmd_oracle,
            "compare": cmd_compare, "validate": cmd_validate}


def _fail(record: dict, code: int) -> int:
    sys.stderr.write(json.dumps(record) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        return _fail({"error": "FileNotFoundError", "message": exc.strerror or str(exc),
                      "path": exc.filename}, EXIT_CONFIG)
    except (ConfigError, DimensionError) as exc:
        return _fail(exc.to_record(), EXIT_CONFIG)
    except AimdAllocError as exc:
        return _fail(exc.to_record(), EXIT_RUNTIME)
    except (OSError, ValueError, FloatingPointError) as exc:
        return _fail({"error": type(exc).__name__, "message": str(exc)}, EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())

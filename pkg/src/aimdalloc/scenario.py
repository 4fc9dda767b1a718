"""Scenario files: JSON documents describing a full experiment.

Schema (all vectors have one entry per resource)::

    {
      "name": "paper-camera",
      "seed": 42,
      "n": 60, "m": 3, "horizon": 30000,
      "capacities": [32, 20, 25],
      "params": {"alpha": [...], "beta": [...], "delta": [...],
                 "gamma_norm": [...], "gamma_soft": [...]},
      "costs": {"scenario": "paper-camera",
                "ranges": {"a": [10, 20], "b": [25, 35], "c": [22, 32], "d": [1, 5]}},
      "signal_mode": "fresh",
      "snapshot_stride": 30,
      "oracle": {"tol": 1e-6, "max_iter": 200000},
      "metrics": {"checkpoint_stride": 1000}
    }

``costs`` may instead be ``{"scenario": "explicit", "functions": [...]}``
with one ``{"tag": str, "terms": [{"coefficient": c, "exponents": [...]}]}``
record per agent. ``gamma_norm`` and ``gamma_soft`` are optional.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .aimd import AimdParams
from .cost_model import CostFunction, CameraCostRanges
from .exceptions import ConfigError
from .simulator import CameraCosts, SimConfig, sim_config_violations

CAMERA_N = 60
CAMERA_HORIZON = 30_000
CAMERA_CAPACITIES = (32.0, 20.0, 25.0)        # GB, 10 GB, 10 Mbps
CAMERA_ALPHA = (0.025, 0.02, 0.0225)
CAMERA_BETA = (0.70, 0.85, 0.75)
CAMERA_DELTA = (1 / 90, 1 / 90, 1 / 90)
CAMERA_SNAPSHOT_STRIDE = 30
DEFAULT_CHECKPOINT_STRIDE = 1000


class ConfigParseError(ConfigError):
    def __init__(self, path, line: int, column: int, message: str):
        self.path, self.line, self.column = str(path), line, column
        super().__init__(f"{path}:{line}:{column}: {message}")

    def to_record(self) -> dict:
        record = super().to_record()
        record.update(path=self.path, line=self.line, column=self.column)
        return record


@dataclass(eq=False)
class ScenarioSpec:
    name: str
    sim: SimConfig
    oracle_tol: float = 1e-6
    oracle_max_iter: int = 200_000
    checkpoint_stride: int = DEFAULT_CHECKPOINT_STRIDE

    def __eq__(self, other):
        return isinstance(other, ScenarioSpec) and self.to_dict() == other.to_dict()

    def to_dict(self) -> dict:
        sim = self.sim
        if isinstance(sim.costs, CameraCosts):
            costs = {"scenario": "paper-camera", "ranges": sim.costs.ranges.to_dict()}
        else:
            costs = {"scenario": "explicit", "functions": [f.to_dict() for f in sim.costs]}
        return {
            "name": self.name,
            "seed": int(sim.seed),
            "n": int(sim.n),
            "m": int(sim.m),
            "horizon": int(sim.horizon),
            "capacities": [float(c) for c in sim.capacities],
            "params": sim.params.to_dict(),
            "costs": costs,
            "signal_mode": sim.signal_mode,
            "snapshot_stride": int(sim.snapshot_stride),
            "oracle": {"tol": float(self.oracle_tol), "max_iter": int(self.oracle_max_iter)},
            "metrics": {"checkpoint_stride": int(self.checkpoint_stride)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def with_overrides(self, *, seed=None, steps=None, signal_mode=None, snapshot_stride=None) -> "ScenarioSpec":
        changes = {k: v for k, v in (("seed", seed), ("horizon", steps), ("signal_mode", signal_mode),
                                     ("snapshot_stride", snapshot_stride)) if v is not None}
        if not changes:
            return self
        return ScenarioSpec(self.name, self.sim.replace(**changes), self.oracle_tol,
                            self.oracle_max_iter, self.checkpoint_stride)

    @classmethod
    def from_dict(cls, data) -> "ScenarioSpec":
        """Validate a parsed document, reporting every problem at once."""
        if not isinstance(data, dict):
            raise ConfigError("document root must be an object")
        errors: list[str] = []

        def get(key, default=None, required=True):
            if key not in data:
                if required:
                    errors.append(f"{key}: missing")
                return default
            return data[key]

        name = get("name", "unnamed", required=False)
        seed = get("seed")
        n, m, horizon = get("n"), get("m"), get("horizon")
        capacities = get("capacities", [])
        signal_mode = get("signal_mode", "fresh", required=False)
        snapshot_stride = get("snapshot_stride", 1, required=False)

        params = None
        raw_params = get("params", {})
        if isinstance(raw_params, dict):
            missing = [k for k in ("alpha", "beta", "delta") if k not in raw_params]
            errors.extend(f"params.{k}: missing" for k in missing)
            if not missing:
                try:
                    params = AimdParams.from_dict(raw_params)
                except ConfigError as exc:
                    errors.extend(e if e.startswith("params.") else f"params.{e}" for e in exc.errors)
                except (TypeError, ValueError) as exc:
                    errors.append(f"params: {exc}")
        else:
            errors.append("params: must be an object")

        costs = None
        raw_costs = get("costs", {})
        scenario = raw_costs.get("scenario") if isinstance(raw_costs, dict) else None
        if scenario == "paper-camera":
            try:
                costs = CameraCosts(CameraCostRanges.from_dict(raw_costs.get("ranges", {})))
            except ConfigError as exc:
                errors.extend(f"costs.{e}" for e in exc.errors)
            except (TypeError, ValueError) as exc:
                errors.append(f"costs.ranges: {exc}")
        elif scenario == "explicit":
            funcs = []
            for i, fd in enumerate(raw_costs.get("functions", [])):
                try:
                    funcs.append(CostFunction.from_dict(fd, m if isinstance(m, int) else None))
                except (ConfigError, KeyError, TypeError, ValueError) as exc:
                    errors.append(f"costs.functions[{i}]: {exc}")
            costs = tuple(funcs)
        else:
            errors.append(f"costs.scenario: must be 'paper-camera' or 'explicit', got {scenario!r}")

        try:
            caps = np.asarray(capacities, dtype=float)
        except (TypeError, ValueError):
            errors.append("capacities: must be a list of numbers")
            caps = np.zeros(0)

        oracle = data.get("oracle", {})
        tol = oracle.get("tol", 1e-6)
        max_iter = oracle.get("max_iter", 200_000)
        if not (isinstance(tol, (int, float)) and tol > 0):
            errors.append(f"oracle.tol: must be > 0, got {tol!r}")
        if not (isinstance(max_iter, int) and max_iter >= 1):
            errors.append(f"oracle.max_iter: must be an integer >= 1, got {max_iter!r}")
        stride = data.get("metrics", {}).get("checkpoint_stride", DEFAULT_CHECKPOINT_STRIDE)
        if not (isinstance(stride, int) and stride >= 1):
            errors.append(f"metrics.checkpoint_stride: must be an integer >= 1, got {stride!r}")

        partial = SimpleNamespace(n=n, m=m, horizon=horizon, capacities=caps, params=params,
                                  seed=seed, costs=costs if costs is not None else (),
                                  signal_mode=signal_mode, snapshot_stride=snapshot_stride)
        reported = {_top_field(e) for e in errors}
        errors.extend(e for e in sim_config_violations(partial) if _top_field(e) not in reported)
        if errors:
            raise ConfigError(errors)
        sim = SimConfig(n=n, m=m, horizon=horizon, capacities=caps, params=params, seed=seed,
                        costs=costs, signal_mode=signal_mode, snapshot_stride=snapshot_stride)
        return cls(name, sim, float(tol), int(max_iter), int(stride))


def _top_field(error: str) -> str:
    return re.split(r"[.\[:/]", error, maxsplit=1)[0]


def generate_paper_scenario(seed: int = 42, horizon: int = CAMERA_HORIZON) -> ScenarioSpec:
    """The 60-camera, three-resource experiment."""
    params = AimdParams(alpha=CAMERA_ALPHA, beta=CAMERA_BETA, delta=CAMERA_DELTA,
                        gamma_norm=CAMERA_DELTA, gamma_soft=(1.0, 1.0, 1.0))
    sim = SimConfig(n=CAMERA_N, m=3, horizon=horizon, capacities=CAMERA_CAPACITIES, params=params,
                    seed=seed, costs=CameraCosts(), signal_mode="fresh",
                    snapshot_stride=CAMERA_SNAPSHOT_STRIDE)
    return ScenarioSpec("paper-camera", sim)


def parse_config(text: str, path="<string>") -> ScenarioSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(path, exc.lineno, exc.colno, exc.msg) from None
    return ScenarioSpec.from_dict(data)


def load_config(path) -> ScenarioSpec:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(2, "config file not found", str(path))
    return parse_config(path.read_text(), path)


def atomic_write(path, text: str) -> None:
    """Write via a temporary sibling file and rename, so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_config(spec: ScenarioSpec, path) -> None:
    atomic_write(path, spec.to_json())

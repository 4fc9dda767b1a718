"""Accuracy and communication metrics of a run against the centralized optimum."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._validation import check_matrix
from .cost_model import CostFunction


def absolute_error(xbar_final, x_star) -> np.ndarray:
    xbar_final = check_matrix(xbar_final, name="xbar_final")
    x_star = check_matrix(x_star, xbar_final.shape, name="x_star")
    return np.abs(xbar_final - x_star)


def relative_error(xbar_final, x_star) -> np.ndarray:
    """Per resource: ``sum_i |xbar_i^j - x*_i^j| / sum_i x*_i^j``."""
    err = absolute_error(xbar_final, x_star)
    denom = np.asarray(x_star, dtype=float).sum(axis=0)
    if np.any(denom <= 0):
        raise ValueError("optimal allocation of some resource sums to zero")
    return err.sum(axis=0) / denom


def total_cost(costs: Sequence[CostFunction], x) -> float:
    return float(sum(f.evaluate(row) for f, row in zip(costs, np.asarray(x, dtype=float))))


def cost_ratio(costs: Sequence[CostFunction], xbar_final, x_star) -> float:
    """Social cost at the averages over the optimal social cost."""
    optimum = total_cost(costs, x_star)
    if optimum == 0:
        raise ValueError("optimal total cost is zero")
    return total_cost(costs, xbar_final) / optimum


@dataclass(frozen=True)
class GradientSpread:
    """Per-resource statistics of the marginal costs across agents."""

    mean: np.ndarray
    std: np.ndarray
    min: np.ndarray
    max: np.ndarray

    @property
    def cv(self) -> np.ndarray:
        """Coefficient of variation, ``std / mean``."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.mean != 0, self.std / self.mean, 0.0)

    def to_dict(self) -> dict:
        return {k: [float(v) for v in getattr(self, k)] for k in ("mean", "std", "min", "max")}


def gradient_spread(costs: Sequence[CostFunction], xbar_snapshot) -> GradientSpread:
    xbar_snapshot = check_matrix(xbar_snapshot, (len(costs), costs[0].resource_count), name="xbar_snapshot")
    grads = np.array([f.gradient(row) for f, row in zip(costs, xbar_snapshot)])
    # shifting by one sample keeps the spread of identical gradients exactly zero
    shifted = grads - grads[0]
    return GradientSpread(grads[0] + shifted.mean(axis=0), shifted.std(axis=0),
                          grads.min(axis=0), grads.max(axis=0))


def event_count_linearity(checkpoints: Sequence[tuple[int, Sequence[int]]]) -> np.ndarray:
    """R^2 of a least-squares line through (step, count), per resource.

    Counts that never change are fitted exactly by a flat line, so R^2 = 1.
    """
    if len(checkpoints) < 3:
        raise ValueError("need at least 3 checkpoints")
    steps = np.array([s for s, _ in checkpoints], dtype=float)
    counts = np.array([np.atleast_1d(c) for _, c in checkpoints], dtype=float)
    A = np.column_stack([steps, np.ones_like(steps)])
    r2 = np.empty(counts.shape[1])
    for j in range(counts.shape[1]):
        y = counts[:, j]
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        if ss_tot == 0:
            r2[j] = 1.0
            continue
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        ss_res = float(np.sum((y - A @ coef) ** 2))
        r2[j] = 1.0 - ss_res / ss_tot
    return r2


def utilization(xbar_final, capacities) -> np.ndarray:
    return np.asarray(xbar_final, dtype=float).sum(axis=0) / np.asarray(capacities, dtype=float)


@dataclass
class MetricsReport:
    abs_error: np.ndarray
    rel_error: np.ndarray
    cost_ratio: float
    gradient_spread_series: list[tuple[int, GradientSpread]]
    utilization: np.ndarray
    event_counts: np.ndarray
    event_count_r2: np.ndarray
    clamp_count: int

    def cv_at(self, step: int) -> np.ndarray:
        for s, spread in self.gradient_spread_series:
            if s == step:
                return spread.cv
        raise KeyError(f"no gradient-spread checkpoint at step {step}")

    def to_dict(self) -> dict:
        return {
            "abs_error": self.abs_error.tolist(),
            "rel_error": self.rel_error.tolist(),
            "cost_ratio": self.cost_ratio,
            "gradient_spread_series": [{"step": s, **sp.to_dict()} for s, sp in self.gradient_spread_series],
            "utilization": self.utilization.tolist(),
            "event_counts": [int(c) for c in self.event_counts],
            "event_count_r2": self.event_count_r2.tolist(),
            "clamp_count": int(self.clamp_count),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        """Long format: ``metric, step, agent, resource, value``; blank when not applicable."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "step", "agent", "resource", "value"])
        for i, row in enumerate(self.abs_error.tolist()):
            for j, v in enumerate(row):
                w.writerow(["abs_error", "", i, j + 1, repr(v)])
        for name in ("rel_error", "utilization", "event_count_r2"):
            for j, v in enumerate(getattr(self, name).tolist()):
                w.writerow([name, "", "", j + 1, repr(v)])
        for j, v in enumerate(self.event_counts.tolist()):
            w.writerow(["event_counts", "", "", j + 1, int(v)])
        w.writerow(["cost_ratio", "", "", "", repr(float(self.cost_ratio))])
        w.writerow(["clamp_count", "", "", "", int(self.clamp_count)])
        for s, spread in self.gradient_spread_series:
            for stat in ("mean", "std", "min", "max"):
                for j, v in enumerate(getattr(spread, stat).tolist()):
                    w.writerow([f"gradient_spread_{stat}", s, "", j + 1, repr(v)])
        return buf.getvalue()


def build_report(trace, x_star) -> MetricsReport:
    """Every metric for a finished run; checkpoints come from ``trace``."""
    costs = trace.costs
    xbar = trace.xbar_final
    K = int(trace.final.step)
    series = [(int(s), gradient_spread(costs, xb)) for s, xb in zip(trace.checkpoint_steps, trace.checkpoint_xbar)]
    if not series or series[-1][0] != K:
        series.append((K, gradient_spread(costs, xbar)))
    cps = trace.event_checkpoints()
    r2 = event_count_linearity(cps) if len(cps) >= 3 else np.full(len(trace.capacities), np.nan)
    return MetricsReport(
        abs_error=absolute_error(xbar, x_star),
        rel_error=relative_error(xbar, x_star),
        cost_ratio=cost_ratio(costs, xbar, x_star),
        gradient_spread_series=series,
        utilization=utilization(xbar, trace.capacities),
        event_counts=np.asarray(trace.event_counts).copy(),
        event_count_r2=r2,
        clamp_count=int(trace.clamp_count),
    )

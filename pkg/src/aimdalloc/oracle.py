"""Centralized reference solver for the capacity-constrained allocation problem.

    minimize    sum_i f_i(x_i)
    subject to  sum_i x_i^j = C^j,  x_i^j >= 0

solved by projected gradient descent, each resource column projected onto
its scaled simplex. At the optimum every agent holding a positive share
of resource ``j`` has the same marginal cost ``grad_j f_i``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._validation import check_costs, check_matrix, check_vector
from .cost_model import CostFunction, StackedCosts
from .exceptions import SolverError


def project_block_simplex(v, total: float) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{w >= 0, sum(w) = total}``.

    Sort-and-threshold: find the largest ``rho`` with
    ``u_rho > (sum_{r<=rho} u_r - total) / rho`` for ``u`` sorted descending,
    then clip ``v - tau`` at zero.
    """
    if not total > 0:
        raise ValueError(f"total must be positive, got {total}")
    v = check_vector(v, name="v")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    ind = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / ind > 0)[-1]
    tau = css[rho] / (rho + 1)
    return np.maximum(v - tau, 0.0)


def _project_columns(x: np.ndarray, capacities: np.ndarray) -> np.ndarray:
    return np.column_stack([project_block_simplex(x[:, j], capacities[j]) for j in range(x.shape[1])])


def kkt_residual(costs: Sequence[CostFunction], x, active_eps=None) -> np.ndarray:
    """Scale-normalized spread of marginal costs among active agents.

    For resource ``j`` and agents with ``x_i^j > active_eps``:
    ``(max grad - min grad) / max(1, mean grad)``. ``inf`` when no agent
    is active. ``active_eps`` defaults to ``1e-6 * C^j / n`` with ``C^j``
    the column sum of ``x``.
    """
    costs = check_costs(costs)
    x = check_matrix(x, (len(costs), costs[0].resource_count), name="x")
    grads = np.array([f.gradient(row) for f, row in zip(costs, x)])
    return _kkt_from_gradients(grads, x, active_eps)


def _kkt_from_gradients(grads, x, active_eps=None):
    n, m = x.shape
    if active_eps is None:
        active_eps = 1e-6 * x.sum(axis=0) / n
    active_eps = np.broadcast_to(np.asarray(active_eps, dtype=float), (m,))
    res = np.empty(m)
    for j in range(m):
        g = grads[x[:, j] > active_eps[j], j]
        if g.size == 0:
            res[j] = np.inf
        else:
            res[j] = (g.max() - g.min()) / max(1.0, g.mean())
    return res


@dataclass
class OracleSolution:
    x_star: np.ndarray
    iterations: int
    kkt_residual: np.ndarray
    converged: bool
    objective: float
    objective_history: np.ndarray | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["agent", "resource", "x_star"])
        for i, row in enumerate(self.x_star.tolist()):
            for j, v in enumerate(row):
                w.writerow([i, j + 1, repr(v)])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "kkt_residual": [float(r) for r in self.kkt_residual],
            "converged": self.converged,
            "objective": self.objective,
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"


def solve_centralized(costs: Sequence[CostFunction], capacities, tol: float = 1e-6,
                      max_iter: int = 200_000, record_history: bool = False) -> OracleSolution:
    """Projected gradient descent from the uniform split ``C^j / n``.

    Each iteration starts from twice the previous accepted step and halves
    it until the projected point satisfies the sufficient-decrease test
    ``F(y) - F(x) <= <g, y - x> + |y - x|^2 / (2 t)``. The left side is
    evaluated as an exact polynomial difference, so the test stays
    meaningful near the optimum where ``F`` itself stops changing in
    floating point. Stops once every KKT residual is below ``tol``.
    ``objective_history`` accumulates those differences from the initial
    objective.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    costs = check_costs(costs)
    n, m = len(costs), costs[0].resource_count
    capacities = check_vector(capacities, m, name="capacities")
    if np.any(capacities <= 0):
        raise ValueError("capacities must be positive")
    stacked = StackedCosts(costs)
    with np.errstate(over="ignore", invalid="ignore"):
        return _descend(stacked, capacities, tol, max_iter, record_history)


def _descend(stacked, capacities, tol, max_iter, record_history) -> OracleSolution:
    n = stacked.n

    def objective(z):
        return float(stacked.evaluate(z).sum())

    x = np.tile(capacities / n, (n, 1))
    fx = objective(x)
    g = stacked.gradient(x)
    if not (np.isfinite(fx) and np.all(np.isfinite(g))):
        raise SolverError("non-finite cost or gradient at the initial point", x)
    step = 1.0 / max(1.0, float(np.abs(g).max()))
    history = [fx] if record_history else None
    res = _kkt_from_gradients(g, x)
    it = 0
    while it < max_iter and not np.all(res < tol):
        it += 1
        step *= 2.0
        while True:
            y = _project_columns(x - step * g, capacities)
            d = y - x
            change = float(stacked.difference(x, y).sum())
            if not np.isfinite(change):
                step *= 0.5
            elif change <= float(np.sum(g * d)) + float(np.sum(d * d)) / (2 * step):
                break
            else:
                step *= 0.5
            if step < 1e-300:
                raise SolverError("line search failed to find a decreasing step", x)
        if not np.any(d):
            break
        x, fx = y, fx + change
        g = stacked.gradient(x)
        if not np.all(np.isfinite(g)):
            raise SolverError("non-finite gradient encountered", x)
        if record_history:
            history.append(fx)
        res = _kkt_from_gradients(g, x)
    return OracleSolution(
        x_star=x, iterations=it, kkt_residual=res, converged=bool(np.all(res < tol)),
        objective=objective(x), objective_history=np.array(history) if record_history else None,
    )

"""scikit-learn style wrappers.

Both allocators take the population of private cost functions as ``X`` in
``fit`` and expose the resulting allocation matrix as ``allocation_``, so
they plug into ``get_params``/``set_params``/``clone`` based tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_costs, check_vector
from .aimd import AimdParams
from .metrics import build_report, relative_error
from .oracle import solve_centralized
from .simulator import SimConfig, Simulator


class CentralizedAllocator(BaseEstimator):
    """Projected-gradient reference solver."""

    def __init__(self, capacities=None, tol=1e-6, max_iter=200_000):
        self.capacities = capacities
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        costs = check_costs(X)
        caps = check_vector(self.capacities, costs[0].resource_count, name="capacities")
        self.solution_ = solve_centralized(costs, caps, self.tol, self.max_iter)
        self.allocation_ = self.solution_.x_star
        self.n_iter_ = self.solution_.iterations
        return self

    def predict(self, X=None):
        check_is_fitted(self, "allocation_")
        return self.allocation_


class AimdAllocator(BaseEstimator):
    """Distributed stochastic AIMD; ``allocation_`` holds the long-run averages.

    ``alpha``/``beta``/``delta`` and friends may be scalars (shared by all
    resources) or per-resource sequences.
    """

    def __init__(self, capacities=None, alpha=0.01, beta=0.8, delta=1 / 90, gamma_norm=None,
                 gamma_soft=None, horizon=10_000, seed=0, signal_mode="fresh",
                 snapshot_stride=100, checkpoint_stride=1000):
        self.capacities = capacities
        self.alpha = alpha
        self.beta = beta
        self.delta = delta
        self.gamma_norm = gamma_norm
        self.gamma_soft = gamma_soft
        self.horizon = horizon
        self.seed = seed
        self.signal_mode = signal_mode
        self.snapshot_stride = snapshot_stride
        self.checkpoint_stride = checkpoint_stride

    def _params(self, m):
        def full(v):
            return None if v is None else np.broadcast_to(np.asarray(v, dtype=float), (m,))
        return AimdParams(alpha=full(self.alpha), beta=full(self.beta), delta=full(self.delta),
                          gamma_norm=full(self.gamma_norm), gamma_soft=full(self.gamma_soft))

    def fit(self, X, y=None):
        costs = check_costs(X)
        m = costs[0].resource_count
        caps = check_vector(self.capacities, m, name="capacities")
        config = SimConfig(n=len(costs), m=m, horizon=int(self.horizon), capacities=caps,
                           params=self._params(m), seed=int(self.seed), costs=tuple(costs),
                           signal_mode=self.signal_mode, snapshot_stride=int(self.snapshot_stride))
        self.trace_ = Simulator(config).run(self.checkpoint_stride)
        self.allocation_ = self.trace_.xbar_final
        self.event_counts_ = self.trace_.event_counts
        self.clamp_count_ = self.trace_.clamp_count
        return self

    def predict(self, X=None):
        check_is_fitted(self, "allocation_")
        return self.allocation_

    def score(self, X, y):
        """Negative mean relative error against a reference allocation ``y``."""
        check_is_fitted(self, "allocation_")
        return -float(relative_error(self.allocation_, y).mean())

    def report(self, x_star):
        check_is_fitted(self, "trace_")
        return build_report(self.trace_, x_star)
